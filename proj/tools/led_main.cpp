// led: batch CLI for the calibration-free low-light RAW denoising pipeline.
//
// Subcommands: gen-clean, gen-cameras, synth, pretrain, finetune, deploy,
// denoise, eval, gain-line. Exit codes: 0 success, 2 usage error, 3
// data/format error, 4 numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "led/adam.hpp"
#include "led/camera.hpp"
#include "led/config.hpp"
#include "led/kernels.hpp"
#include "led/metrics.hpp"
#include "led/network.hpp"
#include "led/noise.hpp"
#include "led/parallel.hpp"
#include "led/raw.hpp"
#include "led/training.hpp"

namespace fs = std::filesystem;
using led::RunConfig;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("LED_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw led::DataError("LED_SEED is not an unsigned integer");
        }
    }
    return 0;
}

struct GlobalOpts {
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    std::string kernels = "auto";
};

RunConfig assemble_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::load_file(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw led::DataError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const std::string resolved = cfg.resolved_text();
    std::cerr << "# resolved config\n" << resolved;
    if (resolved.empty()) std::cerr << "# (defaults only)\n";
    return cfg;
}

led::ParameterSpace space_from(const RunConfig& cfg) {
    led::ParameterSpace s;
    const auto range = [&](const std::string& name, led::ParamRange& r) {
        r.lo = cfg.get_double("space." + name + "_lo", r.lo);
        r.hi = cfg.get_double("space." + name + "_hi", r.hi);
    };
    range("k_min", s.k_min);
    range("k_max", s.k_max);
    range("lambda", s.lambda);
    range("mu_c", s.mu_c);
    range("a_tl", s.a_tl);
    range("b_tl", s.b_tl);
    range("sigma_hat_tl", s.sigma_hat_tl);
    range("a_r", s.a_r);
    range("b_r", s.b_r);
    range("sigma_hat_r", s.sigma_hat_r);
    s.validate();
    return s;
}

led::SensorLevels levels_from(const RunConfig& cfg) {
    led::SensorLevels lv;
    lv.black = cfg.get_double("noise.black_level", lv.black);
    lv.white = cfg.get_double("noise.white_level", lv.white);
    lv.validate();
    return lv;
}

led::NetworkConfig netcfg_from(const RunConfig& cfg) {
    led::NetworkConfig nc;
    nc.base_width = cfg.get_int("net.base_width", nc.base_width);
    nc.stages = cfg.get_int("net.stages", nc.stages);
    nc.validate();
    return nc;
}

led::TrainConfig traincfg_from(const RunConfig& cfg, std::uint64_t seed) {
    led::TrainConfig tc;
    tc.iterations = cfg.get_int("train.iterations", tc.iterations);
    tc.batch_size = cfg.get_int("train.batch_size", tc.batch_size);
    tc.patch_size = cfg.get_int("train.patch_size", tc.patch_size);
    tc.lr_initial = cfg.get_double("train.lr_initial", tc.lr_initial);
    tc.ratios = cfg.get_double_list("train.ratios", tc.ratios);
    tc.seed = cfg.get_u64("train.seed", seed);
    if (cfg.has("train.lr_schedule")) {
        // "0.5:5e-5,0.9:1e-5" pairs of fraction:rate
        tc.lr_schedule.clear();
        std::stringstream ss(cfg.get_string("train.lr_schedule", ""));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
                throw led::DataError("train.lr_schedule expects fraction:rate pairs");
            tc.lr_schedule.push_back(
                {std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
        }
    }
    return tc;
}

// Constant-rate config for one fine-tuning phase; the sentinel schedule
// point at fraction 1.0 never fires.
led::TrainConfig finetune_phase_cfg(const RunConfig& cfg, const char* iter_key, int iter_def,
                                    const char* lr_key, double lr_def, std::uint64_t seed,
                                    std::uint64_t phase_tag) {
    led::TrainConfig tc;
    tc.iterations = cfg.get_int(iter_key, iter_def);
    tc.batch_size = cfg.get_int("finetune.batch_size", 1);
    tc.patch_size = cfg.get_int("finetune.patch_size", 64);
    tc.lr_initial = cfg.get_double(lr_key, lr_def);
    tc.lr_schedule = {{1.0, tc.lr_initial}};
    tc.seed = led::mix64(cfg.get_u64("finetune.seed", seed) ^ phase_tag);
    return tc;
}

void write_loss_traces(const std::string& ckpt_path,
                       const std::vector<const led::LossTrace*>& traces) {
    std::string csv = "iteration,lr,loss\n";
    int base = 0;
    for (const auto* t : traces) {
        char buf[96];
        int last = -1;
        for (const auto& r : t->rows) {
            std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", base + r.iteration, r.lr, r.loss);
            csv += buf;
            last = r.iteration;
        }
        base += last + 1;
    }
    led::raw::write_text_atomic(ckpt_path + ".loss.csv", csv);
}

// --- subcommand bodies ------------------------------------------------------

void cmd_gen_clean(const std::string& out_manifest, const std::string& dir, int frames, int height,
                   int width, std::uint64_t seed, const std::string& config_path,
                   const std::vector<std::string>& overrides) {
    const RunConfig cfg = assemble_config(config_path, overrides);
    const led::SensorLevels lv = levels_from(cfg);
    auto planes = led::synthetic_clean_dataset(frames, height, width, seed);
    std::vector<led::raw::ManifestEntry> entries;
    for (int i = 0; i < frames; ++i) {
        const std::string path = (fs::path(dir) / ("clean_" + std::to_string(i) + ".ledc")).string();
        led::raw::write_image(path, planes[static_cast<std::size_t>(i)], lv);
        led::raw::ManifestEntry e;
        e.clean_path = path;
        e.ratio = 1.0;
        e.scene_id = "scene" + std::to_string(i);
        entries.push_back(e);
    }
    led::raw::write_manifest(out_manifest, entries);
    std::cerr << "wrote " << frames << " clean frames and " << out_manifest << "\n";
}

void cmd_gen_cameras(const std::string& space_cfg, int m, const std::string& out,
                     const std::vector<std::string>& overrides) {
    const RunConfig cfg = assemble_config(space_cfg, overrides);
    auto cams = led::generate_virtual_cameras(m, space_from(cfg));
    led::write_camera_list(out, cams);
    std::cerr << "wrote " << cams.size() << " virtual cameras to " << out << "\n";
}

void cmd_synth(const std::string& cameras_path, const std::string& clean_manifest,
               const std::vector<double>& ratios, const std::string& out_manifest,
               const std::string& out_dir, std::uint64_t seed, double oom_fpn_amp,
               int oom_band_period, double oom_band_amp, std::uint64_t oom_seed,
               const std::string& config_path, const std::vector<std::string>& overrides) {
    const RunConfig cfg = assemble_config(config_path, overrides);
    (void)cfg;
    auto cameras = led::read_camera_list(cameras_path);
    if (cameras.empty()) throw led::DataError("synth: empty camera list");
    auto clean_entries = led::raw::read_manifest(clean_manifest);
    if (clean_entries.empty()) throw led::DataError("synth: empty clean manifest");
    for (double r : ratios)
        if (!(r >= 1.0)) throw led::DataError("synth: ratios must be >= 1");

    led::OutOfModelSpec oom;
    oom.fixed_pattern_amplitude = oom_fpn_amp;
    oom.banding_period = oom_band_period;
    oom.banding_amplitude = oom_band_amp;
    oom.seed = oom_seed;
    oom.validate();

    const led::Rng root(seed);
    std::vector<led::raw::ManifestEntry> out_entries;
    std::uint64_t item = 0;
    for (double ratio : ratios) {
        for (std::size_t ci = 0; ci < clean_entries.size(); ++ci) {
            const auto& src = clean_entries[ci];
            const auto& camera = cameras[item % cameras.size()];
            led::Rng rng = root.fork(item);

            led::raw::Image clean = led::raw::read_image(src.clean_path);
            const led::NoiseInstance inst = led::sample_noise_instance(camera, ratio, rng);
            led::Tensor<float> noisy =
                led::synthesize_noisy(clean.plane, inst, clean.levels, rng);
            if (oom.fixed_pattern_amplitude > 0.0 || oom.banding_amplitude > 0.0) {
                const int h = noisy.dim(0), w = noisy.dim(1);
                const double span = clean.levels.span();
                float* p = noisy.data().data();
                for (int r = 0; r < h; ++r)
                    for (int c = 0; c < w; ++c)
                        p[static_cast<std::int64_t>(r) * w + c] += static_cast<float>(
                            (oom.fixed_pattern_amplitude * led::fixed_pattern_unit(oom.seed, r, c) +
                             led::banding_adu(oom, c)) /
                            span);
            }

            char name[128];
            std::snprintf(name, sizeof(name), "noisy_%s_r%g_%04zu.ledc", camera.id.c_str(), ratio,
                          ci);
            const std::string noisy_path = (fs::path(out_dir) / name).string();
            led::raw::write_image(noisy_path, noisy, clean.levels);

            led::raw::ManifestEntry e;
            e.clean_path = src.clean_path;
            e.noisy_path = noisy_path;
            e.ratio = ratio;
            e.camera_id = camera.id;
            e.k = inst.k;
            e.sigma_tl = inst.sigma_tl;
            e.scene_id = src.scene_id.empty() ? ("scene" + std::to_string(ci)) : src.scene_id;
            out_entries.push_back(std::move(e));
            ++item;
        }
    }
    led::raw::write_manifest(out_manifest, out_entries);
    std::cerr << "synthesized " << out_entries.size() << " noisy pairs\n";
}

void cmd_pretrain(const std::string& config_path, const std::string& clean_manifest,
                  const std::string& cameras_path, const std::string& out,
                  std::uint64_t seed, const std::vector<std::string>& overrides) {
    const RunConfig cfg = assemble_config(config_path, overrides);
    auto cameras = led::read_camera_list(cameras_path);
    if (cameras.empty()) throw led::DataError("pretrain: empty camera list");
    if (cfg.has("net.m") && cfg.get_int("net.m", 0) != static_cast<int>(cameras.size()))
        throw led::DataError("pretrain: net.m does not match the camera list");

    const led::NetworkConfig nc = netcfg_from(cfg);
    const led::SensorLevels lv = levels_from(cfg);
    led::TrainConfig tc = traincfg_from(cfg, seed);
    tc.validate(nc.stages);

    // tile clean frames into non-overlapping training patches
    auto entries = led::raw::read_manifest(clean_manifest);
    if (entries.empty()) throw led::DataError("pretrain: empty clean manifest");
    std::vector<led::Tensor<float>> patches;
    for (const auto& e : entries) {
        for (auto& t : led::raw::crop_patches(led::raw::read_image(e.clean_path).plane,
                                              tc.patch_size))
            patches.push_back(std::move(t));
    }
    if (patches.empty()) throw led::DataError("pretrain: frames smaller than the patch size");
    std::cerr << "pretraining on " << patches.size() << " patches, m=" << cameras.size() << "\n";

    led::Rng rng(tc.seed);
    auto net = led::LEDNetwork<float>::build(nc, static_cast<int>(cameras.size()), rng);
    led::LossTrace trace = led::pretrain(net, cameras, patches, tc, lv);
    led::save_checkpoint(net, out);
    write_loss_traces(out, {&trace});
    std::cerr << "saved " << out << "\n";
}

void cmd_finetune(const std::string& config_path, const std::string& ckpt,
                  const std::string& pairs_manifest, const std::string& init_mode,
                  const std::string& select_mode, const std::string& out, std::uint64_t seed,
                  const std::vector<std::string>& overrides) {
    const RunConfig cfg = assemble_config(config_path, overrides);
    auto net = led::load_checkpoint<float>(ckpt);
    if (net.phase != led::Phase::pretrain)
        throw led::PhaseError("finetune: checkpoint is not a pretrain-phase network");

    auto entries = led::raw::read_manifest(pairs_manifest);
    std::vector<led::FewshotCandidate> cands;
    for (const auto& e : entries) {
        if (!e.noisy_path) throw led::DataError("finetune: entry without noisy_path");
        if (!e.k) throw led::DataError("finetune: entry without K provenance");
        cands.push_back({e.ratio, *e.k});
    }
    const led::PairSelectMode mode = select_mode == "similar" ? led::PairSelectMode::similar
                                                              : led::PairSelectMode::spread;
    const int per_ratio = cfg.get_int("finetune.pairs_per_ratio", 2);
    auto picked = led::select_fewshot_pairs(cands, per_ratio, mode);

    std::vector<led::FewshotPair> pairs;
    for (std::size_t idx : picked) {
        const auto& e = entries[idx];
        led::FewshotPair p;
        p.noisy = led::raw::read_image(*e.noisy_path).plane;
        p.clean = led::raw::read_image(e.clean_path).plane;
        if (p.noisy.dims() != p.clean.dims())
            throw led::DataError("finetune: pair dimension mismatch for scene '" + e.scene_id +
                                 "'");
        p.ratio = e.ratio;
        p.k = *e.k;
        p.sigma_tl = e.sigma_tl.value_or(0.0);
        pairs.push_back(std::move(p));
    }
    std::cerr << "fine-tuning on " << pairs.size() << " pairs (" << select_mode << " selection)\n";

    const std::string cfg_init = cfg.get_string("finetune.init", init_mode);
    const led::CsaInit ci = cfg_init == "unit" ? led::CsaInit::unit : led::CsaInit::average;
    led::TrainConfig p1 =
        finetune_phase_cfg(cfg, "finetune.iterations_csa", 1000, "finetune.lr_csa", 1e-4, seed, 1);
    led::TrainConfig p2 = finetune_phase_cfg(cfg, "finetune.iterations_omnr", 500,
                                             "finetune.lr_omnr", 1e-5, seed, 2);
    auto [t1, t2] = led::finetune(net, pairs, p1, p2, ci);
    led::save_checkpoint(net, out);
    write_loss_traces(out, {&t1, &t2});
    std::cerr << "saved " << out << "\n";
}

void cmd_deploy(const std::string& ckpt, const std::string& out) {
    auto net = led::load_checkpoint<float>(ckpt);
    auto dep = net.deploy();
    led::save_checkpoint(dep, out);
    std::cerr << "deployed checkpoint written to " << out << "\n";
}

void cmd_denoise(const std::string& ckpt, const std::string& in, double ratio,
                 const std::string& out, std::optional<int> branch) {
    auto net = led::load_checkpoint<float>(ckpt);
    std::optional<int> b;
    if (net.phase == led::Phase::pretrain) {
        if (!branch)
            throw led::PhaseError("denoise: pretrain checkpoint requires --branch");
        b = *branch - 1; // CLI uses the 1-based public numbering
    }
    auto img = led::raw::read_image(in);
    auto result = led::denoise(net, img.plane, ratio, b);
    led::raw::write_image(out, result, img.levels);
    std::cerr << "wrote " << out << "\n";
}

void cmd_eval(const std::string& ckpt, const std::string& pairs_manifest, const std::string& out) {
    auto net = led::load_checkpoint<float>(ckpt);
    auto entries = led::raw::read_manifest(pairs_manifest);
    auto report = led::evaluate(net, entries);
    led::raw::write_text_atomic(out, report.to_csv());
    std::cerr << report.to_csv();
}

void cmd_gain_line(const std::string& pairs_manifest, const std::string& out) {
    auto entries = led::raw::read_manifest(pairs_manifest);
    std::vector<std::pair<double, double>> points;
    for (const auto& e : entries) {
        if (e.k && e.sigma_tl) points.emplace_back(*e.k, *e.sigma_tl);
    }
    std::string status = "OK";
    led::GainLineFit fit;
    try {
        fit = led::fit_gain_line(points);
    } catch (const led::UnderdeterminedError&) {
        status = "UNDERDETERMINED";
    } catch (const led::DegenerateError&) {
        status = "DEGENERATE";
    }
    char buf[192];
    std::string csv = "n_points,status,slope,intercept,residual_rms\n";
    if (status == "OK") {
        std::snprintf(buf, sizeof(buf), "%zu,OK,%.10g,%.10g,%.10g\n", points.size(), fit.slope,
                      fit.intercept, fit.residual_rms);
    } else {
        std::snprintf(buf, sizeof(buf), "%zu,%s,,,\n", points.size(), status.c_str());
    }
    csv += buf;
    led::raw::write_text_atomic(out, csv);
    std::cerr << csv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LED: calibration-free low-light RAW denoising toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    try {
        g.seed = default_seed();
    } catch (const led::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    app.add_option("--seed", g.seed, "root RNG seed (default: LED_SEED env or 0)");
    app.add_option("--threads", g.threads, "worker thread cap (0 = hardware default)");
    app.add_option("--kernels", g.kernels, "kernel set: auto|scalar|avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

    std::function<void()> task;

    // gen-clean
    {
        auto* sc = app.add_subcommand("gen-clean", "generate procedural clean frames");
        auto opt = std::make_shared<std::tuple<std::string, std::string, int, int, int,
                                               std::string, std::vector<std::string>>>();
        auto& [out, dir, frames, height, width, config, sets] = *opt;
        frames = 8;
        height = width = 128;
        sc->add_option("--out", out, "output clean manifest")->required();
        sc->add_option("--dir", dir, "directory for image containers")->required();
        sc->add_option("--frames", frames, "frame count");
        sc->add_option("--height", height, "plane height (even)");
        sc->add_option("--width", width, "plane width (even)");
        sc->add_option("--config", config, "config file");
        sc->add_option("--set", sets, "config override key=value")->take_all();
        sc->callback([opt, &g, &task] {
            task = [opt, &g] {
                auto& [out, dir, frames, height, width, config, sets] = *opt;
                cmd_gen_clean(out, dir, frames, height, width, g.seed, config, sets);
            };
        });
    }

    // gen-cameras
    {
        auto* sc = app.add_subcommand("gen-cameras", "generate virtual cameras by bisection");
        auto opt = std::make_shared<std::tuple<std::string, int, std::string,
                                               std::vector<std::string>>>();
        auto& [space, m, out, sets] = *opt;
        m = 5;
        sc->add_option("--space", space, "config file with space.* ranges");
        sc->add_option("--m", m, "virtual camera count");
        sc->add_option("--out", out, "output camera list (JSON lines)")->required();
        sc->add_option("--set", sets, "config override key=value")->take_all();
        sc->callback([opt, &task] {
            task = [opt] {
                auto& [space, m, out, sets] = *opt;
                cmd_gen_cameras(space, m, out, sets);
            };
        });
    }

    // synth
    {
        auto* sc = app.add_subcommand("synth", "synthesize noisy pairs from clean frames");
        struct Opt {
            std::string cameras, clean, out, out_dir, config;
            std::vector<double> ratios{100.0, 250.0, 300.0};
            double fpn_amp = 0.0, band_amp = 0.0;
            int band_period = 16;
            std::uint64_t oom_seed = 0;
            std::vector<std::string> sets;
        };
        auto opt = std::make_shared<Opt>();
        sc->add_option("--cameras", opt->cameras, "camera list")->required();
        sc->add_option("--clean", opt->clean, "clean manifest")->required();
        sc->add_option("--ratios", opt->ratios, "digital gains")->delimiter(',');
        sc->add_option("--out", opt->out, "output pair manifest")->required();
        sc->add_option("--out-dir", opt->out_dir, "directory for noisy images")->required();
        sc->add_option("--oom-fpn-amp", opt->fpn_amp, "fixed-pattern amplitude (ADU)");
        sc->add_option("--oom-band-period", opt->band_period, "column banding period");
        sc->add_option("--oom-band-amp", opt->band_amp, "column banding amplitude (ADU)");
        sc->add_option("--oom-seed", opt->oom_seed, "fixed-pattern seed");
        sc->add_option("--config", opt->config, "config file");
        sc->add_option("--set", opt->sets, "config override key=value")->take_all();
        sc->callback([opt, &g, &task] {
            task = [opt, &g] {
                cmd_synth(opt->cameras, opt->clean, opt->ratios, opt->out, opt->out_dir, g.seed,
                          opt->fpn_amp, opt->band_period, opt->band_amp, opt->oom_seed,
                          opt->config, opt->sets);
            };
        });
    }

    // pretrain
    {
        auto* sc = app.add_subcommand("pretrain", "pre-train over virtual cameras");
        struct Opt {
            std::string config, clean, cameras, out;
            std::vector<std::string> sets;
        };
        auto opt = std::make_shared<Opt>();
        sc->add_option("--config", opt->config, "config file");
        sc->add_option("--clean", opt->clean, "clean manifest")->required();
        sc->add_option("--cameras", opt->cameras, "camera list")->required();
        sc->add_option("--out", opt->out, "output checkpoint")->required();
        sc->add_option("--set", opt->sets, "config override key=value")->take_all();
        sc->callback([opt, &g, &task] {
            task = [opt, &g] {
                cmd_pretrain(opt->config, opt->clean, opt->cameras, opt->out, g.seed, opt->sets);
            };
        });
    }

    // finetune
    {
        auto* sc = app.add_subcommand("finetune", "two-phase few-shot fine-tuning");
        struct Opt {
            std::string config, ckpt, pairs, init = "average", select = "spread", out;
            std::vector<std::string> sets;
        };
        auto opt = std::make_shared<Opt>();
        sc->add_option("--config", opt->config, "config file");
        sc->add_option("--ckpt", opt->ckpt, "pretrained checkpoint")->required();
        sc->add_option("--pairs", opt->pairs, "few-shot pair manifest")->required();
        sc->add_option("--init", opt->init, "CSA^T init: average|unit")
            ->check(CLI::IsMember({"average", "unit"}));
        sc->add_option("--select", opt->select, "pair selection: spread|similar")
            ->check(CLI::IsMember({"spread", "similar"}));
        sc->add_option("--out", opt->out, "output checkpoint")->required();
        sc->add_option("--set", opt->sets, "config override key=value")->take_all();
        sc->callback([opt, &g, &task] {
            task = [opt, &g] {
                cmd_finetune(opt->config, opt->ckpt, opt->pairs, opt->init, opt->select, opt->out,
                             g.seed, opt->sets);
            };
        });
    }

    // deploy
    {
        auto* sc = app.add_subcommand("deploy", "fuse RepNR blocks into plain convolutions");
        auto opt = std::make_shared<std::pair<std::string, std::string>>();
        sc->add_option("--ckpt", opt->first, "fine-tuned checkpoint")->required();
        sc->add_option("--out", opt->second, "output deployed checkpoint")->required();
        sc->callback([opt, &task] {
            task = [opt] { cmd_deploy(opt->first, opt->second); };
        });
    }

    // denoise
    {
        auto* sc = app.add_subcommand("denoise", "denoise one image");
        struct Opt {
            std::string ckpt, in, out;
            double ratio = 1.0;
            int branch = 0;
            bool branch_set = false;
        };
        auto opt = std::make_shared<Opt>();
        sc->add_option("--ckpt", opt->ckpt, "checkpoint")->required();
        sc->add_option("--in", opt->in, "input image container")->required();
        sc->add_option("--ratio", opt->ratio, "digital gain")->required();
        sc->add_option("--out", opt->out, "output image container")->required();
        auto* b = sc->add_option("--branch", opt->branch, "virtual camera branch (1-based)");
        sc->callback([opt, b, &task] {
            task = [opt, b] {
                std::optional<int> branch;
                if (b->count() > 0) branch = opt->branch;
                cmd_denoise(opt->ckpt, opt->in, opt->ratio, opt->out, branch);
            };
        });
    }

    // eval
    {
        auto* sc = app.add_subcommand("eval", "evaluate PSNR/SSIM over a pair manifest");
        struct Opt {
            std::string ckpt, pairs, out;
        };
        auto opt = std::make_shared<Opt>();
        sc->add_option("--ckpt", opt->ckpt, "checkpoint")->required();
        sc->add_option("--pairs", opt->pairs, "pair manifest")->required();
        sc->add_option("--out", opt->out, "output CSV")->required();
        sc->callback([opt, &task] {
            task = [opt] { cmd_eval(opt->ckpt, opt->pairs, opt->out); };
        });
    }

    // gain-line
    {
        auto* sc = app.add_subcommand("gain-line", "fit log sigma on log K from manifest provenance");
        auto opt = std::make_shared<std::pair<std::string, std::string>>();
        sc->add_option("--pairs", opt->first, "pair manifest")->required();
        sc->add_option("--out", opt->second, "output CSV")->required();
        sc->callback([opt, &task] {
            task = [opt] { cmd_gain_line(opt->first, opt->second); };
        });
    }

    // allow global options (--seed, --threads, --kernels) after the subcommand
    for (auto* sc : app.get_subcommands([](const CLI::App*) { return true; }))
        sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (g.threads != 0) led::parallel::set_threads(g.threads);
        if (!led::kernels::select_by_name(g.kernels))
            throw led::DataError("kernel set not available: " + g.kernels);
        if (task) task();
        return 0;
    } catch (const led::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const led::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
