#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "led/adam.hpp"
#include "led/training.hpp"

namespace led {
namespace {

// Even-aligned random crop keeps the Bayer phase.
Tensor<float> crop_even(const Tensor<float>& plane, int patch, Rng& rng) {
    const int h = plane.dim(0), w = plane.dim(1);
    if (patch > h || patch > w) throw ShapeError("crop: patch exceeds frame");
    int r0 = 0, c0 = 0;
    if (h > patch) r0 = 2 * static_cast<int>(rng.uniform_int(0, (h - patch) / 2));
    if (w > patch) c0 = 2 * static_cast<int>(rng.uniform_int(0, (w - patch) / 2));
    Tensor<float> out = Tensor<float>::zeros({patch, patch});
    for (int r = 0; r < patch; ++r) {
        std::copy_n(plane.data().data() + static_cast<std::int64_t>(r0 + r) * w + c0, patch,
                    out.data().data() + static_cast<std::int64_t>(r) * patch);
    }
    return out;
}

struct CropRef {
    int r0, c0;
};

CropRef pick_crop(const Tensor<float>& plane, int patch, Rng& rng) {
    const int h = plane.dim(0), w = plane.dim(1);
    if (patch > h || patch > w) throw ShapeError("crop: patch exceeds frame");
    CropRef c{0, 0};
    if (h > patch) c.r0 = 2 * static_cast<int>(rng.uniform_int(0, (h - patch) / 2));
    if (w > patch) c.c0 = 2 * static_cast<int>(rng.uniform_int(0, (w - patch) / 2));
    return c;
}

Tensor<float> crop_at(const Tensor<float>& plane, CropRef at, int patch) {
    const int w = plane.dim(1);
    Tensor<float> out = Tensor<float>::zeros({patch, patch});
    for (int r = 0; r < patch; ++r) {
        std::copy_n(plane.data().data() + static_cast<std::int64_t>(at.r0 + r) * w + at.c0, patch,
                    out.data().data() + static_cast<std::int64_t>(r) * patch);
    }
    return out;
}

void check_finite(double loss) {
    if (!std::isfinite(loss)) throw NumericError("training: non-finite loss");
}

// Shared minibatch step machinery over (input, target) packed batches.
double train_step(LEDNetwork<float>& net, std::vector<Tensor<float>>& params,
                  AdamState<float>& state, const Tensor<float>& input,
                  const Tensor<float>& target, std::optional<int> branch, double lr) {
    for (auto& p : params) p.zero_grad();
    Tensor<float> loss = ops::l1_loss(net.forward(input, branch), target);
    const double value = static_cast<double>(loss.item());
    check_finite(value);
    backward(loss);
    adam_step(params, state, static_cast<float>(lr));
    return value;
}

} // namespace

std::vector<LrPoint> TrainConfig::effective_schedule() const {
    if (!lr_schedule.empty()) return lr_schedule;
    return {{0.5, lr_initial / 2.0}, {0.9, lr_initial / 10.0}};
}

void TrainConfig::validate(int stages) const {
    if (iterations < 0) throw DataError("TrainConfig: negative iterations");
    if (batch_size < 1) throw DataError("TrainConfig: batch_size must be >= 1");
    const int div = 1 << stages; // packed extents halve once more
    if (patch_size < div || patch_size % div != 0)
        throw DataError("TrainConfig: patch_size must be a positive multiple of 2^stages");
    if (ratios.empty()) throw DataError("TrainConfig: empty ratio set");
    for (double r : ratios)
        if (!(r >= 1.0)) throw DataError("TrainConfig: ratios must be >= 1");
    double prev = 0.0;
    for (const auto& pt : effective_schedule()) {
        if (!(pt.fraction > prev && pt.fraction <= 1.0))
            throw DataError("TrainConfig: schedule fractions must increase within (0,1]");
        prev = pt.fraction;
        if (!(pt.rate > 0.0)) throw DataError("TrainConfig: schedule rates must be positive");
    }
}

double lr_at(const TrainConfig& cfg, int iteration) {
    double lr = cfg.lr_initial;
    for (const auto& pt : cfg.effective_schedule()) {
        if (iteration >= static_cast<int>(pt.fraction * cfg.iterations)) lr = pt.rate;
    }
    return lr;
}

std::string LossTrace::to_csv() const {
    std::string out = "iteration,lr,loss\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", r.iteration, r.lr, r.loss);
        out += buf;
    }
    return out;
}

double fixed_pattern_unit(std::uint64_t seed, int r, int c) {
    const std::uint64_t key =
        mix64(seed ^ mix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(r)) << 32) |
                           static_cast<std::uint32_t>(c)));
    // top 53 bits -> [0,1) -> [-1,1)
    return 2.0 * (static_cast<double>(key >> 11) * 0x1.0p-53) - 1.0;
}

double banding_adu(const OutOfModelSpec& oom, int c) {
    return oom.banding_amplitude *
           std::sin(2.0 * std::numbers::pi * static_cast<double>(c % oom.banding_period) /
                    static_cast<double>(oom.banding_period));
}

LossTrace pretrain(LEDNetwork<float>& net, const std::vector<CameraParams>& cameras,
                   const std::vector<Tensor<float>>& clean_frames, const TrainConfig& cfg,
                   const SensorLevels& levels) {
    if (net.phase != Phase::pretrain) throw PhaseError("pretrain: network not in pretrain phase");
    if (static_cast<int>(cameras.size()) != net.m)
        throw DataError("pretrain: camera count does not match the network's branch count");
    if (clean_frames.empty()) throw DataError("pretrain: empty clean dataset");
    cfg.validate(net.cfg.stages);
    levels.validate();

    auto params = net.trainable_params();
    AdamState<float> state;
    state.init(params);

    LossTrace trace;
    const Rng root(cfg.seed);
    const int m = net.m;
    for (int it = 0; it < cfg.iterations; ++it) {
        Rng iter_rng = root.fork(static_cast<std::uint64_t>(it));
        const double lr = lr_at(cfg, it);
        const int k = static_cast<int>(iter_rng.uniform_int(0, m - 1));
        const double ratio =
            cfg.ratios[static_cast<std::size_t>(iter_rng.uniform_int(
                0, static_cast<std::int64_t>(cfg.ratios.size()) - 1))];

        std::vector<Tensor<float>> inputs, targets;
        for (int b = 0; b < cfg.batch_size; ++b) {
            Rng item_rng = iter_rng.fork(static_cast<std::uint64_t>(b) + 1);
            const auto fi = static_cast<std::size_t>(item_rng.uniform_int(
                0, static_cast<std::int64_t>(clean_frames.size()) - 1));
            Tensor<float> clean = crop_even(clean_frames[fi], cfg.patch_size, item_rng);
            const NoiseInstance inst =
                sample_noise_instance(cameras[static_cast<std::size_t>(k)], ratio, item_rng);
            Tensor<float> noisy = synthesize_noisy(clean, inst, levels, item_rng);
            inputs.push_back(raw::pack_bayer(ops::scale_clamp01(noisy, static_cast<float>(ratio))));
            targets.push_back(raw::pack_bayer(clean));
        }
        const double loss = train_step(net, params, state, stack0(inputs), stack0(targets), k, lr);
        trace.rows.push_back({it, lr, loss});
    }
    return trace;
}

std::vector<FewshotPair> make_target_dataset(const std::vector<Tensor<float>>& clean_frames,
                                             const CameraParams& target,
                                             const OutOfModelSpec& oom,
                                             const std::vector<double>& ratios,
                                             int pairs_per_ratio, const SensorLevels& levels,
                                             std::uint64_t seed) {
    target.validate();
    oom.validate();
    levels.validate();
    if (pairs_per_ratio < 1) throw DataError("make_target_dataset: pairs_per_ratio must be >= 1");
    const std::size_t need = ratios.size() * static_cast<std::size_t>(pairs_per_ratio);
    if (clean_frames.size() < need)
        throw DataError("make_target_dataset: insufficient clean frames (" +
                        std::to_string(clean_frames.size()) + " < " + std::to_string(need) + ")");

    const Rng root(seed);
    const double span = levels.span();
    std::vector<FewshotPair> pairs;
    std::size_t frame_idx = 0;
    std::uint64_t stream = 0;
    for (double ratio : ratios) {
        for (int j = 0; j < pairs_per_ratio; ++j) {
            Rng rng = root.fork(stream++);
            const Tensor<float>& clean = clean_frames[frame_idx++];
            const NoiseInstance inst = sample_noise_instance(target, ratio, rng);
            Tensor<float> noisy = synthesize_noisy(clean, inst, levels, rng);
            // out-of-model residual, ADU -> normalized
            const int h = noisy.dim(0), w = noisy.dim(1);
            float* p = noisy.data().data();
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    const double fpn =
                        oom.fixed_pattern_amplitude * fixed_pattern_unit(oom.seed, r, c);
                    p[static_cast<std::int64_t>(r) * w + c] +=
                        static_cast<float>((fpn + banding_adu(oom, c)) / span);
                }
            }
            FewshotPair pair;
            pair.noisy = std::move(noisy);
            pair.clean = clean.detach();
            pair.ratio = ratio;
            pair.k = inst.k;
            pair.sigma_tl = inst.sigma_tl;
            pairs.push_back(std::move(pair));
        }
    }
    return pairs;
}

namespace {

LossTrace finetune_phase(LEDNetwork<float>& net, const std::vector<FewshotPair>& fewshot,
                         const TrainConfig& cfg) {
    auto params = net.trainable_params();
    AdamState<float> state;
    state.init(params);
    LossTrace trace;
    const Rng root(cfg.seed);
    for (int it = 0; it < cfg.iterations; ++it) {
        Rng iter_rng = root.fork(static_cast<std::uint64_t>(it));
        const double lr = lr_at(cfg, it);
        std::vector<Tensor<float>> inputs, targets;
        for (int b = 0; b < cfg.batch_size; ++b) {
            Rng item_rng = iter_rng.fork(static_cast<std::uint64_t>(b) + 1);
            const auto& pair = fewshot[static_cast<std::size_t>(item_rng.uniform_int(
                0, static_cast<std::int64_t>(fewshot.size()) - 1))];
            const CropRef at = pick_crop(pair.noisy, cfg.patch_size, item_rng);
            Tensor<float> noisy = crop_at(pair.noisy, at, cfg.patch_size);
            Tensor<float> clean = crop_at(pair.clean, at, cfg.patch_size);
            inputs.push_back(
                raw::pack_bayer(ops::scale_clamp01(noisy, static_cast<float>(pair.ratio))));
            targets.push_back(raw::pack_bayer(clean));
        }
        const double loss =
            train_step(net, params, state, stack0(inputs), stack0(targets), std::nullopt, lr);
        trace.rows.push_back({it, lr, loss});
    }
    return trace;
}

} // namespace

std::pair<LossTrace, LossTrace> finetune(LEDNetwork<float>& net,
                                         const std::vector<FewshotPair>& fewshot,
                                         const TrainConfig& phase1, const TrainConfig& phase2,
                                         CsaInit init_mode) {
    if (net.phase != Phase::pretrain) throw PhaseError("finetune: network not in pretrain phase");
    if (fewshot.empty()) throw DataError("finetune: empty few-shot set");
    phase1.validate(net.cfg.stages);
    phase2.validate(net.cfg.stages);

    net.to_finetune_csa(init_mode); // in-model alignment first
    LossTrace t1 = finetune_phase(net, fewshot, phase1);
    net.to_finetune_omnr(); // then the out-of-model branch
    LossTrace t2 = finetune_phase(net, fewshot, phase2);
    return {std::move(t1), std::move(t2)};
}

Tensor<float> denoise(const LEDNetwork<float>& net, const Tensor<float>& noisy_plane,
                      double ratio, std::optional<int> branch) {
    if (noisy_plane.ndim() != 2) throw ShapeError("denoise: input must be a Bayer plane [H,W]");
    Tensor<float> packed = raw::pack_bayer(noisy_plane);
    Tensor<float> input = ops::scale_clamp01(packed, static_cast<float>(ratio));
    Tensor<float> batched =
        Tensor<float>::from_data({1, packed.dim(0), packed.dim(1), packed.dim(2)},
                                 {input.data().begin(), input.data().end()});
    Tensor<float> out = net.forward(batched, branch);
    Tensor<float> clamped = ops::scale_clamp01(out, 1.0f);
    Tensor<float> chw = Tensor<float>::from_data({packed.dim(0), packed.dim(1), packed.dim(2)},
                                                 {clamped.data().begin(), clamped.data().end()});
    return raw::unpack_bayer(chw);
}

Tensor<float> synthetic_clean_plane(int h, int w, Rng& rng) {
    // smooth blobs + linear ramp, then per-CFA-site gains
    const int blobs = 6;
    std::vector<double> cx(blobs), cy(blobs), sx(blobs), amp(blobs);
    for (int i = 0; i < blobs; ++i) {
        cx[static_cast<std::size_t>(i)] = rng.uniform(0.0, w);
        cy[static_cast<std::size_t>(i)] = rng.uniform(0.0, h);
        sx[static_cast<std::size_t>(i)] = rng.uniform(0.08, 0.3) * std::min(h, w);
        amp[static_cast<std::size_t>(i)] = rng.uniform(-0.4, 0.6);
    }
    const double gx = rng.uniform(-0.3, 0.3), gy = rng.uniform(-0.3, 0.3);
    const double base = rng.uniform(0.25, 0.55);
    const double site_gain[4] = {0.85, 1.0, 1.0, 0.7}; // R, G1, G2, B

    Tensor<float> out = Tensor<float>::zeros({h, w});
    float* p = out.data().data();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double v = base + gx * (static_cast<double>(c) / w - 0.5) +
                       gy * (static_cast<double>(r) / h - 0.5);
            for (int i = 0; i < blobs; ++i) {
                const double dx = c - cx[static_cast<std::size_t>(i)];
                const double dy = r - cy[static_cast<std::size_t>(i)];
                const double s2 = sx[static_cast<std::size_t>(i)] * sx[static_cast<std::size_t>(i)];
                v += amp[static_cast<std::size_t>(i)] * std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
            }
            v *= site_gain[(r % 2) * 2 + (c % 2)];
            p[static_cast<std::int64_t>(r) * w + c] =
                static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

std::vector<Tensor<float>> synthetic_clean_dataset(int frames, int h, int w, std::uint64_t seed) {
    if (frames < 1) throw DataError("synthetic_clean_dataset: frames must be >= 1");
    const Rng root(seed);
    std::vector<Tensor<float>> out;
    for (int i = 0; i < frames; ++i) {
        Rng rng = root.fork(static_cast<std::uint64_t>(i));
        out.push_back(synthetic_clean_plane(h, w, rng));
    }
    return out;
}

namespace {

std::optional<int> branch_for_entry(const LEDNetwork<float>& net, const raw::ManifestEntry& e) {
    if (net.phase != Phase::pretrain) return std::nullopt;
    if (e.camera_id.size() >= 2 && e.camera_id[0] == 'v') {
        try {
            const int k = std::stoi(e.camera_id.substr(1));
            if (k >= 1 && k <= net.m) return k - 1;
        } catch (const std::exception&) {
        }
    }
    throw DataError("evaluate: pretrain network needs camera_id of the form v<k>, got '" +
                    e.camera_id + "'");
}

struct Accum {
    int count = 0;
    bool infinite = false;
    double psnr_sum = 0.0;
    double ssim_sum = 0.0;
};

EvalReport report_from(const std::map<double, Accum>& acc) {
    EvalReport rep;
    for (const auto& [ratio, a] : acc) {
        EvalRow row;
        row.ratio = ratio;
        row.count = a.count;
        if (a.infinite) {
            row.psnr_db = {true, 0.0};
        } else {
            row.psnr_db = {false, a.psnr_sum / a.count};
        }
        row.ssim = a.ssim_sum / a.count;
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace

EvalReport evaluate(const LEDNetwork<float>& net, const std::vector<raw::ManifestEntry>& entries) {
    if (entries.empty()) throw DataError("evaluate: empty manifest");
    std::map<double, Accum> acc;
    for (const auto& e : entries) {
        if (!e.noisy_path) throw DataError("evaluate: entry has no noisy_path");
        raw::Image noisy = raw::read_image(*e.noisy_path);
        raw::Image clean = raw::read_image(e.clean_path);
        if (noisy.plane.dims() != clean.plane.dims())
            throw DataError("evaluate: pair dimension mismatch for scene '" + e.scene_id + "'");
        Tensor<float> den = denoise(net, noisy.plane, e.ratio, branch_for_entry(net, e));
        Tensor<float> ref = ops::scale_clamp01(raw::pack_bayer(clean.plane), 1.0f);
        Tensor<float> got = raw::pack_bayer(den);
        const PsnrValue p = psnr(got, ref);
        Accum& a = acc[e.ratio];
        ++a.count;
        a.infinite = a.infinite || p.infinite;
        if (!p.infinite) a.psnr_sum += p.db;
        a.ssim_sum += ssim(got, ref);
    }
    return report_from(acc);
}

EvalReport evaluate_pairs(const LEDNetwork<float>& net, const std::vector<FewshotPair>& pairs,
                          std::optional<int> branch) {
    if (pairs.empty()) throw DataError("evaluate_pairs: empty pair set");
    std::map<double, Accum> acc;
    for (const auto& pr : pairs) {
        Tensor<float> den = denoise(net, pr.noisy, pr.ratio, branch);
        Tensor<float> ref = ops::scale_clamp01(raw::pack_bayer(pr.clean), 1.0f);
        Tensor<float> got = raw::pack_bayer(den);
        const PsnrValue p = psnr(got, ref);
        Accum& a = acc[pr.ratio];
        ++a.count;
        a.infinite = a.infinite || p.infinite;
        if (!p.infinite) a.psnr_sum += p.db;
        a.ssim_sum += ssim(got, ref);
    }
    return report_from(acc);
}

} // namespace led
