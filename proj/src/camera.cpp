#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "led/camera.hpp"
#include "led/raw.hpp"

namespace led {
namespace {

using nlohmann::json;

void check_range(const ParamRange& r, const char* name) {
    if (!(r.lo <= r.hi)) throw DataError(std::string("ParameterSpace: lo > hi for ") + name);
}

} // namespace

void ParameterSpace::validate() const {
    check_range(k_min, "k_min");
    check_range(k_max, "k_max");
    check_range(lambda, "lambda");
    check_range(mu_c, "mu_c");
    check_range(a_tl, "a_tl");
    check_range(b_tl, "b_tl");
    check_range(sigma_hat_tl, "sigma_hat_tl");
    check_range(a_r, "a_r");
    check_range(b_r, "b_r");
    check_range(sigma_hat_r, "sigma_hat_r");
    if (!(k_min.lo > 0.0)) throw DataError("ParameterSpace: k_min range must be positive");
    if (!(k_min.hi < k_max.lo)) throw DataError("ParameterSpace: k_min range must lie below k_max");
    if (!(lambda.lo > -0.5)) throw DataError("ParameterSpace: lambda range must be > -0.5");
    if (sigma_hat_tl.lo < 0.0 || sigma_hat_r.lo < 0.0)
        throw DataError("ParameterSpace: negative scatter range");
}

std::vector<CameraParams> generate_virtual_cameras(int m, const ParameterSpace& space) {
    if (m < 1) throw DataError("generate_virtual_cameras: m must be >= 1");
    space.validate();
    const auto point = [m](const ParamRange& r, int k) {
        return r.lo + static_cast<double>(k) * (r.hi - r.lo) / static_cast<double>(m + 1);
    };
    std::vector<CameraParams> cameras;
    cameras.reserve(static_cast<std::size_t>(m));
    for (int k = 1; k <= m; ++k) {
        CameraParams c;
        c.k_min = point(space.k_min, k);
        c.k_max = point(space.k_max, k);
        c.lambda = point(space.lambda, k);
        c.mu_c = point(space.mu_c, k);
        c.a_tl = point(space.a_tl, k);
        c.b_tl = point(space.b_tl, k);
        c.sigma_hat_tl = point(space.sigma_hat_tl, k);
        c.a_r = point(space.a_r, k);
        c.b_r = point(space.b_r, k);
        c.sigma_hat_r = point(space.sigma_hat_r, k);
        c.id = "v" + std::to_string(k);
        c.validate();
        cameras.push_back(c);
    }
    return cameras;
}

NoiseInstance sample_noise_instance(const CameraParams& camera, double ratio, Rng& rng) {
    camera.validate();
    if (!(ratio >= 1.0)) throw DataError("sample_noise_instance: ratio must be >= 1");
    const double log_k = camera.k_min == camera.k_max
                             ? std::log(camera.k_min)
                             : rng.uniform(std::log(camera.k_min), std::log(camera.k_max));
    const double mu_tl = camera.a_tl * log_k + camera.b_tl;
    const double log_stl = camera.sigma_hat_tl == 0.0 ? mu_tl : rng.normal(mu_tl, camera.sigma_hat_tl);
    const double mu_r = camera.a_r * log_k + camera.b_r;
    const double log_sr = camera.sigma_hat_r == 0.0 ? mu_r : rng.normal(mu_r, camera.sigma_hat_r);

    NoiseInstance inst;
    inst.k = std::exp(log_k);
    inst.sigma_tl = std::exp(log_stl);
    inst.sigma_r = std::exp(log_sr);
    inst.lambda = camera.lambda;
    inst.mu_c = camera.mu_c;
    inst.ratio = ratio;
    inst.validate();
    return inst;
}

GainLineFit fit_gain_line(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2)
        throw UnderdeterminedError("fit_gain_line: need at least 2 points");
    std::vector<double> x, y;
    x.reserve(points.size());
    y.reserve(points.size());
    for (const auto& [k, sigma] : points) {
        if (!(k > 0.0) || !(sigma > 0.0))
            throw DataError("fit_gain_line: K and sigma must be positive");
        x.push_back(std::log(k));
        y.push_back(std::log(sigma));
    }
    const double xmin = *std::min_element(x.begin(), x.end());
    const double xmax = *std::max_element(x.begin(), x.end());
    if (xmax - xmin < 1e-12)
        throw DegenerateError("fit_gain_line: all system gains coincide");

    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    GainLineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / n);
    return fit;
}

std::vector<std::size_t> select_fewshot_pairs(const std::vector<FewshotCandidate>& candidates,
                                              int pairs_per_ratio, PairSelectMode mode) {
    if (pairs_per_ratio < 1) throw DataError("select_fewshot_pairs: pairs_per_ratio must be >= 1");
    std::map<double, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        groups[candidates[i].ratio].push_back(i);

    std::vector<std::size_t> selected;
    for (auto& [ratio, idx] : groups) {
        (void)ratio;
        if (static_cast<int>(idx.size()) < pairs_per_ratio)
            throw DataError("select_fewshot_pairs: not enough candidates in a ratio group");
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return candidates[a].k < candidates[b].k;
        });
        const int p = pairs_per_ratio;
        const int n = static_cast<int>(idx.size());
        std::vector<std::size_t> pick;
        if (p >= n) {
            pick = idx;
        } else if (mode == PairSelectMode::similar) {
            // tightest window of p consecutive log K values
            int best = 0;
            double best_w = std::numeric_limits<double>::infinity();
            for (int s = 0; s + p <= n; ++s) {
                const double wdt = std::log(candidates[idx[static_cast<std::size_t>(s + p - 1)]].k) -
                                   std::log(candidates[idx[static_cast<std::size_t>(s)]].k);
                if (wdt < best_w) {
                    best_w = wdt;
                    best = s;
                }
            }
            pick.assign(idx.begin() + best, idx.begin() + best + p);
        } else {
            // farthest-point pick seeded with the two extremes
            std::vector<int> chosen{0, n - 1};
            while (static_cast<int>(chosen.size()) < p) {
                int arg = -1;
                double best_d = -1.0;
                for (int c = 0; c < n; ++c) {
                    if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
                    double d = std::numeric_limits<double>::infinity();
                    for (int s : chosen) {
                        d = std::min(d, std::abs(std::log(candidates[idx[static_cast<std::size_t>(c)]].k) -
                                                 std::log(candidates[idx[static_cast<std::size_t>(s)]].k)));
                    }
                    if (d > best_d) {
                        best_d = d;
                        arg = c;
                    }
                }
                chosen.push_back(arg);
            }
            std::sort(chosen.begin(), chosen.end());
            if (p == 1) chosen = {0};
            for (int c : chosen) pick.push_back(idx[static_cast<std::size_t>(c)]);
            if (static_cast<int>(pick.size()) > p) pick.resize(static_cast<std::size_t>(p));
        }
        selected.insert(selected.end(), pick.begin(), pick.end());
    }
    return selected;
}

void write_camera_list(const std::string& path, const std::vector<CameraParams>& cameras) {
    std::ostringstream out;
    for (const auto& c : cameras) {
        json j;
        j["id"] = c.id;
        j["k_min"] = c.k_min;
        j["k_max"] = c.k_max;
        j["lambda"] = c.lambda;
        j["mu_c"] = c.mu_c;
        j["a_tl"] = c.a_tl;
        j["b_tl"] = c.b_tl;
        j["sigma_hat_tl"] = c.sigma_hat_tl;
        j["a_r"] = c.a_r;
        j["b_r"] = c.b_r;
        j["sigma_hat_r"] = c.sigma_hat_r;
        out << j.dump() << "\n";
    }
    raw::write_text_atomic(path, out.str());
}

std::vector<CameraParams> read_camera_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open camera list: " + path);
    std::vector<CameraParams> cameras;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            CameraParams c;
            c.id = j.value("id", std::string());
            c.k_min = j.at("k_min").get<double>();
            c.k_max = j.at("k_max").get<double>();
            c.lambda = j.at("lambda").get<double>();
            c.mu_c = j.at("mu_c").get<double>();
            c.a_tl = j.at("a_tl").get<double>();
            c.b_tl = j.at("b_tl").get<double>();
            c.sigma_hat_tl = j.at("sigma_hat_tl").get<double>();
            c.a_r = j.at("a_r").get<double>();
            c.b_r = j.at("b_r").get<double>();
            c.sigma_hat_r = j.at("sigma_hat_r").get<double>();
            c.validate();
            cameras.push_back(c);
        } catch (const json::exception& e) {
            throw DataError("camera list " + path + " line " + std::to_string(lineno) + ": " +
                            e.what());
        }
    }
    return cameras;
}

} // namespace led
