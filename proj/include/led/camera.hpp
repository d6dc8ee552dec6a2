#pragma once

#include <string>
#include <utility>
#include <vector>

#include "led/noise.hpp"
#include "led/rng.hpp"

// Camera coordinate space. A camera is a ten-dimensional coordinate fixing
// the joint law of its noise parameters: a system-gain range, the read-noise
// shape and mean, and log-linear slope/intercept/scatter for the read and
// row noise stds conditioned on log K.

namespace led {

struct CameraParams {
    double k_min = 0.1;
    double k_max = 10.0;
    double lambda = 0.1;
    double mu_c = 0.0;
    double a_tl = 0.8;
    double b_tl = 0.0;
    double sigma_hat_tl = 0.1;
    double a_r = 0.6;
    double b_r = -1.5;
    double sigma_hat_r = 0.05;
    std::string id; // label used by manifests ("v1", ...)

    void validate() const {
        if (!(k_min > 0.0) || !(k_min <= k_max)) throw DataError("CameraParams: need 0 < k_min <= k_max");
        if (!(lambda > -0.5)) throw DataError("CameraParams: lambda must be > -0.5");
        if (sigma_hat_tl < 0.0 || sigma_hat_r < 0.0) throw DataError("CameraParams: negative scatter");
    }
};

struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Inclusive range per coordinate. Defaults are plausible consumer-sensor
/// magnitudes; override via the space.* config keys.
struct ParameterSpace {
    ParamRange k_min{0.05, 0.5};
    ParamRange k_max{5.0, 30.0};
    ParamRange lambda{0.08, 0.2};
    ParamRange mu_c{-2.0, 2.0};
    ParamRange a_tl{0.6, 1.0};
    ParamRange b_tl{-0.5, 0.5};
    ParamRange sigma_hat_tl{0.05, 0.2};
    ParamRange a_r{0.4, 0.8};
    ParamRange b_r{-2.0, -1.0};
    ParamRange sigma_hat_r{0.02, 0.1};

    void validate() const;
};

/// Camera k (1-based) takes lo + k*(hi-lo)/(m+1) in every coordinate:
/// equally spaced interior points, never on a range boundary.
std::vector<CameraParams> generate_virtual_cameras(int m, const ParameterSpace& space);

/// Draw one noise instance from a camera's joint law:
///   log K ~ U(log k_min, log k_max)
///   log sigma_tl | log K ~ N(a_tl log K + b_tl, sigma_hat_tl)
///   log sigma_r  | log K ~ N(a_r  log K + b_r,  sigma_hat_r)
NoiseInstance sample_noise_instance(const CameraParams& camera, double ratio, Rng& rng);

struct GainLineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

/// Ordinary least squares of log(sigma) on log(K). Throws
/// UnderdeterminedError for fewer than two points and DegenerateError when
/// every K coincides (a line cannot be identified from one abscissa).
GainLineFit fit_gain_line(const std::vector<std::pair<double, double>>& k_sigma_points);

enum class PairSelectMode { spread, similar };

struct FewshotCandidate {
    double ratio = 1.0;
    double k = 1.0;
};

/// Pick pairs_per_ratio candidates per ratio group. spread maximizes the
/// spacing of log K (most informative for the gain line); similar minimizes
/// it (the control that cannot identify the line). Returns indices into the
/// input, grouped by ascending ratio.
std::vector<std::size_t> select_fewshot_pairs(const std::vector<FewshotCandidate>& candidates,
                                              int pairs_per_ratio, PairSelectMode mode);

// JSON-lines persistence for camera lists.
void write_camera_list(const std::string& path, const std::vector<CameraParams>& cameras);
std::vector<CameraParams> read_camera_list(const std::string& path);

} // namespace led
