#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "led/camera.hpp"
#include "led/metrics.hpp"
#include "led/network.hpp"
#include "led/noise.hpp"

// Training pipelines: pre-training over virtual cameras, two-phase few-shot
// fine-tuning on target-camera pairs, the out-of-model noise fixture, and
// end-to-end denoising inference. All loops run single precision and are
// bit-reproducible given (seed, config, dataset).

namespace led {

struct LrPoint {
    double fraction = 0.0; // of total iterations, in (0, 1]
    double rate = 0.0;
};

struct TrainConfig {
    int iterations = 2000;
    int batch_size = 1;
    int patch_size = 64; // Bayer-plane pixels
    double lr_initial = 1e-4;
    std::vector<LrPoint> lr_schedule; // empty selects {0.5 -> lr/2, 0.9 -> lr/10}
    std::vector<double> ratios{100.0, 250.0, 300.0};
    std::uint64_t seed = 0;

    std::vector<LrPoint> effective_schedule() const;
    void validate(int stages) const;
};

double lr_at(const TrainConfig& cfg, int iteration);

struct LossTrace {
    struct Row {
        int iteration;
        double lr;
        double loss;
    };
    std::vector<Row> rows;

    std::string to_csv() const;
};

/// The out-of-model residual injected by the synthetic target camera: a
/// static per-pixel offset map (a sensor property, identical across frames)
/// plus sinusoidal column banding, both in ADU.
struct OutOfModelSpec {
    double fixed_pattern_amplitude = 0.0; // ADU
    int banding_period = 16;              // columns
    double banding_amplitude = 0.0;       // ADU
    std::uint64_t seed = 0;

    void validate() const {
        if (fixed_pattern_amplitude < 0.0 || banding_amplitude < 0.0)
            throw DataError("OutOfModelSpec: negative amplitude");
        if (banding_period < 2) throw DataError("OutOfModelSpec: banding period must be >= 2");
    }
};

// Deterministic per-pixel offset in [-1,1], a pure function of (seed, r, c).
double fixed_pattern_unit(std::uint64_t seed, int r, int c);
// Column banding offset in ADU at column c.
double banding_adu(const OutOfModelSpec& oom, int c);

struct FewshotPair {
    Tensor<float> noisy; // normalized, unclamped
    Tensor<float> clean; // normalized [0,1]
    double ratio = 1.0;
    double k = 1.0;        // provenance: sampled system gain
    double sigma_tl = 0.0; // provenance: sampled read-noise std
};

/// Alg.-style pre-training: per iteration draw a camera index and a ratio,
/// synthesize a noisy minibatch, amplify-and-clamp, take an L1 Adam step on
/// every parameter.
LossTrace pretrain(LEDNetwork<float>& net, const std::vector<CameraParams>& cameras,
                   const std::vector<Tensor<float>>& clean_frames, const TrainConfig& cfg,
                   const SensorLevels& levels);

/// Few-shot paired data from a synthetic target camera: in-model synthesis
/// plus the out-of-model fixture, with per-pair (K, sigma_tl) provenance.
std::vector<FewshotPair> make_target_dataset(const std::vector<Tensor<float>>& clean_frames,
                                             const CameraParams& target,
                                             const OutOfModelSpec& oom,
                                             const std::vector<double>& ratios,
                                             int pairs_per_ratio, const SensorLevels& levels,
                                             std::uint64_t seed);

/// Two-phase fine-tuning: CSA^T (averaged or unit init) first, then the
/// zero-initialized OMNR branch. Returns the per-phase loss traces.
std::pair<LossTrace, LossTrace> finetune(LEDNetwork<float>& net,
                                         const std::vector<FewshotPair>& fewshot,
                                         const TrainConfig& phase1, const TrainConfig& phase2,
                                         CsaInit init_mode);

/// clamp(noisy*ratio, 0, 1) -> network -> clamp to [0,1]; input and output
/// are Bayer planes.
Tensor<float> denoise(const LEDNetwork<float>& net, const Tensor<float>& noisy_plane,
                      double ratio, std::optional<int> branch = {});

/// Procedurally generated clean Bayer planes: smooth random blobs and a
/// gradient field under per-CFA-site gains; demo/test data only.
Tensor<float> synthetic_clean_plane(int h, int w, Rng& rng);
std::vector<Tensor<float>> synthetic_clean_dataset(int frames, int h, int w, std::uint64_t seed);

/// Denoise every (noisy, clean) manifest pair at its ratio and aggregate
/// PSNR/SSIM per ratio on packed 4-channel tensors. Pretrain-phase networks
/// resolve the branch from the entry's camera_id ("v3" -> branch 3).
EvalReport evaluate(const LEDNetwork<float>& net, const std::vector<raw::ManifestEntry>& entries);

/// Same aggregation over in-memory pairs (one ratio group per distinct ratio).
EvalReport evaluate_pairs(const LEDNetwork<float>& net, const std::vector<FewshotPair>& pairs,
                          std::optional<int> branch = {});

} // namespace led
