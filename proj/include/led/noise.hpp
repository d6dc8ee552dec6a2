#pragma once

#include <cstdint>
#include <vector>

#include "led/raw.hpp"
#include "led/rng.hpp"
#include "led/tensor.hpp"

// Physics-based low-light RAW noise synthesis. A noisy frame is the clean
// signal plus four sampled components: signal-dependent shot noise
// (Poisson), long-tailed read noise (Tukey-lambda), per-row offsets
// (Gaussian), and ADC quantization error (uniform). Everything runs in the
// ADU domain between a configurable black/white level pair.

namespace led {

struct NoiseComponentFlags {
    bool shot = true;
    bool read = true;
    bool row = true;
    bool quant = true;
};

/// One realized draw of the noise parameters attached to a synthesized
/// frame: overall system gain K (ADU per electron), read-noise std sigma_tl
/// (ADU), row-noise std sigma_r (ADU), Tukey-lambda shape, read-noise mean
/// offset mu_c (ADU), and the digital gain applied to the exposure.
struct NoiseInstance {
    double k = 1.0;
    double sigma_tl = 0.0;
    double sigma_r = 0.0;
    double lambda = 0.1;
    double mu_c = 0.0;
    double ratio = 1.0;
    NoiseComponentFlags enabled;

    void validate() const {
        if (!(k > 0.0)) throw DataError("NoiseInstance: K must be > 0");
        if (sigma_tl < 0.0 || sigma_r < 0.0) throw DataError("NoiseInstance: negative sigma");
        if (!(ratio >= 1.0)) throw DataError("NoiseInstance: ratio must be >= 1");
        if (!(lambda > -0.5)) throw DataError("NoiseInstance: lambda must be > -0.5");
    }
};

/// Tukey-lambda quantile: Q(p) = (p^l - (1-p)^l)/l for l != 0, logit at 0.
double tukey_lambda_quantile(double p, double lambda);

/// Standard deviation of the standard Tukey-lambda law (zero location, unit
/// scale); requires lambda > -0.5 for the variance to exist.
double tukey_lambda_std(double lambda);

/// i.i.d. Tukey-lambda deviates standardized to mean mu_c and std sigma_tl.
template <class T>
Tensor<T> sample_read_noise(const std::vector<int>& dims, double lambda, double mu_c,
                            double sigma_tl, Rng& rng) {
    if (sigma_tl < 0.0) throw DataError("sample_read_noise: negative sigma");
    const double tl_std = tukey_lambda_std(lambda); // validates lambda
    const double scale = sigma_tl / tl_std;
    Tensor<T> out = Tensor<T>::zeros(dims);
    T* p = out.data().data();
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        p[i] = static_cast<T>(mu_c + scale * tukey_lambda_quantile(rng.uniform_open01(), lambda));
    }
    return out;
}

/// Elementwise Poisson(clean/K)*K; returns signal plus shot noise.
template <class T>
Tensor<T> sample_shot(const Tensor<T>& clean_adu, double k, Rng& rng) {
    if (!(k > 0.0)) throw DataError("sample_shot: K must be > 0");
    Tensor<T> out = Tensor<T>::zeros(clean_adu.dims());
    const T* src = clean_adu.data().data();
    T* dst = out.data().data();
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        const double mean = static_cast<double>(src[i]) / k;
        if (mean < 0.0) throw DataError("sample_shot: negative input");
        dst[i] = static_cast<T>(static_cast<double>(rng.poisson(mean)) * k);
    }
    return out;
}

/// One Gaussian deviate per mosaic row, broadcast across the columns.
template <class T>
Tensor<T> sample_row_noise(int height, int width, double sigma_r, Rng& rng) {
    if (sigma_r < 0.0) throw DataError("sample_row_noise: negative sigma");
    Tensor<T> out = Tensor<T>::zeros({height, width});
    T* p = out.data().data();
    for (int r = 0; r < height; ++r) {
        const T v = static_cast<T>(sigma_r == 0.0 ? 0.0 : rng.normal(0.0, sigma_r));
        std::fill_n(p + static_cast<std::int64_t>(r) * width, width, v);
    }
    return out;
}

/// i.i.d. uniform on the open interval (-1/2, 1/2); the quantization step is
/// 1 ADU, so no rescaling applies.
template <class T>
Tensor<T> sample_quant_noise(const std::vector<int>& dims, Rng& rng) {
    Tensor<T> out = Tensor<T>::zeros(dims);
    T* p = out.data().data();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        p[i] = static_cast<T>(rng.uniform_open01() - 0.5);
    return out;
}

/// Synthesize a noisy frame from a clean normalized Bayer plane:
///   x_adu = clean * (white - black) / ratio
///   d_adu = shot(x_adu) + read + row + quant      (each gated by its flag)
/// and return d_adu / (white - black), unclamped -- sub-black values are
/// legitimate sensor output.
template <class T>
Tensor<T> synthesize_noisy(const Tensor<T>& clean_norm, const NoiseInstance& inst,
                           const SensorLevels& levels, Rng& rng) {
    if (clean_norm.ndim() != 2) throw ShapeError("synthesize_noisy: plane must be [H,W]");
    levels.validate();
    inst.validate();
    const int h = clean_norm.dim(0), w = clean_norm.dim(1);
    const double span = levels.span();
    const double exposure = span / inst.ratio;

    const T* src = clean_norm.data().data();
    std::vector<double> d(static_cast<std::size_t>(clean_norm.numel()));
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double c = static_cast<double>(src[i]);
        if (c < 0.0 || c > 1.0) throw DataError("synthesize_noisy: clean outside [0,1]");
        d[i] = c * exposure;
    }

    if (inst.enabled.shot) {
        for (auto& v : d) v = static_cast<double>(rng.poisson(v / inst.k)) * inst.k;
    }
    if (inst.enabled.read) {
        const double scale = inst.sigma_tl / tukey_lambda_std(inst.lambda);
        for (auto& v : d)
            v += inst.mu_c + scale * tukey_lambda_quantile(rng.uniform_open01(), inst.lambda);
    }
    if (inst.enabled.row) {
        for (int r = 0; r < h; ++r) {
            const double v = inst.sigma_r == 0.0 ? 0.0 : rng.normal(0.0, inst.sigma_r);
            for (int c = 0; c < w; ++c) d[static_cast<std::size_t>(r) * w + c] += v;
        }
    }
    if (inst.enabled.quant) {
        for (auto& v : d) v += rng.uniform_open01() - 0.5;
    }

    Tensor<T> out = Tensor<T>::zeros(clean_norm.dims());
    T* dst = out.data().data();
    for (std::size_t i = 0; i < d.size(); ++i) dst[i] = static_cast<T>(d[i] / span);
    return out;
}

} // namespace led
