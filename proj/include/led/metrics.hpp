#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "led/tensor.hpp"

namespace led {

/// PSNR against peak 1.0. A zero-MSE comparison yields the distinguished
/// infinite marker, never a sentinel float; CSV output prints "inf".
struct PsnrValue {
    bool infinite = false;
    double db = 0.0;
};

template <class T>
PsnrValue psnr(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dims() != b.dims()) throw ShapeError("psnr: shape mismatch");
    double mse = 0.0;
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse == 0.0) return {true, 0.0};
    return {false, -10.0 * std::log10(mse)};
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2,
/// C2=(0.03)^2 with L=1, valid-window aggregation, mean over channels.
/// Accepts [H,W] or [C,H,W].
template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.dims() != b.dims()) throw ShapeError("ssim: shape mismatch");
    if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("ssim: input must be [H,W] or [C,H,W]");
    const int c = a.ndim() == 3 ? a.dim(0) : 1;
    const int h = a.dim(a.ndim() - 2), w = a.dim(a.ndim() - 1);
    constexpr int kWin = 11;
    if (h < kWin || w < kWin) throw ShapeError("ssim: spatial extents must be >= 11");

    // normalized Gaussian taps, sigma 1.5
    double g[kWin];
    double gsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        gsum += g[i];
    }
    for (double& v : g) v /= gsum;

    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;

    double total = 0.0;
    for (int ci = 0; ci < c; ++ci) {
        const T* pa = a.data().data() + static_cast<std::int64_t>(ci) * plane;
        const T* pb = b.data().data() + static_cast<std::int64_t>(ci) * plane;
        double acc = 0.0;
        std::int64_t count = 0;
        for (int r = 0; r + kWin <= h; ++r) {
            for (int q = 0; q + kWin <= w; ++q) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int u = 0; u < kWin; ++u) {
                    for (int v = 0; v < kWin; ++v) {
                        const double wt = g[u] * g[v];
                        const double xa = pa[static_cast<std::int64_t>(r + u) * w + q + v];
                        const double xb = pb[static_cast<std::int64_t>(r + u) * w + q + v];
                        ma += wt * xa;
                        mb += wt * xb;
                        maa += wt * xa * xa;
                        mbb += wt * xb * xb;
                        mab += wt * xa * xb;
                    }
                }
                const double va = maa - ma * ma;
                const double vb = mbb - mb * mb;
                const double cov = mab - ma * mb;
                acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                       ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
                ++count;
            }
        }
        total += acc / static_cast<double>(count);
    }
    return total / static_cast<double>(c);
}

struct EvalRow {
    double ratio = 1.0;
    int count = 0;
    PsnrValue psnr_db;
    double ssim = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows; // ascending ratio

    std::string to_csv() const {
        std::string out = "ratio,count,psnr_db,ssim\n";
        char buf[128];
        for (const auto& r : rows) {
            if (r.psnr_db.infinite) {
                std::snprintf(buf, sizeof(buf), "%g,%d,inf,%.6f\n", r.ratio, r.count, r.ssim);
            } else {
                std::snprintf(buf, sizeof(buf), "%g,%d,%.4f,%.6f\n", r.ratio, r.count,
                              r.psnr_db.db, r.ssim);
            }
            out += buf;
        }
        return out;
    }
};

} // namespace led
