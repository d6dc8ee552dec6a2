#pragma once

// Shared helpers for the test suites: random tensors, independent brute
// force oracles, and a central finite-difference gradient checker.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "led/ops.hpp"
#include "led/rng.hpp"
#include "led/tensor.hpp"

namespace test_util {

template <class T>
led::Tensor<T> rand_tensor(led::Rng& rng, std::vector<int> dims, double lo = -1.0,
                           double hi = 1.0) {
    led::Tensor<T> t = led::Tensor<T>::zeros(std::move(dims));
    for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

// Uniform in [-1,-0.05] u [0.05,1]; keeps finite differences away from the
// kinks of leaky-relu / l1 / maxpool ties.
template <class T>
led::Tensor<T> rand_tensor_offzero(led::Rng& rng, std::vector<int> dims) {
    led::Tensor<T> t = led::Tensor<T>::zeros(std::move(dims));
    for (auto& v : t.data()) {
        const double m = rng.uniform(0.05, 1.0);
        v = static_cast<T>(rng.uniform(0.0, 1.0) < 0.5 ? -m : m);
    }
    return t;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// --- brute force oracles ----------------------------------------------------

template <class T>
led::Tensor<T> conv3x3_oracle_impl(const led::Tensor<T>& x, const led::Tensor<T>& w,
                                   const led::Tensor<T>& b,
                                   const std::optional<led::Tensor<T>>& pad) {
    const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int co = w.dim(0);
    led::Tensor<T> y = led::Tensor<T>::zeros({n, co, h, wd});
    for (int ni = 0; ni < n; ++ni)
        for (int o = 0; o < co; ++o)
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < wd; ++c) {
                    T acc = b.at(o);
                    for (int i = 0; i < ci; ++i)
                        for (int u = 0; u < 3; ++u)
                            for (int v = 0; v < 3; ++v) {
                                const int rr = r + u - 1, cc = c + v - 1;
                                T val;
                                if (rr >= 0 && rr < h && cc >= 0 && cc < wd)
                                    val = x.at(ni, i, rr, cc);
                                else
                                    val = pad ? pad->at(i) : T(0);
                                acc += w.at(o, i, u, v) * val;
                            }
                    y.at(ni, o, r, c) = acc;
                }
    return y;
}

template <class T>
led::Tensor<T> conv3x3_oracle(const led::Tensor<T>& x, const led::Tensor<T>& w,
                              const led::Tensor<T>& b) {
    return conv3x3_oracle_impl<T>(x, w, b, std::nullopt);
}

template <class T>
led::Tensor<T> conv3x3_oracle(const led::Tensor<T>& x, const led::Tensor<T>& w,
                              const led::Tensor<T>& b, const led::Tensor<T>& pad) {
    return conv3x3_oracle_impl<T>(x, w, b, std::optional<led::Tensor<T>>(pad));
}

template <class T>
led::Tensor<T> transposed_conv2_oracle(const led::Tensor<T>& x, const led::Tensor<T>& w,
                                       const led::Tensor<T>& b) {
    const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const int co = w.dim(1);
    led::Tensor<T> y = led::Tensor<T>::zeros({n, co, 2 * h, 2 * wd});
    for (int ni = 0; ni < n; ++ni)
        for (int o = 0; o < co; ++o)
            for (int r = 0; r < 2 * h; ++r)
                for (int c = 0; c < 2 * wd; ++c) y.at(ni, o, r, c) = b.at(o);
    for (int ni = 0; ni < n; ++ni)
        for (int i = 0; i < ci; ++i)
            for (int o = 0; o < co; ++o)
                for (int r = 0; r < h; ++r)
                    for (int c = 0; c < wd; ++c)
                        for (int u = 0; u < 2; ++u)
                            for (int v = 0; v < 2; ++v)
                                y.at(ni, o, 2 * r + u, 2 * c + v) +=
                                    w.at(i, o, u, v) * x.at(ni, i, r, c);
    return y;
}

template <class T>
led::Tensor<T> maxpool2_oracle(const led::Tensor<T>& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    led::Tensor<T> y = led::Tensor<T>::zeros({n, c, h / 2, wd / 2});
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci)
            for (int r = 0; r < h / 2; ++r)
                for (int q = 0; q < wd / 2; ++q) {
                    T m = x.at(ni, ci, 2 * r, 2 * q);
                    m = std::max(m, x.at(ni, ci, 2 * r, 2 * q + 1));
                    m = std::max(m, x.at(ni, ci, 2 * r + 1, 2 * q));
                    m = std::max(m, x.at(ni, ci, 2 * r + 1, 2 * q + 1));
                    y.at(ni, ci, r, q) = m;
                }
    return y;
}

template <class T>
double l1_oracle(const led::Tensor<T>& a, const led::Tensor<T>& b) {
    double s = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        s += std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    return s / static_cast<double>(a.numel());
}

template <class T>
double max_abs_diff(const led::Tensor<T>& a, const led::Tensor<T>& b) {
    double m = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) -
                                 static_cast<double>(b.data()[i])));
    return m;
}

// --- finite differences -----------------------------------------------------

struct FdReport {
    double max_rel_err = 0.0;
    int checked = 0;
};

// Central finite differences against reverse-mode gradients on >= n_coords
// random coordinates per parameter. loss_fn must rebuild the graph from the
// current parameter values on every call.
inline FdReport check_gradients_fd(std::vector<led::Tensor<double>> params,
                                   const std::function<led::Tensor<double>()>& loss_fn,
                                   led::Rng& rng, int n_coords = 32, double step = 1e-5) {
    for (auto& p : params) p.zero_grad();
    led::Tensor<double> loss = loss_fn();
    led::backward(loss);

    std::vector<std::vector<double>> grads;
    for (auto& p : params) grads.emplace_back(p.grad().begin(), p.grad().end());

    FdReport rep;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        const int n = static_cast<int>(std::min<std::int64_t>(n_coords, p.numel()));
        for (int c = 0; c < n; ++c) {
            const auto at = static_cast<std::size_t>(rng.uniform_int(0, p.numel() - 1));
            const double saved = p.data()[at];
            p.data()[at] = saved + step;
            const double f1 = loss_fn().item();
            p.data()[at] = saved - step;
            const double f2 = loss_fn().item();
            p.data()[at] = saved;
            const double fd = (f1 - f2) / (2.0 * step);
            rep.max_rel_err = std::max(rep.max_rel_err, rel_err(fd, grads[pi][at]));
            ++rep.checked;
        }
    }
    return rep;
}

} // namespace test_util
