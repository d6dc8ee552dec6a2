#include <cmath>
#include <cstdint>

#include "led/kernels.hpp"

// Reference kernels. Plain loops, no manual vectorization; these define the
// semantics the SIMD variants are tested against.

namespace led::kernels {
namespace {

template <class T>
void conv3x3_plane(const T* xpad, int cin, int h, int w, const T* w9, T bias, T* y) {
    const std::int64_t wp = w + 2;
    for (int r = 0; r < h; ++r) {
        T* yrow = y + static_cast<std::int64_t>(r) * w;
        for (int c = 0; c < w; ++c) yrow[c] = bias;
        for (int ci = 0; ci < cin; ++ci) {
            const T* plane = xpad + static_cast<std::int64_t>(ci) * (h + 2) * wp;
            const T* k = w9 + ci * 9;
            for (int u = 0; u < 3; ++u) {
                const T* xrow = plane + static_cast<std::int64_t>(r + u) * wp;
                const T k0 = k[u * 3 + 0], k1 = k[u * 3 + 1], k2 = k[u * 3 + 2];
                for (int c = 0; c < w; ++c) {
                    yrow[c] += k0 * xrow[c] + k1 * xrow[c + 1] + k2 * xrow[c + 2];
                }
            }
        }
    }
}

template <class T>
void conv3x3_gxpad_plane(const T* g, int cout, int h, int w, const T* wfull, int cin, int ci,
                         T* dxpad) {
    const std::int64_t wp = w + 2;
    for (int co = 0; co < cout; ++co) {
        const T* k = wfull + (static_cast<std::int64_t>(co) * cin + ci) * 9;
        const T* gp = g + static_cast<std::int64_t>(co) * h * w;
        for (int r = 0; r < h; ++r) {
            const T* grow = gp + static_cast<std::int64_t>(r) * w;
            for (int u = 0; u < 3; ++u) {
                T* drow = dxpad + static_cast<std::int64_t>(r + u) * wp;
                for (int v = 0; v < 3; ++v) {
                    const T kv = k[u * 3 + v];
                    if (kv == T(0)) continue;
                    for (int c = 0; c < w; ++c) drow[c + v] += kv * grow[c];
                }
            }
        }
    }
}

template <class T>
void conv3x3_gw_plane(const T* g, const T* xpad_ci, int h, int w, T* dw9) {
    const std::int64_t wp = w + 2;
    for (int u = 0; u < 3; ++u) {
        for (int v = 0; v < 3; ++v) {
            T acc = T(0);
            for (int r = 0; r < h; ++r) {
                const T* grow = g + static_cast<std::int64_t>(r) * w;
                const T* xrow = xpad_ci + static_cast<std::int64_t>(r + u) * wp + v;
                for (int c = 0; c < w; ++c) acc += grow[c] * xrow[c];
            }
            dw9[u * 3 + v] += acc;
        }
    }
}

template <class T>
void affine(const T* x, T a, T b, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

template <class T>
void axpy(T a, const T* x, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void add2(const T* a, const T* b, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <class T>
void leaky_fwd(const T* x, T slope, T* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_bwd(const T* x, const T* gy, T slope, T* gx, std::int64_t n) {
    // subgradient at 0 is the slope
    for (std::int64_t i = 0; i < n; ++i) gx[i] += gy[i] * (x[i] > T(0) ? T(1) : slope);
}

// Reductions run over fixed 4096-element chunks so the summation order never
// depends on caller-side threading.
constexpr std::int64_t kChunk = 4096;

template <class T>
T sum(const T* x, std::int64_t n) {
    T total = T(0);
    for (std::int64_t b = 0; b < n; b += kChunk) {
        const std::int64_t e = b + kChunk < n ? b + kChunk : n;
        T part = T(0);
        for (std::int64_t i = b; i < e; ++i) part += x[i];
        total += part;
    }
    return total;
}

template <class T>
T dot(const T* a, const T* b, std::int64_t n) {
    T total = T(0);
    for (std::int64_t c = 0; c < n; c += kChunk) {
        const std::int64_t e = c + kChunk < n ? c + kChunk : n;
        T part = T(0);
        for (std::int64_t i = c; i < e; ++i) part += a[i] * b[i];
        total += part;
    }
    return total;
}

template <class T>
T sum_abs_diff(const T* a, const T* b, std::int64_t n) {
    T total = T(0);
    for (std::int64_t c = 0; c < n; c += kChunk) {
        const std::int64_t e = c + kChunk < n ? c + kChunk : n;
        T part = T(0);
        for (std::int64_t i = c; i < e; ++i) part += std::abs(a[i] - b[i]);
        total += part;
    }
    return total;
}

template <class T>
void sign_diff_accum(const T* a, const T* b, T s, T* g, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) {
        const T d = a[i] - b[i];
        g[i] += d > T(0) ? s : (d < T(0) ? -s : T(0));
    }
}

template <class T>
void adam_update(T* p, const T* g, T* m, T* v, std::int64_t n, T beta1, T beta2, T eps, T lr,
                 T bc1, T bc2) {
    for (std::int64_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

namespace detail {

template <class T>
Table<T> scalar_table() {
    Table<T> t;
    t.conv3x3_plane = &conv3x3_plane<T>;
    t.conv3x3_gxpad_plane = &conv3x3_gxpad_plane<T>;
    t.conv3x3_gw_plane = &conv3x3_gw_plane<T>;
    t.affine = &affine<T>;
    t.axpy = &axpy<T>;
    t.add2 = &add2<T>;
    t.leaky_fwd = &leaky_fwd<T>;
    t.leaky_bwd = &leaky_bwd<T>;
    t.sum = &sum<T>;
    t.dot = &dot<T>;
    t.sum_abs_diff = &sum_abs_diff<T>;
    t.sign_diff_accum = &sign_diff_accum<T>;
    t.adam_update = &adam_update<T>;
    return t;
}

template Table<float> scalar_table<float>();
template Table<double> scalar_table<double>();

} // namespace detail
} // namespace led::kernels
