#if LED_HAVE_AVX2

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "led/kernels.hpp"

// AVX2+FMA variants. One templated implementation over a thin register
// wrapper covers float (8 lanes) and double (4 lanes). Tails run scalar; a
// vector load near a row end would read past the padded buffer.

namespace led::kernels {
namespace {

template <class T> struct Vec;

template <> struct Vec<float> {
    using reg = __m256;
    static constexpr int width = 8;
    static reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
    static reg bcast(float v) { return _mm256_set1_ps(v); }
    static reg zero() { return _mm256_setzero_ps(); }
    static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
    static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
    static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
    static float hsum(reg v) {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        __m128 sh = _mm_movehl_ps(lo, lo);
        lo = _mm_add_ps(lo, sh);
        sh = _mm_shuffle_ps(lo, lo, 0x1);
        lo = _mm_add_ss(lo, sh);
        return _mm_cvtss_f32(lo);
    }
};

template <> struct Vec<double> {
    using reg = __m256d;
    static constexpr int width = 4;
    static reg load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
    static reg bcast(double v) { return _mm256_set1_pd(v); }
    static reg zero() { return _mm256_setzero_pd(); }
    static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
    static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
    static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
    static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
    static double hsum(reg v) {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        __m128d sh = _mm_unpackhi_pd(lo, lo);
        lo = _mm_add_sd(lo, sh);
        return _mm_cvtsd_f64(lo);
    }
};

template <class T>
void conv3x3_plane(const T* xpad, int cin, int h, int w, const T* w9, T bias, T* y) {
    using V = Vec<T>;
    const std::int64_t wp = w + 2;
    const std::int64_t plane = static_cast<std::int64_t>(h + 2) * wp;
    const int wv = w - w % V::width;
    for (int r = 0; r < h; ++r) {
        T* yrow = y + static_cast<std::int64_t>(r) * w;
        for (int c = 0; c < wv; c += V::width) {
            typename V::reg acc = V::bcast(bias);
            for (int ci = 0; ci < cin; ++ci) {
                const T* base = xpad + ci * plane + static_cast<std::int64_t>(r) * wp + c;
                const T* k = w9 + ci * 9;
                for (int u = 0; u < 3; ++u) {
                    const T* xr = base + static_cast<std::int64_t>(u) * wp;
                    acc = V::fma(V::bcast(k[u * 3 + 0]), V::load(xr + 0), acc);
                    acc = V::fma(V::bcast(k[u * 3 + 1]), V::load(xr + 1), acc);
                    acc = V::fma(V::bcast(k[u * 3 + 2]), V::load(xr + 2), acc);
                }
            }
            V::store(yrow + c, acc);
        }
        for (int c = wv; c < w; ++c) {
            T acc = bias;
            for (int ci = 0; ci < cin; ++ci) {
                const T* base = xpad + ci * plane + static_cast<std::int64_t>(r) * wp + c;
                const T* k = w9 + ci * 9;
                for (int u = 0; u < 3; ++u) {
                    const T* xr = base + static_cast<std::int64_t>(u) * wp;
                    acc += k[u * 3 + 0] * xr[0] + k[u * 3 + 1] * xr[1] + k[u * 3 + 2] * xr[2];
                }
            }
            yrow[c] = acc;
        }
    }
}

template <class T>
void conv3x3_gxpad_plane(const T* g, int cout, int h, int w, const T* wfull, int cin, int ci,
                         T* dxpad) {
    using V = Vec<T>;
    const std::int64_t wp = w + 2;
    const int wv = w - w % V::width;
    for (int co = 0; co < cout; ++co) {
        const T* k = wfull + (static_cast<std::int64_t>(co) * cin + ci) * 9;
        const T* gp = g + static_cast<std::int64_t>(co) * h * w;
        for (int r = 0; r < h; ++r) {
            const T* grow = gp + static_cast<std::int64_t>(r) * w;
            for (int u = 0; u < 3; ++u) {
                T* drow = dxpad + static_cast<std::int64_t>(r + u) * wp;
                for (int v = 0; v < 3; ++v) {
                    const T kv = k[u * 3 + v];
                    const typename V::reg kvv = V::bcast(kv);
                    for (int c = 0; c < wv; c += V::width) {
                        V::store(drow + c + v, V::fma(kvv, V::load(grow + c), V::load(drow + c + v)));
                    }
                    for (int c = wv; c < w; ++c) drow[c + v] += kv * grow[c];
                }
            }
        }
    }
}

template <class T>
void conv3x3_gw_plane(const T* g, const T* xpad_ci, int h, int w, T* dw9) {
    using V = Vec<T>;
    const std::int64_t wp = w + 2;
    const int wv = w - w % V::width;
    for (int u = 0; u < 3; ++u) {
        for (int v = 0; v < 3; ++v) {
            typename V::reg accv = V::zero();
            T acc = T(0);
            for (int r = 0; r < h; ++r) {
                const T* grow = g + static_cast<std::int64_t>(r) * w;
                const T* xrow = xpad_ci + static_cast<std::int64_t>(r + u) * wp + v;
                for (int c = 0; c < wv; c += V::width) {
                    accv = V::fma(V::load(grow + c), V::load(xrow + c), accv);
                }
                for (int c = wv; c < w; ++c) acc += grow[c] * xrow[c];
            }
            dw9[u * 3 + v] += V::hsum(accv) + acc;
        }
    }
}

template <class T>
void affine(const T* x, T a, T b, T* y, std::int64_t n) {
    using V = Vec<T>;
    const typename V::reg av = V::bcast(a), bv = V::bcast(b);
    std::int64_t i = 0;
    for (; i + V::width <= n; i += V::width) V::store(y + i, V::fma(av, V::load(x + i), bv));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

template <class T>
void axpy(T a, const T* x, T* y, std::int64_t n) {
    using V = Vec<T>;
    const typename V::reg av = V::bcast(a);
    std::int64_t i = 0;
    for (; i + V::width <= n; i += V::width)
        V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

template <class T>
void add2(const T* a, const T* b, T* y, std::int64_t n) {
    using V = Vec<T>;
    std::int64_t i = 0;
    for (; i + V::width <= n; i += V::width) V::store(y + i, V::add(V::load(a + i), V::load(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

// slope in (0,1): max(x, slope*x) selects x for x >= 0 and slope*x otherwise.
template <class T>
void leaky_fwd(const T* x, T slope, T* y, std::int64_t n) {
    using V = Vec<T>;
    const typename V::reg sv = V::bcast(slope);
    std::int64_t i = 0;
    for (; i + V::width <= n; i += V::width) {
        const typename V::reg xv = V::load(x + i);
        V::store(y + i, V::max(xv, V::mul(sv, xv)));
    }
    for (; i < n; ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
}

template <class T>
void leaky_bwd(const T* x, const T* gy, T slope, T* gx, std::int64_t n) {
    // subgradient at 0 is the slope
    for (std::int64_t i = 0; i < n; ++i) gx[i] += gy[i] * (x[i] > T(0) ? T(1) : slope);
}

constexpr std::int64_t kChunk = 4096;

template <class T>
T sum(const T* x, std::int64_t n) {
    using V = Vec<T>;
    T total = T(0);
    for (std::int64_t b = 0; b < n; b += kChunk) {
        const std::int64_t e = b + kChunk < n ? b + kChunk : n;
        typename V::reg accv = V::zero();
        std::int64_t i = b;
        for (; i + V::width <= e; i += V::width) accv = V::add(accv, V::load(x + i));
        T part = V::hsum(accv);
        for (; i < e; ++i) part += x[i];
        total += part;
    }
    return total;
}

template <class T>
T dot(const T* a, const T* b, std::int64_t n) {
    using V = Vec<T>;
    T total = T(0);
    for (std::int64_t c = 0; c < n; c += kChunk) {
        const std::int64_t e = c + kChunk < n ? c + kChunk : n;
        typename V::reg accv = V::zero();
        std::int64_t i = c;
        for (; i + V::width <= e; i += V::width)
            accv = V::fma(V::load(a + i), V::load(b + i), accv);
        T part = V::hsum(accv);
        for (; i < e; ++i) part += a[i] * b[i];
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
Table<T> avx2_table() {
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

template Table<float> avx2_table<float>();
template Table<double> avx2_table<double>();

} // namespace detail
} // namespace led::kernels

#endif // LED_HAVE_AVX2
