#pragma once

#include <cstdint>
#include <string_view>

namespace led::kernels {

enum class Isa { scalar = 0, avx2 = 1 };

/// Inner-loop primitives behind the operator set. Two implementations exist:
/// portable scalar reference kernels and AVX2 variants (float and double).
/// The active table is chosen at runtime; both must agree within floating
/// point reassociation tolerance (see tests/test_kernels.cpp).
///
/// Convolution kernels work on single (sample, channel) planes of a
/// pre-padded input laid out as rows of width w + 2.
template <class T>
struct Table {
    // y[h*w] = bias + sum_{ci,u,v} w9[ci*9+u*3+v] * xpad[ci](h+u, x+v)
    void (*conv3x3_plane)(const T* xpad, int cin, int h, int w, const T* w9, T bias, T* y);
    // dxpad(h+u, x+v) += sum_{co} g[co](h, x) * wfull[co][ci][u][v]; dxpad is one plane
    void (*conv3x3_gxpad_plane)(const T* g, int cout, int h, int w, const T* wfull, int cin,
                                int ci, T* dxpad);
    // dw9[u*3+v] += sum_{h,x} g(h, x) * xpad_ci(h+u, x+v)
    void (*conv3x3_gw_plane)(const T* g, const T* xpad_ci, int h, int w, T* dw9);

    void (*affine)(const T* x, T a, T b, T* y, std::int64_t n);            // y = a*x + b
    void (*axpy)(T a, const T* x, T* y, std::int64_t n);                   // y += a*x
    void (*add2)(const T* a, const T* b, T* y, std::int64_t n);            // y = a + b
    void (*leaky_fwd)(const T* x, T slope, T* y, std::int64_t n);
    void (*leaky_bwd)(const T* x, const T* gy, T slope, T* gx, std::int64_t n); // gx += gy * f'(x)

    T (*sum)(const T* x, std::int64_t n);
    T (*dot)(const T* a, const T* b, std::int64_t n);
    T (*sum_abs_diff)(const T* a, const T* b, std::int64_t n);
    void (*sign_diff_accum)(const T* a, const T* b, T s, T* g, std::int64_t n); // g += s*sign(a-b)

    // Bias-corrected Adam; bc1 = 1 - beta1^t, bc2 = 1 - beta2^t.
    void (*adam_update)(T* p, const T* g, T* m, T* v, std::int64_t n, T beta1, T beta2, T eps,
                        T lr, T bc1, T bc2);
};

template <class T>
const Table<T>& table();

bool avx2_supported();
Isa active();
void select(Isa isa);
// "auto" | "scalar" | "avx2"; returns false on unknown or unsupported name.
bool select_by_name(std::string_view name);
const char* isa_name(Isa isa);

namespace detail {
template <class T> Table<T> scalar_table();
#if LED_HAVE_AVX2
template <class T> Table<T> avx2_table();
#endif
} // namespace detail

} // namespace led::kernels
