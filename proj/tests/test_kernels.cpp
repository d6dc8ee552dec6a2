#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "led/kernels.hpp"
#include "led/rng.hpp"

// Equivalence between the scalar reference kernels and the AVX2 variants.
// Results may differ by reassociation/FMA rounding only, so comparisons are
// tolerance-based and scale-aware.

namespace k = led::kernels;
using led::Rng;

namespace {

template <class T>
std::vector<T> randv(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return v;
}

template <class T>
double max_rel(const std::vector<T>& a, const std::vector<T>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        m = std::max(m, std::abs(x - y) / std::max({1.0, std::abs(x), std::abs(y)}));
    }
    return m;
}

template <class T> constexpr double tol();
template <> constexpr double tol<float>() { return 2e-5; }
template <> constexpr double tol<double>() { return 1e-12; }

// widths chosen to cover the vector body and scalar tails for both lane counts
const int kWidths[] = {1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 31, 32};

template <class T>
void run_equivalence() {
    if (!k::avx2_supported()) return;
    const k::Table<T> s = k::detail::scalar_table<T>();
    const k::Table<T> v = k::detail::avx2_table<T>();
    Rng rng(123);

    for (int w : kWidths) {
        const int h = 6, cin = 3, cout = 2;
        const std::size_t plane_p = static_cast<std::size_t>(h + 2) * (w + 2);
        const std::size_t plane_o = static_cast<std::size_t>(h) * w;

        auto xpad = randv<T>(rng, cin * plane_p);
        auto w9 = randv<T>(rng, cin * 9);
        auto wfull = randv<T>(rng, static_cast<std::size_t>(cout) * cin * 9);
        auto g = randv<T>(rng, cout * plane_o);

        // conv3x3_plane
        std::vector<T> ys(plane_o), yv(plane_o);
        s.conv3x3_plane(xpad.data(), cin, h, w, w9.data(), T(0.3), ys.data());
        v.conv3x3_plane(xpad.data(), cin, h, w, w9.data(), T(0.3), yv.data());
        CHECK(max_rel(ys, yv) < tol<T>());

        // conv3x3_gxpad_plane
        std::vector<T> dxs(plane_p, T(0)), dxv(plane_p, T(0));
        s.conv3x3_gxpad_plane(g.data(), cout, h, w, wfull.data(), cin, 1, dxs.data());
        v.conv3x3_gxpad_plane(g.data(), cout, h, w, wfull.data(), cin, 1, dxv.data());
        CHECK(max_rel(dxs, dxv) < tol<T>());

        // conv3x3_gw_plane
        std::vector<T> dws(9, T(0)), dwv(9, T(0));
        s.conv3x3_gw_plane(g.data(), xpad.data(), h, w, dws.data());
        v.conv3x3_gw_plane(g.data(), xpad.data(), h, w, dwv.data());
        CHECK(max_rel(dws, dwv) < tol<T>());
    }

    for (std::size_t n : {std::size_t(1), std::size_t(7), std::size_t(64), std::size_t(1000),
                          std::size_t(4097)}) {
        auto a = randv<T>(rng, n);
        auto b = randv<T>(rng, n);

        std::vector<T> ys(n), yv(n);
        s.affine(a.data(), T(1.7), T(-0.4), ys.data(), static_cast<std::int64_t>(n));
        v.affine(a.data(), T(1.7), T(-0.4), yv.data(), static_cast<std::int64_t>(n));
        CHECK(max_rel(ys, yv) < tol<T>());

        ys = b;
        yv = b;
        s.axpy(T(0.9), a.data(), ys.data(), static_cast<std::int64_t>(n));
        v.axpy(T(0.9), a.data(), yv.data(), static_cast<std::int64_t>(n));
        CHECK(max_rel(ys, yv) < tol<T>());

        s.add2(a.data(), b.data(), ys.data(), static_cast<std::int64_t>(n));
        v.add2(a.data(), b.data(), yv.data(), static_cast<std::int64_t>(n));
        CHECK(max_rel(ys, yv) < tol<T>());

        s.leaky_fwd(a.data(), T(0.2), ys.data(), static_cast<std::int64_t>(n));
        v.leaky_fwd(a.data(), T(0.2), yv.data(), static_cast<std::int64_t>(n));
        CHECK(max_rel(ys, yv) < tol<T>());

        std::fill(ys.begin(), ys.end(), T(0));
        std::fill(yv.begin(), yv.end(), T(0));
        s.leaky_bwd(a.data(), b.data(), T(0.2), ys.data(), static_cast<std::int64_t>(n));
        v.leaky_bwd(a.data(), b.data(), T(0.2), yv.data(), static_cast<std::int64_t>(n));
        CHECK(max_rel(ys, yv) < tol<T>());

        const double scale = std::max<double>(1.0, static_cast<double>(n) / 100.0);
        CHECK(std::abs(s.sum(a.data(), static_cast<std::int64_t>(n)) -
                       v.sum(a.data(), static_cast<std::int64_t>(n))) < tol<T>() * scale);
        CHECK(std::abs(s.dot(a.data(), b.data(), static_cast<std::int64_t>(n)) -
                       v.dot(a.data(), b.data(), static_cast<std::int64_t>(n))) < tol<T>() * scale);
        CHECK(std::abs(s.sum_abs_diff(a.data(), b.data(), static_cast<std::int64_t>(n)) -
                       v.sum_abs_diff(a.data(), b.data(), static_cast<std::int64_t>(n))) <
              tol<T>() * scale);

        // adam
        std::vector<T> p1 = a, p2 = a, m1(n, T(0)), m2(n, T(0)), v1(n, T(0)), v2(n, T(0));
        s.adam_update(p1.data(), b.data(), m1.data(), v1.data(), static_cast<std::int64_t>(n),
                      T(0.9), T(0.999), T(1e-8), T(0.01), T(0.1), T(0.001));
        v.adam_update(p2.data(), b.data(), m2.data(), v2.data(), static_cast<std::int64_t>(n),
                      T(0.9), T(0.999), T(1e-8), T(0.01), T(0.1), T(0.001));
        CHECK(max_rel(p1, p2) < tol<T>());
    }
}

} // namespace

TEST_CASE("active table selection") {
    const k::Isa before = k::active();
    CHECK(k::select_by_name("scalar"));
    CHECK(k::active() == k::Isa::scalar);
    CHECK(!k::select_by_name("bogus"));
    if (k::avx2_supported()) {
        CHECK(k::select_by_name("avx2"));
        CHECK(k::active() == k::Isa::avx2);
    }
    CHECK(k::select_by_name("auto"));
    k::select(before);
}

TEST_CASE("scalar vs avx2: float") {
    if (!k::avx2_supported()) {
        MESSAGE("AVX2 not available; equivalence suite skipped");
        return;
    }
    run_equivalence<float>();
}

TEST_CASE("scalar vs avx2: double") {
    if (!k::avx2_supported()) return;
    run_equivalence<double>();
}
