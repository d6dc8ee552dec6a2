#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "led/camera.hpp"
#include "led/rng.hpp"

using led::CameraParams;
using led::ParameterSpace;
using led::Rng;

namespace {

// OLS slope/intercept plus standard errors, for recovery checks.
struct Ols {
    double a, b, se_a, se_b;
};

Ols ols(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double a = sxy / sxx;
    const double b = my - a * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - a * x[i] - b;
        ss += r * r;
    }
    const double s2 = ss / (n - 2.0);
    return {a, b, std::sqrt(s2 / sxx), std::sqrt(s2 * (1.0 / n + mx * mx / sxx))};
}

} // namespace

TEST_CASE("generate_virtual_cameras bisection points") {
    ParameterSpace unit;
    unit.lambda = {0.0, 1.0};
    SUBCASE("m=1 takes the midpoint") {
        auto cams = led::generate_virtual_cameras(1, unit);
        REQUIRE(cams.size() == 1);
        CHECK(cams[0].lambda == doctest::Approx(0.5));
        CHECK(cams[0].id == "v1");
    }
    SUBCASE("m=4 takes equally spaced interior points") {
        auto cams = led::generate_virtual_cameras(4, unit);
        REQUIRE(cams.size() == 4);
        for (int k = 0; k < 4; ++k)
            CHECK(cams[static_cast<std::size_t>(k)].lambda == doctest::Approx(0.2 * (k + 1)));
    }
    SUBCASE("all cameras over the default space satisfy invariants") {
        auto cams = led::generate_virtual_cameras(5, ParameterSpace{});
        for (const auto& c : cams) CHECK_NOTHROW(c.validate());
    }
    SUBCASE("coordinates strictly increase with k") {
        auto cams = led::generate_virtual_cameras(6, ParameterSpace{});
        for (std::size_t i = 1; i < cams.size(); ++i) {
            CHECK(cams[i].k_min > cams[i - 1].k_min);
            CHECK(cams[i].lambda > cams[i - 1].lambda);
            CHECK(cams[i].b_r > cams[i - 1].b_r);
        }
    }
    SUBCASE("m=0 rejected") {
        CHECK_THROWS_AS(led::generate_virtual_cameras(0, ParameterSpace{}), led::DataError);
    }
}

TEST_CASE("sample_noise_instance") {
    SUBCASE("degenerate camera gives a deterministic instance") {
        CameraParams c;
        c.k_min = c.k_max = 2.0;
        c.sigma_hat_tl = 0.0;
        c.sigma_hat_r = 0.0;
        Rng rng(5);
        auto inst = led::sample_noise_instance(c, 100.0, rng);
        CHECK(inst.k == doctest::Approx(2.0));
        CHECK(inst.sigma_tl == doctest::Approx(std::exp(c.a_tl * std::log(2.0) + c.b_tl)));
        CHECK(inst.sigma_r == doctest::Approx(std::exp(c.a_r * std::log(2.0) + c.b_r)));
        CHECK(inst.lambda == c.lambda);
        CHECK(inst.mu_c == c.mu_c);
        CHECK(inst.ratio == 100.0);
    }
    SUBCASE("K stays within [k_min, k_max]") {
        CameraParams c;
        c.k_min = 0.2;
        c.k_max = 8.0;
        Rng rng(7);
        for (int i = 0; i < 2000; ++i) {
            auto inst = led::sample_noise_instance(c, 1.0, rng);
            CHECK(inst.k >= 0.2);
            CHECK(inst.k <= 8.0);
        }
    }
    SUBCASE("joint law recovery over 1e4 instances") {
        CameraParams c;
        c.k_min = 0.1;
        c.k_max = 10.0;
        c.a_tl = 0.8;
        c.b_tl = -1.2;
        c.sigma_hat_tl = 0.05;
        Rng rng(11);
        std::vector<double> lk, ls;
        for (int i = 0; i < 10000; ++i) {
            auto inst = led::sample_noise_instance(c, 1.0, rng);
            lk.push_back(std::log(inst.k));
            ls.push_back(std::log(inst.sigma_tl));
        }
        auto fit = ols(lk, ls);
        CHECK(std::abs(fit.a - 0.8) <= 3.0 * fit.se_a);
        CHECK(std::abs(fit.b - (-1.2)) <= 3.0 * fit.se_b);

        // log K uniform on [log k_min, log k_max]: KS-style check
        std::sort(lk.begin(), lk.end());
        const double lo = std::log(0.1), hi = std::log(10.0);
        double d = 0;
        for (std::size_t i = 0; i < lk.size(); ++i) {
            const double cdf = (lk[i] - lo) / (hi - lo);
            const double e1 = static_cast<double>(i + 1) / static_cast<double>(lk.size());
            const double e0 = static_cast<double>(i) / static_cast<double>(lk.size());
            d = std::max({d, std::abs(cdf - e1), std::abs(cdf - e0)});
        }
        CHECK(d * std::sqrt(10000.0) < 1.95); // ~alpha 0.001 critical value
    }
    SUBCASE("conditional law at fixed K") {
        CameraParams c;
        c.k_min = c.k_max = 3.0;
        c.a_tl = 0.7;
        c.b_tl = 0.3;
        c.sigma_hat_tl = 0.15;
        Rng rng(13);
        std::vector<double> ls;
        for (int i = 0; i < 100000; ++i)
            ls.push_back(std::log(led::sample_noise_instance(c, 1.0, rng).sigma_tl));
        double s = 0, ss = 0;
        for (double v : ls) {
            s += v;
            ss += v * v;
        }
        const double mean = s / 1e5;
        const double var = ss / 1e5 - mean * mean;
        CHECK(mean == doctest::Approx(0.7 * std::log(3.0) + 0.3).epsilon(0.02));
        CHECK(std::sqrt(var) == doctest::Approx(0.15).epsilon(0.02));
    }
}

TEST_CASE("fit_gain_line") {
    SUBCASE("two points give the exact line") {
        const std::vector<std::pair<double, double>> pts{{1.0, std::exp(1.0)},
                                                         {std::exp(1.0), std::exp(3.0)}};
        auto fit = led::fit_gain_line(pts);
        CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.residual_rms <= 1e-10);
    }
    SUBCASE("one point is underdetermined") {
        CHECK_THROWS_AS(led::fit_gain_line({{1.0, 1.0}}), led::UnderdeterminedError);
    }
    SUBCASE("equal gains are degenerate") {
        CHECK_THROWS_AS(led::fit_gain_line({{2.0, 1.0}, {2.0, 3.0}}), led::DegenerateError);
    }
    SUBCASE("synthetic regression recovery") {
        Rng rng(17);
        std::vector<std::pair<double, double>> pts;
        std::vector<double> lk, ls;
        for (int i = 0; i < 100; ++i) {
            const double x = rng.uniform(-2.0, 2.0);
            const double y = 0.8 * x - 1.2 + rng.normal(0.0, 0.05);
            pts.emplace_back(std::exp(x), std::exp(y));
            lk.push_back(x);
            ls.push_back(y);
        }
        auto fit = led::fit_gain_line(pts);
        auto ref = ols(lk, ls);
        CHECK(std::abs(fit.slope - 0.8) <= 3.0 * ref.se_a);
        CHECK(std::abs(fit.intercept - (-1.2)) <= 3.0 * ref.se_b);
    }
    SUBCASE("two sigma_hat=0 instances recover the camera line exactly") {
        CameraParams c;
        c.k_min = 0.1;
        c.k_max = 10.0;
        c.a_tl = 0.85;
        c.b_tl = -0.4;
        c.sigma_hat_tl = 0.0;
        Rng rng(19);
        auto i1 = led::sample_noise_instance(c, 1.0, rng);
        auto i2 = led::sample_noise_instance(c, 1.0, rng);
        REQUIRE(std::abs(std::log(i1.k) - std::log(i2.k)) > 1e-6);
        auto fit = led::fit_gain_line({{i1.k, i1.sigma_tl}, {i2.k, i2.sigma_tl}});
        CHECK(std::abs(fit.slope - 0.85) <= 1e-10);
        CHECK(std::abs(fit.intercept - (-0.4)) <= 1e-10);
    }
}

TEST_CASE("select_fewshot_pairs") {
    using led::FewshotCandidate;
    using led::PairSelectMode;
    SUBCASE("two candidates: both modes return both") {
        std::vector<FewshotCandidate> c{{100.0, 1.0}, {100.0, 2.0}};
        auto a = led::select_fewshot_pairs(c, 2, PairSelectMode::spread);
        auto b = led::select_fewshot_pairs(c, 2, PairSelectMode::similar);
        CHECK(a.size() == 2);
        CHECK(b.size() == 2);
    }
    SUBCASE("spread takes the max gap, similar the min gap") {
        // log K = {0, 0.1, 1.0}
        std::vector<FewshotCandidate> c{{100.0, std::exp(0.0)},
                                        {100.0, std::exp(0.1)},
                                        {100.0, std::exp(1.0)}};
        auto sp = led::select_fewshot_pairs(c, 2, PairSelectMode::spread);
        REQUIRE(sp.size() == 2);
        CHECK(c[sp[0]].k == doctest::Approx(1.0));
        CHECK(c[sp[1]].k == doctest::Approx(std::exp(1.0)));
        auto si = led::select_fewshot_pairs(c, 2, PairSelectMode::similar);
        REQUIRE(si.size() == 2);
        CHECK(c[si[0]].k == doctest::Approx(1.0));
        CHECK(c[si[1]].k == doctest::Approx(std::exp(0.1)));
    }
    SUBCASE("groups are per ratio and insufficient groups fail") {
        std::vector<FewshotCandidate> c{{100.0, 1.0}, {100.0, 2.0}, {250.0, 1.5}};
        CHECK_THROWS_AS(led::select_fewshot_pairs(c, 2, PairSelectMode::spread), led::DataError);
        std::vector<FewshotCandidate> ok{{100.0, 1.0}, {100.0, 2.0}, {250.0, 1.5}, {250.0, 9.0}};
        auto sel = led::select_fewshot_pairs(ok, 2, PairSelectMode::spread);
        CHECK(sel.size() == 4);
    }
}

TEST_CASE("camera list JSON roundtrip") {
    auto dir = std::filesystem::temp_directory_path() / "led_test_camera";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "cams.jsonl").string();
    auto cams = led::generate_virtual_cameras(3, ParameterSpace{});
    led::write_camera_list(path, cams);
    auto back = led::read_camera_list(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].id == cams[i].id);
        CHECK(back[i].k_min == cams[i].k_min);
        CHECK(back[i].sigma_hat_r == cams[i].sigma_hat_r);
    }
}
