#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "led/noise.hpp"
#include "led/rng.hpp"
#include "test_util.hpp"

using led::NoiseInstance;
using led::Rng;
using led::SensorLevels;
using led::Tensor;
using namespace test_util;

namespace {

struct Moments {
    double mean = 0, var = 0;
};

template <class T>
Moments moments(const Tensor<T>& t) {
    double s = 0;
    for (auto v : t.data()) s += static_cast<double>(v);
    const double mean = s / static_cast<double>(t.numel());
    double ss = 0;
    for (auto v : t.data()) {
        const double d = static_cast<double>(v) - mean;
        ss += d * d;
    }
    return {mean, ss / static_cast<double>(t.numel() - 1)};
}

} // namespace

TEST_CASE("tukey_lambda_quantile closed-form points") {
    CHECK(led::tukey_lambda_quantile(0.5, 0.7) == doctest::Approx(0.0));
    CHECK(led::tukey_lambda_quantile(0.5, 0.0) == doctest::Approx(0.0));
    CHECK(led::tukey_lambda_quantile(0.75, 1.0) == doctest::Approx(0.5));
    CHECK(led::tukey_lambda_quantile(0.9, 0.0) == doctest::Approx(std::log(9.0)).epsilon(1e-9));
    CHECK_THROWS_AS(led::tukey_lambda_quantile(0.0, 0.1), led::DataError);
    CHECK_THROWS_AS(led::tukey_lambda_quantile(1.0, 0.1), led::DataError);
}

TEST_CASE("tukey_lambda_quantile is monotone in p") {
    Rng rng(61);
    for (double lambda : {-0.3, 0.0, 0.1, 0.5, 1.0, 1.5}) {
        double prev = -1e300;
        for (int i = 1; i < 200; ++i) {
            const double q = led::tukey_lambda_quantile(i / 200.0, lambda);
            CHECK(q >= prev);
            prev = q;
        }
    }
}

TEST_CASE("tukey_lambda_std closed form") {
    CHECK(led::tukey_lambda_std(0.0) ==
          doctest::Approx(std::numbers::pi / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(led::tukey_lambda_std(1.0) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(led::tukey_lambda_std(-0.5), led::DataError);

    // Monte Carlo cross-check at lambda = 0.1
    Rng rng(67);
    const int n = 1'000'000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const double q = led::tukey_lambda_quantile(rng.uniform_open01(), 0.1);
        s += q;
        ss += q * q;
    }
    const double var = ss / n - (s / n) * (s / n);
    const double ref = led::tukey_lambda_std(0.1);
    CHECK(std::sqrt(var) == doctest::Approx(ref).epsilon(0.01));
}

TEST_CASE("sample_read_noise") {
    Rng rng(71);
    SUBCASE("sigma 0 gives the constant mu_c") {
        auto t = led::sample_read_noise<float>({16, 16}, 0.1, 1.5, 0.0, rng);
        for (auto v : t.data()) CHECK(v == 1.5f);
    }
    SUBCASE("moments at 1e6 samples") {
        auto t = led::sample_read_noise<double>({1000, 1000}, 0.1, 0.0, 2.0, rng);
        auto m = moments(t);
        CHECK(std::abs(m.mean) <= 3.0 * 2.0 / 1000.0); // 3 * sigma/sqrt(n)
        CHECK(std::sqrt(m.var) == doctest::Approx(2.0).epsilon(0.01));
    }
    SUBCASE("fixed seed reproduces bit-identically") {
        Rng r1(99), r2(99);
        auto a = led::sample_read_noise<float>({32, 32}, 0.15, 0.5, 2.0, r1);
        auto b = led::sample_read_noise<float>({32, 32}, 0.15, 0.5, 2.0, r2);
        for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
}

TEST_CASE("sample_shot") {
    Rng rng(73);
    SUBCASE("zero input stays zero") {
        auto z = Tensor<double>::zeros({64, 64});
        auto t = led::sample_shot(z, 4.0, rng);
        for (auto v : t.data()) CHECK(v == 0.0);
    }
    SUBCASE("mean and variance of Poisson scaling") {
        const double I = 100.0, K = 4.0;
        auto c = Tensor<double>::full({1000, 1000}, I);
        auto t = led::sample_shot(c, K, rng);
        auto m = moments(t);
        const double se = std::sqrt(K * I / 1e6);
        CHECK(std::abs(m.mean - I) <= 3.0 * se);
        CHECK(m.var == doctest::Approx(K * I).epsilon(0.02));
    }
    SUBCASE("values are exact multiples of K") {
        auto c = Tensor<double>::full({100}, 37.0);
        auto t = led::sample_shot(c, 1.7, rng);
        for (auto v : t.data()) {
            const double q = v / 1.7;
            CHECK(q == doctest::Approx(std::round(q)).epsilon(1e-9));
        }
    }
    SUBCASE("negative input rejected") {
        auto c = Tensor<double>::full({4}, -1.0);
        CHECK_THROWS_AS(led::sample_shot(c, 1.0, rng), led::DataError);
    }
}

TEST_CASE("sample_row_noise") {
    Rng rng(79);
    SUBCASE("sigma 0 gives zeros") {
        auto t = led::sample_row_noise<float>(8, 8, 0.0, rng);
        for (auto v : t.data()) CHECK(v == 0.f);
    }
    SUBCASE("rows are rank-1 along width") {
        auto t = led::sample_row_noise<double>(32, 17, 3.0, rng);
        for (int r = 0; r < 32; ++r)
            for (int c = 1; c < 17; ++c) CHECK(t.at(r, c) == t.at(r, 0));
    }
    SUBCASE("row std at 1e5 rows") {
        auto t = led::sample_row_noise<double>(100000, 2, 3.0, rng);
        std::vector<double> rows(100000);
        for (int r = 0; r < 100000; ++r) rows[static_cast<std::size_t>(r)] = t.at(r, 0);
        double s = 0, ss = 0;
        for (double v : rows) {
            s += v;
            ss += v * v;
        }
        const double var = ss / 100000.0 - (s / 100000.0) * (s / 100000.0);
        CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(0.02));
    }
}

TEST_CASE("sample_quant_noise") {
    Rng rng(83);
    auto t = led::sample_quant_noise<double>({1000, 1000}, rng);
    for (auto v : t.data()) {
        CHECK(v > -0.5);
        CHECK(v < 0.5);
    }
    auto m = moments(t);
    const double se = std::sqrt(1.0 / 12.0 / 1e6);
    CHECK(std::abs(m.mean) <= 3.0 * se);
    CHECK(m.var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("synthesize_noisy") {
    Rng rng(89);
    SensorLevels lv;
    SUBCASE("all components disabled, ratio 1: exact passthrough") {
        auto clean = rand_tensor<double>(rng, {16, 16}, 0.0, 1.0);
        NoiseInstance inst;
        inst.k = 1.0;
        inst.enabled = {false, false, false, false};
        auto out = led::synthesize_noisy(clean, inst, lv, rng);
        for (std::int64_t i = 0; i < clean.numel(); ++i)
            CHECK(out.data()[i] == doctest::Approx(clean.data()[i]).epsilon(1e-12));
    }
    SUBCASE("all disabled, ratio 100: exact 1/100 scaling") {
        auto clean = rand_tensor<double>(rng, {16, 16}, 0.0, 1.0);
        NoiseInstance inst;
        inst.ratio = 100.0;
        inst.enabled = {false, false, false, false};
        auto out = led::synthesize_noisy(clean, inst, lv, rng);
        for (std::int64_t i = 0; i < clean.numel(); ++i)
            CHECK(out.data()[i] == doctest::Approx(clean.data()[i] / 100.0).epsilon(1e-12));
    }
    SUBCASE("shot only: amplified mean matches clean") {
        auto clean = Tensor<double>::full({1000, 1000}, 0.25);
        NoiseInstance inst;
        inst.k = 2.0;
        inst.ratio = 50.0;
        inst.enabled = {true, false, false, false};
        auto out = led::synthesize_noisy(clean, inst, lv, rng);
        auto m = moments(out);
        // mean(out)*ratio ~ mean(clean); SE of the Poisson mean, normalized
        const double xadu = 0.25 * lv.span() / 50.0;
        const double se = std::sqrt(inst.k * xadu / 1e6) / lv.span() * 50.0;
        CHECK(std::abs(m.mean * 50.0 - 0.25) <= 3.0 * se);
    }
    SUBCASE("clean outside [0,1] rejected") {
        auto clean = Tensor<double>::full({4, 4}, 1.5);
        NoiseInstance inst;
        CHECK_THROWS_AS(led::synthesize_noisy(clean, inst, lv, rng), led::DataError);
    }
    SUBCASE("identical seeds give bit-identical frames") {
        auto clean = rand_tensor<float>(rng, {16, 16}, 0.0, 1.0);
        NoiseInstance inst;
        inst.k = 0.5;
        inst.sigma_tl = 2.0;
        inst.sigma_r = 1.0;
        inst.ratio = 100.0;
        Rng r1(7), r2(7);
        auto a = led::synthesize_noisy(clean, inst, lv, r1);
        auto b = led::synthesize_noisy(clean, inst, lv, r2);
        for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
    }
}
