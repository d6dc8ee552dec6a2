#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "led/adam.hpp"
#include "led/ops.hpp"
#include "led/rng.hpp"
#include "test_util.hpp"

using led::Rng;
using led::Tensor;
namespace ops = led::ops;
using namespace test_util;

TEST_CASE("tensor basics and invariants") {
    auto t = Tensor<float>::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor<float>::zeros({0, 3}), led::ShapeError);
    CHECK_THROWS_AS(Tensor<float>::from_data({2, 2}, {1.f, 2.f}), led::ShapeError);
    t.at(1, 2) = 5.f;
    CHECK(t.data()[5] == 5.f);
    CHECK_THROWS_AS(t.item(), led::ShapeError);
    CHECK(Tensor<float>::scalar(3.f).item() == 3.f);
}

TEST_CASE("conv3x3 identity kernel is the identity map exactly") {
    Rng rng(7);
    const int c = 3;
    auto x = rand_tensor<float>(rng, {2, c, 5, 6});
    auto w = Tensor<float>::zeros({c, c, 3, 3});
    for (int i = 0; i < c; ++i) w.at(i, i, 1, 1) = 1.f;
    auto b = Tensor<float>::zeros({c});
    auto y = ops::conv3x3(x, w, b);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv3x3 all-ones kernel on constant image") {
    auto x = Tensor<float>::full({1, 1, 4, 4}, 5.f);
    auto w = Tensor<float>::full({1, 1, 3, 3}, 1.f);
    auto b = Tensor<float>::zeros({1});
    auto y = ops::conv3x3(x, w, b);
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(45.f)); // 9*5 in the interior
    CHECK(y.at(0, 0, 2, 2) == doctest::Approx(45.f));
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(20.f)); // 4 taps inside at the corner
}

TEST_CASE("conv3x3 matches nested-loop oracle") {
    Rng rng(11);
    auto x = rand_tensor<double>(rng, {1, 2, 5, 5});
    auto w = rand_tensor<double>(rng, {3, 2, 3, 3});
    auto b = rand_tensor<double>(rng, {3});
    auto y = ops::conv3x3(x, w, b);
    auto ref = conv3x3_oracle(x, w, b);
    CHECK(max_abs_diff(y, ref) < 1e-12);

    // with a padding ring
    auto pad = rand_tensor<double>(rng, {2});
    auto yp = ops::conv3x3(x, w, b, pad);
    auto refp = conv3x3_oracle(x, w, b, pad);
    CHECK(max_abs_diff(yp, refp) < 1e-12);

    CHECK_THROWS_AS(ops::conv3x3(x, rand_tensor<double>(rng, {3, 4, 3, 3}), b), led::ShapeError);
}

TEST_CASE("channel_affine examples and oracle") {
    Rng rng(3);
    SUBCASE("identity state") {
        auto x = rand_tensor<float>(rng, {2, 3, 4, 4});
        auto y = ops::channel_affine(x, Tensor<float>::full({3}, 1.f), Tensor<float>::zeros({3}));
        for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }
    SUBCASE("hand arithmetic") {
        auto x = Tensor<float>::from_data({1, 2, 1, 1}, {1.f, 2.f});
        auto y = ops::channel_affine(x, Tensor<float>::from_data({2}, {2.f, 3.f}),
                                     Tensor<float>::from_data({2}, {0.5f, -1.f}));
        CHECK(y.at(0, 0, 0, 0) == doctest::Approx(2.5f));
        CHECK(y.at(0, 1, 0, 0) == doctest::Approx(5.f));
    }
    SUBCASE("random case matches elementwise loop") {
        auto x = rand_tensor<double>(rng, {2, 4, 3, 5});
        auto s = rand_tensor<double>(rng, {4});
        auto t = rand_tensor<double>(rng, {4});
        auto y = ops::channel_affine(x, s, t);
        for (int n = 0; n < 2; ++n)
            for (int c = 0; c < 4; ++c)
                for (int h = 0; h < 3; ++h)
                    for (int w = 0; w < 5; ++w)
                        CHECK(y.at(n, c, h, w) ==
                              doctest::Approx(s.at(c) * x.at(n, c, h, w) + t.at(c)).epsilon(1e-12));
    }
    SUBCASE("length mismatch") {
        auto x = rand_tensor<float>(rng, {1, 3, 2, 2});
        CHECK_THROWS_AS(
            ops::channel_affine(x, Tensor<float>::zeros({2}), Tensor<float>::zeros({3})),
            led::ShapeError);
    }
}

TEST_CASE("leaky_relu values and subgradient") {
    auto x = Tensor<double>::from_data({3}, {3.0, -1.0, -2.0});
    auto y = ops::leaky_relu(x, 0.2);
    CHECK(y.data()[0] == doctest::Approx(3.0));
    CHECK(y.data()[1] == doctest::Approx(-0.2));

    x.set_requires_grad(true);
    auto loss = ops::mean(ops::leaky_relu(x, 0.2));
    led::backward(loss);
    CHECK(x.grad()[2] == doctest::Approx(0.2 / 3.0)); // slope at -2.0, mean scaling
    CHECK_THROWS_AS(ops::leaky_relu(x, 1.5), led::ShapeError);
}

TEST_CASE("maxpool2 examples, tie-break, oracle") {
    SUBCASE("constant image stays constant") {
        auto x = Tensor<float>::full({1, 1, 4, 4}, 2.5f);
        auto y = ops::maxpool2(x);
        CHECK(y.dims() == std::vector<int>{1, 1, 2, 2});
        for (auto v : y.data()) CHECK(v == 2.5f);
    }
    SUBCASE("2x2 block") {
        auto x = Tensor<float>::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
        CHECK(ops::maxpool2(x).item() == 4.f);
    }
    SUBCASE("random matches loop oracle") {
        Rng rng(5);
        auto x = rand_tensor<double>(rng, {1, 1, 4, 4});
        CHECK(max_abs_diff(ops::maxpool2(x), maxpool2_oracle(x)) == 0.0);
    }
    SUBCASE("tie routes gradient to first in row-major order") {
        auto x = Tensor<double>::from_data({1, 1, 2, 2}, {7.0, 7.0, 7.0, 7.0});
        x.set_requires_grad(true);
        led::backward(ops::mean(ops::maxpool2(x)));
        CHECK(x.grad()[0] == doctest::Approx(1.0));
        CHECK(x.grad()[1] == 0.0);
        CHECK(x.grad()[3] == 0.0);
    }
    SUBCASE("odd extent rejected") {
        CHECK_THROWS_AS(ops::maxpool2(Tensor<float>::zeros({1, 1, 3, 4})), led::ShapeError);
    }
}

TEST_CASE("transposed_conv2 examples and oracle") {
    SUBCASE("constant input, all-ones kernel") {
        auto x = Tensor<float>::full({1, 1, 3, 3}, 3.f);
        auto y = ops::transposed_conv2(x, Tensor<float>::full({1, 1, 2, 2}, 1.f),
                                       Tensor<float>::zeros({1}));
        CHECK(y.dims() == std::vector<int>{1, 1, 6, 6});
        for (auto v : y.data()) CHECK(v == 3.f);
    }
    SUBCASE("impulse response equals the kernel") {
        auto x = Tensor<float>::zeros({1, 1, 2, 2});
        x.at(0, 0, 1, 0) = 1.f;
        auto w = Tensor<float>::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
        auto y = ops::transposed_conv2(x, w, Tensor<float>::zeros({1}));
        CHECK(y.at(0, 0, 2, 0) == 1.f);
        CHECK(y.at(0, 0, 2, 1) == 2.f);
        CHECK(y.at(0, 0, 3, 0) == 3.f);
        CHECK(y.at(0, 0, 3, 1) == 4.f);
        CHECK(y.at(0, 0, 0, 0) == 0.f);
    }
    SUBCASE("random matches scatter oracle") {
        Rng rng(13);
        auto x = rand_tensor<double>(rng, {2, 3, 4, 5});
        auto w = rand_tensor<double>(rng, {3, 2, 2, 2});
        auto b = rand_tensor<double>(rng, {2});
        CHECK(max_abs_diff(ops::transposed_conv2(x, w, b), transposed_conv2_oracle(x, w, b)) <
              1e-12);
    }
}

TEST_CASE("concat_channels and slice roundtrip") {
    Rng rng(17);
    auto a = rand_tensor<double>(rng, {2, 1, 3, 3});
    auto b = rand_tensor<double>(rng, {2, 2, 3, 3});
    auto cat = ops::concat_channels(a, b);
    CHECK(cat.dims() == std::vector<int>{2, 3, 3, 3});
    CHECK(cat.at(0, 0, 1, 1) == a.at(0, 0, 1, 1));

    auto ra = ops::slice_channels(cat, 0, 1);
    auto rb = ops::slice_channels(cat, 1, 3);
    CHECK(max_abs_diff(ra, a) == 0.0);
    CHECK(max_abs_diff(rb, b) == 0.0);

    // gradient of sum splits into all-ones per input
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    auto cat2 = ops::concat_channels(a, b);
    auto loss = ops::mean(cat2);
    led::backward(loss);
    const double inv = 1.0 / static_cast<double>(cat2.numel());
    for (auto g : a.grad()) CHECK(g == doctest::Approx(inv));
    for (auto g : b.grad()) CHECK(g == doctest::Approx(inv));

    CHECK_THROWS_AS(ops::concat_channels(a, rand_tensor<double>(rng, {2, 1, 4, 3})),
                    led::ShapeError);
}

TEST_CASE("l1_loss examples and oracle") {
    Rng rng(19);
    auto x = rand_tensor<double>(rng, {2, 3, 4, 4});
    CHECK(ops::l1_loss(x, x).item() == 0.0);
    auto ones = Tensor<double>::full({4}, 1.0);
    auto zeros = Tensor<double>::zeros({4});
    CHECK(ops::l1_loss(ones, zeros).item() == doctest::Approx(1.0));
    auto y = rand_tensor<double>(rng, {2, 3, 4, 4});
    CHECK(ops::l1_loss(x, y).item() == doctest::Approx(l1_oracle(x, y)).epsilon(1e-12));
    CHECK_THROWS_AS(ops::l1_loss(x, zeros), led::ShapeError);
}

TEST_CASE("backward basics") {
    Rng rng(23);
    SUBCASE("loss over identical tensors gives zero grads") {
        auto x = rand_tensor<double>(rng, {3, 3}).set_requires_grad(true);
        led::backward(ops::l1_loss(x, x));
        for (auto g : x.grad()) CHECK(g == 0.0);
    }
    SUBCASE("mean of channel_affine: shift gradient is 1/C") {
        const int c = 4;
        auto x = rand_tensor<double>(rng, {2, c, 3, 3});
        auto s = Tensor<double>::full({c}, 1.0).set_requires_grad(true);
        auto t = Tensor<double>::zeros({c}).set_requires_grad(true);
        led::backward(ops::mean(ops::channel_affine(x, s, t)));
        for (auto g : t.grad()) CHECK(g == doctest::Approx(1.0 / c));
    }
    SUBCASE("no recorded graph") {
        auto x = rand_tensor<double>(rng, {1});
        CHECK_THROWS_AS(led::backward(x), led::DataError);
    }
    SUBCASE("non-scalar loss") {
        auto x = rand_tensor<double>(rng, {2, 2}).set_requires_grad(true);
        auto y = ops::leaky_relu(x, 0.2);
        CHECK_THROWS_AS(led::backward(y), led::ShapeError);
    }
}

TEST_CASE("finite-difference checks per operator") {
    Rng rng(29);
    const double kTol = 1e-4;

    SUBCASE("conv3x3 with tracked pad values") {
        auto x = rand_tensor<double>(rng, {2, 3, 5, 4}).set_requires_grad(true);
        auto w = rand_tensor<double>(rng, {4, 3, 3, 3}).set_requires_grad(true);
        auto b = rand_tensor<double>(rng, {4}).set_requires_grad(true);
        auto pad = rand_tensor<double>(rng, {3}).set_requires_grad(true);
        auto target = rand_tensor<double>(rng, {2, 4, 5, 4});
        auto loss = [&] { return ops::l1_loss(ops::conv3x3(x, w, b, pad), target); };
        auto rep = check_gradients_fd({x, w, b, pad}, loss, rng);
        CHECK(rep.max_rel_err < kTol);
        CHECK(rep.checked >= 32 * 2);
    }
    SUBCASE("conv1x1") {
        auto x = rand_tensor<double>(rng, {2, 3, 4, 4}).set_requires_grad(true);
        auto w = rand_tensor<double>(rng, {2, 3, 1, 1}).set_requires_grad(true);
        auto b = rand_tensor<double>(rng, {2}).set_requires_grad(true);
        auto target = rand_tensor<double>(rng, {2, 2, 4, 4});
        auto loss = [&] { return ops::l1_loss(ops::conv1x1(x, w, b), target); };
        CHECK(check_gradients_fd({x, w, b}, loss, rng).max_rel_err < kTol);
    }
    SUBCASE("channel_affine") {
        auto x = rand_tensor<double>(rng, {2, 3, 4, 4}).set_requires_grad(true);
        auto s = rand_tensor<double>(rng, {3}).set_requires_grad(true);
        auto t = rand_tensor<double>(rng, {3}).set_requires_grad(true);
        auto target = rand_tensor<double>(rng, {2, 3, 4, 4});
        auto loss = [&] { return ops::l1_loss(ops::channel_affine(x, s, t), target); };
        CHECK(check_gradients_fd({x, s, t}, loss, rng).max_rel_err < kTol);
    }
    SUBCASE("leaky_relu") {
        auto x = rand_tensor_offzero<double>(rng, {3, 2, 4, 4}).set_requires_grad(true);
        auto target = rand_tensor<double>(rng, {3, 2, 4, 4});
        auto loss = [&] { return ops::l1_loss(ops::leaky_relu(x, 0.2), target); };
        CHECK(check_gradients_fd({x}, loss, rng).max_rel_err < kTol);
    }
    SUBCASE("maxpool2") {
        auto x = rand_tensor<double>(rng, {2, 2, 6, 6}).set_requires_grad(true);
        auto target = rand_tensor<double>(rng, {2, 2, 3, 3});
        auto loss = [&] { return ops::l1_loss(ops::maxpool2(x), target); };
        CHECK(check_gradients_fd({x}, loss, rng).max_rel_err < kTol);
    }
    SUBCASE("transposed_conv2") {
        auto x = rand_tensor<double>(rng, {2, 3, 3, 4}).set_requires_grad(true);
        auto w = rand_tensor<double>(rng, {3, 2, 2, 2}).set_requires_grad(true);
        auto b = rand_tensor<double>(rng, {2}).set_requires_grad(true);
        auto target = rand_tensor<double>(rng, {2, 2, 6, 8});
        auto loss = [&] { return ops::l1_loss(ops::transposed_conv2(x, w, b), target); };
        CHECK(check_gradients_fd({x, w, b}, loss, rng).max_rel_err < kTol);
    }
    SUBCASE("concat + slice + add + mean") {
        auto a = rand_tensor<double>(rng, {1, 2, 4, 4}).set_requires_grad(true);
        auto b = rand_tensor<double>(rng, {1, 3, 4, 4}).set_requires_grad(true);
        auto loss = [&] {
            auto cat = ops::concat_channels(a, b);
            auto s = ops::slice_channels(cat, 1, 4);
            return ops::mean(ops::add(s, s));
        };
        CHECK(check_gradients_fd({a, b}, loss, rng).max_rel_err < kTol);
    }
}

TEST_CASE("adam optimizer") {
    SUBCASE("zero gradient with zero moments leaves parameters unchanged") {
        auto p = Tensor<float>::full({4}, 2.f).set_requires_grad(true);
        std::vector<Tensor<float>> params{p};
        led::AdamState<float> st;
        st.init(params);
        p.zero_grad();
        led::adam_step(params, st, 0.1f);
        for (auto v : p.data()) CHECK(v == 2.f);
    }
    SUBCASE("single step matches hand computation") {
        auto p = Tensor<double>::zeros({1}).set_requires_grad(true);
        std::vector<Tensor<double>> params{p};
        led::AdamState<double> st;
        st.init(params);
        p.grad()[0] = 1.0;
        led::adam_step(params, st, 0.1);
        // mhat = vhat = 1 after bias correction at step 1
        CHECK(p.data()[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
    }
    SUBCASE("identical seeds give bit-identical parameters") {
        auto run = [] {
            Rng rng(41);
            auto p = rand_tensor<float>(rng, {8}).set_requires_grad(true);
            std::vector<Tensor<float>> params{p};
            led::AdamState<float> st;
            st.init(params);
            for (int i = 0; i < 10; ++i) {
                p.zero_grad();
                auto target = rand_tensor<float>(rng, {8});
                led::backward(ops::l1_loss(p, target));
                led::adam_step(params, st, 0.01f);
            }
            return std::vector<float>(p.data().begin(), p.data().end());
        };
        auto r1 = run();
        auto r2 = run();
        CHECK(r1 == r2);
    }
    SUBCASE("shape mismatch") {
        auto p = Tensor<float>::zeros({4}).set_requires_grad(true);
        std::vector<Tensor<float>> params{p};
        led::AdamState<float> st;
        st.init(params);
        params[0] = Tensor<float>::zeros({5}).set_requires_grad(true);
        CHECK_THROWS_AS(led::adam_step(params, st, 0.1f), led::ShapeError);
    }
}

TEST_CASE("single and double precision agree on unit-scale inputs") {
    Rng rng(43);
    auto xd = rand_tensor<double>(rng, {1, 3, 6, 6});
    auto wd = rand_tensor<double>(rng, {2, 3, 3, 3});
    auto bd = rand_tensor<double>(rng, {2});
    auto to_f = [](const Tensor<double>& t) {
        std::vector<float> v(t.data().begin(), t.data().end());
        return Tensor<float>::from_data(t.dims(), std::move(v));
    };
    auto yd = ops::conv3x3(xd, wd, bd);
    auto yf = ops::conv3x3(to_f(xd), to_f(wd), to_f(bd));
    double m = 0;
    for (std::int64_t i = 0; i < yd.numel(); ++i)
        m = std::max(m, std::abs(yd.data()[i] - static_cast<double>(yf.data()[i])));
    CHECK(m < 1e-4);
}

TEST_CASE("operators are deterministic") {
    Rng rng(47);
    auto x = rand_tensor<float>(rng, {2, 3, 8, 8});
    auto w = rand_tensor<float>(rng, {3, 3, 3, 3});
    auto b = rand_tensor<float>(rng, {3});
    auto y1 = ops::conv3x3(x, w, b);
    auto y2 = ops::conv3x3(x, w, b);
    for (std::int64_t i = 0; i < y1.numel(); ++i) CHECK(y1.data()[i] == y2.data()[i]);
}
