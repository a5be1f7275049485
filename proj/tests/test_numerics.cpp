#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "lcmt/ops.hpp"
#include "lcmt/optim.hpp"
#include "lcmt/rng.hpp"
#include "lcmt/tensor.hpp"
#include "support/finite_diff.hpp"

using lcmt::Rng;
using lcmt::Tensor;
using lcmt::testing::check_gradient;
using lcmt::testing::random_tensor;
namespace ops = lcmt::ops;

TEST_CASE("rng: identical seeds give identical sequences, derived streams differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng root(7);
    Rng c1 = root.derive("dropout", 1);
    Rng c2 = root.derive("dropout", 2);
    Rng c3 = root.derive("shuffle", 1);
    CHECK(c1.next_u64() != c2.next_u64());
    CHECK(c1.next_u64() != c3.next_u64());
    // deriving does not consume parent state
    Rng root2(7);
    CHECK(root.next_u64() == root2.next_u64());
}

TEST_CASE("rng: uniform in range, uniform_int covers bucket, gaussian moments") {
    Rng r(123);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sq += u * u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
    CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.01);

    std::set<int> seen;
    for (int i = 0; i < 1000; ++i) {
        int v = r.uniform_int(7);
        CHECK(v >= 0);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);

    double gs = 0, gsq = 0;
    for (int i = 0; i < n; ++i) {
        double g = r.gaussian();
        gs += g;
        gsq += g * g;
    }
    CHECK(std::abs(gs / n) < 0.03);
    CHECK(std::abs(gsq / n - 1.0) < 0.05);
}

TEST_CASE("tensor: shape bookkeeping and errors") {
    auto t = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.shape()[0] == 2);
    CHECK_THROWS_AS(Tensor<float>::from({2, 2}, {1, 2, 3}), lcmt::ShapeError);
    CHECK_THROWS_AS(Tensor<float>::zeros({0, 3}), lcmt::ShapeError);
    CHECK_THROWS_AS(Tensor<float>::zeros({}), lcmt::ShapeError);
}

TEST_CASE("ops: forward values") {
    auto sm = ops::softmax(Tensor<double>::from({1, 2}, {0.0, 0.0}));
    CHECK(sm.value()[0] == doctest::Approx(0.5));
    CHECK(sm.value()[1] == doctest::Approx(0.5));

    auto re = ops::relu(Tensor<double>::from({1, 2}, {-1.0, 2.0}));
    CHECK(re.value()[0] == 0.0);
    CHECK(re.value()[1] == 2.0);

    auto a = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<double>::from({2, 2}, {5, 6, 7, 8});
    auto c = ops::matmul(a, b);
    CHECK(c.value() == std::vector<double>{19, 22, 43, 50});

    CHECK_THROWS_AS(ops::matmul(a, Tensor<double>::from({3, 1}, {1, 2, 3})), lcmt::ShapeError);
    CHECK_THROWS_AS(ops::add(a, Tensor<double>::from({1, 3}, {1, 2, 3})), lcmt::ShapeError);
}

TEST_CASE("ops: softmax rows sum to one, log_softmax consistent") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor({4, 9}, rng, false, 4.0);
        auto sm = ops::softmax(x);
        auto lsm = ops::log_softmax(x);
        for (int r = 0; r < 4; ++r) {
            double s = 0;
            for (int c = 0; c < 9; ++c) s += sm.value()[r * 9 + c];
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
        for (size_t i = 0; i < sm.value().size(); ++i)
            CHECK(std::abs(std::log(sm.value()[i]) - lsm.value()[i]) < 1e-5);
    }
}

TEST_CASE("ops: no NaN/Inf after forward on finite inputs") {
    Rng rng(17);
    auto x = random_tensor({6, 8}, rng, false, 50.0);
    auto g = Tensor<double>::filled({8}, 1.0);
    auto b = Tensor<double>::zeros({8});
    for (const auto& t : {ops::softmax(x), ops::log_softmax(x), ops::layer_norm(x, g, b),
                          ops::relu(x), ops::scale(x, 3.0)}) {
        for (double v : t.value()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("backward: analytic example loss = sum(x*x)") {
    auto x = Tensor<double>::from({3}, {1, 2, 3}, true);
    auto loss = ops::sum_all(ops::mul(x, x));
    lcmt::backward(loss);
    CHECK(x.grad() == std::vector<double>{2, 4, 6});

    // calling twice without reset is an error
    CHECK_THROWS_AS(lcmt::backward(loss), lcmt::Error);
    // non-scalar loss rejected
    auto y = ops::mul(x, x);
    CHECK_THROWS_AS(lcmt::backward(y), lcmt::ShapeError);
}

TEST_CASE("backward: grads accumulate across backward calls on fresh graphs") {
    auto x = Tensor<double>::from({2}, {1, 1}, true);
    auto l1 = ops::sum_all(ops::mul(x, x));
    lcmt::backward(l1);
    auto l2 = ops::sum_all(ops::mul(x, x));
    lcmt::backward(l2);
    CHECK(x.grad() == std::vector<double>{4, 4});
    x.zero_grad();
    CHECK(x.grad() == std::vector<double>{0, 0});
}

TEST_CASE("backward: NoGradGuard suspends taping") {
    auto x = Tensor<double>::from({2}, {1, 2}, true);
    lcmt::NoGradGuard guard;
    auto y = ops::sum_all(ops::mul(x, x));
    CHECK_FALSE(y.needs_grad());
}

// spec example: matmul(2x3, 3x4) gradient of sum-of-outputs vs central differences
TEST_CASE("gradcheck: matmul both operands") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_tensor({2, 3}, rng);
        auto b = random_tensor({3, 4}, rng);
        auto fwd = [&] { return ops::sum_all(ops::matmul(a, b)); };
        auto ra = check_gradient(a, fwd);
        auto rb = check_gradient(b, fwd);
        CHECK_MESSAGE(ra.ok, ra.detail);
        CHECK_MESSAGE(rb.ok, rb.detail);
    }
}

TEST_CASE("gradcheck: every differentiable op, 100 random instances") {
    Rng rng(29);

    // fixed random functionals so grads are not all-ones; one per output shape
    auto w35 = random_tensor({3, 5}, rng, false);
    auto w53 = random_tensor({5, 3}, rng, false);
    auto w3a = random_tensor({3, 10}, rng, false);
    auto w33 = random_tensor({3, 3}, rng, false);
    auto w34 = random_tensor({3, 4}, rng, false);
    auto weighted = [](const Tensor<double>& t, const Tensor<double>& w) {
        return ops::sum_all(ops::mul(t, w));
    };

    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_tensor({3, 5}, rng);
        auto y = random_tensor({3, 5}, rng);

        {
            auto fwd = [&] { return weighted(ops::add(x, y), w35); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "add: " << r.detail);
        }
        {
            auto bias = random_tensor({5}, rng);
            auto fwd = [&] { return weighted(ops::add(x, bias), w35); };
            auto r = check_gradient(bias, fwd);
            CHECK_MESSAGE(r.ok, "add broadcast: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::mul(x, y), w35); };
            auto r = check_gradient(y, fwd);
            CHECK_MESSAGE(r.ok, "mul: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::scale(x, -1.7), w35); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "scale: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::relu(x), w35); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "relu: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::transpose(x), w53); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "transpose: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::softmax(x), w35); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "softmax: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::log_softmax(x), w35); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "log_softmax: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::concat_last_dim<double>({x, y}), w3a); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "concat: " << r.detail);
        }
        {
            auto fwd = [&] { return weighted(ops::slice_last_dim(x, 1, 3), w33); };
            auto r = check_gradient(x, fwd);
            CHECK_MESSAGE(r.ok, "slice: " << r.detail);
        }
        {
            auto gain = random_tensor({5}, rng, true, 0.5);
            for (auto& v : gain.value()) v += 1.0;
            auto bias = random_tensor({5}, rng);
            auto fwd = [&] { return weighted(ops::layer_norm(x, gain, bias), w35); };
            auto rx = check_gradient(x, fwd);
            CHECK_MESSAGE(rx.ok, "layer_norm x: " << rx.detail);
            auto rg = check_gradient(gain, fwd);
            CHECK_MESSAGE(rg.ok, "layer_norm gain: " << rg.detail);
            auto rb = check_gradient(bias, fwd);
            CHECK_MESSAGE(rb.ok, "layer_norm bias: " << rb.detail);
        }
        {
            auto table = random_tensor({7, 4}, rng);
            std::vector<int> ids = {rng.uniform_int(7), rng.uniform_int(7), rng.uniform_int(7)};
            auto fwd = [&] { return weighted(ops::embedding_lookup(table, ids), w34); };
            auto r = check_gradient(table, fwd);
            CHECK_MESSAGE(r.ok, "embedding_lookup: " << r.detail);
        }
        {
            auto w = random_tensor({5, 4}, rng);
            auto b = random_tensor({4}, rng);
            auto fwd = [&] { return weighted(ops::linear(x, w, b), w34); };
            auto rw = check_gradient(w, fwd);
            CHECK_MESSAGE(rw.ok, "linear W: " << rw.detail);
            auto rb = check_gradient(b, fwd);
            CHECK_MESSAGE(rb.ok, "linear b: " << rb.detail);
        }
        {
            std::vector<int> tg = {rng.uniform_int(5), rng.uniform_int(5), rng.uniform_int(5)};
            auto fwd = [&] { return ops::cross_entropy(x, tg); };
            auto r = check_gradient(x, fwd, 1e-5, 1e-4);
            CHECK_MESSAGE(r.ok, "cross_entropy: " << r.detail);
        }
    }
}

TEST_CASE("gradcheck: dropout passes gradient through its mask") {
    Rng rng(31);
    auto x = random_tensor({4, 6}, rng);
    // fixed mask: rebuild with the same rng stream each forward
    auto fwd = [&] {
        Rng drop(99);
        return ops::sum_all(ops::dropout(x, 0.5, drop, true));
    };
    auto r = check_gradient(x, fwd);
    CHECK_MESSAGE(r.ok, r.detail);

    Rng drop(1);
    auto y = ops::dropout(x, 0.0, drop, true);
    CHECK(y.value() == x.value());
    auto z = ops::dropout(x, 0.7, drop, false);
    CHECK(z.value() == x.value());
    CHECK_THROWS_AS(ops::dropout(x, 1.0, drop, true), lcmt::Error);
}

TEST_CASE("adam: first step magnitude equals lr on constant unit gradient") {
    std::map<std::string, Tensor<float>> params;
    params.emplace("w", Tensor<float>::scalar(1.0f, true));
    lcmt::AdamState<float> state;
    lcmt::AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.warmup_steps = 0;  // constant rate
    cfg.beta1 = 0.9;
    cfg.beta2 = 0.999;
    cfg.eps = 1e-8;

    params.at("w").grad()[0] = 1.0f;
    lcmt::adam_step(params, state, cfg);
    CHECK(params.at("w").value()[0] == doctest::Approx(0.9).epsilon(1e-4));

    // zero gradient leaves the parameter unchanged (moments decay toward zero)
    params.at("w").zero_grad();
    float before = params.at("w").value()[0];
    lcmt::adam_step(params, state, cfg);
    float after = params.at("w").value()[0];
    // with zero grad the update shrinks the first moment; change is far below lr
    CHECK(std::abs(after - before) < 0.1f * 0.75f);
}

TEST_CASE("adam: strictly zero history means zero update") {
    std::map<std::string, Tensor<float>> params;
    params.emplace("w", Tensor<float>::scalar(2.5f, true));
    lcmt::AdamState<float> state;
    lcmt::AdamConfig cfg;
    cfg.lr = 0.1;
    cfg.warmup_steps = 0;
    params.at("w").grad()[0] = 0.0f;
    lcmt::adam_step(params, state, cfg);
    CHECK(params.at("w").value()[0] == 2.5f);
}

TEST_CASE("adam: 10 steps on a quadratic bowl reduce loss monotonically") {
    // direct simulation oracle: loss = w^2, grad = 2w
    std::map<std::string, Tensor<double>> params;
    params.emplace("w", Tensor<double>::scalar(1.0, true));
    lcmt::AdamState<double> state;
    lcmt::AdamConfig cfg;
    cfg.lr = 0.05;
    cfg.warmup_steps = 0;
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
        auto& w = params.at("w");
        w.zero_grad();
        w.grad()[0] = 2.0 * w.value()[0];
        lcmt::adam_step(params, state, cfg);
        double loss = w.value()[0] * w.value()[0];
        CHECK(loss < prev);
        prev = loss;
    }
}

TEST_CASE("adam: warmup schedule rises then decays as inverse sqrt") {
    lcmt::AdamConfig cfg;
    cfg.lr = 2.0;
    cfg.warmup_steps = 400;
    cfg.d_model = 64;
    CHECK(cfg.rate(1) < cfg.rate(200));
    CHECK(cfg.rate(200) < cfg.rate(400));
    CHECK(cfg.rate(400) > cfg.rate(1600));
    CHECK(cfg.rate(1600) == doctest::Approx(cfg.rate(400) / 2.0));
    CHECK(cfg.rate(400) == doctest::Approx(2.0 * std::pow(64.0, -0.5) / std::sqrt(400.0)));
}

TEST_CASE("adam: NaN gradient aborts with diagnostic") {
    std::map<std::string, Tensor<float>> params;
    params.emplace("w", Tensor<float>::scalar(1.0f, true));
    lcmt::AdamState<float> state;
    lcmt::AdamConfig cfg;
    params.at("w").grad()[0] = std::numeric_limits<float>::quiet_NaN();
    bool threw = false;
    try {
        lcmt::adam_step(params, state, cfg);
    } catch (const lcmt::Error& e) {
        threw = true;
        CHECK(std::string(e.what()).find("non-finite gradient") != std::string::npos);
    }
    CHECK(threw);
}
