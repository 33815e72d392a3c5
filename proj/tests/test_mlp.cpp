#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mlp.hpp"

using namespace dsa;

namespace {

MlpParams single_layer(int fan_in, int fan_out, std::vector<double> weights,
                       std::vector<double> bias) {
    MlpParams params;
    params.layers.push_back(
        {fan_in, fan_out, std::move(weights), std::move(bias), false});
    return params;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("identity network reproduces its input") {
    auto params = single_layer(3, 3,
                               {1, 0, 0, 0, 1, 0, 0, 0, 1},
                               {0, 0, 0});
    MlpScratch scratch;
    std::vector<double> input = {0.5, -2.0, 3.25};
    auto out = mlp_forward(params, input, scratch);
    CHECK(std::vector<double>(out.begin(), out.end()) == input);
}

TEST_CASE("zero weights pass the bias through") {
    auto params = single_layer(2, 2, {0, 0, 0, 0}, {0.7, -0.3});
    MlpScratch scratch;
    for (auto input : {std::vector<double>{1, 1}, std::vector<double>{-5, 9}}) {
        auto out = mlp_forward(params, input, scratch);
        CHECK(out[0] == 0.7);
        CHECK(out[1] == -0.3);
    }
}

TEST_CASE("2-2-1 network matches the hand computation") {
    MlpParams params;
    params.layers.push_back({2, 2, {0.5, -0.25, 0.3, 0.2}, {0.1, -0.1}, true});
    params.layers.push_back({2, 1, {0.4, -0.6}, {0.05}, false});
    MlpScratch scratch;
    std::vector<double> input = {1.0, -1.0};
    // hidden: relu(0.5-0.3+0.1, -0.25-0.2-0.1) = (0.3, 0)
    // output: 0.3*0.4 + 0.05 = 0.17
    auto out = mlp_forward(params, input, scratch);
    CHECK(out[0] == doctest::Approx(0.17).epsilon(1e-12));
}

TEST_CASE("forward rejects mismatched input lengths") {
    auto params = single_layer(2, 1, {1, 1}, {0});
    MlpScratch scratch;
    std::vector<double> input = {1.0, 2.0, 3.0};
    CHECK_THROWS(mlp_forward(params, input, scratch));
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(3);
    std::vector<int> dims = {4, 6, 2};
    auto params = MlpParams::init(dims, rng);
    std::vector<double> input = {1, -1, 0.5, 2};
    std::vector<double> upstream = {0, 0};
    auto grads = mlp_backward(params, input, upstream);
    for (const auto& layer : grads.layers) {
        for (double w : layer.weights) CHECK(w == 0.0);
        for (double b : layer.bias) CHECK(b == 0.0);
    }
}

TEST_CASE("linear layer gradients are the outer product") {
    auto params = single_layer(2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, {0, 0, 0});
    std::vector<double> input = {2.0, -1.0};
    std::vector<double> upstream = {1.0, 0.5, -2.0};
    auto grads = mlp_backward(params, input, upstream);
    // dW[i][j] = x_i * g_j
    CHECK(grads.layers[0].weights ==
          std::vector<double>{2.0, 1.0, -4.0, -1.0, -0.5, 2.0});
    CHECK(grads.layers[0].bias == upstream);
}

TEST_CASE("analytic gradients match finite differences on a 3-layer net") {
    Rng rng(17);
    std::vector<int> dims = {5, 7, 6, 3};
    auto params = MlpParams::init(dims, rng);
    std::vector<double> input(5), upstream(3);
    for (auto& v : input) v = rng.uniform(-1, 1);
    for (auto& v : upstream) v = rng.uniform(-1, 1);
    auto grads = mlp_backward(params, input, upstream);
    MlpScratch scratch;
    const double step = 1e-5;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto check_coord = [&](double& theta, double analytic) {
            double saved = theta;
            theta = saved + step;
            double hi = dot(upstream, mlp_forward(params, input, scratch));
            theta = saved - step;
            double lo = dot(upstream, mlp_forward(params, input, scratch));
            theta = saved;
            double fd = (hi - lo) / (2 * step);
            CHECK(std::abs(fd - analytic) <=
                  1e-4 * std::max(1.0, std::max(std::abs(fd), std::abs(analytic))));
        };
        for (std::size_t i = 0; i < params.layers[l].weights.size(); ++i)
            check_coord(params.layers[l].weights[i], grads.layers[l].weights[i]);
        for (std::size_t i = 0; i < params.layers[l].bias.size(); ++i)
            check_coord(params.layers[l].bias[i], grads.layers[l].bias[i]);
    }
}

TEST_CASE("sgd step arithmetic") {
    auto params = single_layer(1, 1, {1.0}, {0.0});
    auto grads = single_layer(1, 1, {2.0}, {0.0});
    sgd_step(params, grads, 0.0);
    CHECK(params.layers[0].weights[0] == 1.0);
    sgd_step(params, grads, 0.1);
    CHECK(params.layers[0].weights[0] == doctest::Approx(0.8));
    CHECK_THROWS(sgd_step(params, grads, -0.1));
}

TEST_CASE("two sgd steps equal one step with summed gradients") {
    auto a = single_layer(2, 1, {1.0, -1.0}, {0.5});
    auto b = a;
    auto g1 = single_layer(2, 1, {0.3, 0.1}, {-0.2});
    auto g2 = single_layer(2, 1, {-0.1, 0.4}, {0.6});
    sgd_step(a, g1, 0.05);
    sgd_step(a, g2, 0.05);
    auto sum = g1;
    for (std::size_t i = 0; i < sum.layers[0].weights.size(); ++i)
        sum.layers[0].weights[i] += g2.layers[0].weights[i];
    sum.layers[0].bias[0] += g2.layers[0].bias[0];
    sgd_step(b, sum, 0.05);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(a.layers[0].weights[i] == doctest::Approx(b.layers[0].weights[i]));
    CHECK(a.layers[0].bias[0] == doctest::Approx(b.layers[0].bias[0]));
}

TEST_CASE("soft update endpoints and the paper's mixing formula") {
    auto target = single_layer(1, 1, {1.0}, {1.0});
    auto online = single_layer(1, 1, {0.0}, {0.0});

    auto frozen = target;
    soft_update(target, online, 1.0);
    CHECK(target.layers[0].weights == frozen.layers[0].weights);

    soft_update(target, online, 0.9);
    CHECK(target.layers[0].weights[0] == doctest::Approx(0.9));

    soft_update(target, online, 0.0);
    CHECK(target.layers[0].weights == online.layers[0].weights);

    CHECK_THROWS(soft_update(target, online, 1.5));
    CHECK_THROWS(soft_update(target, online, -0.1));
}

TEST_CASE("iterated soft updates converge geometrically at rate tau") {
    auto target = single_layer(1, 1, {1.0}, {0.0});
    auto online = single_layer(1, 1, {0.0}, {0.0});
    for (int i = 1; i <= 20; ++i) {
        soft_update(target, online, 0.5);
        CHECK(target.layers[0].weights[0] ==
              doctest::Approx(std::pow(0.5, i)).epsilon(1e-12));
    }
}

TEST_CASE("masked softmax examples") {
    std::vector<double> logits = {0, 0, 0};
    std::vector<std::uint8_t> full = {1, 1, 1};
    auto probs = masked_softmax(logits, full);
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    logits = {5, 100};
    std::vector<std::uint8_t> mask = {1, 0};
    probs = masked_softmax(logits, mask);
    CHECK(probs[0] == 1.0);
    CHECK(probs[1] == 0.0);

    logits = {1, 2, 3};
    mask = {1, 0, 1};
    probs = masked_softmax(logits, mask);
    double e2 = std::exp(2.0);
    CHECK(probs[0] == doctest::Approx(1.0 / (1.0 + e2)).epsilon(1e-12));
    CHECK(probs[1] == 0.0);
    CHECK(probs[2] == doctest::Approx(e2 / (1.0 + e2)).epsilon(1e-12));

    std::vector<std::uint8_t> empty = {0, 0, 0};
    CHECK_THROWS(masked_softmax(logits, empty));
}

TEST_CASE("masked softmax is a probability vector under extreme logits") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 2 + rng.uniform_int(8);
        std::vector<double> logits(n);
        std::vector<std::uint8_t> mask(n, 0);
        for (auto& v : logits) v = rng.uniform(-500.0, 500.0);
        int live = 1 + rng.uniform_int(n);
        for (int i = 0; i < live; ++i) mask[rng.uniform_int(n)] = 1;
        mask[rng.uniform_int(n)] = 1;
        auto probs = masked_softmax(logits, mask);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK(probs[i] >= 0.0);
            if (!mask[i]) CHECK(probs[i] == 0.0);
            sum += probs[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("forward pass is bitwise deterministic") {
    Rng rng(21);
    std::vector<int> dims = {6, 32, 32, 4};
    auto params = MlpParams::init(dims, rng);
    std::vector<double> input(6);
    for (auto& v : input) v = rng.uniform(-2, 2);
    MlpScratch s1, s2;
    auto a = mlp_forward(params, input, s1);
    auto b = mlp_forward(params, input, s2);
    CHECK(std::vector<double>(a.begin(), a.end()) ==
          std::vector<double>(b.begin(), b.end()));
}

TEST_CASE("checkpoint round-trips through the text format") {
    Rng rng(33);
    std::vector<int> dims = {3, 8, 2};
    auto params = MlpParams::init(dims, rng);
    std::stringstream stream;
    save_mlp(params, stream);
    auto loaded = load_mlp(stream);
    REQUIRE(loaded.layers.size() == params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        CHECK(loaded.layers[l].relu == params.layers[l].relu);
        CHECK(loaded.layers[l].weights == params.layers[l].weights);
        CHECK(loaded.layers[l].bias == params.layers[l].bias);
    }

    std::stringstream bad("not a checkpoint\n");
    CHECK_THROWS(load_mlp(bad));
}
