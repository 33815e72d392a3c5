#include "mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dsa {

namespace {

constexpr const char* kMagic = "dsa-mlp v1";

void check_congruent(const MlpParams& a, const MlpParams& b, const char* what) {
    if (a.layers.size() != b.layers.size())
        throw std::invalid_argument(std::string(what) + ": layer count mismatch");
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].fan_in != b.layers[i].fan_in ||
            a.layers[i].fan_out != b.layers[i].fan_out)
            throw std::invalid_argument(std::string(what) + ": layer shape mismatch");
    }
}

}  // namespace

MlpParams MlpParams::init(std::span<const int> dims, Rng& rng) {
    if (dims.size() < 2)
        throw std::invalid_argument("MlpParams::init: need at least input and output dims");
    MlpParams params;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        MlpLayer layer;
        layer.fan_in = dims[i];
        layer.fan_out = dims[i + 1];
        layer.relu = i + 2 < dims.size();
        double scale = 1.0 / std::sqrt(static_cast<double>(layer.fan_in));
        layer.weights.resize(static_cast<std::size_t>(layer.fan_in) * layer.fan_out);
        for (auto& w : layer.weights) w = rng.uniform(-scale, scale);
        layer.bias.assign(layer.fan_out, 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
    MlpParams params = other;
    for (auto& layer : params.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    return params;
}

std::span<const double> mlp_forward(const MlpParams& params,
                                    std::span<const double> input,
                                    MlpScratch& scratch) {
    if (static_cast<int>(input.size()) != params.input_size())
        throw std::invalid_argument("mlp_forward: input length mismatch");
    scratch.activations.resize(params.layers.size());
    std::span<const double> x = input;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        auto& out = scratch.activations[l];
        out.assign(layer.bias.begin(), layer.bias.end());
        const double* w = layer.weights.data();
        for (int i = 0; i < layer.fan_in; ++i) {
            const double xi = x[i];
            const double* row = w + static_cast<std::size_t>(i) * layer.fan_out;
            for (int j = 0; j < layer.fan_out; ++j) out[j] += xi * row[j];
        }
        if (layer.relu)
            for (auto& v : out) v = v > 0.0 ? v : 0.0;
        x = out;
    }
    return x;
}

void mlp_backward_acc(const MlpParams& params, std::span<const double> input,
                      std::span<const double> upstream, Gradients& grads,
                      MlpScratch& scratch) {
    if (static_cast<int>(upstream.size()) != params.output_size())
        throw std::invalid_argument("mlp_backward: upstream length mismatch");
    check_congruent(params, grads, "mlp_backward");
    mlp_forward(params, input, scratch);

    scratch.delta.assign(upstream.begin(), upstream.end());
    for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
        const auto& layer = params.layers[l];
        auto& glayer = grads.layers[l];
        auto& delta = scratch.delta;
        if (layer.relu) {
            const auto& out = scratch.activations[l];
            for (int j = 0; j < layer.fan_out; ++j)
                if (out[j] <= 0.0) delta[j] = 0.0;
        }
        std::span<const double> x =
            l == 0 ? input : std::span<const double>(scratch.activations[l - 1]);
        double* gw = glayer.weights.data();
        const double* w = layer.weights.data();
        auto& dx = scratch.delta_next;
        dx.assign(layer.fan_in, 0.0);
        for (int i = 0; i < layer.fan_in; ++i) {
            const double xi = x[i];
            double* grow = gw + static_cast<std::size_t>(i) * layer.fan_out;
            const double* row = w + static_cast<std::size_t>(i) * layer.fan_out;
            double acc = 0.0;
            for (int j = 0; j < layer.fan_out; ++j) {
                grow[j] += xi * delta[j];
                acc += row[j] * delta[j];
            }
            dx[i] = acc;
        }
        for (int j = 0; j < layer.fan_out; ++j) glayer.bias[j] += delta[j];
        std::swap(scratch.delta, scratch.delta_next);
    }
}

Gradients mlp_backward(const MlpParams& params, std::span<const double> input,
                       std::span<const double> upstream) {
    Gradients grads = MlpParams::zeros_like(params);
    MlpScratch scratch;
    mlp_backward_acc(params, input, upstream, grads, scratch);
    return grads;
}

void sgd_step(MlpParams& params, const Gradients& grads, double lr) {
    if (!(lr >= 0.0))
        throw std::invalid_argument("sgd_step: learning rate must be non-negative");
    check_congruent(params, grads, "sgd_step");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        const auto& glayer = grads.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i)
            layer.weights[i] -= lr * glayer.weights[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i)
            layer.bias[i] -= lr * glayer.bias[i];
    }
}

void soft_update(MlpParams& target, const MlpParams& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("soft_update: tau must lie in [0,1]");
    check_congruent(target, online, "soft_update");
    const double keep = tau;
    const double mix = 1.0 - tau;
    for (std::size_t l = 0; l < target.layers.size(); ++l) {
        auto& t = target.layers[l];
        const auto& o = online.layers[l];
        for (std::size_t i = 0; i < t.weights.size(); ++i)
            t.weights[i] = keep * t.weights[i] + mix * o.weights[i];
        for (std::size_t i = 0; i < t.bias.size(); ++i)
            t.bias[i] = keep * t.bias[i] + mix * o.bias[i];
    }
}

std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const std::uint8_t> mask) {
    if (logits.size() != mask.size())
        throw std::invalid_argument("masked_softmax: length mismatch");
    double max_logit = -HUGE_VAL;
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (mask[i] && logits[i] > max_logit) max_logit = logits[i];
    if (max_logit == -HUGE_VAL)
        throw std::invalid_argument("masked_softmax: empty mask");
    std::vector<double> probs(logits.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!mask[i]) continue;
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (auto& v : probs) v /= sum;
    return probs;
}

void save_mlp(const MlpParams& params, std::ostream& out) {
    out << kMagic << '\n' << params.layers.size() << '\n';
    out.precision(17);
    for (const auto& layer : params.layers) {
        out << layer.fan_in << ' ' << layer.fan_out << ' ' << (layer.relu ? 1 : 0) << '\n';
        for (double w : layer.weights) out << w << '\n';
        for (double b : layer.bias) out << b << '\n';
    }
}

MlpParams load_mlp(std::istream& in) {
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic)
        throw std::runtime_error("load_mlp: bad magic header");
    std::size_t num_layers = 0;
    in >> num_layers;
    MlpParams params;
    for (std::size_t l = 0; l < num_layers; ++l) {
        MlpLayer layer;
        int relu = 0;
        in >> layer.fan_in >> layer.fan_out >> relu;
        layer.relu = relu != 0;
        layer.weights.resize(static_cast<std::size_t>(layer.fan_in) * layer.fan_out);
        layer.bias.resize(layer.fan_out);
        for (auto& w : layer.weights) in >> w;
        for (auto& b : layer.bias) in >> b;
        params.layers.push_back(std::move(layer));
    }
    if (!in) throw std::runtime_error("load_mlp: truncated checkpoint");
    return params;
}

}  // namespace dsa
