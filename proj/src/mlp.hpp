#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rng.hpp"

namespace dsa {

// One affine layer; weights are row-major fan_in x fan_out. Hidden layers
// use the rectifier, the output layer is linear.
struct MlpLayer {
    int fan_in = 0;
    int fan_out = 0;
    std::vector<double> weights;  // weights[i * fan_out + j]
    std::vector<double> bias;     // length fan_out
    bool relu = false;
};

struct MlpParams {
    std::vector<MlpLayer> layers;

    int input_size() const { return layers.front().fan_in; }
    int output_size() const { return layers.back().fan_out; }

    // dims = {in, hidden..., out}; weights uniform in +-1/sqrt(fan_in),
    // biases zero, rectifier on all but the last layer.
    static MlpParams init(std::span<const int> dims, Rng& rng);

    // Same topology with all parameters zero, as a gradient accumulator.
    static MlpParams zeros_like(const MlpParams& other);
};

using Gradients = MlpParams;

// Scratch buffers so the training loops stay allocation-free.
struct MlpScratch {
    std::vector<std::vector<double>> activations;  // per layer output, post-activation
    std::vector<double> delta;
    std::vector<double> delta_next;
};

// Forward pass; result stays valid until the next call with this scratch.
std::span<const double> mlp_forward(const MlpParams& params,
                                    std::span<const double> input,
                                    MlpScratch& scratch);

// Accumulate d(upstream . output)/d(params) into grads. Runs its own
// forward pass to populate the scratch.
void mlp_backward_acc(const MlpParams& params, std::span<const double> input,
                      std::span<const double> upstream, Gradients& grads,
                      MlpScratch& scratch);

Gradients mlp_backward(const MlpParams& params, std::span<const double> input,
                       std::span<const double> upstream);

// theta <- theta - lr * g
void sgd_step(MlpParams& params, const Gradients& grads, double lr);

// target <- tau * target + (1 - tau) * online
void soft_update(MlpParams& target, const MlpParams& online, double tau);

// Probabilities over the surviving entries; masked-out entries are exactly 0.
std::vector<double> masked_softmax(std::span<const double> logits,
                                   std::span<const std::uint8_t> mask);

// Versioned text checkpoint: magic line, layer dims, row-major values.
void save_mlp(const MlpParams& params, std::ostream& out);
MlpParams load_mlp(std::istream& in);

}  // namespace dsa
