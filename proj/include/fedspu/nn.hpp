#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedspu/rng.hpp"

namespace fedspu {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense feed-forward classifier: ReLU hidden layers, softmax cross-entropy
// output. layer_widths = [input, hidden..., output], at least 3 entries.
struct Architecture {
    std::vector<int> layer_widths;

    int depth() const { return static_cast<int>(layer_widths.size()); }
    int input_width() const { return layer_widths.front(); }
    int output_width() const { return layer_widths.back(); }
    void validate() const;

    bool operator==(const Architecture&) const = default;
};

struct Layer {
    int fan_in = 0;
    int fan_out = 0;
    std::vector<double> weights; // row-major, fan_out x fan_in
    std::vector<double> bias;    // fan_out

    double& w(int out, int in) { return weights[static_cast<size_t>(out) * fan_in + in]; }
    double w(int out, int in) const { return weights[static_cast<size_t>(out) * fan_in + in]; }
};

struct Model {
    Architecture arch;
    std::vector<Layer> layers; // layers[l] connects arch layer l to l+1

    size_t param_count() const;
};

// Gradient shares the Model layout; frozen positions hold exact zeros.
using Gradient = Model;

struct Batch {
    std::vector<double> inputs; // n x input_width, row-major
    std::vector<int> labels;    // n class ids
    int width = 0;

    int size() const { return static_cast<int>(labels.size()); }
};

// Per-parameter activity map, layout-parallel to Model.
struct ParamMask {
    struct LayerMask {
        std::vector<uint8_t> weights; // fan_out x fan_in
        std::vector<uint8_t> bias;    // fan_out
    };
    std::vector<LayerMask> layers;

    size_t active_count() const;
};

struct ForwardResult {
    std::vector<std::vector<double>> activations; // post-activation per layer, n x width
    double loss = 0.0;
    double accuracy = 0.0;
};

// He-normal weights, zero biases; bit-reproducible per seed.
Model init_model(const Architecture& arch, uint64_t seed);

// Full-model forward pass; masks never enter here (frozen != pruned).
ForwardResult forward(const Model& model, const Batch& batch);

double batch_loss(const Model& model, const Batch& batch);
double batch_accuracy(const Model& model, const Batch& batch);

// Loss and gradient of the full-model loss, with gradient entries zeroed at
// inactive positions. Backprop flows through frozen neurons; only their
// parameter updates are suppressed.
std::pair<double, Gradient> masked_loss_grad(const Model& model, const Batch& batch,
                                             const ParamMask& mask);

// Unmasked loss/gradient.
std::pair<double, Gradient> loss_grad(const Model& model, const Batch& batch);

// model - eta * grad; positions with zero gradient stay bitwise unchanged.
Model apply_sgd_step(const Model& model, const Gradient& grad, double eta);

ParamMask full_param_mask(const Architecture& arch);

} // namespace fedspu
