#include "fedspu/nn.hpp"

#include <algorithm>
#include <cmath>

namespace fedspu {

void Architecture::validate() const {
    if (layer_widths.size() < 3)
        throw std::invalid_argument("architecture needs input, >=1 hidden, output layers");
    for (int w : layer_widths)
        if (w < 1) throw std::invalid_argument("layer widths must be >= 1");
}

size_t Model::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

size_t ParamMask::active_count() const {
    size_t n = 0;
    for (const auto& l : layers) {
        for (uint8_t b : l.weights) n += b;
        for (uint8_t b : l.bias) n += b;
    }
    return n;
}

Model init_model(const Architecture& arch, uint64_t seed) {
    arch.validate();
    Model m;
    m.arch = arch;
    auto rng = RngStream::derive(seed, 0x696e6974ULL);
    for (int l = 1; l < arch.depth(); ++l) {
        Layer layer;
        layer.fan_in = arch.layer_widths[l - 1];
        layer.fan_out = arch.layer_widths[l];
        double stddev = std::sqrt(2.0 / layer.fan_in);
        layer.weights.resize(static_cast<size_t>(layer.fan_out) * layer.fan_in);
        for (auto& w : layer.weights) w = stddev * rng.next_normal();
        layer.bias.assign(layer.fan_out, 0.0);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

ParamMask full_param_mask(const Architecture& arch) {
    ParamMask pm;
    for (int l = 1; l < arch.depth(); ++l) {
        ParamMask::LayerMask lm;
        lm.weights.assign(static_cast<size_t>(arch.layer_widths[l]) * arch.layer_widths[l - 1], 1);
        lm.bias.assign(arch.layer_widths[l], 1);
        pm.layers.push_back(std::move(lm));
    }
    return pm;
}

namespace {

void check_batch(const Model& model, const Batch& batch) {
    if (batch.size() < 1) throw std::invalid_argument("empty batch");
    if (batch.width != model.arch.input_width())
        throw std::invalid_argument("batch width does not match architecture");
    for (int y : batch.labels)
        if (y < 0 || y >= model.arch.output_width())
            throw std::invalid_argument("label out of range");
}

// Pre-activations for every layer; z[l] is n x width(l+1).
std::vector<std::vector<double>> forward_raw(const Model& model, const Batch& batch,
                                             std::vector<std::vector<double>>& acts) {
    const int n = batch.size();
    const int depth = model.arch.depth();
    std::vector<std::vector<double>> zs(depth - 1);
    acts.assign(depth, {});
    acts[0] = batch.inputs;
    for (int l = 0; l < depth - 1; ++l) {
        const Layer& layer = model.layers[l];
        zs[l].assign(static_cast<size_t>(n) * layer.fan_out, 0.0);
        acts[l + 1].assign(static_cast<size_t>(n) * layer.fan_out, 0.0);
        const std::vector<double>& prev = acts[l];
        for (int s = 0; s < n; ++s) {
            const double* x = &prev[static_cast<size_t>(s) * layer.fan_in];
            double* z = &zs[l][static_cast<size_t>(s) * layer.fan_out];
            double* a = &acts[l + 1][static_cast<size_t>(s) * layer.fan_out];
            for (int i = 0; i < layer.fan_out; ++i) {
                const double* wr = &layer.weights[static_cast<size_t>(i) * layer.fan_in];
                double acc = layer.bias[i];
                for (int j = 0; j < layer.fan_in; ++j) acc += wr[j] * x[j];
                z[i] = acc;
                a[i] = (l + 1 == depth - 1) ? acc : std::max(0.0, acc);
            }
        }
    }
    return zs;
}

// Softmax over logits in place; returns (mean CE loss, accuracy).
std::pair<double, double> softmax_ce(std::vector<double>& logits, const std::vector<int>& labels,
                                     int classes) {
    const int n = static_cast<int>(labels.size());
    double loss = 0.0;
    int correct = 0;
    for (int s = 0; s < n; ++s) {
        double* row = &logits[static_cast<size_t>(s) * classes];
        int argmax = 0;
        double maxv = row[0];
        for (int c = 1; c < classes; ++c)
            if (row[c] > maxv) { maxv = row[c]; argmax = c; } // ties: lowest index wins
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            row[c] = std::exp(row[c] - maxv);
            sum += row[c];
        }
        for (int c = 0; c < classes; ++c) row[c] /= sum;
        double p = row[labels[s]];
        loss += -std::log(std::max(p, 1e-300));
        if (argmax == labels[s]) ++correct;
    }
    loss /= n;
    if (!std::isfinite(loss)) throw NumericalError("non-finite loss in forward pass");
    return {loss, static_cast<double>(correct) / n};
}

} // namespace

ForwardResult forward(const Model& model, const Batch& batch) {
    check_batch(model, batch);
    ForwardResult r;
    forward_raw(model, batch, r.activations);
    for (const auto& layer_acts : r.activations)
        for (double a : layer_acts)
            if (!std::isfinite(a)) throw NumericalError("non-finite activation in forward pass");
    std::vector<double> probs = r.activations.back();
    std::tie(r.loss, r.accuracy) = softmax_ce(probs, batch.labels, model.arch.output_width());
    return r;
}

double batch_loss(const Model& model, const Batch& batch) { return forward(model, batch).loss; }

double batch_accuracy(const Model& model, const Batch& batch) {
    return forward(model, batch).accuracy;
}

std::pair<double, Gradient> loss_grad(const Model& model, const Batch& batch) {
    check_batch(model, batch);
    const int n = batch.size();
    const int depth = model.arch.depth();
    const int classes = model.arch.output_width();

    std::vector<std::vector<double>> acts;
    auto zs = forward_raw(model, batch, acts);

    std::vector<double> probs = acts.back();
    auto [loss, acc] = softmax_ce(probs, batch.labels, classes);
    (void)acc;

    Gradient grad;
    grad.arch = model.arch;
    grad.layers.resize(model.layers.size());
    for (size_t l = 0; l < model.layers.size(); ++l) {
        grad.layers[l].fan_in = model.layers[l].fan_in;
        grad.layers[l].fan_out = model.layers[l].fan_out;
        grad.layers[l].weights.assign(model.layers[l].weights.size(), 0.0);
        grad.layers[l].bias.assign(model.layers[l].bias.size(), 0.0);
    }

    // delta at the output: (softmax - onehot) / n
    std::vector<double> delta = std::move(probs);
    for (int s = 0; s < n; ++s) {
        double* row = &delta[static_cast<size_t>(s) * classes];
        row[batch.labels[s]] -= 1.0;
        for (int c = 0; c < classes; ++c) row[c] /= n;
    }

    for (int l = depth - 2; l >= 0; --l) {
        Layer& g = grad.layers[l];
        const Layer& layer = model.layers[l];
        const std::vector<double>& prev = acts[l];
        for (int s = 0; s < n; ++s) {
            const double* d = &delta[static_cast<size_t>(s) * layer.fan_out];
            const double* x = &prev[static_cast<size_t>(s) * layer.fan_in];
            for (int i = 0; i < layer.fan_out; ++i) {
                double* gw = &g.weights[static_cast<size_t>(i) * layer.fan_in];
                for (int j = 0; j < layer.fan_in; ++j) gw[j] += d[i] * x[j];
                g.bias[i] += d[i];
            }
        }
        if (l > 0) {
            std::vector<double> next_delta(static_cast<size_t>(n) * layer.fan_in, 0.0);
            for (int s = 0; s < n; ++s) {
                const double* d = &delta[static_cast<size_t>(s) * layer.fan_out];
                const double* z = &zs[l - 1][static_cast<size_t>(s) * layer.fan_in];
                double* nd = &next_delta[static_cast<size_t>(s) * layer.fan_in];
                for (int i = 0; i < layer.fan_out; ++i) {
                    const double* wr = &layer.weights[static_cast<size_t>(i) * layer.fan_in];
                    for (int j = 0; j < layer.fan_in; ++j) nd[j] += wr[j] * d[i];
                }
                for (int j = 0; j < layer.fan_in; ++j)
                    if (z[j] <= 0.0) nd[j] = 0.0;
            }
            delta = std::move(next_delta);
        }
    }
    return {loss, std::move(grad)};
}

std::pair<double, Gradient> masked_loss_grad(const Model& model, const Batch& batch,
                                             const ParamMask& mask) {
    if (mask.layers.size() != model.layers.size())
        throw std::invalid_argument("mask/model layer count mismatch");
    for (size_t l = 0; l < mask.layers.size(); ++l)
        if (mask.layers[l].weights.size() != model.layers[l].weights.size() ||
            mask.layers[l].bias.size() != model.layers[l].bias.size())
            throw std::invalid_argument("mask/model shape mismatch");

    auto [loss, grad] = loss_grad(model, batch);
    for (size_t l = 0; l < grad.layers.size(); ++l) {
        auto& g = grad.layers[l];
        const auto& m = mask.layers[l];
        for (size_t i = 0; i < g.weights.size(); ++i)
            if (!m.weights[i]) g.weights[i] = 0.0;
        for (size_t i = 0; i < g.bias.size(); ++i)
            if (!m.bias[i]) g.bias[i] = 0.0;
    }
    return {loss, std::move(grad)};
}

Model apply_sgd_step(const Model& model, const Gradient& grad, double eta) {
    if (!std::isfinite(eta)) throw std::invalid_argument("non-finite learning rate");
    if (grad.layers.size() != model.layers.size())
        throw std::invalid_argument("grad/model layer count mismatch");
    Model out = model;
    for (size_t l = 0; l < out.layers.size(); ++l) {
        auto& layer = out.layers[l];
        const auto& g = grad.layers[l];
        if (g.weights.size() != layer.weights.size() || g.bias.size() != layer.bias.size())
            throw std::invalid_argument("grad/model shape mismatch");
        for (size_t i = 0; i < layer.weights.size(); ++i)
            if (g.weights[i] != 0.0) layer.weights[i] -= eta * g.weights[i];
        for (size_t i = 0; i < layer.bias.size(); ++i)
            if (g.bias[i] != 0.0) layer.bias[i] -= eta * g.bias[i];
    }
    return out;
}

} // namespace fedspu
