#include "fedspu/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedspu {

std::vector<int> NeuronMask::active_indices(int layer) const {
    std::vector<int> idx;
    const auto& bits = layers[layer];
    for (int i = 0; i < static_cast<int>(bits.size()); ++i)
        if (bits[i]) idx.push_back(i);
    return idx;
}

int NeuronMask::active_count(int layer) const {
    const auto& bits = layers[layer];
    return static_cast<int>(std::count(bits.begin(), bits.end(), uint8_t{1}));
}

bool NeuronMask::consistent_with(const Architecture& arch) const {
    if (static_cast<int>(layers.size()) != arch.depth()) return false;
    for (int l = 0; l < arch.depth(); ++l)
        if (static_cast<int>(layers[l].size()) != arch.layer_widths[l]) return false;
    return true;
}

int active_count_for(double p, int width) {
    // round half up; never let a layer go dead
    return std::max(1, static_cast<int>(std::floor(p * width + 0.5)));
}

NeuronMask full_neuron_mask(const Architecture& arch) {
    NeuronMask nm;
    nm.active_ratio = 1.0;
    for (int w : arch.layer_widths) nm.layers.emplace_back(w, uint8_t{1});
    return nm;
}

NeuronMask sample_neuron_mask(const Architecture& arch, double p, MaskStrategy strategy,
                              const std::optional<ImportanceScores>& scores, RngStream& rng) {
    arch.validate();
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("active ratio p must be in (0,1]");
    if (strategy == MaskStrategy::top_k && !scores)
        throw std::invalid_argument("top_k strategy requires importance scores");

    NeuronMask nm;
    nm.active_ratio = p;
    nm.layers.resize(arch.depth());
    nm.layers.front().assign(arch.input_width(), 1);
    nm.layers.back().assign(arch.output_width(), 1);

    for (int l = 1; l < arch.depth() - 1; ++l) {
        int width = arch.layer_widths[l];
        int k = active_count_for(p, width);
        auto& bits = nm.layers[l];
        bits.assign(width, 0);
        switch (strategy) {
        case MaskStrategy::random: {
            for (int i : rng.sample_without_replacement(width, k)) bits[i] = 1;
            break;
        }
        case MaskStrategy::ordered: {
            // keep leftmost neurons; the rightmost width-k are pruned
            for (int i = 0; i < k; ++i) bits[i] = 1;
            break;
        }
        case MaskStrategy::top_k: {
            const auto& s = scores->hidden_scores.at(l - 1);
            if (static_cast<int>(s.size()) != width)
                throw std::invalid_argument("importance scores do not match layer width");
            std::vector<int> order(width);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int a, int b) { return s[a] > s[b]; }); // ties: lower index first
            for (int i = 0; i < k; ++i) bits[order[i]] = 1;
            break;
        }
        }
    }
    return nm;
}

ImportanceScores neuron_importance(const Model& model, ImportanceMetric metric,
                                   const Batch* probe_batch) {
    if (metric == ImportanceMetric::l2_gradient) {
        if (!probe_batch)
            throw std::invalid_argument("gradient importance metric requires a probe batch");
        auto [loss, grad] = loss_grad(model, *probe_batch);
        (void)loss;
        return gradient_importance(grad);
    }
    ImportanceScores out;
    out.metric = metric;
    const int depth = model.arch.depth();
    for (int l = 1; l < depth - 1; ++l) {
        const Layer& layer = model.layers[l - 1];
        std::vector<double> scores(layer.fan_out, 0.0);
        for (int i = 0; i < layer.fan_out; ++i) {
            double acc = 0.0;
            for (int j = 0; j < layer.fan_in; ++j) {
                double v = layer.w(i, j);
                acc += (metric == ImportanceMetric::l1_weight) ? std::abs(v) : v * v;
            }
            double b = layer.bias[i];
            acc += (metric == ImportanceMetric::l1_weight) ? std::abs(b) : b * b;
            scores[i] = (metric == ImportanceMetric::l1_weight) ? acc : std::sqrt(acc);
        }
        out.hidden_scores.push_back(std::move(scores));
    }
    return out;
}

ImportanceScores gradient_importance(const Gradient& grad) {
    ImportanceScores out;
    out.metric = ImportanceMetric::l2_gradient;
    const int depth = grad.arch.depth();
    for (int l = 1; l < depth - 1; ++l) {
        const Layer& layer = grad.layers[l - 1];
        std::vector<double> scores(layer.fan_out, 0.0);
        for (int i = 0; i < layer.fan_out; ++i) {
            double acc = 0.0;
            for (int j = 0; j < layer.fan_in; ++j) {
                double v = layer.w(i, j);
                acc += v * v;
            }
            acc += layer.bias[i] * layer.bias[i];
            scores[i] = std::sqrt(acc);
        }
        out.hidden_scores.push_back(std::move(scores));
    }
    return out;
}

ParamMask derive_param_mask(const NeuronMask& nm, const Architecture& arch) {
    if (!nm.consistent_with(arch)) throw std::invalid_argument("mask/arch mismatch");
    ParamMask pm;
    for (int l = 1; l < arch.depth(); ++l) {
        const auto& in_bits = nm.layers[l - 1];
        const auto& out_bits = nm.layers[l];
        ParamMask::LayerMask lm;
        lm.weights.resize(in_bits.size() * out_bits.size());
        lm.bias.resize(out_bits.size());
        for (size_t i = 0; i < out_bits.size(); ++i) {
            for (size_t j = 0; j < in_bits.size(); ++j)
                lm.weights[i * in_bits.size() + j] = out_bits[i] & in_bits[j];
            lm.bias[i] = out_bits[i];
        }
        pm.layers.push_back(std::move(lm));
    }
    return pm;
}

} // namespace fedspu
