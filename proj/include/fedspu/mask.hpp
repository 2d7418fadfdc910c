#pragma once

#include <optional>
#include <vector>

#include "fedspu/nn.hpp"
#include "fedspu/rng.hpp"

namespace fedspu {

// Per-layer active-neuron bits. Input and output layers are always fully
// active; each hidden layer carries exactly max(1, round(p * width)) ones.
struct NeuronMask {
    std::vector<std::vector<uint8_t>> layers;
    double active_ratio = 1.0;

    std::vector<int> active_indices(int layer) const;
    int active_count(int layer) const;
    bool consistent_with(const Architecture& arch) const;
};

enum class MaskStrategy { random, ordered, top_k };

enum class ImportanceMetric { l1_weight, l2_weight, l2_gradient };

struct ImportanceScores {
    // scores[h] holds hidden layer h+1's per-neuron scores (hidden layers only)
    std::vector<std::vector<double>> hidden_scores;
    ImportanceMetric metric = ImportanceMetric::l2_weight;
};

int active_count_for(double p, int width);

NeuronMask sample_neuron_mask(const Architecture& arch, double p, MaskStrategy strategy,
                              const std::optional<ImportanceScores>& scores, RngStream& rng);

// Score of hidden neuron i = norm over its incoming weight row and bias,
// of parameter values (weight metrics) or of the unmasked gradient on
// probe_batch (gradient metric).
ImportanceScores neuron_importance(const Model& model, ImportanceMetric metric,
                                   const Batch* probe_batch = nullptr);

ImportanceScores gradient_importance(const Gradient& grad);

// Endpoint-AND rule: W^l entry (i,j) active iff both endpoint neurons are
// active; bias i active iff neuron i is.
ParamMask derive_param_mask(const NeuronMask& nm, const Architecture& arch);

NeuronMask full_neuron_mask(const Architecture& arch);

} // namespace fedspu
