#pragma once

#include <limits>
#include <optional>

#include "fedspu/data.hpp"
#include "fedspu/mask.hpp"
#include "fedspu/protocol.hpp"

namespace fedspu {

// Freezing vs pruning, the two client-side training semantics.
// full_model_frozen: forward through the full local model, only active
// parameters receive gradient. sub_model: the round's trainable state is
// exactly the dispatched sub-model; inactive neurons do not exist for the
// round's forward pass.
enum class TrainMode { full_model_frozen, sub_model };

struct ClientState {
    uint32_t id = 0;
    Model local;
    double p = 1.0;
    std::vector<int> train_indices;
    std::vector<int> val_indices;
    double prev_es_loss = std::numeric_limits<double>::infinity();
    ClientStatus status = ClientStatus::on;
    std::optional<ImportanceScores> probe_scores; // gradient probe from last participation
    std::optional<NeuronMask> last_mask;          // sub-model evaluation uses this
};

struct ClientRoundConfig {
    int epochs = 5;
    double eta = 0.05;
    int batch_size = 16;
    double lambda = 0.7;
    bool es_enabled = false;
    TrainMode mode = TrainMode::full_model_frozen;
    bool compute_probe = false; // record a one-minibatch full-model gradient probe
};

struct RoundMetrics {
    double train_loss = 0.0; // mean mini-batch loss of the final local epoch
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    double es_loss = 0.0;
    bool stopped_this_round = false;
    int64_t samples_processed = 0; // training sample passes across all epochs
};

double es_combined_loss(double train_loss, double test_loss, double lambda);

// Restore the round's sub-model as a standalone dense net (input/output
// layers stay full width).
Model extract_sub_model(const Model& full, const NeuronMask& nm);
void write_back_sub_model(Model& full, const Model& sub, const NeuronMask& nm);

NeuronMask mask_from_payload(const ActivePayload& payload, const Architecture& arch);

Model merge_active(const Model& local, const ActivePayload& payload);

// One full client round: merge, train under the round's fixed mask, apply
// the early-stopping rule, emit the updated active payload.
ActivePayload client_round(ClientState& state, const ActivePayload& payload_in,
                           const LabeledDataset& dataset, const ClientRoundConfig& cfg,
                           RngStream rng, RoundMetrics& metrics);

// Test loss/accuracy of the client's personal model under its semantics
// (full model for freezing, latest sub-model for dropout methods).
std::pair<double, double> evaluate_personal(const ClientState& state,
                                            const LabeledDataset& dataset, TrainMode mode);

} // namespace fedspu
