#pragma once

#include <map>

#include "fedspu/client.hpp"
#include "fedspu/diagnostics.hpp"

namespace fedspu {

struct FederationConfig {
    Method method = Method::fedspu;
    int rounds = 500;
    int clients_per_round = 10;
    int local_epochs = 5;
    int batch_size = 16;
    double eta = 0.05;
    double lambda = 0.7;
    bool es_enabled = false;
    uint64_t master_seed = 0;
    Architecture arch;
    std::vector<double> client_p; // one entry per client, fixed for the run

    int client_count() const { return static_cast<int>(client_p.size()); }
    void validate() const;
};

struct ClientRoundRecord {
    uint32_t id = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    double es_loss = 0.0;
    bool stopped = false;
    size_t bytes_up = 0;
    size_t bytes_down = 0;
    int64_t flops_forward = 0;
    int64_t flops_backward = 0;
};

struct RoundRecord {
    int round = 0;
    std::vector<ClientRoundRecord> clients;
    std::vector<uint32_t> stopped_ids;
    double mean_test_accuracy = 0.0; // uniform over this round's participants
    int active_remaining = 0;
};

struct FederationResult {
    Model global;
    std::vector<ClientState> clients;
    std::vector<RoundRecord> history;
    int rounds_executed = 0;
    bool early_terminated = false;
};

// Uniform sample without replacement of min(m, #active) ids.
std::vector<uint32_t> sample_clients(const std::vector<uint32_t>& active_ids, int m,
                                     RngStream& rng);

struct Dispatch {
    NeuronMask mask;
    ActivePayload payload;
};

// Mask per the method's strategy, payload carrying the global model's
// values at the active positions.
std::map<uint32_t, Dispatch> dispatch_round(const Model& global, Method method, int round,
                                            uint64_t master_seed,
                                            const std::vector<uint32_t>& sampled,
                                            const std::vector<ClientState>& clients);

// Per-parameter n_k-weighted average over the clients whose payload covers
// the position; uncovered positions keep the previous global value.
Model aggregate_payloads(const Model& global, const std::vector<ActivePayload>& payloads);

FederationResult run_federation(const FederationConfig& cfg, const LabeledDataset& dataset,
                                const PartitionPlan& plan);

TrainMode train_mode_for(Method method);

struct FinalEvaluation {
    std::vector<double> per_client_accuracy;
    double mean_accuracy_uniform = 0.0;
    double mean_accuracy_weighted = 0.0; // n_k-weighted
};

FinalEvaluation evaluate_final(const FederationResult& result, const LabeledDataset& dataset,
                               Method method);

} // namespace fedspu
