#include "fedspu/server.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedspu {

namespace {

// rng purpose tags keep the per-(client, round) streams disjoint
constexpr uint64_t kSamplingTag = 0x73616d70ULL;
constexpr uint64_t kMaskTag = 0x6d61736bULL;
constexpr uint64_t kTrainTag = 0x7472616eULL;

} // namespace

void FederationConfig::validate() const {
    arch.validate();
    if (client_p.empty()) throw std::invalid_argument("config: no clients");
    if (rounds < 0) throw std::invalid_argument("config: rounds must be >= 0");
    if (clients_per_round < 1) throw std::invalid_argument("config: clients_per_round must be >= 1");
    if (local_epochs < 1) throw std::invalid_argument("config: local_epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("config: bad eta");
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("config: lambda must be in (0,1)");
    for (double p : client_p)
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("config: p_k must be in (0,1]");
}

TrainMode train_mode_for(Method method) {
    return method == Method::fedspu ? TrainMode::full_model_frozen : TrainMode::sub_model;
}

std::vector<uint32_t> sample_clients(const std::vector<uint32_t>& active_ids, int m,
                                     RngStream& rng) {
    if (active_ids.empty()) throw std::logic_error("sample_clients: no active clients");
    int n = static_cast<int>(active_ids.size());
    int k = std::min(m, n);
    std::vector<uint32_t> out;
    out.reserve(k);
    for (int i : rng.sample_without_replacement(n, k)) out.push_back(active_ids[i]);
    return out;
}

std::map<uint32_t, Dispatch> dispatch_round(const Model& global, Method method, int round,
                                            uint64_t master_seed,
                                            const std::vector<uint32_t>& sampled,
                                            const std::vector<ClientState>& clients) {
    std::map<uint32_t, Dispatch> out;
    for (uint32_t id : sampled) {
        const ClientState& client = clients.at(id);
        auto rng = RngStream::derive(master_seed ^ kMaskTag, id, static_cast<uint64_t>(round));
        NeuronMask nm;
        switch (method) {
        case Method::fedspu:
        case Method::random_dropout:
            nm = sample_neuron_mask(global.arch, client.p, MaskStrategy::random, std::nullopt,
                                    rng);
            break;
        case Method::fjord:
            nm = sample_neuron_mask(global.arch, client.p, MaskStrategy::ordered, std::nullopt,
                                    rng);
            break;
        case Method::fedmp:
            nm = sample_neuron_mask(global.arch, client.p, MaskStrategy::top_k,
                                    neuron_importance(global, ImportanceMetric::l1_weight), rng);
            break;
        case Method::hermes:
            nm = sample_neuron_mask(global.arch, client.p, MaskStrategy::top_k,
                                    neuron_importance(global, ImportanceMetric::l2_weight), rng);
            break;
        case Method::prunefl:
            // gradient scores come from the client's previous participation;
            // first contact falls back to a random mask
            if (client.probe_scores)
                nm = sample_neuron_mask(global.arch, client.p, MaskStrategy::top_k,
                                        client.probe_scores, rng);
            else
                nm = sample_neuron_mask(global.arch, client.p, MaskStrategy::random, std::nullopt,
                                        rng);
            break;
        }
        PayloadMeta meta{id, static_cast<uint32_t>(round), 0, ClientStatus::on};
        ActivePayload payload = extract_payload(global, nm, meta);
        out.emplace(id, Dispatch{std::move(nm), std::move(payload)});
    }
    return out;
}

Model aggregate_payloads(const Model& global, const std::vector<ActivePayload>& payloads) {
    if (payloads.empty()) throw std::invalid_argument("aggregate_payloads: no payloads");
    Model out = global;
    std::vector<std::vector<double>> w_num(global.layers.size()), b_num(global.layers.size());
    std::vector<std::vector<double>> w_den(global.layers.size()), b_den(global.layers.size());
    for (size_t l = 0; l < global.layers.size(); ++l) {
        w_num[l].assign(global.layers[l].weights.size(), 0.0);
        w_den[l].assign(global.layers[l].weights.size(), 0.0);
        b_num[l].assign(global.layers[l].bias.size(), 0.0);
        b_den[l].assign(global.layers[l].bias.size(), 0.0);
    }
    for (const ActivePayload& p : payloads) {
        if (p.layer_count() != global.arch.depth())
            throw std::invalid_argument("aggregate_payloads: payload/arch mismatch");
        double wgt = static_cast<double>(p.n_k);
        for (int l = 1; l < global.arch.depth(); ++l) {
            const auto& outs = p.active_indices[l];
            const auto& ins = p.active_indices[l - 1];
            const auto& vals = p.values[l];
            if (vals.size() != outs.size() * ins.size() + outs.size())
                throw std::invalid_argument("aggregate_payloads: payload value count mismatch");
            size_t fan_in = global.layers[l - 1].fan_in;
            size_t v = 0;
            for (uint32_t i : outs)
                for (uint32_t j : ins) {
                    size_t q = static_cast<size_t>(i) * fan_in + j;
                    w_num[l - 1][q] += wgt * vals[v];
                    w_den[l - 1][q] += wgt;
                    ++v;
                }
            for (uint32_t i : outs) {
                b_num[l - 1][i] += wgt * vals[v++];
                b_den[l - 1][i] += wgt;
            }
        }
    }
    for (size_t l = 0; l < out.layers.size(); ++l) {
        for (size_t q = 0; q < out.layers[l].weights.size(); ++q)
            if (w_den[l][q] > 0.0) out.layers[l].weights[q] = w_num[l][q] / w_den[l][q];
        for (size_t q = 0; q < out.layers[l].bias.size(); ++q)
            if (b_den[l][q] > 0.0) out.layers[l].bias[q] = b_num[l][q] / b_den[l][q];
    }
    return out;
}

FederationResult run_federation(const FederationConfig& cfg, const LabeledDataset& dataset,
                                const PartitionPlan& plan) {
    cfg.validate();
    if (static_cast<int>(plan.client_indices.size()) != cfg.client_count())
        throw std::invalid_argument("run_federation: partition/client count mismatch");

    FederationResult result;
    result.global = init_model(cfg.arch, cfg.master_seed);

    for (int k = 0; k < cfg.client_count(); ++k) {
        ClientState st;
        st.id = static_cast<uint32_t>(k);
        st.local = result.global; // w^0 broadcast
        st.p = cfg.client_p[k];
        auto [train, val] = train_test_split(plan.client_indices[k], dataset.labels, cfg.lambda,
                                             mix64(cfg.master_seed) ^ static_cast<uint64_t>(k));
        st.train_indices = std::move(train);
        st.val_indices = std::move(val);
        result.clients.push_back(std::move(st));
    }

    const TrainMode mode = train_mode_for(cfg.method);

    for (int round = 1; round <= cfg.rounds; ++round) {
        std::vector<uint32_t> active_ids;
        for (const auto& c : result.clients)
            if (c.status == ClientStatus::on) active_ids.push_back(c.id);
        if (active_ids.empty()) {
            result.early_terminated = true;
            break;
        }

        auto sample_rng =
            RngStream::derive(cfg.master_seed ^ kSamplingTag, static_cast<uint64_t>(round));
        std::vector<uint32_t> sampled =
            sample_clients(active_ids, cfg.clients_per_round, sample_rng);

        auto dispatches =
            dispatch_round(result.global, cfg.method, round, cfg.master_seed, sampled,
                           result.clients);

        RoundRecord record;
        record.round = round;
        std::vector<ActivePayload> uploads;
        double acc_sum = 0.0;

        for (uint32_t id : sampled) {
            ClientState& client = result.clients[id];
            const Dispatch& d = dispatches.at(id);

            ClientRoundConfig ccfg;
            ccfg.epochs = cfg.local_epochs;
            ccfg.eta = cfg.eta;
            ccfg.batch_size = cfg.batch_size;
            ccfg.lambda = cfg.lambda;
            ccfg.es_enabled = cfg.es_enabled;
            ccfg.mode = mode;
            ccfg.compute_probe = cfg.method == Method::prunefl;

            RoundMetrics m;
            auto rng = RngStream::derive(cfg.master_seed ^ kTrainTag, id,
                                         static_cast<uint64_t>(round));
            ActivePayload up = client_round(client, d.payload, dataset, ccfg, rng, m);

            WireSize ws = payload_wire_size(d.mask, cfg.arch);
            FlopRates fr = flop_rates(cfg.arch, client.p, cfg.method);

            ClientRoundRecord cr;
            cr.id = id;
            cr.train_loss = m.train_loss;
            cr.test_loss = m.test_loss;
            cr.test_accuracy = m.test_accuracy;
            cr.es_loss = m.es_loss;
            cr.stopped = m.stopped_this_round;
            cr.bytes_down = ws.total_bytes;
            cr.bytes_up = ws.total_bytes; // same mask, same layout
            cr.flops_forward = static_cast<int64_t>(fr.forward_per_sample) * m.samples_processed;
            cr.flops_backward = static_cast<int64_t>(fr.backward_per_sample) * m.samples_processed;
            record.clients.push_back(cr);
            if (m.stopped_this_round) record.stopped_ids.push_back(id);
            acc_sum += m.test_accuracy;

            // the stopping round's update is still aggregated
            uploads.push_back(std::move(up));
        }

        result.global = aggregate_payloads(result.global, uploads);
        record.mean_test_accuracy = acc_sum / sampled.size();
        record.active_remaining = 0;
        for (const auto& c : result.clients)
            if (c.status == ClientStatus::on) ++record.active_remaining;
        result.history.push_back(std::move(record));
        result.rounds_executed = round;

        if (cfg.es_enabled && result.history.back().active_remaining == 0) {
            result.early_terminated = true;
            break;
        }
    }
    return result;
}

FinalEvaluation evaluate_final(const FederationResult& result, const LabeledDataset& dataset,
                               Method method) {
    FinalEvaluation ev;
    const TrainMode mode = train_mode_for(method);
    double wsum = 0.0, wacc = 0.0, usum = 0.0;
    for (const ClientState& c : result.clients) {
        auto [loss, acc] = evaluate_personal(c, dataset, mode);
        (void)loss;
        ev.per_client_accuracy.push_back(acc);
        usum += acc;
        double n_k = static_cast<double>(c.train_indices.size());
        wacc += n_k * acc;
        wsum += n_k;
    }
    ev.mean_accuracy_uniform = usum / result.clients.size();
    ev.mean_accuracy_weighted = wsum > 0.0 ? wacc / wsum : 0.0;
    return ev;
}

} // namespace fedspu
