#include "fedspu/client.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedspu {

double es_combined_loss(double train_loss, double test_loss, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("es_combined_loss: lambda must be in (0,1)");
    if (!std::isfinite(train_loss) || !std::isfinite(test_loss))
        throw std::invalid_argument("es_combined_loss: non-finite loss");
    return lambda * train_loss + (1.0 - lambda) * test_loss;
}

NeuronMask mask_from_payload(const ActivePayload& payload, const Architecture& arch) {
    if (payload.layer_count() != arch.depth())
        throw std::invalid_argument("payload/arch layer count mismatch");
    NeuronMask nm;
    nm.layers.resize(arch.depth());
    for (int l = 0; l < arch.depth(); ++l) {
        nm.layers[l].assign(arch.layer_widths[l], 0);
        for (uint32_t i : payload.active_indices[l]) {
            if (i >= static_cast<uint32_t>(arch.layer_widths[l]))
                throw std::invalid_argument("payload index out of range for architecture");
            nm.layers[l][i] = 1;
        }
    }
    int h = arch.depth() > 2 ? nm.active_count(1) : arch.layer_widths[1];
    nm.active_ratio = static_cast<double>(h) / arch.layer_widths[1];
    return nm;
}

Model merge_active(const Model& local, const ActivePayload& payload) {
    if (payload.layer_count() != local.arch.depth())
        throw std::invalid_argument("merge_active: payload/arch mismatch");
    Model out = local;
    for (int l = 1; l < local.arch.depth(); ++l) {
        Layer& layer = out.layers[l - 1];
        const auto& outs = payload.active_indices[l];
        const auto& ins = payload.active_indices[l - 1];
        const auto& vals = payload.values[l];
        if (vals.size() != outs.size() * ins.size() + outs.size())
            throw std::invalid_argument("merge_active: payload value count mismatch");
        size_t v = 0;
        for (uint32_t i : outs)
            for (uint32_t j : ins) layer.w(static_cast<int>(i), static_cast<int>(j)) = vals[v++];
        for (uint32_t i : outs) layer.bias[i] = vals[v++];
    }
    return out;
}

Model extract_sub_model(const Model& full, const NeuronMask& nm) {
    if (!nm.consistent_with(full.arch))
        throw std::invalid_argument("extract_sub_model: mask/arch mismatch");
    Model sub;
    sub.arch.layer_widths.resize(full.arch.depth());
    std::vector<std::vector<int>> idx(full.arch.depth());
    for (int l = 0; l < full.arch.depth(); ++l) {
        idx[l] = nm.active_indices(l);
        sub.arch.layer_widths[l] = static_cast<int>(idx[l].size());
    }
    for (int l = 1; l < full.arch.depth(); ++l) {
        Layer layer;
        layer.fan_in = sub.arch.layer_widths[l - 1];
        layer.fan_out = sub.arch.layer_widths[l];
        layer.weights.resize(static_cast<size_t>(layer.fan_out) * layer.fan_in);
        layer.bias.resize(layer.fan_out);
        const Layer& src = full.layers[l - 1];
        for (int i = 0; i < layer.fan_out; ++i) {
            for (int j = 0; j < layer.fan_in; ++j)
                layer.w(i, j) = src.w(idx[l][i], idx[l - 1][j]);
            layer.bias[i] = src.bias[idx[l][i]];
        }
        sub.layers.push_back(std::move(layer));
    }
    return sub;
}

void write_back_sub_model(Model& full, const Model& sub, const NeuronMask& nm) {
    std::vector<std::vector<int>> idx(full.arch.depth());
    for (int l = 0; l < full.arch.depth(); ++l) idx[l] = nm.active_indices(l);
    for (int l = 1; l < full.arch.depth(); ++l) {
        Layer& dst = full.layers[l - 1];
        const Layer& src = sub.layers[l - 1];
        for (int i = 0; i < src.fan_out; ++i) {
            for (int j = 0; j < src.fan_in; ++j)
                dst.w(idx[l][i], idx[l - 1][j]) = src.w(i, j);
            dst.bias[idx[l][i]] = src.bias[i];
        }
    }
}

namespace {

// `epochs` passes of mini-batch SGD; returns mean mini-batch loss of the
// final epoch.
double train_epochs(Model& model, const ParamMask& mask, const LabeledDataset& dataset,
                    const std::vector<int>& train_indices, int epochs, double eta, int batch_size,
                    RngStream& rng, int64_t& samples_processed) {
    std::vector<int> order = train_indices;
    double final_epoch_loss = 0.0;
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (size_t start = 0; start < order.size(); start += batch_size) {
            size_t end = std::min(order.size(), start + batch_size);
            std::vector<int> batch_idx(order.begin() + start, order.begin() + end);
            Batch batch = dataset.make_batch(batch_idx);
            auto [loss, grad] = masked_loss_grad(model, batch, mask);
            model = apply_sgd_step(model, grad, eta);
            epoch_loss += loss;
            ++n_batches;
            samples_processed += static_cast<int64_t>(batch_idx.size());
        }
        final_epoch_loss = epoch_loss / std::max(1, n_batches);
    }
    return final_epoch_loss;
}

} // namespace

ActivePayload client_round(ClientState& state, const ActivePayload& payload_in,
                           const LabeledDataset& dataset, const ClientRoundConfig& cfg,
                           RngStream rng, RoundMetrics& metrics) {
    if (state.status == ClientStatus::stopped)
        throw std::logic_error("client_round called on a stopped client");

    NeuronMask mask = mask_from_payload(payload_in, state.local.arch);
    Model merged = merge_active(state.local, payload_in);
    metrics.samples_processed = 0;

    Batch val_batch = dataset.make_batch(state.val_indices);

    if (cfg.mode == TrainMode::full_model_frozen) {
        ParamMask pm = derive_param_mask(mask, state.local.arch);
        metrics.train_loss = train_epochs(merged, pm, dataset, state.train_indices, cfg.epochs,
                                          cfg.eta, cfg.batch_size, rng, metrics.samples_processed);
        ForwardResult val = forward(merged, val_batch);
        metrics.test_loss = val.loss;
        metrics.test_accuracy = val.accuracy;
        state.local = std::move(merged);
    } else {
        Model sub = extract_sub_model(merged, mask);
        ParamMask pm = full_param_mask(sub.arch);
        metrics.train_loss = train_epochs(sub, pm, dataset, state.train_indices, cfg.epochs,
                                          cfg.eta, cfg.batch_size, rng, metrics.samples_processed);
        ForwardResult val = forward(sub, val_batch);
        metrics.test_loss = val.loss;
        metrics.test_accuracy = val.accuracy;
        write_back_sub_model(merged, sub, mask);
        state.local = std::move(merged);
    }
    state.last_mask = mask;

    metrics.es_loss = es_combined_loss(metrics.train_loss, metrics.test_loss, cfg.lambda);
    if (cfg.es_enabled && metrics.es_loss > state.prev_es_loss) {
        state.status = ClientStatus::stopped;
        metrics.stopped_this_round = true;
    }
    state.prev_es_loss = metrics.es_loss;

    if (cfg.compute_probe) {
        size_t n = std::min<size_t>(state.train_indices.size(), cfg.batch_size);
        std::vector<int> probe_idx(state.train_indices.begin(), state.train_indices.begin() + n);
        auto [loss, grad] = loss_grad(state.local, dataset.make_batch(probe_idx));
        (void)loss;
        state.probe_scores = gradient_importance(grad);
    }

    PayloadMeta meta{state.id, payload_in.round, static_cast<uint32_t>(state.train_indices.size()),
                     state.status};
    return extract_payload(state.local, mask, meta);
}

std::pair<double, double> evaluate_personal(const ClientState& state,
                                            const LabeledDataset& dataset, TrainMode mode) {
    Batch val_batch = dataset.make_batch(state.val_indices);
    if (mode == TrainMode::sub_model && state.last_mask) {
        Model sub = extract_sub_model(state.local, *state.last_mask);
        ForwardResult r = forward(sub, val_batch);
        return {r.loss, r.accuracy};
    }
    ForwardResult r = forward(state.local, val_batch);
    return {r.loss, r.accuracy};
}

} // namespace fedspu
