#include "fedspu/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedspu {

std::string method_name(Method m) {
    switch (m) {
    case Method::fedspu: return "fedspu";
    case Method::random_dropout: return "random_dropout";
    case Method::fjord: return "fjord";
    case Method::fedmp: return "fedmp";
    case Method::hermes: return "hermes";
    case Method::prunefl: return "prunefl";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    for (Method m : {Method::fedspu, Method::random_dropout, Method::fjord, Method::fedmp,
                     Method::hermes, Method::prunefl})
        if (method_name(m) == name) return m;
    return std::nullopt;
}

double grad_norm2(const Gradient& g) {
    double acc = 0.0;
    for (const auto& l : g.layers) {
        for (double v : l.weights) acc += v * v;
        for (double v : l.bias) acc += v * v;
    }
    return acc;
}

double model_dist2(const Model& a, const Model& b) {
    double acc = 0.0;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        for (size_t i = 0; i < a.layers[l].weights.size(); ++i) {
            double d = a.layers[l].weights[i] - b.layers[l].weights[i];
            acc += d * d;
        }
        for (size_t i = 0; i < a.layers[l].bias.size(); ++i) {
            double d = a.layers[l].bias[i] - b.layers[l].bias[i];
            acc += d * d;
        }
    }
    return acc;
}

double check_lemma2(const Model& model, const Batch& batch, const ParamMask& mask) {
    auto [loss_f, full] = loss_grad(model, batch);
    auto [loss_m, masked] = masked_loss_grad(model, batch, mask);
    (void)loss_f;
    (void)loss_m;
    double inner = 0.0;
    for (size_t l = 0; l < full.layers.size(); ++l) {
        for (size_t i = 0; i < full.layers[l].weights.size(); ++i)
            inner += full.layers[l].weights[i] * masked.layers[l].weights[i];
        for (size_t i = 0; i < full.layers[l].bias.size(); ++i)
            inner += full.layers[l].bias[i] * masked.layers[l].bias[i];
    }
    double energy = grad_norm2(masked);
    return std::abs(inner - energy) / std::max(1.0, energy);
}

Lemma1Result mc_check_lemma1(const Model& model, const Batch& batch, double p, int trials,
                             uint64_t seed) {
    if (trials < 10000) throw std::invalid_argument("mc_check_lemma1: need >= 1e4 trials");
    const Architecture& arch = model.arch;
    const int depth = arch.depth();

    auto [loss, g] = loss_grad(model, batch);
    (void)loss;

    // per-layer activity rates implied by the rounded active counts
    std::vector<double> rate(depth, 1.0);
    std::vector<int> active(depth);
    for (int l = 0; l < depth; ++l) {
        int w = arch.layer_widths[l];
        active[l] = (l == 0 || l == depth - 1) ? w : active_count_for(p, w);
        rate[l] = static_cast<double>(active[l]) / w;
    }

    double full_energy = grad_norm2(g);
    double inter_energy = 0.0;  // denominator restricted to inter-hidden weights
    double expected_inter = 0.0;
    double expected_full = 0.0;
    for (int l = 1; l < depth; ++l) {
        const Layer& gl = g.layers[l - 1];
        double e_w = 0.0;
        for (double v : gl.weights) e_w += v * v;
        double e_b = 0.0;
        for (double v : gl.bias) e_b += v * v;
        expected_full += rate[l - 1] * rate[l] * e_w + rate[l] * e_b;
        if (l >= 2 && l <= depth - 2) {
            inter_energy += e_w;
            expected_inter += rate[l - 1] * rate[l] * e_w;
        }
    }

    double mc_full = 0.0;
    double mc_inter = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto rng = RngStream::derive(seed, 0x6c656d31ULL, static_cast<uint64_t>(t));
        NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
        std::vector<std::vector<int>> idx(depth);
        for (int l = 0; l < depth; ++l) idx[l] = nm.active_indices(l);
        double e_full = 0.0;
        double e_inter = 0.0;
        for (int l = 1; l < depth; ++l) {
            const Layer& gl = g.layers[l - 1];
            double e_w = 0.0;
            for (int i : idx[l])
                for (int j : idx[l - 1]) {
                    double v = gl.w(i, j);
                    e_w += v * v;
                }
            double e_b = 0.0;
            for (int i : idx[l]) e_b += gl.bias[i] * gl.bias[i];
            e_full += e_w + e_b;
            if (l >= 2 && l <= depth - 2) e_inter += e_w;
        }
        mc_full += e_full;
        mc_inter += e_inter;
    }
    mc_full /= trials;
    mc_inter /= trials;

    Lemma1Result r;
    r.mc_ratio_full = mc_full / full_energy;
    r.closed_form_full = expected_full / full_energy;
    if (inter_energy > 0.0) {
        r.mc_ratio_inter_hidden = mc_inter / inter_energy;
        r.expected_inter_hidden = expected_inter / inter_energy;
    }
    return r;
}

TheoryConstants estimate_constants(std::span<const ConstantsSample> samples, double p,
                                   double eta) {
    if (samples.size() < 10)
        throw std::invalid_argument("estimate_constants: need >= 10 samples");
    TheoryConstants c;
    c.p = p;
    c.eta = eta;
    c.sample_count = static_cast<int>(samples.size());
    c.Q = 0.0;
    for (const auto& s : samples) {
        if (s.grad_norm2_merged > 0.0)
            c.Q = std::max(c.Q, s.grad_norm2_local / s.grad_norm2_merged);
        else if (s.grad_norm2_local == 0.0)
            c.Q = std::max(c.Q, 1.0);
        c.sigma2 = std::max(c.sigma2, s.divergence2);
        c.L = std::max(c.L, s.lipschitz_ratio);
    }
    return c;
}

TheoremBound theorem1_bound(const TheoryConstants& c) {
    TheoremBound b;
    if (c.L > 0.0) {
        double disc = 1.0 - c.Q * c.L / (c.p * c.p);
        if (disc >= 0.0)
            b.eta_threshold = (1.0 + std::sqrt(disc)) / c.L;
        else
            b.violated_condition = "QL/p^2 > 1 (negative discriminant)";
    } else {
        b.violated_condition = "L <= 0";
    }
    if (c.sigma2 == 0.0) {
        b.epsilon = 0.0;
    } else {
        double step_term = 2.0 * c.eta - c.L * c.eta * c.eta;
        if (step_term <= 0.0) {
            if (!b.violated_condition.empty()) b.violated_condition += "; ";
            b.violated_condition += "2*eta - L*eta^2 <= 0";
        } else {
            b.epsilon =
                std::sqrt((c.L + 1.0) * c.Q * c.sigma2 / (step_term * c.p * c.p + c.Q));
        }
    }
    return b;
}

namespace {

struct Dims {
    size_t full_params = 0;
    size_t active_params = 0;
    size_t full_units = 0;   // total neurons across all layers
    size_t active_units = 0;
    size_t full_fwd = 0;   // per-sample forward FLOPs, full dims
    size_t active_fwd = 0; // per-sample forward FLOPs, sub-model dims
};

Dims layer_dims(const Architecture& arch, double p) {
    arch.validate();
    Dims d;
    const int depth = arch.depth();
    std::vector<size_t> active(depth);
    for (int l = 0; l < depth; ++l) {
        size_t w = arch.layer_widths[l];
        active[l] = (l == 0 || l == depth - 1) ? w : active_count_for(p, static_cast<int>(w));
        d.full_units += w;
        d.active_units += active[l];
    }
    for (int l = 1; l < depth; ++l) {
        size_t w = arch.layer_widths[l], wp = arch.layer_widths[l - 1];
        d.full_params += w * wp + w;
        d.active_params += active[l] * active[l - 1] + active[l];
        d.full_fwd += 2 * w * wp;
        d.active_fwd += 2 * active[l] * active[l - 1];
    }
    return d;
}

} // namespace

FlopRates flop_rates(const Architecture& arch, double p, Method method) {
    Dims d = layer_dims(arch, p);
    FlopRates r;
    switch (method) {
    case Method::fedspu:
        r.forward_per_sample = d.full_fwd;     // frozen neurons still fire
        r.backward_per_sample = 2 * d.active_fwd; // updates touch active params only
        break;
    case Method::random_dropout:
    case Method::fjord:
        r.forward_per_sample = d.active_fwd;
        r.backward_per_sample = 2 * d.active_fwd;
        break;
    case Method::fedmp:
    case Method::hermes:
    case Method::prunefl:
        r.forward_per_sample = d.full_fwd;
        r.backward_per_sample = 2 * d.full_fwd;
        break;
    }
    return r;
}

CostReport cost_model(const Architecture& arch, double p, Method method, int batch_size) {
    Dims d = layer_dims(arch, p);
    CostReport c;
    const size_t bs = static_cast<size_t>(batch_size);
    switch (method) {
    case Method::fedspu:
        c.weights_bytes = 4 * d.full_params;
        c.grad_bytes = 4 * d.active_params;
        c.activation_bytes = 4 * bs * d.full_units;
        break;
    case Method::random_dropout:
    case Method::fjord:
        c.weights_bytes = 4 * d.active_params;
        c.grad_bytes = 4 * d.active_params;
        c.activation_bytes = 4 * bs * d.active_units;
        break;
    case Method::fedmp:
    case Method::hermes:
    case Method::prunefl:
        c.weights_bytes = 4 * d.full_params;
        c.grad_bytes = 4 * d.full_params;
        c.activation_bytes = 4 * bs * d.full_units;
        break;
    }
    c.total_bytes = c.weights_bytes + c.grad_bytes + c.activation_bytes;
    FlopRates r = flop_rates(arch, p, method);
    c.flops_forward = bs * r.forward_per_sample;
    c.flops_backward = bs * r.backward_per_sample;
    return c;
}

double finite_diff_check(const Model& model, const Batch& batch, const ParamMask& mask,
                         double step, int max_probes, uint64_t seed) {
    if (!(step >= 1e-7 && step <= 1e-3))
        throw std::invalid_argument("finite_diff_check: step out of [1e-7, 1e-3]");
    auto [loss, grad] = masked_loss_grad(model, batch, mask);
    (void)loss;

    struct Pos {
        int layer;
        bool is_bias;
        size_t idx;
    };
    std::vector<Pos> active;
    for (size_t l = 0; l < mask.layers.size(); ++l) {
        for (size_t i = 0; i < mask.layers[l].weights.size(); ++i)
            if (mask.layers[l].weights[i]) active.push_back({static_cast<int>(l), false, i});
        for (size_t i = 0; i < mask.layers[l].bias.size(); ++i)
            if (mask.layers[l].bias[i]) active.push_back({static_cast<int>(l), true, i});
    }
    if (static_cast<int>(active.size()) > max_probes) {
        auto rng = RngStream::derive(seed, 0x66646966ULL);
        auto picks = rng.sample_without_replacement(static_cast<int>(active.size()), max_probes);
        std::vector<Pos> subset;
        subset.reserve(picks.size());
        for (int i : picks) subset.push_back(active[i]);
        active = std::move(subset);
    }

    Model probe = model;
    double max_rel = 0.0;
    for (const Pos& pos : active) {
        double* slot = pos.is_bias ? &probe.layers[pos.layer].bias[pos.idx]
                                   : &probe.layers[pos.layer].weights[pos.idx];
        double orig = *slot;
        *slot = orig + step;
        double lp = batch_loss(probe, batch);
        *slot = orig - step;
        double lm = batch_loss(probe, batch);
        *slot = orig;
        double fd = (lp - lm) / (2.0 * step);
        double g = pos.is_bias ? grad.layers[pos.layer].bias[pos.idx]
                               : grad.layers[pos.layer].weights[pos.idx];
        double denom = std::max({std::abs(g), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - g) / denom);
    }
    return max_rel;
}

} // namespace fedspu
