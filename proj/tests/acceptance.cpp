// End-to-end acceptance suite. Each criterion prints exactly one line:
//   PASS criterion N: <name> (<detail>)
//   FAIL criterion N: <name> (<detail>)
// Exit status is the number of failed criteria.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedspu/config.hpp"
#include "fedspu/server.hpp"

using namespace fedspu;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

Batch random_batch(int n, int width, int classes, uint64_t seed) {
    auto rng = RngStream::derive(seed, 0x62617463ULL);
    Batch b;
    b.width = width;
    for (int i = 0; i < n * width; ++i) b.inputs.push_back(rng.next_normal());
    for (int i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.next_below(classes)));
    return b;
}

// -- criterion 1: masked gradients vs central finite differences -------------

void criterion_gradient_oracle() {
    Architecture arch{{5, 10, 8, 4}};
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        auto rng = RngStream::derive(1000, static_cast<uint64_t>(t));
        Model m = init_model(arch, rng.next_u64());
        Batch b = random_batch(4, 5, 4, rng.next_u64());
        double p = 0.2 + 0.8 * rng.next_double();
        NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
        double err = finite_diff_check(m, b, derive_param_mask(nm, arch), 1e-5, 60,
                                       rng.next_u64());
        worst = std::max(worst, err);
    }
    std::ostringstream d;
    d << "100 triples, max relative error " << worst;
    report(1, "gradient oracle", worst < 1e-4, d.str());
}

// -- criterion 2: the masked-gradient inner-product identity -----------------

void criterion_inner_product_identity() {
    Architecture arch{{6, 12, 10, 4}};
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        auto rng = RngStream::derive(2000, static_cast<uint64_t>(t));
        Model m = init_model(arch, rng.next_u64());
        Batch b = random_batch(6, 6, 4, rng.next_u64());
        double p = 0.1 + 0.9 * rng.next_double();
        NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
        worst = std::max(worst, check_lemma2(m, b, derive_param_mask(nm, arch)));
    }
    std::ostringstream d;
    d << "1000 triples, max residual " << worst;
    report(2, "inner-product identity", worst <= 1e-12, d.str());
}

// -- criterion 3: Monte-Carlo masked gradient energy -------------------------

void criterion_energy_ratio() {
    // hidden widths divisible by every tested keep fraction, so the rounded
    // active counts are exact and the p^2 prediction is clean
    Architecture arch{{16, 40, 40, 4}};
    Model m = init_model(arch, 3000);
    Batch b = random_batch(10, 16, 4, 3000);
    bool ok = true;
    std::ostringstream d;
    for (double p : {0.2, 0.5, 0.8}) {
        Lemma1Result r = mc_check_lemma1(m, b, p, 100000, 3000);
        double rel = std::abs(r.mc_ratio_inter_hidden - p * p) / (p * p);
        d << "p=" << p << " ratio " << r.mc_ratio_inter_hidden << " vs " << p * p << " ("
          << rel * 100.0 << "%); ";
        ok = ok && rel <= 0.02;
    }
    report(3, "masked gradient energy ratio", ok, d.str());
}

// -- criterion 4: degeneration to plain federated averaging at p=1 -----------

// Independent reference: full-model mini-batch SGD on every client, then a
// plain n_k-weighted average, reusing only the primitive gradient step and
// the documented per-(purpose, client, round) stream derivation.
Model reference_fedavg(const FederationConfig& cfg, const LabeledDataset& ds,
                       const PartitionPlan& plan, int rounds) {
    Model global = init_model(cfg.arch, cfg.master_seed);
    std::vector<std::vector<int>> train(cfg.client_count());
    for (int k = 0; k < cfg.client_count(); ++k) {
        auto [tr, va] = train_test_split(plan.client_indices[k], ds.labels, cfg.lambda,
                                         mix64(cfg.master_seed) ^ static_cast<uint64_t>(k));
        train[k] = tr;
        (void)va;
    }
    for (int round = 1; round <= rounds; ++round) {
        std::vector<Model> locals;
        for (int k = 0; k < cfg.client_count(); ++k) {
            Model w = global;
            auto rng = RngStream::derive(cfg.master_seed ^ 0x7472616eULL,
                                         static_cast<uint64_t>(k),
                                         static_cast<uint64_t>(round));
            std::vector<int> order = train[k];
            for (int e = 0; e < cfg.local_epochs; ++e) {
                rng.shuffle(order);
                for (size_t s = 0; s < order.size(); s += cfg.batch_size) {
                    size_t end = std::min(order.size(), s + cfg.batch_size);
                    Batch batch = ds.make_batch({order.begin() + s, order.begin() + end});
                    auto [loss, g] = loss_grad(w, batch);
                    (void)loss;
                    w = apply_sgd_step(w, g, cfg.eta);
                }
            }
            locals.push_back(std::move(w));
        }
        Model next = global;
        for (size_t l = 0; l < global.layers.size(); ++l) {
            for (size_t i = 0; i < global.layers[l].weights.size(); ++i) {
                double num = 0.0, den = 0.0;
                for (int k = 0; k < cfg.client_count(); ++k) {
                    double n_k = static_cast<double>(train[k].size());
                    num += n_k * locals[k].layers[l].weights[i];
                    den += n_k;
                }
                next.layers[l].weights[i] = num / den;
            }
            for (size_t i = 0; i < global.layers[l].bias.size(); ++i) {
                double num = 0.0, den = 0.0;
                for (int k = 0; k < cfg.client_count(); ++k) {
                    double n_k = static_cast<double>(train[k].size());
                    num += n_k * locals[k].layers[l].bias[i];
                    den += n_k;
                }
                next.layers[l].bias[i] = num / den;
            }
        }
        global = std::move(next);
    }
    return global;
}

void criterion_fedavg_degeneration() {
    Architecture arch{{8, 10, 6, 4}};
    LabeledDataset ds = gen_synthetic(4, 8, 60, 3.0, 4000);
    PartitionPlan plan = dirichlet_partition(ds.labels, ds.class_count, 0.5, 4, 4000);
    FederationConfig cfg;
    cfg.method = Method::fedspu;
    cfg.clients_per_round = 4; // everyone participates: sampling is a no-op
    cfg.local_epochs = 2;
    cfg.batch_size = 8;
    cfg.eta = 0.05;
    cfg.master_seed = 4000;
    cfg.arch = arch;
    cfg.client_p.assign(4, 1.0);

    double worst = 0.0;
    for (int rounds = 1; rounds <= 5; ++rounds) {
        cfg.rounds = rounds;
        FederationResult res = run_federation(cfg, ds, plan);
        Model ref = reference_fedavg(cfg, ds, plan, rounds);
        for (size_t l = 0; l < ref.layers.size(); ++l) {
            for (size_t i = 0; i < ref.layers[l].weights.size(); ++i)
                worst = std::max(worst, std::abs(ref.layers[l].weights[i] -
                                                 res.global.layers[l].weights[i]));
            for (size_t i = 0; i < ref.layers[l].bias.size(); ++i)
                worst = std::max(worst,
                                 std::abs(ref.layers[l].bias[i] - res.global.layers[l].bias[i]));
        }
    }
    std::ostringstream d;
    d << "5-round trajectory, max per-parameter deviation " << worst;
    report(4, "degeneration to plain averaging at p=1", worst <= 1e-9, d.str());
}

// -- criterion 5: frozen parameters are bitwise immutable --------------------

void criterion_frozen_immutability() {
    Architecture arch{{8, 16, 12, 4}};
    LabeledDataset ds = gen_synthetic(4, 8, 100, 3.0, 5000);
    const int n_clients = 8;
    PartitionPlan plan = dirichlet_partition(ds.labels, ds.class_count, 0.5, n_clients, 5000);
    const uint64_t master = 5000;

    Model global = init_model(arch, master);
    std::vector<ClientState> clients(n_clients);
    for (int k = 0; k < n_clients; ++k) {
        clients[k].id = static_cast<uint32_t>(k);
        clients[k].local = global;
        clients[k].p = 0.25 + 0.15 * (k % 4);
        auto [tr, va] = train_test_split(plan.client_indices[k], ds.labels, 0.7,
                                         mix64(master) ^ static_cast<uint64_t>(k));
        clients[k].train_indices = tr;
        clients[k].val_indices = va;
    }

    long positions_checked = 0;
    long violations = 0;
    for (int round = 1; round <= 50; ++round) {
        std::vector<uint32_t> ids;
        for (auto& c : clients) ids.push_back(c.id);
        auto srng = RngStream::derive(master ^ 0x73616d70ULL, static_cast<uint64_t>(round));
        auto sampled = sample_clients(ids, 4, srng);
        auto dispatches = dispatch_round(global, Method::fedspu, round, master, sampled, clients);
        std::vector<ActivePayload> ups;
        for (uint32_t id : sampled) {
            ClientState& c = clients[id];
            Model before = c.local;
            ClientRoundConfig ccfg;
            ccfg.epochs = 2;
            RoundMetrics m;
            ups.push_back(client_round(c, dispatches.at(id).payload, ds, ccfg,
                                       RngStream::derive(master ^ 0x7472616eULL, id,
                                                         static_cast<uint64_t>(round)),
                                       m));
            ParamMask pm = derive_param_mask(dispatches.at(id).mask, arch);
            for (size_t l = 0; l < pm.layers.size(); ++l) {
                for (size_t i = 0; i < pm.layers[l].weights.size(); ++i)
                    if (!pm.layers[l].weights[i]) {
                        ++positions_checked;
                        if (c.local.layers[l].weights[i] != before.layers[l].weights[i])
                            ++violations;
                    }
                for (size_t i = 0; i < pm.layers[l].bias.size(); ++i)
                    if (!pm.layers[l].bias[i]) {
                        ++positions_checked;
                        if (c.local.layers[l].bias[i] != before.layers[l].bias[i]) ++violations;
                    }
            }
        }
        global = aggregate_payloads(global, ups);
    }
    std::ostringstream d;
    d << positions_checked << " frozen positions over 50 rounds, " << violations
      << " bitwise changes";
    report(5, "frozen-parameter immutability", violations == 0 && positions_checked > 0, d.str());
}

// -- criterion 6: aggregation against a brute-force oracle -------------------

void criterion_aggregation_oracle() {
    Architecture arch{{2, 2, 2}}; // 12 parameters
    long mismatches = 0;
    for (int t = 0; t < 200; ++t) {
        auto rng = RngStream::derive(6000, static_cast<uint64_t>(t));
        Model global = init_model(arch, rng.next_u64());
        int n_clients = 1 + static_cast<int>(rng.next_below(3));
        std::vector<ActivePayload> payloads;
        for (int k = 0; k < n_clients; ++k) {
            Model m = init_model(arch, rng.next_u64());
            double p = 0.1 + 0.9 * rng.next_double();
            NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
            PayloadMeta meta{static_cast<uint32_t>(k), 1,
                             1 + static_cast<uint32_t>(rng.next_below(50)), ClientStatus::on};
            payloads.push_back(extract_payload(m, nm, meta));
        }
        Model agg = aggregate_payloads(global, payloads);

        // brute force: recover each client's coverage and values straight
        // from the payload index lists
        for (int l = 1; l < arch.depth(); ++l) {
            int fan_out = arch.layer_widths[l], fan_in = arch.layer_widths[l - 1];
            for (int i = 0; i < fan_out; ++i) {
                for (int j = 0; j <= fan_in; ++j) { // j == fan_in means the bias slot
                    double num = 0.0, den = 0.0;
                    for (const ActivePayload& pl : payloads) {
                        const auto& outs = pl.active_indices[l];
                        const auto& ins = pl.active_indices[l - 1];
                        auto oi = std::find(outs.begin(), outs.end(), static_cast<uint32_t>(i));
                        if (oi == outs.end()) continue;
                        size_t row = static_cast<size_t>(oi - outs.begin());
                        double v;
                        if (j == fan_in) {
                            v = pl.values[l][outs.size() * ins.size() + row];
                        } else {
                            auto ji = std::find(ins.begin(), ins.end(), static_cast<uint32_t>(j));
                            if (ji == ins.end()) continue;
                            v = pl.values[l][row * ins.size() +
                                             static_cast<size_t>(ji - ins.begin())];
                        }
                        num += pl.n_k * v;
                        den += pl.n_k;
                    }
                    double expect = den > 0.0 ? num / den
                                   : (j == fan_in ? global.layers[l - 1].bias[i]
                                                  : global.layers[l - 1].w(i, j));
                    double got = j == fan_in ? agg.layers[l - 1].bias[i]
                                             : agg.layers[l - 1].w(i, j);
                    if (got != expect) ++mismatches;
                }
            }
        }
    }
    std::ostringstream d;
    d << "200 instances, " << mismatches << " parameter mismatches";
    report(6, "aggregation oracle", mismatches == 0, d.str());
}

// -- criteria 7 and 8: desk-scale sweep ---------------------------------------

struct CellResult {
    double accuracy = 0.0; // mean final personal accuracy, uniform over clients
    int rounds_executed = 0;
};

constexpr int kRounds = 150;
constexpr int kClients = 20;
constexpr double kSeparation = 3.2;
constexpr double kEta = 0.05;

CellResult run_cell(Method method, double alpha, uint64_t seed, bool es) {
    FederationConfig cfg;
    cfg.method = method;
    cfg.rounds = kRounds;
    cfg.clients_per_round = 10;
    cfg.local_epochs = 5;
    cfg.batch_size = 16;
    cfg.eta = kEta;
    cfg.lambda = 0.7;
    cfg.es_enabled = es;
    cfg.master_seed = seed;
    cfg.arch = Architecture{{32, 64, 64, 8}};
    cfg.client_p.resize(kClients);
    for (int k = 0; k < kClients; ++k) cfg.client_p[k] = 0.2 * (k / 4 + 1);

    LabeledDataset ds = gen_synthetic(8, 32, 250, kSeparation, seed);
    PartitionPlan plan = dirichlet_partition(ds.labels, ds.class_count, alpha, kClients, seed);
    FederationResult res = run_federation(cfg, ds, plan);
    FinalEvaluation ev = evaluate_final(res, ds, method);
    return {ev.mean_accuracy_uniform, res.rounds_executed};
}

void criteria_sweep() {
    const std::vector<uint64_t> seeds{1, 2, 3};
    const std::vector<double> alphas{0.1, 1.0};
    const std::vector<Method> methods{Method::fedspu,  Method::random_dropout, Method::fjord,
                                      Method::fedmp,   Method::hermes,         Method::prunefl};

    std::map<std::pair<int, int>, double> mean_acc; // (method idx, alpha idx) -> mean
    for (size_t mi = 0; mi < methods.size(); ++mi)
        for (size_t ai = 0; ai < alphas.size(); ++ai) {
            double acc = 0.0;
            for (uint64_t s : seeds) acc += run_cell(methods[mi], alphas[ai], s, false).accuracy;
            mean_acc[{static_cast<int>(mi), static_cast<int>(ai)}] = acc / seeds.size();
        }

    bool strictly_best_somewhere = false;
    bool never_worse_by_a_point = true;
    std::ostringstream d;
    for (size_t ai = 0; ai < alphas.size(); ++ai) {
        double spu = mean_acc[{0, static_cast<int>(ai)}];
        double best_rival = 0.0;
        for (size_t mi = 1; mi < methods.size(); ++mi)
            best_rival = std::max(best_rival, mean_acc[{static_cast<int>(mi),
                                                        static_cast<int>(ai)}]);
        if (spu > best_rival) strictly_best_somewhere = true;
        if (spu < best_rival - 0.01) never_worse_by_a_point = false;
        d << "alpha=" << alphas[ai] << ": fedspu " << spu << " vs best rival " << best_rival
          << "; ";
    }
    report(7, "directional accuracy comparison", strictly_best_somewhere && never_worse_by_a_point,
           d.str());

    // criterion 8: early stopping cuts rounds without wrecking accuracy
    double acc_off = mean_acc[{0, 1}]; // fedspu, alpha=1.0, es off (already computed)
    double acc_on = 0.0, rounds_on = 0.0;
    for (uint64_t s : seeds) {
        CellResult r = run_cell(Method::fedspu, 1.0, s, true);
        acc_on += r.accuracy;
        rounds_on += r.rounds_executed;
    }
    acc_on /= seeds.size();
    rounds_on /= seeds.size();
    double round_cut = 1.0 - rounds_on / kRounds;
    double drop = acc_off - acc_on;
    std::ostringstream d8;
    d8 << "rounds " << rounds_on << "/" << kRounds << " (-" << round_cut * 100.0
       << "%), accuracy " << acc_on << " vs " << acc_off << " (drop " << drop * 100.0
       << " points)";
    report(8, "early stopping effect", round_cut >= 0.20 && drop <= 0.05, d8.str());
}

// -- criterion 9: communication parity ---------------------------------------

void criterion_communication_parity() {
    Architecture arch{{64, 128, 128, 10}};
    bool parity = true, overhead_ok = true;
    std::ostringstream d;
    double worst_ratio = 0.0;
    for (double p : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        for (int round = 1; round <= 10; ++round) {
            auto r1 = RngStream::derive(9000 ^ 0x6d61736bULL, 1, static_cast<uint64_t>(round));
            auto r2 = RngStream::derive(9100 ^ 0x6d61736bULL, 2, static_cast<uint64_t>(round));
            NeuronMask spu = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, r1);
            NeuronMask drop = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, r2);
            WireSize a = payload_wire_size(spu, arch);
            WireSize b = payload_wire_size(drop, arch);
            parity = parity && a.total_bytes == b.total_bytes;
            double ratio = static_cast<double>(a.index_bytes) / a.param_bytes;
            worst_ratio = std::max(worst_ratio, ratio);
        }
    }
    overhead_ok = worst_ratio < 0.05;
    d << "byte parity " << (parity ? "exact" : "BROKEN") << ", worst index/param ratio "
      << worst_ratio;
    report(9, "communication parity", parity && overhead_ok, d.str());
}

// -- criterion 10: cost model structure --------------------------------------

void criterion_cost_structure() {
    Architecture arch{{64, 256, 256, 10}};
    const int bs = 16;
    bool ok = true;
    std::ostringstream d;
    CostReport full = cost_model(arch, 1.0, Method::fedspu, bs);
    size_t prev_total = 0, prev_bwd = 0;
    for (double p : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        CostReport spu = cost_model(arch, p, Method::fedspu, bs);
        for (Method m : {Method::fedmp, Method::hermes, Method::prunefl}) {
            CostReport baseline = cost_model(arch, p, m, bs);
            ok = ok && spu.total_bytes < baseline.total_bytes;
        }
        ok = ok && spu.flops_forward == full.flops_forward; // forward stays full
        ok = ok && spu.flops_backward < full.flops_backward; // backward shrinks
        ok = ok && spu.total_bytes >= prev_total;            // monotone in p
        ok = ok && spu.flops_backward >= prev_bwd;
        prev_total = spu.total_bytes;
        prev_bwd = spu.flops_backward;
    }
    d << "memory below full-training baselines for p<1, forward flops constant, backward"
         " flops monotone and reduced";
    report(10, "cost model structure", ok, d.str());
}

// -- criterion 11: wire format ------------------------------------------------

void criterion_wire_format() {
    Architecture arch{{6, 12, 9, 4}};
    long bad = 0;
    std::vector<uint8_t> sample_bytes;
    for (int t = 0; t < 10000; ++t) {
        auto rng = RngStream::derive(11000, static_cast<uint64_t>(t));
        Model m = init_model(arch, rng.next_u64());
        double p = 0.1 + 0.9 * rng.next_double();
        NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
        PayloadMeta meta{static_cast<uint32_t>(rng.next_below(1u << 20)),
                         static_cast<uint32_t>(rng.next_below(1u << 16)),
                         static_cast<uint32_t>(rng.next_below(1u << 16)),
                         rng.next_below(2) ? ClientStatus::stopped : ClientStatus::on};
        ActivePayload in = extract_payload(m, nm, meta);
        auto bytes = encode_payload(in);
        if (t == 0) sample_bytes = bytes;
        ActivePayload out = decode_payload(bytes);
        if (out.client_id != in.client_id || out.round != in.round || out.n_k != in.n_k ||
            out.status != in.status || out.active_indices != in.active_indices) {
            ++bad;
            continue;
        }
        for (int l = 0; l < in.layer_count(); ++l)
            for (size_t i = 0; i < in.values[l].size(); ++i)
                if (out.values[l][i] != static_cast<double>(static_cast<float>(in.values[l][i])))
                    ++bad;
    }

    std::set<DecodeError> seen;
    auto expect_error = [&](std::vector<uint8_t> bytes) {
        try {
            decode_payload(bytes);
        } catch (const PayloadError& e) {
            seen.insert(e.code);
        }
    };
    auto magic = sample_bytes;
    magic[0] = 'X';
    expect_error(magic);
    auto version = sample_bytes;
    version[4] = 0xee;
    expect_error(version);
    auto truncated = sample_bytes;
    truncated.resize(truncated.size() - 2);
    expect_error(truncated);
    auto nonmono = sample_bytes;
    for (int i = 0; i < 4; ++i) std::swap(nonmono[26 + i], nonmono[30 + i]);
    expect_error(nonmono);
    auto trailing = sample_bytes;
    trailing.push_back(0);
    expect_error(trailing);

    bool all_codes = seen.size() == 5;
    std::ostringstream d;
    d << "10000 round trips, " << bad << " mismatches, " << seen.size()
      << "/5 error codes exercised";
    report(11, "wire format", bad == 0 && all_codes, d.str());
}

} // namespace

int main() {
    criterion_gradient_oracle();
    criterion_inner_product_identity();
    criterion_energy_ratio();
    criterion_fedavg_degeneration();
    criterion_frozen_immutability();
    criterion_aggregation_oracle();
    criteria_sweep();
    criterion_communication_parity();
    criterion_cost_structure();
    criterion_wire_format();
    std::printf("%d of 11 criteria failed\n", g_failures);
    return g_failures;
}
