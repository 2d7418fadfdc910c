#pragma once

#include <optional>
#include <span>
#include <string>

#include "fedspu/mask.hpp"
#include "fedspu/nn.hpp"

namespace fedspu {

enum class Method { fedspu, random_dropout, fjord, fedmp, hermes, prunefl };

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

// --- gradient identities -------------------------------------------------

// Relative residual of <grad_full, grad_masked> == ||grad_masked||^2.
double check_lemma2(const Model& model, const Batch& batch, const ParamMask& mask);

struct Lemma1Result {
    double mc_ratio_inter_hidden = 0.0; // E||g_masked||^2 / ||g||^2 on inter-hidden weights
    double expected_inter_hidden = 0.0; // the p^2-style prediction from actual active counts
    double mc_ratio_full = 0.0;         // same ratio over all parameters
    double closed_form_full = 0.0;      // exact expectation under the endpoint rule
};

// Monte-Carlo check of the masked-gradient energy ratio. Inter-hidden
// weight entries scale as the product of both endpoint activity rates;
// entries touching the always-active input/output layers scale linearly,
// which the closed form accounts for.
Lemma1Result mc_check_lemma1(const Model& model, const Batch& batch, double p, int trials,
                             uint64_t seed);

// --- convergence constants ------------------------------------------------

struct ConstantsSample {
    double grad_norm2_local = 0.0;  // ||grad F(w)||^2
    double grad_norm2_merged = 0.0; // ||grad F(w_hat)||^2
    double divergence2 = 0.0;       // ||w_hat - w||^2
    double lipschitz_ratio = 0.0;   // ||grad F(w) - grad F(w')|| / ||w - w'||
};

struct TheoryConstants {
    double Q = 1.0;
    double sigma2 = 0.0;
    double L = 0.0; // empirical lower estimate of the smoothness constant
    double p = 1.0;
    double eta = 0.0;
    int sample_count = 0;
};

TheoryConstants estimate_constants(std::span<const ConstantsSample> samples, double p, double eta);

struct TheoremBound {
    std::optional<double> epsilon;
    std::optional<double> eta_threshold;
    std::string violated_condition; // non-empty when something is inapplicable
};

TheoremBound theorem1_bound(const TheoryConstants& c);

// --- cost models ------------------------------------------------------------

struct CostReport {
    size_t weights_bytes = 0;
    size_t grad_bytes = 0;
    size_t activation_bytes = 0;
    size_t total_bytes = 0;
    size_t flops_forward = 0;  // per mini-batch
    size_t flops_backward = 0; // per mini-batch
};

// Memory footprint and per-batch FLOPs under each method's semantics.
// Freezing keeps the full forward pass and full weight/activation storage
// but only stores gradients for active parameters; dropout shrinks
// everything to the sub-model; the importance-based methods pay full price
// because scoring needs full-model training. Dense-layer FLOPs: forward
// 2*out*in per sample, backward twice the forward cost of the trained
// parameter set. Byte figures use 32-bit parameters.
CostReport cost_model(const Architecture& arch, double p, Method method, int batch_size);

// Per-sample training FLOPs for round accounting; same rules as cost_model.
struct FlopRates {
    size_t forward_per_sample = 0;
    size_t backward_per_sample = 0;
};
FlopRates flop_rates(const Architecture& arch, double p, Method method);

// --- oracles ---------------------------------------------------------------

// Max relative error of the masked analytic gradient vs central finite
// differences, probing every active entry (or max_probes random ones).
double finite_diff_check(const Model& model, const Batch& batch, const ParamMask& mask,
                         double step, int max_probes = 200, uint64_t seed = 0);

double grad_norm2(const Gradient& g);
double model_dist2(const Model& a, const Model& b);

} // namespace fedspu
