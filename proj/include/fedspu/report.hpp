#pragma once

#include <filesystem>
#include <string>

#include "fedspu/config.hpp"

namespace fedspu {

struct CellSummary {
    std::string cell;
    std::string method;
    double alpha = 0.0;
    uint64_t seed = 0;
    int rounds_executed = 0;
    bool early_terminated = false;
    double mean_final_accuracy_uniform = 0.0;
    double mean_final_accuracy_weighted = 0.0;
    size_t total_bytes_up = 0;
    size_t total_bytes_down = 0;
    int64_t total_flops_forward = 0;
    int64_t total_flops_backward = 0;
};

// Run one sweep cell and write metrics.jsonl, summary.json and the final
// per-client models (payload wire format, full masks) under
// out_dir/<cell name>/.
CellSummary execute_cell(const ExperimentConfig& cfg, const RunCell& cell,
                         const LabeledDataset& dataset);

// Collect summary.json files under a sweep directory into summary.csv.
void write_sweep_csv(const std::filesystem::path& out_dir);

struct DiagnosticRecord {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

// Desk-scale verification of the gradient identities, convergence-constant
// estimates and cost-model structure; one record per check.
std::vector<DiagnosticRecord> run_diagnostics(uint64_t seed);

void write_diagnostics(const std::vector<DiagnosticRecord>& records,
                       const std::filesystem::path& path);

} // namespace fedspu
