#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpvr/config.hpp"
#include "fedpvr/conformal.hpp"
#include "fedpvr/engine.hpp"
#include "fedpvr/metrics.hpp"

namespace fedpvr {

/// Everything derived from the data seed: dataset, splits, per-client shards.
/// Runs that share a data seed (and dataset/split settings) see identical
/// shards regardless of strategy, which comparisons require.
struct PreparedData {
    std::shared_ptr<const Dataset> full;
    DataSplit splits;                        // indices into full
    std::shared_ptr<const Dataset> train;    // materialized train subset
    PartitionPlan plan;                      // shards over the train subset
};

PreparedData prepare_data(const ExperimentConfig& config);

struct RunSummary {
    std::string strategy_name;
    std::optional<std::size_t> rounds_to_target;
    double target_accuracy = std::numeric_limits<double>::quiet_NaN();
    double final_accuracy = std::numeric_limits<double>::quiet_NaN();
    double final_test_loss = std::numeric_limits<double>::quiet_NaN();
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    // Cumulative per-client parameter copies over the whole run.
    std::size_t total_params_down = 0;
    std::size_t total_params_up = 0;
    double comm_ratio_per_round = 0.0;  // (down + up) / d
    std::size_t model_dim = 0;
    std::size_t mask_ones = 0;
};

struct RunLog {
    nlohmann::json config_snapshot;
    nlohmann::json manifest;
    std::vector<RoundRecord> rounds;
    RunSummary summary;
    std::vector<CoveragePoint> conformal;  // empty unless kappas configured
    CkaReport cka;                         // empty unless enabled
};

/// Execute a full configured experiment: build data, run every round with the
/// learning-rate schedule, evaluate on the held-out server test set, then the
/// optional conformal sweep and CKA probe on the final round's client models.
RunLog run_experiment(const ExperimentConfig& config);

/// Persist a RunLog under out_dir: run_log.jsonl, manifest.json and
/// metrics/*.csv. Deterministic byte-for-byte for identical logs.
void write_run_log(const RunLog& log, const std::string& out_dir);

/// One plot-ready CSV family from a finished run.
enum class PlotKind { Accuracy, Xi, Drift, Comm, Conformal, Cka };
void emit_plot_data(const RunLog& log, PlotKind kind, const std::string& path);

struct SweepRow {
    std::size_t cutoff = 0;
    std::size_t mask_ones = 0;
    std::optional<std::size_t> rounds_to_target;
    double final_accuracy = std::numeric_limits<double>::quiet_NaN();
    double final_test_loss = std::numeric_limits<double>::quiet_NaN();
    double comm_ratio_per_round = 0.0;
};

/// One run per mask cutoff (shared data seed), FedPVR strategy with the mask
/// starting at each cutoff. Cutoff 0 covers the whole model (SCAFFOLD's
/// mask); cutoff == layer count covers nothing (FedAvg's mask).
std::vector<SweepRow> sweep_mask_cutoff(const ExperimentConfig& base,
                                        const std::vector<std::size_t>& cutoffs,
                                        std::vector<RunLog>* logs = nullptr);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

struct CompareRow {
    std::string name;
    std::optional<std::size_t> rounds_to_target;
    double speedup_vs_fedavg = std::numeric_limits<double>::quiet_NaN();
    double final_accuracy = std::numeric_limits<double>::quiet_NaN();
    std::size_t params_per_round = 0;  // down + up, per client
    double comm_ratio = 0.0;
};

/// Run each config and tabulate rounds-to-target against the FedAvg row.
/// Every config must share the data seed and data-shaping settings; anything
/// else is an invalid comparison and throws.
std::vector<CompareRow> compare_strategies(
    const std::vector<ExperimentConfig>& configs,
    std::vector<RunLog>* logs = nullptr);

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path);

}  // namespace fedpvr
