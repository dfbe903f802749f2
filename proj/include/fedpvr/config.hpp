#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpvr/data.hpp"
#include "fedpvr/engine.hpp"
#include "fedpvr/objectives.hpp"

namespace fedpvr {

struct DatasetConfig {
    enum class Kind { Synthetic, Csv };
    Kind kind = Kind::Synthetic;
    SyntheticSpec synthetic;  // seed field ignored; seeds.data wins
    std::string csv_path;
    std::string label_column = "label";
};

struct ModelConfig {
    enum class Kind { Mlp, Quadratic };
    Kind kind = Kind::Mlp;
    std::vector<std::size_t> hidden = {32};
    HeteroQuadraticSpec quadratic;  // seed/n_clients filled from the run
};

struct ScheduleConfig {
    enum class Kind { Constant, Cosine, Multistep };
    Kind kind = Kind::Constant;
    std::vector<std::size_t> milestones;
    double factor = 0.1;
};

/// Learning rate for a round (1-based). Constant: base. Cosine:
/// base * (1 + cos(pi * round / total)) / 2, reaching exactly 0 at the final
/// round. Multistep: base * factor^(#milestones <= round).
double schedule_lr(const ScheduleConfig& schedule, double base_lr,
                   std::size_t round, std::size_t total_rounds);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::FedAvg;
    std::size_t mask_cutoff = 0;  // first variance-reduced layer (FedPvr)
    double local_lr = 0.1;
    double global_lr = 1.0;
    std::size_t local_steps = 0;
    std::size_t local_epochs = 0;
    std::size_t batch_size = 32;
    double momentum_nonvr = 0.0;
    double prox_mu = 0.0;
};

struct SeedsConfig {
    std::uint64_t data = 1;
    std::uint64_t init = 2;
    std::uint64_t sampling = 3;
};

struct MetricsConfig {
    bool xi = true;
    bool client_drift = true;
    bool cka = false;
    std::size_t cka_probe_count = 256;
    std::vector<double> conformal_kappas;
    bool conformal_force_argmax = false;
};

struct ExperimentConfig {
    bool has_dataset = true;
    DatasetConfig dataset;
    SplitSpec split;
    std::size_t clients = 10;
    double alpha = 1.0;
    ModelConfig model;
    StrategyConfig strategy;
    ScheduleConfig schedule;
    std::size_t rounds = 10;
    SeedsConfig seeds;
    MetricsConfig metrics;
    std::optional<double> target_accuracy;
    bool allow_global_lr_below_one = false;
    std::size_t worker_threads = 1;

    /// Parse and validate; throws ValidationError listing every violation
    /// (unknown keys included).
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);

    /// Canonical form: every field emitted, keys sorted by the JSON library.
    /// from_json(to_json()) round-trips to the identical document.
    nlohmann::json to_json() const;
};

}  // namespace fedpvr
