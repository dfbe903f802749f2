// fedpvr command line: run configured experiments, sweep the variance-
// reduction cutoff, compare strategies, and emit conformal coverage curves.
// All outputs are plot-ready CSV plus a JSONL event stream.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedpvr/harness.hpp"
#include "fedpvr/kernels.hpp"

namespace {

using fedpvr::ExperimentConfig;
using nlohmann::json;

struct SeedOverrides {
    std::int64_t data = -1;
    std::int64_t init = -1;
    std::int64_t sampling = -1;
    std::int64_t rounds = -1;

    void apply(ExperimentConfig& config) const {
        if (data >= 0) config.seeds.data = static_cast<std::uint64_t>(data);
        if (init >= 0) config.seeds.init = static_cast<std::uint64_t>(init);
        if (sampling >= 0) config.seeds.sampling = static_cast<std::uint64_t>(sampling);
        if (rounds > 0) config.rounds = static_cast<std::size_t>(rounds);
    }
};

void add_override_flags(CLI::App* cmd, SeedOverrides& overrides) {
    cmd->add_option("--data-seed", overrides.data, "Override seeds.data");
    cmd->add_option("--init-seed", overrides.init, "Override seeds.init");
    cmd->add_option("--sampling-seed", overrides.sampling, "Override seeds.sampling");
    cmd->add_option("--rounds", overrides.rounds, "Override the round count");
}

void emit_error(const std::string& kind, const std::string& message,
                const std::vector<std::string>& details = {}) {
    json err{{"error", {{"kind", kind}, {"message", message}}}};
    if (!details.empty()) err["error"]["details"] = details;
    std::cerr << err.dump() << "\n";
}

int run_command(const std::string& config_path, const std::string& out_dir,
                const SeedOverrides& overrides) {
    ExperimentConfig config = ExperimentConfig::load(config_path);
    overrides.apply(config);
    fedpvr::RunLog log = fedpvr::run_experiment(config);
    fedpvr::write_run_log(log, out_dir);

    std::printf("strategy=%s rounds=%zu final_accuracy=%.4f final_test_loss=%.6g\n",
                log.summary.strategy_name.c_str(), log.rounds.size(),
                log.summary.final_accuracy, log.summary.final_test_loss);
    if (!std::isnan(log.summary.target_accuracy)) {
        if (log.summary.rounds_to_target)
            std::printf("rounds_to_target=%zu (target %.3f)\n",
                        *log.summary.rounds_to_target, log.summary.target_accuracy);
        else
            std::printf("rounds_to_target=not_reached (target %.3f)\n",
                        log.summary.target_accuracy);
    }
    std::printf("comm_ratio=%.3gx output=%s\n", log.summary.comm_ratio_per_round,
                out_dir.c_str());
    return 0;
}

int sweep_command(const std::string& config_path, const std::string& out_dir,
                  std::vector<std::size_t> cutoffs, const SeedOverrides& overrides) {
    ExperimentConfig config = ExperimentConfig::load(config_path);
    overrides.apply(config);
    std::vector<fedpvr::RunLog> logs;
    const auto rows = fedpvr::sweep_mask_cutoff(config, cutoffs, &logs);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fedpvr::write_sweep_csv(rows, (fs::path(out_dir) / "sweep.csv").string());
    for (std::size_t i = 0; i < logs.size(); ++i)
        fedpvr::write_run_log(logs[i],
                              (fs::path(out_dir) / ("cutoff_" + std::to_string(rows[i].cutoff)))
                                  .string());

    std::printf("%-8s %-10s %-18s %-16s %-14s %s\n", "cutoff", "mask_ones",
                "rounds_to_target", "final_accuracy", "final_loss", "comm_ratio");
    for (const auto& r : rows) {
        std::string rtt = r.rounds_to_target ? std::to_string(*r.rounds_to_target)
                                             : "not_reached";
        std::printf("%-8zu %-10zu %-18s %-16.4f %-14.6g %.3gx\n", r.cutoff,
                    r.mask_ones, rtt.c_str(), r.final_accuracy, r.final_test_loss,
                    r.comm_ratio_per_round);
    }
    return 0;
}

int compare_command(const std::vector<std::string>& config_paths,
                    const std::string& out_dir, const SeedOverrides& overrides) {
    std::vector<ExperimentConfig> configs;
    for (const auto& path : config_paths) {
        configs.push_back(ExperimentConfig::load(path));
        overrides.apply(configs.back());
    }
    std::vector<fedpvr::RunLog> logs;
    const auto rows = fedpvr::compare_strategies(configs, &logs);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fedpvr::write_compare_csv(rows, (fs::path(out_dir) / "compare.csv").string());
    for (std::size_t i = 0; i < logs.size(); ++i)
        fedpvr::write_run_log(logs[i], (fs::path(out_dir) / rows[i].name).string());

    std::printf("%-22s %-18s %-10s %-16s %s\n", "strategy", "rounds_to_target",
                "speedup", "final_accuracy", "params/round");
    for (const auto& r : rows) {
        std::string rtt = r.rounds_to_target ? std::to_string(*r.rounds_to_target)
                                             : "not_reached";
        std::printf("%-22s %-18s %-10.2f %-16.4f %zu (%.3gx)\n", r.name.c_str(),
                    rtt.c_str(), r.speedup_vs_fedavg, r.final_accuracy,
                    r.params_per_round, r.comm_ratio);
    }
    return 0;
}

int conformal_command(const std::string& config_path, const std::string& out_dir,
                      std::vector<double> kappas, const SeedOverrides& overrides) {
    ExperimentConfig config = ExperimentConfig::load(config_path);
    overrides.apply(config);
    if (!kappas.empty()) config.metrics.conformal_kappas = std::move(kappas);
    if (config.metrics.conformal_kappas.empty())
        config.metrics.conformal_kappas = {0.05, 0.1, 0.2};
    fedpvr::RunLog log = fedpvr::run_experiment(config);
    fedpvr::write_run_log(log, out_dir);

    std::printf("%-8s %-12s %s\n", "kappa", "coverage", "avg_set_size");
    for (const auto& p : log.conformal)
        std::printf("%-8.3f %-12.4f %.4f%s\n", p.kappa, p.coverage, p.avg_set_size,
                    p.guarantee_vacuous ? "  (calibration set too small: vacuous)"
                                        : "");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedpvr: deterministic federated-optimization simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::vector<std::string> config_paths;
    std::vector<std::size_t> cutoffs;
    std::vector<double> kappas;
    SeedOverrides overrides;

    auto* run = app.add_subcommand("run", "Run one configured experiment");
    run->add_option("--config", config_path, "Config JSON path")->required();
    run->add_option("--out", out_dir, "Output directory");
    add_override_flags(run, overrides);

    auto* sweep = app.add_subcommand("sweep-mask",
                                     "Run the variance-reduction cutoff sweep");
    sweep->add_option("--config", config_path, "Config JSON path")->required();
    sweep->add_option("--out", out_dir, "Output directory");
    sweep->add_option("--cutoffs", cutoffs, "Layer cutoffs to sweep")->required();
    add_override_flags(sweep, overrides);

    auto* compare = app.add_subcommand("compare", "Compare strategies on shared data");
    compare->add_option("--config", config_paths, "Config JSON paths (repeatable)")
        ->required();
    compare->add_option("--out", out_dir, "Output directory");
    add_override_flags(compare, overrides);

    auto* conformal = app.add_subcommand("conformal",
                                         "Train, then sweep conformal coverage");
    conformal->add_option("--config", config_path, "Config JSON path")->required();
    conformal->add_option("--out", out_dir, "Output directory");
    conformal->add_option("--kappas", kappas, "Miscoverage levels");
    add_override_flags(conformal, overrides);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(run)) return run_command(config_path, out_dir, overrides);
        if (app.got_subcommand(sweep))
            return sweep_command(config_path, out_dir, cutoffs, overrides);
        if (app.got_subcommand(compare))
            return compare_command(config_paths, out_dir, overrides);
        if (app.got_subcommand(conformal))
            return conformal_command(config_path, out_dir, kappas, overrides);
    } catch (const fedpvr::ValidationError& e) {
        emit_error("validation", "config validation failed", e.violations);
        return 2;
    } catch (const fedpvr::DivergenceError& e) {
        emit_error("divergence", e.what());
        return 3;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return 1;
    }
    return 0;
}
