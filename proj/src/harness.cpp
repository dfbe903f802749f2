#include "fedpvr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fedpvr {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json xi_to_json(const XiValue& xi) {
    if (xi.degenerate) return "degenerate";
    if (std::isinf(xi.value)) return "inf";
    return xi.value;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config) {
    if (!config.has_dataset)
        throw Error("prepare_data: config has no dataset section");
    PreparedData out;

    Dataset full;
    if (config.dataset.kind == DatasetConfig::Kind::Synthetic) {
        SyntheticSpec spec = config.dataset.synthetic;
        spec.seed = config.seeds.data;
        full = generate_synthetic(spec);
    } else {
        CsvSchema schema;
        schema.label_column = config.dataset.label_column;
        full = load_csv(config.dataset.csv_path, schema);
    }

    out.splits = split(full, config.split, config.seeds.data);
    if (out.splits.train.empty()) throw Error("prepare_data: empty train split");
    Dataset train = subset(full, out.splits.train);
    out.plan = dirichlet_partition(train, config.clients, config.alpha,
                                   config.seeds.data);
    out.full = std::make_shared<const Dataset>(std::move(full));
    out.train = std::make_shared<const Dataset>(std::move(train));
    return out;
}

namespace {

Strategy build_strategy(const ExperimentConfig& config, const LayerLayout& layout) {
    Strategy strat;
    strat.kind = config.strategy.kind;
    strat.local_lr = config.strategy.local_lr;
    strat.global_lr = config.strategy.global_lr;
    strat.local_steps = config.strategy.local_steps;
    strat.local_epochs = config.strategy.local_epochs;
    strat.batch_size = config.strategy.batch_size;
    strat.momentum_nonvr = config.strategy.momentum_nonvr;
    strat.prox_mu = config.strategy.prox_mu;
    if (strat.kind == StrategyKind::FedPvr)
        strat.mask = Mask::from_layer_cutoff(layout, config.strategy.mask_cutoff);
    return strat;
}

json manifest_for(const ExperimentConfig& config, const PreparedData* data,
                  const LayerLayout& layout) {
    json m;
    m["seeds"] = {{"data", config.seeds.data},
                  {"init", config.seeds.init},
                  {"sampling", config.seeds.sampling}};
    json layers = json::array();
    for (const auto& l : layout.layers())
        layers.push_back({{"name", l.name}, {"offset", l.offset}, {"length", l.length}});
    m["layout"] = layers;
    if (data) {
        m["alpha"] = config.alpha;
        m["dataset"] = {{"provenance", data->full->provenance},
                        {"rows", data->full->n},
                        {"features", data->full->m},
                        {"classes", data->full->num_classes}};
        m["split"] = {{"train", data->splits.train},
                      {"validation", data->splits.validation},
                      {"calibration", data->splits.calibration},
                      {"test", data->splits.test}};
        m["shards"] = data->plan.client_shards;
    } else {
        m["model"] = "quadratic-ensemble";
    }
    return m;
}

struct BuiltExperiment {
    std::vector<std::shared_ptr<const Objective>> objectives;
    ParamVector init_model;
    Evaluator evaluator;
    LayerLayout layout;
    std::shared_ptr<const MlpObjective> eval_mlp;  // set for MLP runs
    std::unique_ptr<PreparedData> data;            // set for dataset runs
};

BuiltExperiment build_experiment(const ExperimentConfig& config) {
    BuiltExperiment built;

    if (config.model.kind == ModelConfig::Kind::Quadratic) {
        HeteroQuadraticSpec spec = config.model.quadratic;
        spec.n_clients = config.clients;
        spec.seed = config.seeds.data;
        auto ensemble = make_hetero_quadratic_ensemble(spec);
        built.layout = ensemble.front().layout();

        auto shared = std::make_shared<std::vector<QuadraticObjective>>(std::move(ensemble));
        for (const auto& obj : *shared)
            built.objectives.push_back(
                std::shared_ptr<const Objective>(shared, &obj));

        RngStream init_rng = RngStream::keyed(config.seeds.init, 0x171);
        built.init_model = ParamVector(built.layout.total_dim());
        for (std::size_t i = 0; i < built.init_model.dim(); ++i)
            built.init_model[i] = init_rng.next_gaussian();

        // Optimality gap as the reported loss; falls back to the raw average
        // loss when the averaged system is singular.
        double f_star = 0.0;
        bool have_star = true;
        try {
            const ParamVector x_star = optimum(*shared);
            for (const auto& obj : *shared) f_star += obj.loss(x_star);
            f_star /= static_cast<double>(shared->size());
        } catch (const Error&) {
            have_star = false;
        }
        built.evaluator = [shared, f_star, have_star](const ParamVector& x) {
            double loss = 0.0;
            for (const auto& obj : *shared) loss += obj.loss(x);
            loss /= static_cast<double>(shared->size());
            EvalResult r;
            r.loss = have_star ? loss - f_star : loss;
            return r;
        };
        return built;
    }

    auto data = std::make_unique<PreparedData>(prepare_data(config));
    MlpArchitecture arch;
    arch.input_dim = data->train->m;
    arch.hidden = config.model.hidden;
    arch.num_classes = data->full->num_classes;

    for (std::size_t i = 0; i < config.clients; ++i)
        built.objectives.push_back(std::make_shared<MlpObjective>(
            arch, data->train, data->plan.client_shards[i]));
    built.layout = built.objectives.front()->layout();

    const auto* first = static_cast<const MlpObjective*>(built.objectives.front().get());
    RngStream init_rng = RngStream::keyed(config.seeds.init, 0x171);
    built.init_model = first->init_params(init_rng);

    // Server-side evaluation on the held-out test split.
    auto eval_mlp = std::make_shared<const MlpObjective>(
        arch, data->train, data->plan.client_shards[0]);
    built.eval_mlp = eval_mlp;
    if (!data->splits.test.empty()) {
        auto full = data->full;
        auto test_rows = std::make_shared<const std::vector<std::size_t>>(data->splits.test);
        built.evaluator = [eval_mlp, full, test_rows](const ParamVector& x) {
            EvalResult r;
            r.loss = eval_mlp->dataset_loss(x, *full, *test_rows);
            r.accuracy = eval_mlp->accuracy(x, *full, *test_rows);
            return r;
        };
    }
    built.data = std::move(data);
    return built;
}

}  // namespace

RunLog run_experiment(const ExperimentConfig& config) {
    BuiltExperiment built = build_experiment(config);
    const Strategy strategy = build_strategy(config, built.layout);

    EngineOptions options;
    options.sampling_seed = config.seeds.sampling;
    options.compute_xi = config.metrics.xi;
    options.compute_client_drift = config.metrics.client_drift;
    options.worker_threads = config.worker_threads;

    FederatedEngine engine(built.objectives, built.init_model, strategy, options,
                           built.evaluator);

    RunLog log;
    log.config_snapshot = config.to_json();
    log.manifest = manifest_for(config, built.data.get(), built.layout);

    std::vector<double> accuracy_trace;
    for (std::size_t r = 1; r <= config.rounds; ++r) {
        const double lr =
            schedule_lr(config.schedule, config.strategy.local_lr, r, config.rounds);
        RoundRecord record = engine.run_round(lr);
        accuracy_trace.push_back(record.test_accuracy);
        log.summary.total_params_down += record.params_down_per_client;
        log.summary.total_params_up += record.params_up_per_client;
        log.rounds.push_back(std::move(record));
    }

    auto& summary = log.summary;
    summary.strategy_name = strategy_kind_name(strategy.kind);
    summary.final_accuracy = log.rounds.back().test_accuracy;
    summary.final_test_loss = log.rounds.back().test_loss;
    summary.final_train_loss = log.rounds.back().train_loss;
    summary.model_dim = built.layout.total_dim();
    summary.mask_ones = engine.mask().ones_count();
    summary.comm_ratio_per_round =
        comm_ratio(comm_cost(strategy, summary.model_dim, summary.mask_ones),
                   summary.model_dim);
    if (config.target_accuracy) {
        summary.target_accuracy = *config.target_accuracy;
        summary.rounds_to_target =
            rounds_to_target(accuracy_trace, *config.target_accuracy);
    }

    // Conformal sweep on the final server model.
    if (!config.metrics.conformal_kappas.empty()) {
        if (!built.eval_mlp || !built.data)
            throw Error("run_experiment: conformal needs a classifier run");
        const auto& data = *built.data;
        if (data.splits.calibration.empty())
            throw Error("run_experiment: conformal needs a calibration split");
        if (data.splits.test.empty())
            throw Error("run_experiment: conformal needs a test split");
        const ParamVector& x = engine.server().model;
        const Matrix calib_probs =
            built.eval_mlp->class_probabilities(x, *data.full, data.splits.calibration);
        std::vector<double> calib_scores(data.splits.calibration.size());
        for (std::size_t i = 0; i < calib_scores.size(); ++i) {
            const int label = data.full->labels[data.splits.calibration[i]];
            calib_scores[i] = calib_probs.at(i, static_cast<std::size_t>(label));
        }
        const Matrix test_probs =
            built.eval_mlp->class_probabilities(x, *data.full, data.splits.test);
        std::vector<int> test_labels(data.splits.test.size());
        for (std::size_t i = 0; i < test_labels.size(); ++i)
            test_labels[i] = data.full->labels[data.splits.test[i]];
        log.conformal =
            coverage_curve(test_probs, test_labels, calib_scores,
                           config.metrics.conformal_kappas,
                           config.metrics.conformal_force_argmax);
    }

    // CKA between the final round's client models on a test probe set.
    if (config.metrics.cka) {
        if (!built.eval_mlp || !built.data)
            throw Error("run_experiment: CKA needs a classifier run");
        const auto& data = *built.data;
        if (data.splits.test.empty())
            throw Error("run_experiment: CKA needs a test split");
        const std::size_t probe_count =
            std::min(config.metrics.cka_probe_count, data.splits.test.size());
        const std::vector<std::size_t> probe(data.splits.test.begin(),
                                             data.splits.test.begin() +
                                                 static_cast<std::ptrdiff_t>(probe_count));
        const std::size_t n_layers = built.layout.layer_count();
        std::vector<std::vector<Matrix>> features(config.clients);
        for (std::size_t i = 0; i < config.clients; ++i)
            for (std::size_t l = 0; l < n_layers; ++l)
                features[i].push_back(built.eval_mlp->layer_features(
                    engine.last_results()[i].model, *data.full, l, probe));
        std::vector<std::string> names;
        for (const auto& l : built.layout.layers()) names.push_back(l.name);
        log.cka = cka_between_clients(features, names);
    }
    return log;
}

namespace {

void write_jsonl(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_run_log: cannot open " + path);
    out << json{{"type", "config"}, {"config", log.config_snapshot}}.dump() << "\n";
    out << json{{"type", "manifest"}, {"manifest", log.manifest}}.dump() << "\n";
    for (const auto& r : log.rounds) {
        json xi_layers = json::object();
        for (const auto& [name, xi] : r.xi_per_layer) xi_layers[name] = xi_to_json(xi);
        json row{{"type", "round"},
                 {"round", r.round},
                 {"local_lr", r.local_lr},
                 {"train_loss", r.train_loss},
                 {"test_loss", r.test_loss},
                 {"test_accuracy", r.test_accuracy},
                 {"xi_global", xi_to_json(r.xi_global)},
                 {"xi_per_layer", xi_layers},
                 {"client_drift", r.client_drift},
                 {"params_down_per_client", r.params_down_per_client},
                 {"params_up_per_client", r.params_up_per_client}};
        out << row.dump() << "\n";
    }
    json summary{{"type", "summary"},
                 {"strategy", log.summary.strategy_name},
                 {"final_accuracy", log.summary.final_accuracy},
                 {"final_test_loss", log.summary.final_test_loss},
                 {"final_train_loss", log.summary.final_train_loss},
                 {"total_params_down", log.summary.total_params_down},
                 {"total_params_up", log.summary.total_params_up},
                 {"comm_ratio_per_round", log.summary.comm_ratio_per_round}};
    if (!std::isnan(log.summary.target_accuracy)) {
        summary["target_accuracy"] = log.summary.target_accuracy;
        if (log.summary.rounds_to_target)
            summary["rounds_to_target"] = *log.summary.rounds_to_target;
        else
            summary["rounds_to_target"] = "not_reached";
    }
    out << summary.dump() << "\n";
}

}  // namespace

void emit_plot_data(const RunLog& log, PlotKind kind, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("emit_plot_data: cannot open " + path);
    out << "# fedpvr-metrics-v1\n";
    switch (kind) {
        case PlotKind::Accuracy:
            out << "round,test_accuracy,test_loss,train_loss,local_lr\n";
            for (const auto& r : log.rounds)
                out << r.round << "," << fmt(r.test_accuracy) << ","
                    << fmt(r.test_loss) << "," << fmt(r.train_loss) << ","
                    << fmt(r.local_lr) << "\n";
            break;
        case PlotKind::Xi:
            out << "round,scope,xi\n";
            for (const auto& r : log.rounds) {
                out << r.round << ",global," << r.xi_global.to_string() << "\n";
                for (const auto& [name, xi] : r.xi_per_layer)
                    out << r.round << "," << name << "," << xi.to_string() << "\n";
            }
            break;
        case PlotKind::Drift:
            out << "round,client_drift\n";
            for (const auto& r : log.rounds)
                out << r.round << "," << fmt(r.client_drift) << "\n";
            break;
        case PlotKind::Comm:
            out << "round,down_per_client,up_per_client,ratio\n";
            for (const auto& r : log.rounds)
                out << r.round << "," << r.params_down_per_client << ","
                    << r.params_up_per_client << ","
                    << fmt(log.summary.comm_ratio_per_round) << "\n";
            break;
        case PlotKind::Conformal:
            out << "kappa,coverage,avg_set_size,guarantee_vacuous\n";
            for (const auto& p : log.conformal)
                out << fmt(p.kappa) << "," << fmt(p.coverage) << ","
                    << fmt(p.avg_set_size) << "," << (p.guarantee_vacuous ? 1 : 0)
                    << "\n";
            break;
        case PlotKind::Cka:
            out << "layer,client_a,client_b,cka\n";
            for (std::size_t l = 0; l < log.cka.layer_names.size(); ++l) {
                const Matrix& m = log.cka.matrices[l];
                for (std::size_t i = 0; i < m.rows; ++i)
                    for (std::size_t j = 0; j < m.cols; ++j)
                        out << log.cka.layer_names[l] << "," << i << "," << j << ","
                            << fmt(m.at(i, j)) << "\n";
            }
            break;
    }
}

void write_run_log(const RunLog& log, const std::string& out_dir) {
    namespace fs = std::filesystem;
    const auto metrics_dir = fs::path(out_dir) / "metrics";
    fs::create_directories(metrics_dir);

    write_jsonl(log, (fs::path(out_dir) / "run_log.jsonl").string());

    {
        std::ofstream out(fs::path(out_dir) / "manifest.json");
        out << log.manifest.dump(2) << "\n";
    }

    emit_plot_data(log, PlotKind::Accuracy, (metrics_dir / "accuracy.csv").string());
    emit_plot_data(log, PlotKind::Comm, (metrics_dir / "comm.csv").string());
    emit_plot_data(log, PlotKind::Drift, (metrics_dir / "drift.csv").string());
    if (!log.rounds.empty() && !log.rounds.front().xi_per_layer.empty())
        emit_plot_data(log, PlotKind::Xi, (metrics_dir / "xi.csv").string());
    if (!log.conformal.empty())
        emit_plot_data(log, PlotKind::Conformal,
                       (metrics_dir / "conformal.csv").string());
    if (!log.cka.layer_names.empty())
        emit_plot_data(log, PlotKind::Cka, (metrics_dir / "cka.csv").string());
}

std::vector<SweepRow> sweep_mask_cutoff(const ExperimentConfig& base,
                                        const std::vector<std::size_t>& cutoffs,
                                        std::vector<RunLog>* logs) {
    if (cutoffs.empty()) throw Error("sweep_mask_cutoff: no cutoffs");
    std::vector<SweepRow> rows;
    for (std::size_t cutoff : cutoffs) {
        ExperimentConfig config = base;
        config.strategy.kind = StrategyKind::FedPvr;
        config.strategy.mask_cutoff = cutoff;
        RunLog log = run_experiment(config);

        SweepRow row;
        row.cutoff = cutoff;
        row.mask_ones = log.summary.mask_ones;
        row.rounds_to_target = log.summary.rounds_to_target;
        row.final_accuracy = log.summary.final_accuracy;
        row.final_test_loss = log.summary.final_test_loss;
        row.comm_ratio_per_round = log.summary.comm_ratio_per_round;
        rows.push_back(row);
        if (logs) logs->push_back(std::move(log));
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_sweep_csv: cannot open " + path);
    out << "# fedpvr-metrics-v1\n";
    out << "cutoff,rounds_to_target,final_accuracy,final_test_loss,comm_ratio\n";
    for (const auto& r : rows) {
        out << r.cutoff << ",";
        if (r.rounds_to_target)
            out << *r.rounds_to_target;
        else
            out << "not_reached";
        out << "," << fmt(r.final_accuracy) << "," << fmt(r.final_test_loss) << ","
            << fmt(r.comm_ratio_per_round) << "\n";
    }
}

std::vector<CompareRow> compare_strategies(
    const std::vector<ExperimentConfig>& configs, std::vector<RunLog>* logs) {
    if (configs.empty()) throw Error("compare_strategies: no configs");

    // The comparison only makes sense over the same data universe.
    const auto& first = configs.front();
    for (const auto& c : configs) {
        if (c.seeds.data != first.seeds.data)
            throw Error("compare_strategies: configs must share the data seed");
        const json a = c.to_json(), b = first.to_json();
        for (const char* key : {"dataset", "split", "clients", "alpha", "model", "rounds"}) {
            const json av = a.contains(key) ? a.at(key) : json();
            const json bv = b.contains(key) ? b.at(key) : json();
            if (av != bv)
                throw Error(std::string("compare_strategies: configs differ in '") +
                            key + "'; comparison invalid");
        }
    }

    std::vector<CompareRow> rows;
    std::optional<std::size_t> fedavg_rounds;
    for (const auto& config : configs) {
        RunLog log = run_experiment(config);
        CompareRow row;
        row.name = log.summary.strategy_name;
        if (config.strategy.kind == StrategyKind::FedPvr)
            row.name += "(cutoff=" + std::to_string(config.strategy.mask_cutoff) + ")";
        row.rounds_to_target = log.summary.rounds_to_target;
        row.final_accuracy = log.summary.final_accuracy;
        row.params_per_round = log.rounds.empty()
                                   ? 0
                                   : log.rounds.front().params_down_per_client +
                                         log.rounds.front().params_up_per_client;
        row.comm_ratio = log.summary.comm_ratio_per_round;
        if (config.strategy.kind == StrategyKind::FedAvg && log.summary.rounds_to_target)
            fedavg_rounds = log.summary.rounds_to_target;
        rows.push_back(std::move(row));
        if (logs) logs->push_back(std::move(log));
    }
    if (fedavg_rounds)
        for (auto& row : rows)
            if (row.rounds_to_target)
                row.speedup_vs_fedavg = speedup(*fedavg_rounds, *row.rounds_to_target);
    return rows;
}

void write_compare_csv(const std::vector<CompareRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_compare_csv: cannot open " + path);
    out << "# fedpvr-metrics-v1\n";
    out << "strategy,rounds_to_target,speedup_vs_fedavg,final_accuracy,params_per_round,comm_ratio\n";
    for (const auto& r : rows) {
        out << r.name << ",";
        if (r.rounds_to_target)
            out << *r.rounds_to_target;
        else
            out << "not_reached";
        out << "," << fmt(r.speedup_vs_fedavg) << "," << fmt(r.final_accuracy) << ","
            << r.params_per_round << "," << fmt(r.comm_ratio) << "\n";
    }
}

}  // namespace fedpvr
