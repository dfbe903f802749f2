#include "fedpvr/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace fedpvr {

using nlohmann::json;

double schedule_lr(const ScheduleConfig& schedule, double base_lr,
                   std::size_t round, std::size_t total_rounds) {
    switch (schedule.kind) {
        case ScheduleConfig::Kind::Constant:
            return base_lr;
        case ScheduleConfig::Kind::Cosine: {
            const double frac = total_rounds == 0
                                    ? 0.0
                                    : static_cast<double>(round) /
                                          static_cast<double>(total_rounds);
            return base_lr * (1.0 + std::cos(std::numbers::pi * frac)) / 2.0;
        }
        case ScheduleConfig::Kind::Multistep: {
            double lr = base_lr;
            for (std::size_t m : schedule.milestones)
                if (round >= m) lr *= schedule.factor;
            return lr;
        }
    }
    throw Error("schedule_lr: unknown schedule kind");
}

namespace {

struct ParseCtx {
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& message) {
        errors.push_back(path + ": " + message);
    }

    void check_keys(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
        for (const auto& item : obj.items())
            if (!allowed.count(item.key()))
                fail(path + "." + item.key(), "unknown key");
    }

    bool expect_object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path, "expected an object");
        return false;
    }

    template <typename T>
    T get(const json& obj, const std::string& path, const char* key, T fallback,
          bool required = false) {
        if (!obj.contains(key)) {
            if (required) fail(path + "." + key, "missing required key");
            return fallback;
        }
        try {
            return obj.at(key).get<T>();
        } catch (const json::exception&) {
            fail(path + "." + key, "wrong type");
            return fallback;
        }
    }
};

StrategyKind parse_strategy_kind(ParseCtx& ctx, const std::string& name,
                                 const std::string& path) {
    if (name == "fedavg") return StrategyKind::FedAvg;
    if (name == "fedprox") return StrategyKind::FedProx;
    if (name == "scaffold") return StrategyKind::Scaffold;
    if (name == "fedpvr") return StrategyKind::FedPvr;
    ctx.fail(path, "unknown strategy kind '" + name +
                       "' (expected fedavg|fedprox|scaffold|fedpvr)");
    return StrategyKind::FedAvg;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ParseCtx ctx;
    ExperimentConfig cfg;
    if (!ctx.expect_object(j, "config")) throw ValidationError(ctx.errors);

    ctx.check_keys(j, "config",
                   {"dataset", "split", "clients", "alpha", "model", "strategy",
                    "schedule", "rounds", "seeds", "metrics", "target_accuracy",
                    "allow_global_lr_below_one", "worker_threads"});

    // model (parsed first; quadratic runs take no dataset)
    if (j.contains("model") && ctx.expect_object(j.at("model"), "model")) {
        const json& m = j.at("model");
        const std::string type = ctx.get<std::string>(m, "model", "type", "mlp");
        if (type == "mlp") {
            cfg.model.kind = ModelConfig::Kind::Mlp;
            ctx.check_keys(m, "model", {"type", "hidden"});
            cfg.model.hidden =
                ctx.get<std::vector<std::size_t>>(m, "model", "hidden", {32});
            if (cfg.model.hidden.empty() || cfg.model.hidden.size() > 2)
                ctx.fail("model.hidden", "need one or two hidden layers");
            for (std::size_t w : cfg.model.hidden)
                if (w == 0) ctx.fail("model.hidden", "zero hidden width");
        } else if (type == "quadratic") {
            cfg.model.kind = ModelConfig::Kind::Quadratic;
            ctx.check_keys(m, "model",
                           {"type", "feat_dim", "clf_dim", "feat_curv_min",
                            "feat_curv_max", "clf_curv", "spread", "clf_curv_jitter",
                            "noise_sigma"});
            auto& q = cfg.model.quadratic;
            q.feat_dim = ctx.get<std::size_t>(m, "model", "feat_dim", 8);
            q.clf_dim = ctx.get<std::size_t>(m, "model", "clf_dim", 2);
            q.feat_curv_min = ctx.get<double>(m, "model", "feat_curv_min", 1.0);
            q.feat_curv_max = ctx.get<double>(m, "model", "feat_curv_max", 4.0);
            q.clf_curv = ctx.get<double>(m, "model", "clf_curv", 2.0);
            q.spread = ctx.get<double>(m, "model", "spread", 2.0);
            q.clf_curv_jitter = ctx.get<double>(m, "model", "clf_curv_jitter", 0.0);
            q.noise_sigma = ctx.get<double>(m, "model", "noise_sigma", 0.0);
            if (q.clf_curv_jitter < 0.0 || q.clf_curv_jitter >= 1.0)
                ctx.fail("model.clf_curv_jitter", "must be in [0, 1)");
            if (q.feat_dim == 0 || q.clf_dim == 0)
                ctx.fail("model", "feat_dim and clf_dim must be positive");
            if (!(q.feat_curv_min > 0.0) || q.feat_curv_max < q.feat_curv_min ||
                !(q.clf_curv > 0.0))
                ctx.fail("model", "curvatures must be positive and ordered");
            if (q.noise_sigma < 0.0) ctx.fail("model.noise_sigma", "must be >= 0");
        } else {
            ctx.fail("model.type", "unknown model type '" + type + "'");
        }
    }

    const bool quadratic = cfg.model.kind == ModelConfig::Kind::Quadratic;

    // dataset
    cfg.has_dataset = j.contains("dataset");
    if (quadratic && cfg.has_dataset)
        ctx.fail("dataset", "quadratic model runs take no dataset");
    if (!quadratic && !cfg.has_dataset)
        ctx.fail("dataset", "missing required section");
    if (cfg.has_dataset && ctx.expect_object(j.at("dataset"), "dataset")) {
        const json& d = j.at("dataset");
        const std::string type = ctx.get<std::string>(d, "dataset", "type", "synthetic");
        if (type == "synthetic") {
            cfg.dataset.kind = DatasetConfig::Kind::Synthetic;
            ctx.check_keys(d, "dataset",
                           {"type", "classes", "clusters_per_class", "dims", "count",
                            "noise", "center_scale"});
            auto& s = cfg.dataset.synthetic;
            s.num_classes = ctx.get<std::size_t>(d, "dataset", "classes", 10);
            s.clusters_per_class =
                ctx.get<std::size_t>(d, "dataset", "clusters_per_class", 1);
            s.dims = ctx.get<std::size_t>(d, "dataset", "dims", 16);
            s.count = ctx.get<std::size_t>(d, "dataset", "count", 2000);
            s.noise = ctx.get<double>(d, "dataset", "noise", 0.5);
            s.center_scale = ctx.get<double>(d, "dataset", "center_scale", 2.0);
            if (s.num_classes < 2) ctx.fail("dataset.classes", "need at least 2");
            if (s.count < s.num_classes)
                ctx.fail("dataset.count", "must be >= classes");
            if (s.noise < 0.0) ctx.fail("dataset.noise", "must be >= 0");
        } else if (type == "csv") {
            cfg.dataset.kind = DatasetConfig::Kind::Csv;
            ctx.check_keys(d, "dataset", {"type", "path", "label_column"});
            cfg.dataset.csv_path =
                ctx.get<std::string>(d, "dataset", "path", "", true);
            cfg.dataset.label_column =
                ctx.get<std::string>(d, "dataset", "label_column", "label");
        } else {
            ctx.fail("dataset.type", "unknown dataset type '" + type + "'");
        }
    }

    // split
    if (j.contains("split") && ctx.expect_object(j.at("split"), "split")) {
        const json& s = j.at("split");
        ctx.check_keys(s, "split",
                       {"validation_fraction", "calibration_count", "test_count"});
        cfg.split.validation_fraction =
            ctx.get<double>(s, "split", "validation_fraction", 0.01);
        cfg.split.calibration_count =
            ctx.get<std::size_t>(s, "split", "calibration_count", 0);
        cfg.split.test_count = ctx.get<std::size_t>(s, "split", "test_count", 0);
        if (cfg.split.validation_fraction < 0.0 || cfg.split.validation_fraction >= 1.0)
            ctx.fail("split.validation_fraction", "must be in [0, 1)");
    }

    cfg.clients = ctx.get<std::size_t>(j, "config", "clients", 10);
    if (cfg.clients == 0) ctx.fail("clients", "need at least one client");
    cfg.alpha = ctx.get<double>(j, "config", "alpha", 1.0);
    if (!quadratic && !(cfg.alpha > 0.0)) ctx.fail("alpha", "must be > 0");

    // strategy
    if (j.contains("strategy") && ctx.expect_object(j.at("strategy"), "strategy")) {
        const json& s = j.at("strategy");
        ctx.check_keys(s, "strategy",
                       {"kind", "mask_cutoff", "local_lr", "global_lr", "local_steps",
                        "local_epochs", "batch_size", "momentum_nonvr", "prox_mu"});
        cfg.strategy.kind = parse_strategy_kind(
            ctx, ctx.get<std::string>(s, "strategy", "kind", "fedavg"), "strategy.kind");
        cfg.strategy.mask_cutoff = ctx.get<std::size_t>(s, "strategy", "mask_cutoff", 0);
        cfg.strategy.local_lr = ctx.get<double>(s, "strategy", "local_lr", 0.1);
        cfg.strategy.global_lr = ctx.get<double>(s, "strategy", "global_lr", 1.0);
        cfg.strategy.local_steps = ctx.get<std::size_t>(s, "strategy", "local_steps", 0);
        cfg.strategy.local_epochs =
            ctx.get<std::size_t>(s, "strategy", "local_epochs", 0);
        cfg.strategy.batch_size = ctx.get<std::size_t>(s, "strategy", "batch_size", 32);
        cfg.strategy.momentum_nonvr =
            ctx.get<double>(s, "strategy", "momentum_nonvr", 0.0);
        cfg.strategy.prox_mu = ctx.get<double>(s, "strategy", "prox_mu", 0.0);

        if (!(cfg.strategy.local_lr > 0.0)) ctx.fail("strategy.local_lr", "must be > 0");
        if (cfg.strategy.local_steps == 0 && cfg.strategy.local_epochs == 0)
            ctx.fail("strategy", "set local_steps or local_epochs");
        if (cfg.strategy.local_steps > 0 && cfg.strategy.local_epochs > 0)
            ctx.fail("strategy", "local_steps and local_epochs are exclusive");
        if (cfg.strategy.batch_size == 0) ctx.fail("strategy.batch_size", "must be >= 1");
        if (cfg.strategy.momentum_nonvr < 0.0 || cfg.strategy.momentum_nonvr >= 1.0)
            ctx.fail("strategy.momentum_nonvr", "must be in [0, 1)");
        if (cfg.strategy.prox_mu < 0.0) ctx.fail("strategy.prox_mu", "must be >= 0");
        if (cfg.strategy.prox_mu > 0.0 && cfg.strategy.kind != StrategyKind::FedProx)
            ctx.fail("strategy.prox_mu", "only fedprox takes a proximal coefficient");
        if (s.contains("mask_cutoff") && cfg.strategy.kind != StrategyKind::FedPvr)
            ctx.fail("strategy.mask_cutoff", "only fedpvr takes a mask cutoff");
    } else {
        ctx.fail("strategy", "missing required section");
    }

    // schedule
    if (j.contains("schedule") && ctx.expect_object(j.at("schedule"), "schedule")) {
        const json& s = j.at("schedule");
        const std::string kind = ctx.get<std::string>(s, "schedule", "kind", "constant");
        if (kind == "constant") {
            cfg.schedule.kind = ScheduleConfig::Kind::Constant;
            ctx.check_keys(s, "schedule", {"kind"});
        } else if (kind == "cosine") {
            cfg.schedule.kind = ScheduleConfig::Kind::Cosine;
            ctx.check_keys(s, "schedule", {"kind"});
        } else if (kind == "multistep") {
            cfg.schedule.kind = ScheduleConfig::Kind::Multistep;
            ctx.check_keys(s, "schedule", {"kind", "milestones", "factor"});
            cfg.schedule.milestones =
                ctx.get<std::vector<std::size_t>>(s, "schedule", "milestones", {}, true);
            cfg.schedule.factor = ctx.get<double>(s, "schedule", "factor", 0.1);
            for (std::size_t i = 1; i < cfg.schedule.milestones.size(); ++i)
                if (cfg.schedule.milestones[i] <= cfg.schedule.milestones[i - 1])
                    ctx.fail("schedule.milestones", "must be strictly increasing");
            if (!(cfg.schedule.factor > 0.0 && cfg.schedule.factor <= 1.0))
                ctx.fail("schedule.factor", "must be in (0, 1]");
        } else {
            ctx.fail("schedule.kind", "unknown schedule '" + kind + "'");
        }
    }

    cfg.rounds = ctx.get<std::size_t>(j, "config", "rounds", 10);
    if (cfg.rounds == 0) ctx.fail("rounds", "must be >= 1");

    if (j.contains("seeds") && ctx.expect_object(j.at("seeds"), "seeds")) {
        const json& s = j.at("seeds");
        ctx.check_keys(s, "seeds", {"data", "init", "sampling"});
        cfg.seeds.data = ctx.get<std::uint64_t>(s, "seeds", "data", 1);
        cfg.seeds.init = ctx.get<std::uint64_t>(s, "seeds", "init", 2);
        cfg.seeds.sampling = ctx.get<std::uint64_t>(s, "seeds", "sampling", 3);
    }

    if (j.contains("metrics") && ctx.expect_object(j.at("metrics"), "metrics")) {
        const json& m = j.at("metrics");
        ctx.check_keys(m, "metrics",
                       {"xi", "client_drift", "cka", "cka_probe_count",
                        "conformal_kappas", "conformal_force_argmax"});
        cfg.metrics.xi = ctx.get<bool>(m, "metrics", "xi", true);
        cfg.metrics.client_drift = ctx.get<bool>(m, "metrics", "client_drift", true);
        cfg.metrics.cka = ctx.get<bool>(m, "metrics", "cka", false);
        cfg.metrics.cka_probe_count =
            ctx.get<std::size_t>(m, "metrics", "cka_probe_count", 256);
        cfg.metrics.conformal_kappas =
            ctx.get<std::vector<double>>(m, "metrics", "conformal_kappas", {});
        cfg.metrics.conformal_force_argmax =
            ctx.get<bool>(m, "metrics", "conformal_force_argmax", false);
        for (double k : cfg.metrics.conformal_kappas)
            if (!(k > 0.0 && k < 1.0))
                ctx.fail("metrics.conformal_kappas", "each kappa must be in (0, 1)");
        if (!cfg.metrics.conformal_kappas.empty() && quadratic)
            ctx.fail("metrics.conformal_kappas", "conformal needs a classifier model");
        if (!cfg.metrics.conformal_kappas.empty() && cfg.split.calibration_count == 0)
            ctx.fail("metrics.conformal_kappas",
                     "conformal needs split.calibration_count > 0");
        if (cfg.metrics.cka && quadratic)
            ctx.fail("metrics.cka", "CKA needs a classifier model");
    }

    if (j.contains("target_accuracy")) {
        cfg.target_accuracy = ctx.get<double>(j, "config", "target_accuracy", 0.0);
        if (!(*cfg.target_accuracy > 0.0 && *cfg.target_accuracy <= 1.0))
            ctx.fail("target_accuracy", "must be in (0, 1]");
        if (quadratic)
            ctx.fail("target_accuracy", "quadratic runs have no accuracy metric");
    }

    cfg.allow_global_lr_below_one =
        ctx.get<bool>(j, "config", "allow_global_lr_below_one", false);
    if (!(cfg.strategy.global_lr >= 1.0) && !cfg.allow_global_lr_below_one)
        ctx.fail("strategy.global_lr",
                 "must be >= 1 (set allow_global_lr_below_one to override)");
    if (!(cfg.strategy.global_lr > 0.0)) ctx.fail("strategy.global_lr", "must be > 0");

    cfg.worker_threads = ctx.get<std::size_t>(j, "config", "worker_threads", 1);
    if (cfg.worker_threads == 0) ctx.fail("worker_threads", "must be >= 1");

    if (!ctx.errors.empty()) throw ValidationError(ctx.errors);
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error("config: " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    json j;
    if (has_dataset) {
        json d;
        if (dataset.kind == DatasetConfig::Kind::Synthetic) {
            d["type"] = "synthetic";
            d["classes"] = dataset.synthetic.num_classes;
            d["clusters_per_class"] = dataset.synthetic.clusters_per_class;
            d["dims"] = dataset.synthetic.dims;
            d["count"] = dataset.synthetic.count;
            d["noise"] = dataset.synthetic.noise;
            d["center_scale"] = dataset.synthetic.center_scale;
        } else {
            d["type"] = "csv";
            d["path"] = dataset.csv_path;
            d["label_column"] = dataset.label_column;
        }
        j["dataset"] = d;
        j["split"] = {{"validation_fraction", split.validation_fraction},
                      {"calibration_count", split.calibration_count},
                      {"test_count", split.test_count}};
        j["alpha"] = alpha;
    }
    j["clients"] = clients;

    json m;
    if (model.kind == ModelConfig::Kind::Mlp) {
        m["type"] = "mlp";
        m["hidden"] = model.hidden;
    } else {
        m["type"] = "quadratic";
        m["feat_dim"] = model.quadratic.feat_dim;
        m["clf_dim"] = model.quadratic.clf_dim;
        m["feat_curv_min"] = model.quadratic.feat_curv_min;
        m["feat_curv_max"] = model.quadratic.feat_curv_max;
        m["clf_curv"] = model.quadratic.clf_curv;
        m["spread"] = model.quadratic.spread;
        m["clf_curv_jitter"] = model.quadratic.clf_curv_jitter;
        m["noise_sigma"] = model.quadratic.noise_sigma;
    }
    j["model"] = m;

    json s;
    s["kind"] = strategy_kind_name(strategy.kind);
    if (strategy.kind == StrategyKind::FedPvr) s["mask_cutoff"] = strategy.mask_cutoff;
    s["local_lr"] = strategy.local_lr;
    s["global_lr"] = strategy.global_lr;
    if (strategy.local_epochs > 0)
        s["local_epochs"] = strategy.local_epochs;
    else
        s["local_steps"] = strategy.local_steps;
    s["batch_size"] = strategy.batch_size;
    s["momentum_nonvr"] = strategy.momentum_nonvr;
    if (strategy.kind == StrategyKind::FedProx) s["prox_mu"] = strategy.prox_mu;
    j["strategy"] = s;

    json sch;
    switch (schedule.kind) {
        case ScheduleConfig::Kind::Constant: sch["kind"] = "constant"; break;
        case ScheduleConfig::Kind::Cosine: sch["kind"] = "cosine"; break;
        case ScheduleConfig::Kind::Multistep:
            sch["kind"] = "multistep";
            sch["milestones"] = schedule.milestones;
            sch["factor"] = schedule.factor;
            break;
    }
    j["schedule"] = sch;

    j["rounds"] = rounds;
    j["seeds"] = {{"data", seeds.data}, {"init", seeds.init}, {"sampling", seeds.sampling}};
    j["metrics"] = {{"xi", metrics.xi},
                    {"client_drift", metrics.client_drift},
                    {"cka", metrics.cka},
                    {"cka_probe_count", metrics.cka_probe_count},
                    {"conformal_kappas", metrics.conformal_kappas},
                    {"conformal_force_argmax", metrics.conformal_force_argmax}};
    if (target_accuracy) j["target_accuracy"] = *target_accuracy;
    if (allow_global_lr_below_one) j["allow_global_lr_below_one"] = true;
    j["worker_threads"] = worker_threads;
    return j;
}

}  // namespace fedpvr
