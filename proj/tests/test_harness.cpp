#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedpvr/harness.hpp"
#include "oracles.hpp"

using namespace fedpvr;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_mlp_config() {
    ExperimentConfig cfg;
    cfg.dataset.synthetic.num_classes = 3;
    cfg.dataset.synthetic.dims = 4;
    cfg.dataset.synthetic.count = 300;
    cfg.dataset.synthetic.noise = 0.5;
    cfg.split.validation_fraction = 0.0;
    cfg.split.calibration_count = 40;
    cfg.split.test_count = 60;
    cfg.clients = 3;
    cfg.alpha = 0.5;
    cfg.model.hidden = {8};
    cfg.strategy.kind = StrategyKind::FedPvr;
    cfg.strategy.mask_cutoff = 1;
    cfg.strategy.local_lr = 0.1;
    cfg.strategy.local_steps = 4;
    cfg.strategy.batch_size = 8;
    cfg.rounds = 4;
    cfg.target_accuracy = 0.5;
    return cfg;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("learning-rate schedules") {
    ScheduleConfig constant;
    CHECK(schedule_lr(constant, 0.3, 17, 100) == 0.3);

    ScheduleConfig cosine;
    cosine.kind = ScheduleConfig::Kind::Cosine;
    CHECK(schedule_lr(cosine, 0.2, 0, 80) == doctest::Approx(0.2));
    CHECK(schedule_lr(cosine, 0.2, 80, 80) == doctest::Approx(0.0));  // (1+cos(pi))/2
    CHECK(schedule_lr(cosine, 0.2, 40, 80) == doctest::Approx(0.1));

    ScheduleConfig multistep;
    multistep.kind = ScheduleConfig::Kind::Multistep;
    multistep.milestones = {40, 60};
    multistep.factor = 0.1;
    CHECK(schedule_lr(multistep, 0.5, 10, 100) == doctest::Approx(0.5));
    CHECK(schedule_lr(multistep, 0.5, 50, 100) == doctest::Approx(0.05));
    CHECK(schedule_lr(multistep, 0.5, 70, 100) == doctest::Approx(0.005));
}

TEST_CASE("config parsing") {
    SUBCASE("serialize-parse-serialize is a fixed point") {
        const ExperimentConfig cfg = tiny_mlp_config();
        const auto j1 = cfg.to_json();
        const ExperimentConfig back = ExperimentConfig::from_json(j1);
        CHECK(back.to_json() == j1);
        CHECK(back.to_json().dump() == j1.dump());
    }
    SUBCASE("unknown keys are named in the error") {
        auto j = tiny_mlp_config().to_json();
        j["straetgy_typo"] = 1;
        j["strategy"]["lcoal_lr"] = 0.5;
        try {
            ExperimentConfig::from_json(j);
            FAIL("expected validation error");
        } catch (const ValidationError& e) {
            REQUIRE(e.violations.size() == 2);
            CHECK(std::string(e.what()).find("straetgy_typo") != std::string::npos);
            CHECK(std::string(e.what()).find("lcoal_lr") != std::string::npos);
        }
    }
    SUBCASE("every violation is collected, not just the first") {
        auto j = tiny_mlp_config().to_json();
        j["rounds"] = 0;
        j["clients"] = 0;
        j["strategy"]["local_lr"] = -1.0;
        try {
            ExperimentConfig::from_json(j);
            FAIL("expected validation error");
        } catch (const ValidationError& e) {
            CHECK(e.violations.size() == 3);
        }
    }
    SUBCASE("cross-field rules") {
        auto j = tiny_mlp_config().to_json();
        j["model"] = {{"type", "quadratic"}};
        // quadratic forbids dataset & target_accuracy, conformal and cka
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), ValidationError);

        auto k = tiny_mlp_config().to_json();
        k["strategy"]["kind"] = "fedavg";  // mask_cutoff still present
        CHECK_THROWS_AS(ExperimentConfig::from_json(k), ValidationError);

        auto g = tiny_mlp_config().to_json();
        g["strategy"]["global_lr"] = 0.5;  // needs the explicit override
        CHECK_THROWS_AS(ExperimentConfig::from_json(g), ValidationError);
        g["allow_global_lr_below_one"] = true;
        CHECK_NOTHROW(ExperimentConfig::from_json(g));
    }
}

TEST_CASE("runs are byte-identical given the same config") {
    const ExperimentConfig cfg = tiny_mlp_config();
    const RunLog log1 = run_experiment(cfg);
    const RunLog log2 = run_experiment(cfg);

    TempDir dir1("fedpvr_det_a"), dir2("fedpvr_det_b");
    write_run_log(log1, dir1.path.string());
    write_run_log(log2, dir2.path.string());

    for (const char* rel : {"run_log.jsonl", "manifest.json", "metrics/accuracy.csv",
                            "metrics/xi.csv", "metrics/comm.csv", "metrics/drift.csv"})
        CHECK(slurp(dir1.path / rel) == slurp(dir2.path / rel));
}

TEST_CASE("experiment trains and reports") {
    ExperimentConfig cfg = tiny_mlp_config();
    cfg.rounds = 12;
    cfg.metrics.conformal_kappas = {0.1, 0.3};
    cfg.metrics.cka = true;
    cfg.metrics.cka_probe_count = 40;
    const RunLog log = run_experiment(cfg);

    REQUIRE(log.rounds.size() == 12);
    CHECK(log.rounds.back().test_accuracy > log.rounds.front().test_accuracy - 0.05);
    CHECK(log.summary.model_dim == 8 * 4 + 8 + 3 * 8 + 3);
    CHECK(log.summary.mask_ones == 3 * 8 + 3);

    REQUIRE(log.conformal.size() == 2);
    CHECK(log.conformal[0].avg_set_size >= log.conformal[1].avg_set_size);

    REQUIRE(log.cka.layer_names.size() == 2);
    CHECK(log.cka.matrices[0].at(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("quadratic preset closes its optimality gap") {
    ExperimentConfig cfg;
    cfg.has_dataset = false;
    cfg.model.kind = ModelConfig::Kind::Quadratic;
    cfg.model.quadratic.feat_dim = 6;
    cfg.model.quadratic.clf_dim = 2;
    cfg.model.quadratic.spread = 2.0;
    cfg.clients = 4;
    cfg.strategy.kind = StrategyKind::FedPvr;
    cfg.strategy.mask_cutoff = 1;
    cfg.strategy.local_lr = 0.02;
    cfg.strategy.local_steps = 5;
    cfg.rounds = 150;
    const RunLog log = run_experiment(cfg);
    CHECK(log.rounds.front().test_loss > 1e-6);
    CHECK(log.rounds.back().test_loss < 1e-9);  // optimality gap
}

TEST_CASE("sweep covers the two baseline masks") {
    ExperimentConfig base = tiny_mlp_config();
    base.rounds = 3;
    std::vector<RunLog> logs;
    const auto rows = sweep_mask_cutoff(base, {0, 1, 2}, &logs);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].mask_ones == base.to_json()["model"]["hidden"][0].get<std::size_t>() * 4 +
                                   8 + 3 * 8 + 3);  // full model
    CHECK(rows[2].mask_ones == 0);
    CHECK(rows[0].comm_ratio_per_round == doctest::Approx(4.0));
    CHECK(rows[2].comm_ratio_per_round == doctest::Approx(2.0));

    // cutoff 0 must match a SCAFFOLD run, cutoff L a FedAvg run, round by round
    ExperimentConfig scaffold = base;
    scaffold.strategy.kind = StrategyKind::Scaffold;
    scaffold.strategy.mask_cutoff = 0;
    const RunLog scaffold_log = run_experiment(scaffold);
    ExperimentConfig fedavg = base;
    fedavg.strategy.kind = StrategyKind::FedAvg;
    fedavg.strategy.mask_cutoff = 0;
    const RunLog fedavg_log = run_experiment(fedavg);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(logs[0].rounds[r].test_loss == scaffold_log.rounds[r].test_loss);
        CHECK(logs[2].rounds[r].test_loss == fedavg_log.rounds[r].test_loss);
    }
}

TEST_CASE("masking the heterogeneous block beats FedAvg's reachable floor") {
    // On the quadratic preset the variance-reduced run must pass an error
    // level FedAvg can never reach: its round map converges to a biased fixed
    // point whose optimality gap stays above the threshold.
    ExperimentConfig cfg;
    cfg.has_dataset = false;
    cfg.model.kind = ModelConfig::Kind::Quadratic;
    cfg.model.quadratic.feat_dim = 6;
    cfg.model.quadratic.clf_dim = 2;
    cfg.model.quadratic.spread = 3.0;
    cfg.model.quadratic.clf_curv_jitter = 0.6;
    cfg.clients = 5;
    cfg.seeds.data = 77;
    cfg.strategy.kind = StrategyKind::FedPvr;
    cfg.strategy.mask_cutoff = 1;
    cfg.strategy.local_lr = 0.02;
    cfg.strategy.local_steps = 5;
    cfg.rounds = 200;

    std::vector<RunLog> logs;
    sweep_mask_cutoff(cfg, {1, 2}, &logs);  // classifier mask vs empty mask

    std::size_t pvr_reaches = 0;
    for (std::size_t r = 0; r < logs[0].rounds.size(); ++r)
        if (logs[0].rounds[r].test_loss < 1e-6) {
            pvr_reaches = r + 1;
            break;
        }
    CHECK(pvr_reaches > 0);

    double fedavg_floor = 1e300;
    for (const auto& round : logs[1].rounds)
        fedavg_floor = std::min(fedavg_floor, round.test_loss);
    CHECK(fedavg_floor > 1e-6);

    // Oracle: the biased fixed point of FedAvg's affine round map keeps a gap
    // above the threshold, so longer FedAvg runs cannot catch up either.
    HeteroQuadraticSpec spec = cfg.model.quadratic;
    spec.n_clients = cfg.clients;
    spec.seed = cfg.seeds.data;
    const auto ens = make_hetero_quadratic_ensemble(spec);
    std::vector<Matrix> a_list;
    std::vector<std::vector<double>> b_list;
    for (const auto& q : ens) {
        a_list.push_back(oracles::diag_matrix(q.diag()));
        b_list.push_back(q.linear_term());
    }
    const ParamVector fp = oracles::fedavg_fixed_point(a_list, b_list, 0.02, 5, 1.0);
    const ParamVector star = optimum(ens);
    double gap_at_fp = 0.0, gap_at_star = 0.0;
    for (const auto& q : ens) {
        gap_at_fp += q.loss(fp) / double(ens.size());
        gap_at_star += q.loss(star) / double(ens.size());
    }
    CHECK(gap_at_fp - gap_at_star > 1e-6);
}

TEST_CASE("strategy comparison") {
    ExperimentConfig base = tiny_mlp_config();
    base.rounds = 3;
    base.target_accuracy = 0.2;

    ExperimentConfig fedavg = base;
    fedavg.strategy.kind = StrategyKind::FedAvg;
    fedavg.strategy.mask_cutoff = 0;

    SUBCASE("valid comparison tabulates speedups") {
        const auto rows = compare_strategies({fedavg, base});
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].name == "fedavg");
        CHECK(rows[1].name == "fedpvr(cutoff=1)");
        if (rows[0].rounds_to_target && rows[1].rounds_to_target)
            CHECK(rows[0].speedup_vs_fedavg == doctest::Approx(1.0));
    }
    SUBCASE("mismatched data seeds are rejected") {
        ExperimentConfig other = base;
        other.seeds.data = 999;
        CHECK_THROWS_WITH_AS(compare_strategies({fedavg, other}),
                             doctest::Contains("data seed"), Error);
    }
    SUBCASE("mismatched data shape is rejected") {
        ExperimentConfig other = base;
        other.dataset.synthetic.count = 400;
        CHECK_THROWS_WITH_AS(compare_strategies({fedavg, other}),
                             doctest::Contains("comparison invalid"), Error);
    }
}

TEST_CASE("written artifacts exist and carry versioned headers") {
    ExperimentConfig cfg = tiny_mlp_config();
    cfg.metrics.conformal_kappas = {0.1};
    const RunLog log = run_experiment(cfg);
    TempDir dir("fedpvr_artifacts");
    write_run_log(log, dir.path.string());

    for (const char* rel :
         {"run_log.jsonl", "manifest.json", "metrics/accuracy.csv", "metrics/xi.csv",
          "metrics/comm.csv", "metrics/drift.csv", "metrics/conformal.csv"})
        CHECK(fs::exists(dir.path / rel));

    const std::string acc = slurp(dir.path / "metrics/accuracy.csv");
    CHECK(acc.rfind("# fedpvr-metrics-v1\nround,", 0) == 0);

    // manifest reproduces the partition: shard lists are present and disjoint
    const std::string manifest = slurp(dir.path / "manifest.json");
    CHECK(manifest.find("\"shards\"") != std::string::npos);
}
