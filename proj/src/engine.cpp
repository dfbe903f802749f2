#include "fedpvr/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "fedpvr/kernels.hpp"

namespace fedpvr {

const char* strategy_kind_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::FedAvg: return "fedavg";
        case StrategyKind::FedProx: return "fedprox";
        case StrategyKind::Scaffold: return "scaffold";
        case StrategyKind::FedPvr: return "fedpvr";
    }
    return "?";
}

Mask Strategy::effective_mask(std::size_t dim) const {
    switch (kind) {
        case StrategyKind::FedAvg:
        case StrategyKind::FedProx:
            return Mask::zeros(dim);
        case StrategyKind::Scaffold:
            return Mask::ones(dim);
        case StrategyKind::FedPvr:
            check_same_dim(mask.dim(), dim, "Strategy::effective_mask");
            return mask;
    }
    throw Error("Strategy: unknown kind");
}

std::size_t Strategy::steps_for_shard(std::size_t shard_size) const {
    if (local_epochs == 0) return local_steps;
    const std::size_t batch = std::max<std::size_t>(1, std::min(batch_size, shard_size));
    const std::size_t batches_per_epoch = (shard_size + batch - 1) / batch;
    return local_epochs * std::max<std::size_t>(1, batches_per_epoch);
}

ClientUpdateResult client_local_update(const ParamVector& x, const ParamVector& c,
                                       const ClientState& state,
                                       const Objective& objective,
                                       const Strategy& strategy, double lr,
                                       RngStream& rng, const RecordingOptions& rec,
                                       std::size_t round_for_errors) {
    const std::size_t d = x.dim();
    check_same_dim(d, objective.dim(), "client_local_update");
    check_same_dim(d, c.dim(), "client_local_update");
    check_same_dim(d, state.control_variate.dim(), "client_local_update");
    if (lr < 0.0) throw Error("client_local_update: negative learning rate");
    if (lr == 0.0) {
        // Schedules may hit an exact zero; nothing moves and no gradient
        // information is gathered, so the variate stays as it was.
        ClientUpdateResult noop;
        noop.model = x;
        noop.control_variate = state.control_variate;
        noop.stats.steps = strategy.steps_for_shard(objective.shard_size());
        noop.stats.mean_minibatch_loss = std::numeric_limits<double>::quiet_NaN();
        return noop;
    }

    const Mask mask = strategy.effective_mask(d);
    const std::size_t shard = objective.shard_size();
    const std::size_t batch = std::max<std::size_t>(1, std::min(strategy.batch_size, shard));
    const std::size_t steps = strategy.steps_for_shard(shard);
    if (steps == 0) throw Error("client_local_update: need at least one local step");

    const ParamVector& ci = state.control_variate;
    const bool use_momentum = strategy.momentum_nonvr > 0.0 && mask.ones_count() < d;
    const Mask unreduced = use_momentum ? mask.complement() : Mask();

    ClientUpdateResult result;
    result.model = x;
    ParamVector& y = result.model;
    ParamVector momentum_buf(use_momentum ? d : 0);
    ParamVector step_vec(use_momentum ? d : 0);

    const auto& ops = kernels::active();
    double loss_total = 0.0;

    for (std::size_t k = 1; k <= steps; ++k) {
        GradientSample sample = objective.stochastic_gradient(y, batch, rng);
        ParamVector& g = sample.gradient;
        if (strategy.prox_mu > 0.0) {
            // g += prox_mu * (y - x)
            ops.axpy(strategy.prox_mu, y.data(), g.data(), d);
            ops.axpy(-strategy.prox_mu, x.data(), g.data(), d);
        }
        loss_total += sample.loss;

        if (use_momentum) {
            // Heavy-ball on the unreduced block, variance-reduced step on the
            // masked block, combined elementwise.
            ParamVector masked_g = masked(g, unreduced);
            momentum_buf.scale_add(strategy.momentum_nonvr, 1.0, masked_g);
            // step = (g - ci + c) on the mask, momentum elsewhere
            ParamVector corrected = g;
            ops.axpy(-1.0, ci.data(), corrected.data(), d);
            ops.axpy(1.0, c.data(), corrected.data(), d);
            ops.blend(mask.bits(), corrected.data(), momentum_buf.data(),
                      step_vec.data(), d);
            ops.axpy(-lr, step_vec.data(), y.data(), d);
        } else {
            // ci and c vanish off the mask, so one fused update covers both
            // blocks.
            ops.step_vr(lr, g.data(), ci.data(), c.data(), y.data(), d);
        }

        if (!y.all_finite())
            throw DivergenceError(round_for_errors, state.id, k,
                                  "client " + std::to_string(state.id) +
                                      " diverged at round " +
                                      std::to_string(round_for_errors) + ", step " +
                                      std::to_string(k));

        result.stats.sum_sq_displacement += norm_sq(subtract(y, x));
        if (rec.step_gradients) result.stats.step_gradients.push_back(g);
        if (rec.trajectory) result.stats.trajectory.push_back(y);
    }

    result.stats.steps = steps;
    result.stats.mean_minibatch_loss = loss_total / static_cast<double>(steps);

    // c_i <- c_i - c + (1 / (K * lr)) * mask(x - y)
    ParamVector variate = masked(subtract(x, y), mask);
    variate.scale(1.0 / (static_cast<double>(steps) * lr));
    variate.add_scaled(1.0, ci);
    variate.add_scaled(-1.0, c);
    // Keep the variate's support inside the mask: c_i and c both live there,
    // so off-mask coordinates are exact zeros minus exact zeros.
    result.control_variate = masked(variate, mask);
    return result;
}

ParamVector pairwise_sum(std::span<const ParamVector> vectors) {
    if (vectors.empty()) throw Error("pairwise_sum: empty input");
    std::function<ParamVector(std::size_t, std::size_t)> rec =
        [&](std::size_t lo, std::size_t hi) -> ParamVector {
        if (hi - lo == 1) return vectors[lo];
        const std::size_t mid = lo + (hi - lo) / 2;
        return add(rec(lo, mid), rec(mid, hi));
    };
    return rec(0, vectors.size());
}

void server_aggregate(ServerState& server, std::span<const ClientUpdateResult> results,
                      std::size_t expected_clients, double global_lr) {
    if (results.size() != expected_clients)
        throw Error("server_aggregate: got " + std::to_string(results.size()) +
                    " client results, expected " + std::to_string(expected_clients) +
                    " (full participation required)");
    const std::size_t n = results.size();
    const std::size_t d = server.model.dim();

    std::vector<ParamVector> deltas;
    std::vector<ParamVector> variates;
    deltas.reserve(n);
    variates.reserve(n);
    for (const auto& r : results) {
        check_same_dim(r.model.dim(), d, "server_aggregate");
        deltas.push_back(subtract(r.model, server.model));
        variates.push_back(r.control_variate);
    }

    ParamVector delta_sum = pairwise_sum(deltas);
    server.model.add_scaled(global_lr / static_cast<double>(n), delta_sum);

    ParamVector variate_sum = pairwise_sum(variates);
    variate_sum.scale(1.0 / static_cast<double>(n));
    server.control_variate = std::move(variate_sum);

    server.round += 1;
}

CommCost comm_cost(const Strategy& strategy, std::size_t dim, std::size_t mask_ones) {
    switch (strategy.kind) {
        case StrategyKind::FedAvg:
        case StrategyKind::FedProx:
            return {dim, dim};
        case StrategyKind::Scaffold:
            return {2 * dim, 2 * dim};
        case StrategyKind::FedPvr:
            return {dim + mask_ones, dim + mask_ones};
    }
    throw Error("comm_cost: unknown strategy kind");
}

double comm_ratio(const CommCost& cost, std::size_t dim) {
    if (dim == 0) throw Error("comm_ratio: zero dimension");
    return static_cast<double>(cost.down + cost.up) / static_cast<double>(dim);
}

FederatedEngine::FederatedEngine(std::vector<std::shared_ptr<const Objective>> objectives,
                                 ParamVector init_model, Strategy strategy,
                                 EngineOptions options, Evaluator evaluator)
    : objectives_(std::move(objectives)),
      strategy_(std::move(strategy)),
      options_(std::move(options)),
      evaluator_(std::move(evaluator)) {
    if (objectives_.empty()) throw Error("FederatedEngine: no clients");
    const std::size_t d = objectives_.front()->dim();
    for (const auto& obj : objectives_) {
        if (!obj) throw Error("FederatedEngine: null objective");
        check_same_dim(obj->dim(), d, "FederatedEngine");
    }
    check_same_dim(init_model.dim(), d, "FederatedEngine");
    if (!init_model.all_finite()) throw Error("FederatedEngine: non-finite init model");
    if (!(strategy_.local_lr > 0.0)) throw Error("FederatedEngine: local_lr must be > 0");
    if (!(strategy_.global_lr > 0.0)) throw Error("FederatedEngine: global_lr must be > 0");
    if (strategy_.momentum_nonvr < 0.0 || strategy_.momentum_nonvr >= 1.0)
        throw Error("FederatedEngine: momentum must be in [0, 1)");
    if (strategy_.prox_mu < 0.0) throw Error("FederatedEngine: prox_mu must be >= 0");

    mask_ = strategy_.effective_mask(d);
    server_.model = std::move(init_model);
    server_.control_variate = ParamVector(d);
    clients_.resize(objectives_.size());
    for (std::size_t i = 0; i < clients_.size(); ++i) {
        clients_[i].id = i;
        clients_[i].control_variate = ParamVector(d);
    }
}

RoundRecord FederatedEngine::run_round(std::optional<double> lr_override) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_override ? *lr_override : strategy_.local_lr;
    const std::size_t n = objectives_.size();
    const std::size_t round_index = server_.round + 1;
    const ParamVector x_prev = server_.model;

    auto run_client = [&](std::size_t i) {
        RngStream rng = RngStream::keyed(options_.sampling_seed, i, round_index);
        return client_local_update(x_prev, server_.control_variate, clients_[i],
                                   *objectives_[i], strategy_, lr, rng,
                                   options_.recording, round_index);
    };

    std::vector<ClientUpdateResult> results(n);
    if (options_.worker_threads > 1 && n > 1) {
        std::vector<std::future<ClientUpdateResult>> futures(n);
        for (std::size_t i = 0; i < n; ++i)
            futures[i] = std::async(std::launch::async | std::launch::deferred,
                                    run_client, i);
        for (std::size_t i = 0; i < n; ++i) results[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < n; ++i) results[i] = run_client(i);
    }

    server_aggregate(server_, results, n, strategy_.global_lr);
    for (std::size_t i = 0; i < n; ++i)
        clients_[i].control_variate = results[i].control_variate;

    RoundRecord record;
    record.round = round_index;
    record.local_lr = lr;
    double loss = 0.0;
    for (const auto& r : results) loss += r.stats.mean_minibatch_loss;
    record.train_loss = loss / static_cast<double>(n);

    const auto comm = comm_cost(strategy_, x_prev.dim(), mask_.ones_count());
    record.params_down_per_client = comm.down;
    record.params_up_per_client = comm.up;

    std::vector<ParamVector> deltas;
    deltas.reserve(n);
    for (const auto& r : results) deltas.push_back(subtract(r.model, x_prev));

    if (options_.compute_xi) {
        auto report = drift_diversity(deltas, layout());
        record.xi_global = report.global;
        record.xi_per_layer = std::move(report.per_layer);
    }
    if (options_.compute_client_drift) {
        double drift = 0.0;
        for (const auto& r : results)
            drift += r.stats.sum_sq_displacement / static_cast<double>(r.stats.steps);
        record.client_drift = drift / static_cast<double>(n);
    }
    if (evaluator_) {
        const EvalResult eval = evaluator_(server_.model);
        record.test_loss = eval.loss;
        record.test_accuracy = eval.accuracy;
    }
    if (options_.keep_client_deltas) record.client_deltas = std::move(deltas);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();

    last_results_ = std::move(results);
    return record;
}

}  // namespace fedpvr
