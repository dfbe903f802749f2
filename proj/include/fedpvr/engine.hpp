#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fedpvr/metrics.hpp"
#include "fedpvr/objectives.hpp"
#include "fedpvr/param_vector.hpp"
#include "fedpvr/rng.hpp"

namespace fedpvr {

enum class StrategyKind { FedAvg, FedProx, Scaffold, FedPvr };

const char* strategy_kind_name(StrategyKind kind);

/// A strategy is the FedPVR update with a particular mask: FedAvg is the
/// all-zero mask, SCAFFOLD the all-one mask, FedProx the all-zero mask plus a
/// proximal pull toward the broadcast model.
struct Strategy {
    StrategyKind kind = StrategyKind::FedAvg;
    Mask mask;  // consulted for FedPvr only
    double local_lr = 0.1;
    double global_lr = 1.0;
    std::size_t local_steps = 1;   // used when local_epochs == 0
    std::size_t local_epochs = 0;  // when > 0: K = epochs * ceil(shard / batch)
    std::size_t batch_size = 1;
    double momentum_nonvr = 0.0;  // heavy-ball factor on the non-reduced block
    double prox_mu = 0.0;         // FedProx proximal coefficient

    Mask effective_mask(std::size_t dim) const;
    std::size_t steps_for_shard(std::size_t shard_size) const;
};

struct ClientState {
    std::size_t id = 0;
    ParamVector control_variate;  // c_i; support within the mask, starts at 0
};

struct ServerState {
    ParamVector model;            // x
    ParamVector control_variate;  // c = mean of c_i, support within the mask
    std::size_t round = 0;        // completed rounds
};

struct ClientUpdateStats {
    double mean_minibatch_loss = 0.0;
    double sum_sq_displacement = 0.0;  // sum_k ||y_k - x||^2
    std::size_t steps = 0;
    // Populated on request only.
    std::vector<ParamVector> step_gradients;  // effective gradient per step
    std::vector<ParamVector> trajectory;      // y_{i,k} per step
};

struct ClientUpdateResult {
    ParamVector model;             // y_{i,K}
    ParamVector control_variate;   // updated c_i
    ClientUpdateStats stats;
};

struct RecordingOptions {
    bool step_gradients = false;
    bool trajectory = false;
};

/// One client's K local steps from the broadcast model x with server variate
/// c. Per step the minibatch gradient g is corrected by (c - c_i) on the
/// masked block; the unmasked block takes plain (optionally heavy-ball) SGD.
/// FedProx adds prox_mu * (y - x) to g first. Afterwards
/// c_i <- c_i - c + (x - y) restricted to the mask and scaled by 1/(K * lr).
/// lr == 0 (a cosine schedule's final round) is a no-op: the model and the
/// variate come back unchanged. Throws DivergenceError when an iterate goes
/// non-finite.
ClientUpdateResult client_local_update(const ParamVector& x, const ParamVector& c,
                                       const ClientState& state,
                                       const Objective& objective,
                                       const Strategy& strategy, double lr,
                                       RngStream& rng,
                                       const RecordingOptions& rec = {},
                                       std::size_t round_for_errors = 0);

/// x <- x + (eta_g / N) * sum(y_i - x), c <- mean(c_i); sums run in ascending
/// client order with pairwise combination. Requires one result per client
/// (full participation).
void server_aggregate(ServerState& server, std::span<const ClientUpdateResult> results,
                      std::size_t expected_clients, double global_lr);

/// Pairwise (tree) sum of equal-length vectors, index order preserved.
ParamVector pairwise_sum(std::span<const ParamVector> vectors);

struct CommCost {
    std::size_t down = 0;  // parameters server -> client, per client per round
    std::size_t up = 0;    // parameters client -> server
};

/// FedAvg/FedProx move d each way; SCAFFOLD 2d each way; FedPVR d + v.
CommCost comm_cost(const Strategy& strategy, std::size_t dim, std::size_t mask_ones);

/// (down + up) / d, the "copies of the model per round" figure.
double comm_ratio(const CommCost& cost, std::size_t dim);

struct EvalResult {
    double loss = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
};
using Evaluator = std::function<EvalResult(const ParamVector&)>;

struct RoundRecord {
    std::size_t round = 0;  // 1-based
    double local_lr = 0.0;
    double train_loss = 0.0;
    double test_loss = std::numeric_limits<double>::quiet_NaN();
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    XiValue xi_global;
    std::vector<std::pair<std::string, XiValue>> xi_per_layer;
    double client_drift = std::numeric_limits<double>::quiet_NaN();
    std::size_t params_down_per_client = 0;
    std::size_t params_up_per_client = 0;
    // Not persisted: written logs stay byte-reproducible.
    double wall_seconds = 0.0;
    std::vector<ParamVector> client_deltas;  // kept when requested
};

struct EngineOptions {
    std::uint64_t sampling_seed = 0;
    bool compute_xi = true;
    bool compute_client_drift = true;
    bool keep_client_deltas = false;
    RecordingOptions recording;
    std::size_t worker_threads = 1;
};

/// Synchronous round loop over a fixed client population. Client streams are
/// keyed by (sampling_seed, client, round) so results do not depend on the
/// execution schedule.
class FederatedEngine {
public:
    FederatedEngine(std::vector<std::shared_ptr<const Objective>> objectives,
                    ParamVector init_model, Strategy strategy,
                    EngineOptions options = {}, Evaluator evaluator = {});

    RoundRecord run_round(std::optional<double> lr_override = std::nullopt);

    const ServerState& server() const { return server_; }
    const std::vector<ClientState>& clients() const { return clients_; }
    const Strategy& strategy() const { return strategy_; }
    const LayerLayout& layout() const { return objectives_.front()->layout(); }
    std::size_t client_count() const { return objectives_.size(); }
    const Mask& mask() const { return mask_; }
    /// Full client results of the most recent round.
    const std::vector<ClientUpdateResult>& last_results() const { return last_results_; }

private:
    std::vector<std::shared_ptr<const Objective>> objectives_;
    Strategy strategy_;
    Mask mask_;
    EngineOptions options_;
    Evaluator evaluator_;
    ServerState server_;
    std::vector<ClientState> clients_;
    std::vector<ClientUpdateResult> last_results_;
};

}  // namespace fedpvr
