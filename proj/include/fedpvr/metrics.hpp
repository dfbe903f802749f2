#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedpvr/common.hpp"
#include "fedpvr/param_vector.hpp"

namespace fedpvr {

/// Drift-diversity value. Cancellation of the aggregated update yields an
/// infinite value; all-zero updates are a distinct degenerate case.
struct XiValue {
    double value = 0.0;
    bool degenerate = false;

    bool is_infinite() const;
    bool is_finite() const { return !degenerate && !is_infinite(); }
    std::string to_string() const;  // "inf" / "degenerate" / decimal
};

struct DiversityReport {
    XiValue global;
    std::vector<std::pair<std::string, XiValue>> per_layer;
};

/// xi = sum_i ||m_i||^2 / ||sum_i m_i||^2 over client deltas, globally and per
/// layer slice. An optional mask restricts the deltas elementwise first.
/// Values below 1/N cannot occur; the aggregated norm vanishing (relative to
/// 1e-24 of the energy) gives the infinite sentinel.
DiversityReport drift_diversity(std::span<const ParamVector> deltas,
                                const LayerLayout& layout,
                                const Mask* restriction = nullptr);

/// Just the ratio for one set of vectors (no layout bookkeeping).
XiValue xi_ratio(std::span<const ParamVector> deltas);

/// Mean squared displacement of client iterates from the round's starting
/// point: (1/NK) sum_i sum_k ||y_{i,k} - x_prev||^2.
double client_drift(const std::vector<std::vector<ParamVector>>& trajectories,
                    const ParamVector& x_prev);

/// Linear centered kernel alignment between two feature matrices on a shared
/// probe set (rows = examples). Columns are centered internally. 1 for equal
/// (or orthogonally transformed / isotropically scaled) features.
double cka_linear(const Matrix& features_a, const Matrix& features_b);

/// Symmetric client-by-client CKA matrix per probed layer.
struct CkaReport {
    std::vector<std::string> layer_names;
    std::vector<Matrix> matrices;  // one N x N matrix per layer
};
CkaReport cka_between_clients(const std::vector<std::vector<Matrix>>& client_layer_features,
                              const std::vector<std::string>& layer_names);

/// First round (1-based) whose test accuracy reaches the target.
std::optional<std::size_t> rounds_to_target(std::span<const double> accuracy_by_round,
                                            double target_accuracy);

double speedup(std::size_t baseline_rounds, std::size_t method_rounds);

}  // namespace fedpvr
