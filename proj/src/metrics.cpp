#include "fedpvr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace fedpvr {

bool XiValue::is_infinite() const { return !degenerate && std::isinf(value); }

std::string XiValue::to_string() const {
    if (degenerate) return "degenerate";
    if (std::isinf(value)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

XiValue xi_ratio(std::span<const ParamVector> deltas) {
    double energy = 0.0;
    for (const auto& m : deltas) energy += norm_sq(m);
    if (energy == 0.0) return {0.0, true};

    ParamVector total(deltas.front().dim());
    for (const auto& m : deltas) total.add_scaled(1.0, m);
    const double agg = norm_sq(total);
    if (agg < 1e-24 * energy)
        return {std::numeric_limits<double>::infinity(), false};
    return {energy / agg, false};
}

DiversityReport drift_diversity(std::span<const ParamVector> deltas,
                                const LayerLayout& layout,
                                const Mask* restriction) {
    if (deltas.empty()) throw Error("drift_diversity: no client deltas");
    for (const auto& m : deltas)
        check_same_dim(m.dim(), layout.total_dim(), "drift_diversity");

    std::vector<ParamVector> work;
    if (restriction) {
        check_same_dim(restriction->dim(), layout.total_dim(), "drift_diversity");
        work.reserve(deltas.size());
        for (const auto& m : deltas) work.push_back(masked(m, *restriction));
    } else {
        work.assign(deltas.begin(), deltas.end());
    }

    DiversityReport report;
    report.global = xi_ratio(work);
    report.per_layer.reserve(layout.layer_count());
    std::vector<ParamVector> slices(work.size());
    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        for (std::size_t i = 0; i < work.size(); ++i)
            slices[i] = layer_slice(work[i], layout, l);
        report.per_layer.emplace_back(layout.layer(l).name, xi_ratio(slices));
    }
    return report;
}

double client_drift(const std::vector<std::vector<ParamVector>>& trajectories,
                    const ParamVector& x_prev) {
    if (trajectories.empty()) return 0.0;
    double total = 0.0;
    std::size_t steps = 0;
    for (const auto& traj : trajectories) {
        for (const auto& y : traj) {
            total += norm_sq(subtract(y, x_prev));
            ++steps;
        }
    }
    return steps == 0 ? 0.0 : total / static_cast<double>(steps);
}

namespace {

// Column-center in place; returns the largest column variance seen.
double center_columns(Matrix& m) {
    double max_var = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
        mean /= static_cast<double>(m.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            m.at(r, c) -= mean;
            var += m.at(r, c) * m.at(r, c);
        }
        max_var = std::max(max_var, var);
    }
    return max_var;
}

// ||B'A||_F^2 for centered matrices sharing row count.
double cross_frob_sq(const Matrix& a, const Matrix& b) {
    double total = 0.0;
    for (std::size_t i = 0; i < b.cols; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows; ++r) s += b.at(r, i) * a.at(r, j);
            total += s * s;
        }
    return total;
}

}  // namespace

double cka_linear(const Matrix& features_a, const Matrix& features_b) {
    if (features_a.rows != features_b.rows)
        throw Error("cka_linear: feature matrices must share the probe set");
    if (features_a.rows < 2) throw Error("cka_linear: need at least 2 examples");

    Matrix a = features_a;
    Matrix b = features_b;
    const double var_a = center_columns(a);
    const double var_b = center_columns(b);
    if (var_a <= 0.0 || var_b <= 0.0)
        throw Error("cka_linear: zero-variance features");

    const double cross = cross_frob_sq(a, b);
    const double self_a = std::sqrt(cross_frob_sq(a, a));
    const double self_b = std::sqrt(cross_frob_sq(b, b));
    if (self_a == 0.0 || self_b == 0.0)
        throw Error("cka_linear: zero-variance features");
    return cross / (self_a * self_b);
}

CkaReport cka_between_clients(
    const std::vector<std::vector<Matrix>>& client_layer_features,
    const std::vector<std::string>& layer_names) {
    const std::size_t n_clients = client_layer_features.size();
    if (n_clients == 0) throw Error("cka_between_clients: no clients");
    const std::size_t n_layers = layer_names.size();

    CkaReport report;
    report.layer_names = layer_names;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix sim(n_clients, n_clients);
        for (std::size_t i = 0; i < n_clients; ++i) {
            sim.at(i, i) = 1.0;
            for (std::size_t j = i + 1; j < n_clients; ++j) {
                const double v = cka_linear(client_layer_features[i][l],
                                            client_layer_features[j][l]);
                sim.at(i, j) = v;
                sim.at(j, i) = v;
            }
        }
        report.matrices.push_back(std::move(sim));
    }
    return report;
}

std::optional<std::size_t> rounds_to_target(std::span<const double> accuracy_by_round,
                                            double target_accuracy) {
    for (std::size_t i = 0; i < accuracy_by_round.size(); ++i)
        if (accuracy_by_round[i] >= target_accuracy) return i + 1;
    return std::nullopt;
}

double speedup(std::size_t baseline_rounds, std::size_t method_rounds) {
    if (method_rounds == 0) throw Error("speedup: method rounds must be positive");
    return static_cast<double>(baseline_rounds) / static_cast<double>(method_rounds);
}

}  // namespace fedpvr
