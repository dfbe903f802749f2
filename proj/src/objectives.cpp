#include "fedpvr/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "fedpvr/linalg.hpp"

namespace fedpvr {

namespace {

// log(1 + e^u) without overflow.
double softplus(double u) {
    if (u > 0.0) return u + std::log1p(std::exp(-u));
    return std::log1p(std::exp(u));
}

void check_param_dim(const Objective& obj, const ParamVector& x, const char* where) {
    check_same_dim(obj.layout().total_dim(), x.dim(), where);
}

}  // namespace

// --- QuadraticObjective ------------------------------------------------------

QuadraticObjective QuadraticObjective::diagonal(std::vector<double> diag,
                                                std::vector<double> b,
                                                LayerLayout layout) {
    if (diag.size() != b.size())
        throw Error("QuadraticObjective: diag/b dimension mismatch");
    QuadraticObjective obj;
    if (layout.total_dim() == 0) layout = LayerLayout::flat(diag.size());
    check_same_dim(layout.total_dim(), diag.size(), "QuadraticObjective");
    for (double v : diag)
        if (v < 0.0) throw Error("QuadraticObjective: negative curvature entry");
    obj.layout_ = std::move(layout);
    obj.diag_ = std::move(diag);
    obj.b_ = std::move(b);
    return obj;
}

QuadraticObjective QuadraticObjective::dense(Matrix a, std::vector<double> b,
                                             LayerLayout layout) {
    if (a.rows != a.cols) throw Error("QuadraticObjective: matrix not square");
    if (a.rows != b.size())
        throw Error("QuadraticObjective: matrix/b dimension mismatch");
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = i + 1; j < a.cols; ++j)
            if (std::abs(a.at(i, j) - a.at(j, i)) >
                1e-12 * std::max(1.0, std::abs(a.at(i, j))))
                throw Error("QuadraticObjective: matrix not symmetric");
    QuadraticObjective obj;
    if (layout.total_dim() == 0) layout = LayerLayout::flat(b.size());
    check_same_dim(layout.total_dim(), b.size(), "QuadraticObjective");
    obj.layout_ = std::move(layout);
    obj.dense_ = std::move(a);
    obj.b_ = std::move(b);
    return obj;
}

void QuadraticObjective::apply(const double* in, double* out) const {
    const std::size_t d = b_.size();
    if (is_diagonal()) {
        for (std::size_t i = 0; i < d; ++i) out[i] = diag_[i] * in[i];
        return;
    }
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        const double* row = dense_.data.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) s += row[j] * in[j];
        out[i] = s;
    }
}

double QuadraticObjective::loss(const ParamVector& x) const {
    check_param_dim(*this, x, "QuadraticObjective::loss");
    const std::size_t d = x.dim();
    std::vector<double> ax(d);
    apply(x.data(), ax.data());
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        quad += x[i] * ax[i];
        lin += b_[i] * x[i];
    }
    return 0.5 * quad - lin;
}

ParamVector QuadraticObjective::full_gradient(const ParamVector& x) const {
    check_param_dim(*this, x, "QuadraticObjective::full_gradient");
    ParamVector grad(x.dim());
    apply(x.data(), grad.data());
    for (std::size_t i = 0; i < x.dim(); ++i) grad[i] -= b_[i];
    return grad;
}

GradientSample QuadraticObjective::stochastic_gradient(const ParamVector& x,
                                                       std::size_t /*batch_size*/,
                                                       RngStream& rng) const {
    GradientSample out;
    out.gradient = full_gradient(x);
    out.loss = loss(x);
    if (noise_sigma_ > 0.0)
        for (std::size_t i = 0; i < out.gradient.dim(); ++i)
            out.gradient[i] += noise_sigma_ * rng.next_gaussian();
    return out;
}

// --- LogisticObjective -------------------------------------------------------

LogisticObjective::LogisticObjective(Matrix features, std::vector<int> labels,
                                     double lambda)
    : features_(std::move(features)), labels_(std::move(labels)), lambda_(lambda) {
    if (features_.rows == 0) throw Error("LogisticObjective: empty dataset");
    if (features_.rows != labels_.size())
        throw Error("LogisticObjective: features/labels size mismatch");
    if (lambda_ < 0.0) throw Error("LogisticObjective: lambda must be >= 0");
    if (!all_finite(features_.data))
        throw Error("LogisticObjective: non-finite feature");
    for (int y : labels_)
        if (y != 1 && y != -1) throw Error("LogisticObjective: labels must be +-1");
    layout_ = LayerLayout::flat(features_.cols, "weights");
}

double LogisticObjective::sample_margin(const ParamVector& x, std::size_t row) const {
    const auto z = features_.row(row);
    double t = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) t += x[j] * z[j];
    return t;
}

double LogisticObjective::loss(const ParamVector& x) const {
    check_param_dim(*this, x, "LogisticObjective::loss");
    double total = 0.0;
    for (std::size_t i = 0; i < features_.rows; ++i)
        total += softplus(-static_cast<double>(labels_[i]) * sample_margin(x, i));
    double reg = 0.0;
    for (std::size_t j = 0; j < x.dim(); ++j) reg += x[j] * x[j];
    return total / static_cast<double>(features_.rows) + 0.5 * lambda_ * reg;
}

ParamVector LogisticObjective::full_gradient(const ParamVector& x) const {
    check_param_dim(*this, x, "LogisticObjective::full_gradient");
    ParamVector grad(x.dim());
    const double inv_n = 1.0 / static_cast<double>(features_.rows);
    for (std::size_t i = 0; i < features_.rows; ++i) {
        const double y = static_cast<double>(labels_[i]);
        const double s = 1.0 / (1.0 + std::exp(y * sample_margin(x, i)));
        const double w = -y * s * inv_n;
        const auto z = features_.row(i);
        for (std::size_t j = 0; j < z.size(); ++j) grad[j] += w * z[j];
    }
    for (std::size_t j = 0; j < x.dim(); ++j) grad[j] += lambda_ * x[j];
    return grad;
}

GradientSample LogisticObjective::stochastic_gradient(const ParamVector& x,
                                                      std::size_t batch_size,
                                                      RngStream& rng) const {
    check_param_dim(*this, x, "LogisticObjective::stochastic_gradient");
    const std::size_t n = features_.rows;
    if (batch_size == 0 || batch_size > n)
        throw Error("LogisticObjective: batch_size must be in [1, shard size]");
    if (batch_size == n) {
        GradientSample out;
        out.gradient = full_gradient(x);
        out.loss = loss(x);
        out.batch_ids.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.batch_ids[i] = i;
        return out;
    }
    const auto rows = rng.sample_without_replacement(n, batch_size);
    GradientSample out;
    out.gradient = ParamVector(x.dim());
    out.batch_ids = rows;
    const double inv_b = 1.0 / static_cast<double>(batch_size);
    for (std::size_t i : rows) {
        const double y = static_cast<double>(labels_[i]);
        const double t = sample_margin(x, i);
        out.loss += softplus(-y * t);
        const double s = 1.0 / (1.0 + std::exp(y * t));
        const double w = -y * s * inv_b;
        const auto z = features_.row(i);
        for (std::size_t j = 0; j < z.size(); ++j) out.gradient[j] += w * z[j];
    }
    out.loss *= inv_b;
    double reg = 0.0;
    for (std::size_t j = 0; j < x.dim(); ++j) {
        out.gradient[j] += lambda_ * x[j];
        reg += x[j] * x[j];
    }
    out.loss += 0.5 * lambda_ * reg;
    return out;
}

// --- MlpObjective --------------------------------------------------------------

MlpObjective::MlpObjective(MlpArchitecture arch, std::shared_ptr<const Dataset> data,
                           std::vector<std::size_t> shard)
    : arch_(std::move(arch)), data_(std::move(data)), shard_(std::move(shard)) {
    if (!data_) throw Error("MlpObjective: null dataset");
    if (arch_.input_dim != data_->m)
        throw Error("MlpObjective: input_dim does not match dataset features");
    if (arch_.num_classes < 2) throw Error("MlpObjective: need at least 2 classes");
    if (arch_.hidden.empty() || arch_.hidden.size() > 2)
        throw Error("MlpObjective: one or two hidden layers supported");
    for (std::size_t w : arch_.hidden)
        if (w == 0) throw Error("MlpObjective: zero-width hidden layer");
    for (std::size_t row : shard_)
        if (row >= data_->n) throw Error("MlpObjective: shard index out of range");

    widths_.push_back(arch_.input_dim);
    for (std::size_t w : arch_.hidden) widths_.push_back(w);
    widths_.push_back(arch_.num_classes);

    std::vector<std::pair<std::string, std::size_t>> sizes;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
        sizes.emplace_back("fc" + std::to_string(l + 1),
                           widths_[l] * widths_[l + 1] + widths_[l + 1]);
    layout_ = LayerLayout::from_sizes(sizes);
}

ParamVector MlpObjective::init_params(RngStream& rng) const {
    ParamVector x(layout_.total_dim());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const std::size_t fan_in = widths_[l];
        const std::size_t fan_out = widths_[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t k = 0; k < fan_in * fan_out; ++k)
            x[off + k] = scale * rng.next_gaussian();
        off += fan_in * fan_out + fan_out;  // biases stay zero
    }
    return x;
}

double MlpObjective::batch_loss_grad(const ParamVector& x, const Dataset& ds,
                                     std::span<const std::size_t> rows,
                                     ParamVector* grad) const {
    check_param_dim(*this, x, "MlpObjective");
    if (ds.m != arch_.input_dim) throw Error("MlpObjective: dataset width mismatch");
    const std::size_t depth = widths_.size() - 1;

    std::vector<std::vector<double>> act(depth + 1), pre(depth), delta(depth);
    for (std::size_t l = 0; l <= depth; ++l) act[l].resize(widths_[l]);
    for (std::size_t l = 0; l < depth; ++l) {
        pre[l].resize(widths_[l + 1]);
        delta[l].resize(widths_[l + 1]);
    }

    std::vector<std::size_t> layer_offsets(depth);
    for (std::size_t l = 0; l < depth; ++l) layer_offsets[l] = layout_.layer(l).offset;

    const double inv_b = 1.0 / static_cast<double>(rows.size());
    double total_loss = 0.0;

    for (std::size_t row : rows) {
        const auto input = ds.row(row);
        std::copy(input.begin(), input.end(), act[0].begin());

        for (std::size_t l = 0; l < depth; ++l) {
            const std::size_t in_w = widths_[l], out_w = widths_[l + 1];
            const double* w = x.data() + layer_offsets[l];
            const double* b = w + in_w * out_w;
            for (std::size_t o = 0; o < out_w; ++o) {
                double s = b[o];
                const double* wrow = w + o * in_w;
                for (std::size_t j = 0; j < in_w; ++j) s += wrow[j] * act[l][j];
                pre[l][o] = s;
                act[l + 1][o] = (l + 1 < depth) ? std::max(0.0, s) : s;
            }
        }

        // Softmax cross-entropy on the logits.
        const auto& logits = act[depth];
        double zmax = logits[0];
        for (double z : logits) zmax = std::max(zmax, z);
        double denom = 0.0;
        for (double z : logits) denom += std::exp(z - zmax);
        const int label = ds.labels[row];
        const double log_p =
            (logits[static_cast<std::size_t>(label)] - zmax) - std::log(denom);
        total_loss -= log_p;

        if (!grad) continue;

        auto& dlast = delta[depth - 1];
        for (std::size_t o = 0; o < dlast.size(); ++o)
            dlast[o] = std::exp(logits[o] - zmax) / denom -
                       (static_cast<int>(o) == label ? 1.0 : 0.0);

        for (std::size_t l = depth; l-- > 0;) {
            const std::size_t in_w = widths_[l], out_w = widths_[l + 1];
            double* dw = grad->data() + layer_offsets[l];
            double* db = dw + in_w * out_w;
            for (std::size_t o = 0; o < out_w; ++o) {
                const double d = delta[l][o] * inv_b;
                double* dwrow = dw + o * in_w;
                for (std::size_t j = 0; j < in_w; ++j) dwrow[j] += d * act[l][j];
                db[o] += d;
            }
            if (l == 0) break;
            const double* w = x.data() + layer_offsets[l];
            auto& dprev = delta[l - 1];
            for (std::size_t j = 0; j < in_w; ++j) {
                double s = 0.0;
                for (std::size_t o = 0; o < out_w; ++o) s += w[o * in_w + j] * delta[l][o];
                dprev[j] = (pre[l - 1][j] > 0.0) ? s : 0.0;
            }
        }
    }
    return total_loss * inv_b;
}

double MlpObjective::loss(const ParamVector& x) const {
    if (shard_.empty()) throw Error("MlpObjective: empty shard");
    return batch_loss_grad(x, *data_, shard_, nullptr);
}

ParamVector MlpObjective::full_gradient(const ParamVector& x) const {
    if (shard_.empty()) throw Error("MlpObjective: empty shard");
    ParamVector grad(layout_.total_dim());
    batch_loss_grad(x, *data_, shard_, &grad);
    return grad;
}

GradientSample MlpObjective::stochastic_gradient(const ParamVector& x,
                                                 std::size_t batch_size,
                                                 RngStream& rng) const {
    if (shard_.empty()) throw Error("MlpObjective: empty shard");
    if (batch_size == 0 || batch_size > shard_.size())
        throw Error("MlpObjective: batch_size must be in [1, shard size]");

    GradientSample out;
    out.gradient = ParamVector(layout_.total_dim());
    if (batch_size == shard_.size()) {
        out.batch_ids = shard_;
        out.loss = batch_loss_grad(x, *data_, shard_, &out.gradient);
        return out;
    }
    const auto picks = rng.sample_without_replacement(shard_.size(), batch_size);
    out.batch_ids.reserve(batch_size);
    for (std::size_t p : picks) out.batch_ids.push_back(shard_[p]);
    out.loss = batch_loss_grad(x, *data_, out.batch_ids, &out.gradient);
    return out;
}

namespace {

std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> rows(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) rows[i] = i;
    return rows;
}

void check_rows(const Dataset& ds, std::span<const std::size_t> rows) {
    for (std::size_t r : rows)
        if (r >= ds.n) throw Error("MlpObjective: row index out of range");
}

}  // namespace

double MlpObjective::dataset_loss(const ParamVector& x, const Dataset& ds,
                                  std::span<const std::size_t> rows) const {
    if (rows.empty()) {
        const auto all = all_rows(ds);
        return batch_loss_grad(x, ds, all, nullptr);
    }
    check_rows(ds, rows);
    return batch_loss_grad(x, ds, rows, nullptr);
}

Matrix MlpObjective::class_probabilities(const ParamVector& x, const Dataset& ds,
                                         std::span<const std::size_t> rows) const {
    const auto all = rows.empty() ? all_rows(ds) : std::vector<std::size_t>(rows.begin(), rows.end());
    Matrix logits = layer_features(x, ds, widths_.size() - 2, all);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        auto r = logits.row(i);
        double zmax = r[0];
        for (double z : r) zmax = std::max(zmax, z);
        double denom = 0.0;
        for (double& z : r) {
            z = std::exp(z - zmax);
            denom += z;
        }
        for (double& z : r) z /= denom;
    }
    return logits;
}

double MlpObjective::accuracy(const ParamVector& x, const Dataset& ds,
                              std::span<const std::size_t> rows) const {
    const auto all = rows.empty() ? all_rows(ds) : std::vector<std::size_t>(rows.begin(), rows.end());
    Matrix logits = layer_features(x, ds, widths_.size() - 2, all);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto r = logits.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < r.size(); ++c)
            if (r[c] > r[best]) best = c;
        if (static_cast<int>(best) == ds.labels[all[i]]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(all.size());
}

Matrix MlpObjective::layer_features(const ParamVector& x, const Dataset& ds,
                                    std::size_t layer_idx,
                                    std::span<const std::size_t> rows) const {
    check_param_dim(*this, x, "MlpObjective::layer_features");
    if (ds.m != arch_.input_dim) throw Error("MlpObjective: dataset width mismatch");
    const std::size_t depth = widths_.size() - 1;
    if (layer_idx >= depth) throw Error("MlpObjective: layer index out of range");
    check_rows(ds, rows);
    const auto all = rows.empty() ? all_rows(ds) : std::vector<std::size_t>(rows.begin(), rows.end());

    Matrix out(all.size(), widths_[layer_idx + 1]);
    std::vector<std::vector<double>> act(depth + 1);
    for (std::size_t l = 0; l <= depth; ++l) act[l].resize(widths_[l]);

    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto input = ds.row(all[i]);
        std::copy(input.begin(), input.end(), act[0].begin());
        for (std::size_t l = 0; l <= layer_idx; ++l) {
            const std::size_t in_w = widths_[l], out_w = widths_[l + 1];
            const double* w = x.data() + layout_.layer(l).offset;
            const double* b = w + in_w * out_w;
            for (std::size_t o = 0; o < out_w; ++o) {
                double s = b[o];
                const double* wrow = w + o * in_w;
                for (std::size_t j = 0; j < in_w; ++j) s += wrow[j] * act[l][j];
                act[l + 1][o] = (l + 1 < depth) ? std::max(0.0, s) : s;
            }
        }
        std::copy(act[layer_idx + 1].begin(), act[layer_idx + 1].end(),
                  out.row(i).begin());
    }
    return out;
}

// --- Ensemble analysis -------------------------------------------------------

ParamVector optimum(std::span<const QuadraticObjective> ensemble) {
    if (ensemble.empty()) throw Error("optimum: empty ensemble");
    const std::size_t d = ensemble.front().dim();
    Matrix mean_a(d, d);
    std::vector<double> mean_b(d, 0.0);
    const double inv_n = 1.0 / static_cast<double>(ensemble.size());
    for (const auto& obj : ensemble) {
        check_same_dim(obj.dim(), d, "optimum");
        if (obj.is_diagonal()) {
            for (std::size_t i = 0; i < d; ++i)
                mean_a.at(i, i) += inv_n * obj.diag()[i];
        } else {
            for (std::size_t i = 0; i < d * d; ++i)
                mean_a.data[i] += inv_n * obj.dense_matrix().data[i];
        }
        for (std::size_t i = 0; i < d; ++i) mean_b[i] += inv_n * obj.linear_term()[i];
    }
    std::vector<double> x;
    try {
        x = linalg::cholesky_solve(mean_a, mean_b);
    } catch (const Error& e) {
        throw Error(std::string("optimum: averaged system is rank deficient: ") +
                    e.what());
    }
    return ParamVector(std::move(x));
}

SmoothnessConstants smoothness_constants(const Objective& obj) {
    if (const auto* quad = dynamic_cast<const QuadraticObjective*>(&obj)) {
        const auto ext = linalg::symmetric_extremes(
            [quad](const double* in, double* out) { quad->apply(in, out); },
            quad->dim(), 1e-12);
        return {ext.lambda_max, std::max(0.0, ext.lambda_min)};
    }
    if (const auto* logit = dynamic_cast<const LogisticObjective*>(&obj)) {
        const Matrix& x = logit->features();
        Matrix gram(x.cols, x.cols);
        for (std::size_t i = 0; i < x.cols; ++i)
            for (std::size_t j = i; j < x.cols; ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < x.rows; ++r)
                    s += x.at(r, i) * x.at(r, j);
                gram.at(i, j) = s;
                gram.at(j, i) = s;
            }
        const double top = linalg::power_iteration_lmax(
            [&gram](const double* in, double* out) {
                for (std::size_t i = 0; i < gram.rows; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < gram.cols; ++j)
                        s += gram.at(i, j) * in[j];
                    out[i] = s;
                }
            },
            x.cols, 1e-12);
        const double beta = 0.25 * top / static_cast<double>(x.rows) + logit->lambda();
        return {beta, logit->lambda()};
    }
    throw Error("smoothness_constants: no global constants available for this objective");
}

double masked_smoothness(const QuadraticObjective& obj, const Mask& m) {
    check_same_dim(obj.dim(), m.dim(), "masked_smoothness");
    const auto& sel = m.selected_indices();
    if (sel.empty()) return 0.0;
    if (obj.is_diagonal()) {
        double top = 0.0;
        for (std::size_t i : sel) top = std::max(top, obj.diag()[i]);
        return top;
    }
    const std::size_t d = obj.dim();
    std::vector<double> full_in(d), full_out(d);
    const auto apply_sub = [&](const double* in, double* out) {
        std::fill(full_in.begin(), full_in.end(), 0.0);
        for (std::size_t k = 0; k < sel.size(); ++k) full_in[sel[k]] = in[k];
        obj.apply(full_in.data(), full_out.data());
        for (std::size_t k = 0; k < sel.size(); ++k) out[k] = full_out[sel[k]];
    };
    return linalg::power_iteration_lmax(apply_sub, sel.size(), 1e-12);
}

namespace {

ZetaPair zeta_impl(std::span<const Objective* const> ensemble,
                   const ParamVector& x_star, const Mask& m) {
    if (ensemble.empty()) throw Error("heterogeneity_zeta: empty ensemble");
    const Mask unreduced = m.complement();
    double zeta = 0.0, zeta_unred = 0.0;
    for (const Objective* obj : ensemble) {
        const ParamVector g = obj->full_gradient(x_star);
        zeta += norm_sq(g);
        zeta_unred += norm_sq(masked(g, unreduced));
    }
    const double inv_n = 1.0 / static_cast<double>(ensemble.size());
    return {zeta * inv_n, zeta_unred * inv_n};
}

}  // namespace

ZetaPair heterogeneity_zeta(std::span<const Objective* const> ensemble,
                            const ParamVector& x_star, const Mask& m) {
    return zeta_impl(ensemble, x_star, m);
}

ZetaPair heterogeneity_zeta(std::span<const QuadraticObjective> ensemble,
                            const ParamVector& x_star, const Mask& m) {
    std::vector<const Objective*> ptrs;
    ptrs.reserve(ensemble.size());
    for (const auto& obj : ensemble) ptrs.push_back(&obj);
    return zeta_impl(ptrs, x_star, m);
}

double zeta_hat_estimate(std::span<const Objective* const> ensemble, const Mask& m,
                         std::span<const ParamVector> probes) {
    if (probes.empty()) throw Error("zeta_hat_estimate: need at least one probe");
    const Mask unreduced = m.complement();
    double best = 0.0;
    for (const ParamVector& probe : probes) {
        double mean = 0.0;
        for (const Objective* obj : ensemble)
            mean += norm_sq(masked(obj->full_gradient(probe), unreduced));
        mean /= static_cast<double>(ensemble.size());
        best = std::max(best, mean);
    }
    return best;
}

// --- Generators ----------------------------------------------------------------

QuadraticObjective make_random_psd_quadratic(const LayerLayout& layout,
                                             RngStream& rng, double mu_floor,
                                             double scale) {
    const std::size_t d = layout.total_dim();
    Matrix g(d, d);
    for (auto& v : g.data) v = rng.next_gaussian();
    Matrix a(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += g.at(k, i) * g.at(k, j);
            const double v = scale * s / static_cast<double>(d) +
                             (i == j ? mu_floor : 0.0);
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    std::vector<double> b(d);
    for (auto& v : b) v = rng.next_gaussian();
    return QuadraticObjective::dense(std::move(a), std::move(b), layout);
}

std::vector<QuadraticObjective> make_hetero_quadratic_ensemble(
    const HeteroQuadraticSpec& spec) {
    if (spec.feat_dim == 0 || spec.clf_dim == 0 || spec.n_clients == 0)
        throw Error("make_hetero_quadratic_ensemble: empty dimensions");
    if (spec.clf_curv_jitter < 0.0 || spec.clf_curv_jitter >= 1.0)
        throw Error("make_hetero_quadratic_ensemble: clf_curv_jitter must be in [0, 1)");
    const LayerLayout layout = LayerLayout::from_sizes(
        {{"features", spec.feat_dim}, {"classifier", spec.clf_dim}});
    const std::size_t d = layout.total_dim();

    RngStream rng = RngStream::keyed(spec.seed, 0x4E7);
    std::vector<double> diag(d);
    for (std::size_t i = 0; i < spec.feat_dim; ++i) {
        const double t = spec.feat_dim > 1
                             ? static_cast<double>(i) /
                                   static_cast<double>(spec.feat_dim - 1)
                             : 0.0;
        diag[i] = spec.feat_curv_min + t * (spec.feat_curv_max - spec.feat_curv_min);
    }
    for (std::size_t i = spec.feat_dim; i < d; ++i) diag[i] = spec.clf_curv;

    std::vector<double> base_b(d);
    for (auto& v : base_b) v = rng.next_gaussian();

    // Zero-mean classifier offsets so the ensemble mean stays at base_b.
    std::vector<std::vector<double>> offsets(spec.n_clients,
                                             std::vector<double>(spec.clf_dim));
    for (std::size_t j = 0; j < spec.clf_dim; ++j) {
        double mean = 0.0;
        for (auto& off : offsets) {
            off[j] = rng.next_gaussian();
            mean += off[j];
        }
        mean /= static_cast<double>(spec.n_clients);
        for (auto& off : offsets) off[j] = spec.spread * (off[j] - mean);
    }

    std::vector<QuadraticObjective> out;
    out.reserve(spec.n_clients);
    for (std::size_t i = 0; i < spec.n_clients; ++i) {
        std::vector<double> b = base_b;
        std::vector<double> client_diag = diag;
        for (std::size_t j = 0; j < spec.clf_dim; ++j) {
            b[spec.feat_dim + j] += offsets[i][j];
            // Per-client classifier curvature; identical curvatures would
            // leave the round-averaged map unbiased.
            const double jitter =
                spec.clf_curv_jitter * (2.0 * rng.next_double() - 1.0);
            client_diag[spec.feat_dim + j] = spec.clf_curv * (1.0 + jitter);
        }
        auto obj = QuadraticObjective::diagonal(std::move(client_diag), std::move(b),
                                                layout);
        obj.set_noise_sigma(spec.noise_sigma);
        out.push_back(std::move(obj));
    }
    return out;
}

}  // namespace fedpvr
