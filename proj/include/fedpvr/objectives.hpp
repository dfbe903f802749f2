#pragma once

#include <memory>
#include <span>
#include <vector>

#include "fedpvr/common.hpp"
#include "fedpvr/data.hpp"
#include "fedpvr/param_vector.hpp"
#include "fedpvr/rng.hpp"

namespace fedpvr {

struct GradientSample {
    ParamVector gradient;
    std::vector<std::size_t> batch_ids;  // dataset row ids, empty when synthetic noise
    double loss = 0.0;
};

/// A client's local objective f_i with exact and minibatch gradient oracles.
class Objective {
public:
    virtual ~Objective() = default;

    virtual const LayerLayout& layout() const = 0;
    std::size_t dim() const { return layout().total_dim(); }

    virtual double loss(const ParamVector& x) const = 0;
    virtual ParamVector full_gradient(const ParamVector& x) const = 0;

    /// Mean gradient over a uniform without-replacement minibatch; unbiased
    /// for full_gradient and deterministic given the stream state. A full
    /// batch reproduces full_gradient bit for bit.
    virtual GradientSample stochastic_gradient(const ParamVector& x,
                                               std::size_t batch_size,
                                               RngStream& rng) const = 0;

    virtual std::size_t shard_size() const = 0;
};

/// f(x) = 1/2 x'Ax - b'x with A symmetric PSD. Stored dense or diagonal.
/// An optional additive Gaussian noise knob turns the stochastic oracle into
/// a controlled-variance gradient for theory experiments.
class QuadraticObjective : public Objective {
public:
    static QuadraticObjective diagonal(std::vector<double> diag,
                                       std::vector<double> b,
                                       LayerLayout layout = {});
    static QuadraticObjective dense(Matrix a, std::vector<double> b,
                                    LayerLayout layout = {});

    const LayerLayout& layout() const override { return layout_; }
    double loss(const ParamVector& x) const override;
    ParamVector full_gradient(const ParamVector& x) const override;
    GradientSample stochastic_gradient(const ParamVector& x, std::size_t batch_size,
                                       RngStream& rng) const override;
    std::size_t shard_size() const override { return 1; }

    void set_noise_sigma(double sigma) { noise_sigma_ = sigma; }
    double noise_sigma() const { return noise_sigma_; }

    bool is_diagonal() const { return dense_.data.empty(); }
    const std::vector<double>& diag() const { return diag_; }
    const Matrix& dense_matrix() const { return dense_; }
    const std::vector<double>& linear_term() const { return b_; }

    /// out = A * in
    void apply(const double* in, double* out) const;

private:
    LayerLayout layout_;
    std::vector<double> diag_;  // diagonal representation when dense_ empty
    Matrix dense_;
    std::vector<double> b_;
    double noise_sigma_ = 0.0;
};

/// Binary ridge-regularized logistic regression over +-1 labels.
class LogisticObjective : public Objective {
public:
    LogisticObjective(Matrix features, std::vector<int> labels, double lambda);

    const LayerLayout& layout() const override { return layout_; }
    double loss(const ParamVector& x) const override;
    ParamVector full_gradient(const ParamVector& x) const override;
    GradientSample stochastic_gradient(const ParamVector& x, std::size_t batch_size,
                                       RngStream& rng) const override;
    std::size_t shard_size() const override { return features_.rows; }

    double lambda() const { return lambda_; }
    const Matrix& features() const { return features_; }

private:
    LayerLayout layout_;
    Matrix features_;
    std::vector<int> labels_;
    double lambda_;

    double sample_margin(const ParamVector& x, std::size_t row) const;
};

struct MlpArchitecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;  // one or two hidden widths
    std::size_t num_classes = 0;
};

/// Fully connected ReLU network with softmax cross-entropy loss, gradients by
/// hand-rolled backpropagation. One layout entry per linear layer (weights
/// followed by bias), so layer-cutoff masks select whole layers.
class MlpObjective : public Objective {
public:
    MlpObjective(MlpArchitecture arch, std::shared_ptr<const Dataset> data,
                 std::vector<std::size_t> shard);

    const LayerLayout& layout() const override { return layout_; }
    double loss(const ParamVector& x) const override;
    ParamVector full_gradient(const ParamVector& x) const override;
    GradientSample stochastic_gradient(const ParamVector& x, std::size_t batch_size,
                                       RngStream& rng) const override;
    std::size_t shard_size() const override { return shard_.size(); }

    const MlpArchitecture& architecture() const { return arch_; }
    const std::vector<std::size_t>& shard() const { return shard_; }

    /// Gaussian weights scaled by 1/sqrt(fan_in), zero biases.
    ParamVector init_params(RngStream& rng) const;

    // Evaluation over arbitrary rows of any compatible dataset (empty rows
    // span means all rows).
    double dataset_loss(const ParamVector& x, const Dataset& ds,
                        std::span<const std::size_t> rows = {}) const;
    double accuracy(const ParamVector& x, const Dataset& ds,
                    std::span<const std::size_t> rows = {}) const;
    /// Softmax class probabilities, one row per evaluated example.
    Matrix class_probabilities(const ParamVector& x, const Dataset& ds,
                               std::span<const std::size_t> rows = {}) const;
    /// Activations after the given linear layer (post-ReLU for hidden layers,
    /// raw logits for the last). For CKA probes.
    Matrix layer_features(const ParamVector& x, const Dataset& ds,
                          std::size_t layer_idx,
                          std::span<const std::size_t> rows = {}) const;

private:
    MlpArchitecture arch_;
    LayerLayout layout_;
    std::shared_ptr<const Dataset> data_;
    std::vector<std::size_t> shard_;
    std::vector<std::size_t> widths_;  // input, hidden..., classes

    double batch_loss_grad(const ParamVector& x, const Dataset& ds,
                           std::span<const std::size_t> rows, ParamVector* grad) const;
};

// --- Ensemble analysis -----------------------------------------------------

/// Minimizer of the averaged quadratic ensemble: x* = (sum A_i)^-1 (sum b_i).
ParamVector optimum(std::span<const QuadraticObjective> ensemble);

struct SmoothnessConstants {
    double beta;  // largest curvature
    double mu;    // smallest curvature
};

/// Extreme curvature constants. Quadratics via power iteration on A;
/// logistic via the 0.25 * ||X||^2 / n + lambda bound. MLPs have no global
/// constants and raise an Error.
SmoothnessConstants smoothness_constants(const Objective& obj);

/// Largest eigenvalue of the masked-row-and-column principal submatrix.
double masked_smoothness(const QuadraticObjective& obj, const Mask& m);

struct ZetaPair {
    double zeta_sq;            // mean ||grad f_i(x*)||^2
    double zeta_sq_unreduced;  // mean ||(1-p) o grad f_i(x*)||^2
};

ZetaPair heterogeneity_zeta(std::span<const Objective* const> ensemble,
                            const ParamVector& x_star, const Mask& m);
ZetaPair heterogeneity_zeta(std::span<const QuadraticObjective> ensemble,
                            const ParamVector& x_star, const Mask& m);

/// Lower bound on the uniform heterogeneity constant: max over probe points
/// of mean ||(1-p) o grad f_i(x)||^2.
double zeta_hat_estimate(std::span<const Objective* const> ensemble, const Mask& m,
                         std::span<const ParamVector> probes);

// --- Generators for experiments and tests ----------------------------------

/// Dense random PSD quadratic: A = scale * G'G / d + mu_floor * I.
QuadraticObjective make_random_psd_quadratic(const LayerLayout& layout,
                                             RngStream& rng, double mu_floor,
                                             double scale);

/// Client ensemble whose heterogeneity is confined to the trailing
/// "classifier" block: diagonal curvature and linear term are shared on the
/// leading "features" block while classifier linear terms differ per client
/// (mean preserved).
struct HeteroQuadraticSpec {
    std::size_t feat_dim = 8;
    std::size_t clf_dim = 2;
    std::size_t n_clients = 4;
    double feat_curv_min = 1.0;
    double feat_curv_max = 4.0;
    double clf_curv = 2.0;
    double spread = 2.0;           // classifier b_i spread around the mean
    double clf_curv_jitter = 0.0;  // relative per-client curvature spread, in [0, 1)
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};
std::vector<QuadraticObjective> make_hetero_quadratic_ensemble(
    const HeteroQuadraticSpec& spec);

}  // namespace fedpvr
