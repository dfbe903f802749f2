#pragma once

#include <span>
#include <vector>

#include "fedpvr/common.hpp"

namespace fedpvr {

struct ConformalCalibration {
    double kappa = 0.0;   // target miscoverage in (0, 1)
    double tau = 0.0;     // probability threshold
    std::size_t n_cal = 0;
    /// Set when n_cal < ceil(1/kappa) - 1: the finite-sample guarantee is
    /// vacuous and tau falls back to 0 (every class included).
    bool guarantee_vacuous = false;
};

/// Split-conformal calibration from true-class probabilities on a held-out
/// calibration set. Nonconformity is s = 1 - p(true class); tau = 1 - q with
/// q the ceil((n+1)(1-kappa))-th smallest score.
ConformalCalibration calibrate(std::span<const double> true_class_probs,
                               double kappa);

struct PredictionSet {
    std::vector<int> classes;  // ascending
    std::size_t size() const { return classes.size(); }
    bool contains(int c) const;
};

/// {c : p_c >= tau}. Empty sets are allowed unless force_argmax is set, in
/// which case the top class is always included.
PredictionSet predict_set(std::span<const double> probs,
                          const ConformalCalibration& calib,
                          bool force_argmax = false);

struct CoveragePoint {
    double kappa;
    double coverage;       // fraction of test labels inside their set
    double avg_set_size;
    bool guarantee_vacuous = false;  // calibration set too small for this kappa
};

/// Calibrate at each kappa and measure empirical coverage / mean set size on
/// a disjoint test set. test_probs has one row of class probabilities per
/// test example.
std::vector<CoveragePoint> coverage_curve(const Matrix& test_probs,
                                          std::span<const int> test_labels,
                                          std::span<const double> calib_true_class_probs,
                                          std::span<const double> kappas,
                                          bool force_argmax = false);

}  // namespace fedpvr
