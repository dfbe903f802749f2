#include "fedpvr/conformal.hpp"

#include <algorithm>
#include <cmath>

namespace fedpvr {

ConformalCalibration calibrate(std::span<const double> true_class_probs,
                               double kappa) {
    if (true_class_probs.empty()) throw Error("calibrate: empty calibration set");
    if (!(kappa > 0.0 && kappa < 1.0))
        throw Error("calibrate: kappa must be in (0, 1)");

    std::vector<double> scores(true_class_probs.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = true_class_probs[i];
        if (!(p >= 0.0 && p <= 1.0 + 1e-12))
            throw Error("calibrate: probability outside [0, 1]");
        scores[i] = 1.0 - p;
    }
    std::sort(scores.begin(), scores.end());

    const std::size_t n = scores.size();
    const double raw_rank =
        std::ceil(static_cast<double>(n + 1) * (1.0 - kappa));
    const auto rank = static_cast<std::size_t>(raw_rank);  // 1-based

    ConformalCalibration calib;
    calib.kappa = kappa;
    calib.n_cal = n;
    if (rank > n) {
        // Too few calibration points for this kappa: include everything.
        calib.guarantee_vacuous = true;
        calib.tau = 0.0;
    } else {
        const double q = scores[rank == 0 ? 0 : rank - 1];
        calib.tau = 1.0 - q;
    }
    return calib;
}

bool PredictionSet::contains(int c) const {
    return std::binary_search(classes.begin(), classes.end(), c);
}

PredictionSet predict_set(std::span<const double> probs,
                          const ConformalCalibration& calib, bool force_argmax) {
    if (probs.empty()) throw Error("predict_set: empty probability vector");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= -1e-12) || !std::isfinite(p))
            throw Error("predict_set: malformed probability vector (negative or non-finite entry)");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-8)
        throw Error("predict_set: probabilities sum to " + std::to_string(total) +
                    ", expected 1");

    PredictionSet set;
    for (std::size_t c = 0; c < probs.size(); ++c)
        if (probs[c] >= calib.tau) set.classes.push_back(static_cast<int>(c));
    if (force_argmax && set.classes.empty()) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.size(); ++c)
            if (probs[c] > probs[best]) best = c;
        set.classes.push_back(static_cast<int>(best));
    }
    return set;
}

std::vector<CoveragePoint> coverage_curve(
    const Matrix& test_probs, std::span<const int> test_labels,
    std::span<const double> calib_true_class_probs, std::span<const double> kappas,
    bool force_argmax) {
    if (test_probs.rows != test_labels.size())
        throw Error("coverage_curve: test probs/labels size mismatch");
    if (test_probs.rows == 0) throw Error("coverage_curve: empty test set");

    std::vector<CoveragePoint> out;
    out.reserve(kappas.size());
    for (double kappa : kappas) {
        const auto calib = calibrate(calib_true_class_probs, kappa);
        std::size_t covered = 0;
        std::size_t total_size = 0;
        for (std::size_t i = 0; i < test_probs.rows; ++i) {
            const auto set = predict_set(test_probs.row(i), calib, force_argmax);
            total_size += set.size();
            if (set.contains(test_labels[i])) ++covered;
        }
        const double n = static_cast<double>(test_probs.rows);
        out.push_back({kappa, static_cast<double>(covered) / n,
                       static_cast<double>(total_size) / n,
                       calib.guarantee_vacuous});
    }
    return out;
}

}  // namespace fedpvr
