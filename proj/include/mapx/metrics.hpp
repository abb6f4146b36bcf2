#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mapx/estimate.hpp"

namespace mapx {

inline constexpr double kSnrCapDb = 100.0;

struct Score {
    double snr_db = 0.0;
    double nmse = 0.0;
    double mse = 0.0;
    double truth_variance = 0.0;
    double valid_fraction = 0.0;
};

/// Reconstruction SNR = 10 log10(Var(truth) / MSE), both over valid cells,
/// capped at +100 dB. NMSE = MSE / Var(truth).
inline Score score_estimate(const GroundEstimate& est, const Eigen::MatrixXd& truth) {
    if (est.values.rows() != truth.rows() || est.values.cols() != truth.cols())
        throw std::invalid_argument("score: estimate and truth shapes differ");
    if (est.valid.rows() != truth.rows() || est.valid.cols() != truth.cols())
        throw std::invalid_argument("score: mask shape differs from truth");
    const auto n = static_cast<double>(est.valid.count());
    if (n == 0) throw std::invalid_argument("score: no valid cells");

    double mean = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i)
        if (est.valid.data()[i]) mean += truth.data()[i];
    mean /= n;
    double var = 0.0, mse = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (!est.valid.data()[i]) continue;
        const double t = truth.data()[i];
        const double e = est.values.data()[i] - t;
        if (!std::isfinite(e)) throw std::invalid_argument("score: non-finite value in a valid cell");
        var += (t - mean) * (t - mean);
        mse += e * e;
    }
    var /= n;
    mse /= n;

    Score s;
    s.mse = mse;
    s.truth_variance = var;
    s.nmse = var > 0 ? mse / var : (mse > 0 ? INFINITY : 0.0);
    s.snr_db = mse > 0 && var > 0 ? std::min(kSnrCapDb, 10.0 * std::log10(var / mse)) : (mse > 0 ? -kSnrCapDb : kSnrCapDb);
    s.valid_fraction = n / static_cast<double>(truth.size());
    return s;
}

inline double recon_snr(const GroundEstimate& est, const Eigen::MatrixXd& truth) {
    return score_estimate(est, truth).snr_db;
}

}  // namespace mapx
