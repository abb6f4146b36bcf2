#pragma once

// Orthogonal-collection WSN baseline: one device per time-frequency resource
// element, then the best linear unbiased spatial estimate (simple kriging with
// known zero mean, unit variance and correlation kernel).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mapx/config.hpp"
#include "mapx/estimate.hpp"
#include "mapx/field.hpp"
#include "mapx/random.hpp"
#include "mapx/scenario.hpp"

namespace mapx {

struct Observation {
    Vec2 position;
    double value = 0.0;
    std::size_t device = 0;
};

struct ObservationSet {
    std::vector<Observation> observations;
    double noise_variance = 0.0;

    std::size_t size() const { return observations.size(); }
};

/// Observation noise variance for a per-observation SNR over a unit-variance field.
inline double observation_noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

/// A uniformly random distinct subset of n_subframes * M * N devices, each
/// observed once with additive Gaussian noise of the given variance.
inline ObservationSet orthogonal_collect(const DeviceSet& devices, std::span<const double> measurements,
                                         int n_subframes, const ScenarioConfig& c, double noise_variance, Rng& rng) {
    if (measurements.size() != devices.count())
        throw std::invalid_argument("orthogonal_collect: one measurement per device");
    if (n_subframes < 1) throw std::invalid_argument("orthogonal_collect: need at least one subframe");
    if (!(noise_variance >= 0)) throw std::invalid_argument("orthogonal_collect: negative noise variance");
    const std::size_t slots = static_cast<std::size_t>(n_subframes) * c.symbols_m * c.subcarriers_n;
    if (devices.count() < slots)
        throw std::invalid_argument("orthogonal_collect: fewer devices than resource elements");

    std::vector<std::size_t> idx(devices.count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `slots` entries become the chosen subset.
    for (std::size_t i = 0; i < slots; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    ObservationSet out;
    out.noise_variance = noise_variance;
    out.observations.reserve(slots);
    std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
    for (std::size_t i = 0; i < slots; ++i) {
        const std::size_t d = idx[i];
        const double n = noise_variance > 0 ? noise(rng) : 0.0;
        out.observations.push_back({devices.positions[d], measurements[d] + n, d});
    }
    return out;
}

inline ObservationSet orthogonal_collect(const DeviceSet& devices, std::span<const double> measurements,
                                         int n_subframes, const ScenarioConfig& c, Rng& rng) {
    return orthogonal_collect(devices, measurements, n_subframes, c, observation_noise_variance(c.wsn_obs_snr_db),
                              rng);
}

/// s_hat(x) = c(x)^T (C + (sigma_n^2 + jitter) I)^{-1} y.
class SBlueEstimator {
public:
    static constexpr double kJitter = 1e-8;

    SBlueEstimator(const ObservationSet& obs, CorrelationKernel kernel) : kernel_(kernel) {
        const auto n = static_cast<Eigen::Index>(obs.size());
        if (n == 0) throw std::invalid_argument("sblue_estimate: no observations");
        positions_.reserve(obs.size());
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            positions_.push_back(obs.observations[i].position);
            y(i) = obs.observations[i].value;
        }
        Eigen::MatrixXd gram(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = kernel_(positions_[i], positions_[j]);
        gram.diagonal().array() += obs.noise_variance + kJitter;
        const Eigen::LLT<Eigen::MatrixXd> llt(gram);
        const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
        if (llt.info() != Eigen::Success || !(rcond > 1e-15)) {
            std::ostringstream msg;
            msg << "sblue_estimate: Gram matrix numerically singular (reciprocal condition " << rcond << ")";
            throw std::runtime_error(msg.str());
        }
        weights_ = llt.solve(y);
    }

    double operator()(Vec2 x) const {
        double s = 0.0;
        for (std::size_t j = 0; j < positions_.size(); ++j) s += kernel_(x, positions_[j]) * weights_(j);
        return s;
    }

private:
    CorrelationKernel kernel_;
    std::vector<Vec2> positions_;
    Eigen::VectorXd weights_;
};

inline GroundEstimate sblue_estimate(const ObservationSet& obs, CorrelationKernel kernel, const EvalGrid& grid) {
    const SBlueEstimator est(obs, kernel);
    GroundEstimate out{Eigen::MatrixXd(grid.side, grid.side), Mask::Constant(grid.side, grid.side, true)};
    for (int r = 0; r < grid.side; ++r)
        for (int c = 0; c < grid.side; ++c) out.values(r, c) = est(grid.center(r, c));
    return out;
}

}  // namespace mapx
