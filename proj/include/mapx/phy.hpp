#pragma once

// Physical layer: the location-dependent symbol phase rule, the device-to-HAPS
// channel, superposition reception of the reference and information subframes,
// and the unfolding of the received 4-D tensor into the virtual array.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapx/config.hpp"
#include "mapx/field.hpp"
#include "mapx/random.hpp"
#include "mapx/scenario.hpp"

namespace mapx {

using cplx = std::complex<double>;

/// Symbol phase a device at (u, v) applies on resource (m, n). Together with
/// the array response exp(j pi (p u + q v)) it makes antenna (p, q) on resource
/// (m, n) see the phase of element (p + m P, q + n Q) of a P*M x Q*N
/// half-wavelength array.
inline double waveform_phase(DirectionCosines d, int m, int n, const HapsGeometry& geom) {
    return kPi * (static_cast<double>(m) * geom.array_p * d.u + static_cast<double>(n) * geom.array_q * d.v);
}

/// (lambda / (4 pi d))^2.
inline double free_space_path_gain(double distance_m, double wavelength_m) {
    const double x = wavelength_m / (4.0 * kPi * distance_m);
    return x * x;
}

/// Thermal noise power per resource element per antenna, in mW:
/// -174 dBm/Hz + 10 log10(subcarrier spacing) + noise figure.
inline double noise_variance_mw(const ScenarioConfig& c) {
    const double dbm = -174.0 + 10.0 * std::log10(c.subcarrier_spacing_hz) + c.noise_figure_db;
    return std::pow(10.0, dbm / 10.0);
}

inline double tx_amplitude(const ScenarioConfig& c) { return std::sqrt(std::pow(10.0, c.tx_power_dbm / 10.0)); }

/// Unit-mean-power Rician fading coefficient. K = +inf gives exactly 1.
inline cplx rician_fading(double k_db, Rng& rng) {
    if (std::isinf(k_db) && k_db > 0) return {1.0, 0.0};
    const double k = std::pow(10.0, k_db / 10.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double re = normal(rng);
    const double im = normal(rng);
    const cplx scatter = cplx(re, im) / std::sqrt(2.0);
    return std::sqrt(k / (k + 1.0)) + std::sqrt(1.0 / (k + 1.0)) * scatter;
}

/// g = sqrt(PL(d)) exp(-j 2 pi d / lambda) * fading, with the optional NLoS
/// penalty applied to PL.
inline cplx channel_gain(double distance_m, const HapsGeometry& geom, const ScenarioConfig& c, Rng& rng) {
    const double pl = free_space_path_gain(distance_m, geom.wavelength_m) * std::pow(10.0, -c.nlos_penalty_db / 10.0);
    const cplx los = std::polar(std::sqrt(pl), -2.0 * kPi * distance_m / geom.wavelength_m);
    return los * rician_fading(c.rician_k_db, rng);
}

/// One channel draw shared by the reference and information subframes of a pair.
struct ChannelRealization {
    std::vector<cplx> gains;
    std::vector<double> subcarrier_phase_step;  // residual clock error, radians per subcarrier
    double tx_amplitude = 1.0;                 // sqrt(mW)
    double noise_variance = 0.0;               // mW per resource element per antenna
};

inline ChannelRealization draw_channel(const DeviceSet& devices, const HapsGeometry& geom, const ScenarioConfig& c,
                                       Rng& rng) {
    ChannelRealization ch;
    ch.gains.reserve(devices.count());
    for (const Vec2 p : devices.positions) ch.gains.push_back(channel_gain(geom.slant_range(p), geom, c, rng));
    ch.subcarrier_phase_step.assign(devices.count(), 0.0);
    if (c.clock_phase_std_rad > 0) {
        std::normal_distribution<double> clock(0.0, c.clock_phase_std_rad);
        for (double& step : ch.subcarrier_phase_step) step = clock(rng);
    }
    ch.tx_amplitude = tx_amplitude(c);
    ch.noise_variance = noise_variance_mw(c);
    return ch;
}

/// Received symbols y[p, q, m, n], row-major.
class SymbolTensor {
public:
    SymbolTensor() = default;
    SymbolTensor(int p, int q, int m, int n)
        : p_(p), q_(q), m_(m), n_(n), data_(static_cast<std::size_t>(p) * q * m * n) {}

    int array_p() const { return p_; }
    int array_q() const { return q_; }
    int symbols() const { return m_; }
    int subcarriers() const { return n_; }
    std::size_t size() const { return data_.size(); }

    cplx& operator()(int p, int q, int m, int n) { return data_[index(p, q, m, n)]; }
    const cplx& operator()(int p, int q, int m, int n) const { return data_[index(p, q, m, n)]; }

    std::span<cplx> data() { return data_; }
    std::span<const cplx> data() const { return data_; }

private:
    std::size_t index(int p, int q, int m, int n) const {
        return ((static_cast<std::size_t>(p) * q_ + q) * m_ + m) * n_ + n;
    }

    int p_ = 0, q_ = 0, m_ = 0, n_ = 0;
    std::vector<cplx> data_;
};

/// Reference and information subframes captured under one channel realization.
struct ReceivedPair {
    SymbolTensor reference;
    SymbolTensor information;
};

/// Superposition of every device's waveform plus independent complex Gaussian
/// noise per element and per subframe. Reference amplitudes are 1.0;
/// information amplitudes are the encoded measurements. An empty device set
/// yields a noise-only capture.
inline ReceivedPair simulate_reception(const DeviceSet& devices, std::span<const double> measurements,
                                       const ChannelRealization& channel, const HapsGeometry& geom,
                                       const AmplitudeCodec& codec, Rng& noise_rng) {
    const std::size_t d = devices.count();
    if (measurements.size() != d) throw std::invalid_argument("simulate_reception: one measurement per device");
    if (channel.gains.size() != d) throw std::invalid_argument("simulate_reception: channel size mismatch");

    const int P = geom.array_p, Q = geom.array_q, M = geom.symbols_m, N = geom.subcarriers_n;
    const int kx = geom.virtual_kx(), ky = geom.virtual_ky();

    // Per-axis factors: x-axis row k = p + m P, y-axis row l = q + n Q.
    Eigen::MatrixXcd x_factor(kx, d), y_factor(ky, d);
    Eigen::VectorXcd ref_coeff(d), info_coeff(d);
    for (std::size_t i = 0; i < d; ++i) {
        const DirectionCosines dir = devices.directions[i];
        const double clock = channel.subcarrier_phase_step.empty() ? 0.0 : channel.subcarrier_phase_step[i];
        for (int m = 0; m < M; ++m)
            for (int p = 0; p < P; ++p)
                x_factor(p + m * P, i) = std::polar(1.0, kPi * p * dir.u + waveform_phase(dir, m, 0, geom));
        for (int n = 0; n < N; ++n)
            for (int q = 0; q < Q; ++q)
                y_factor(q + n * Q, i) = std::polar(1.0, kPi * q * dir.v + waveform_phase(dir, 0, n, geom) + n * clock);
        const cplx g = channel.tx_amplitude * channel.gains[i];
        ref_coeff(i) = g;
        info_coeff(i) = g * codec.encode(measurements[i]);
    }

    const Eigen::MatrixXcd ref_virtual = x_factor * ref_coeff.asDiagonal() * y_factor.transpose();
    const Eigen::MatrixXcd info_virtual = x_factor * info_coeff.asDiagonal() * y_factor.transpose();

    std::normal_distribution<double> normal(0.0, std::sqrt(channel.noise_variance / 2.0));
    const bool noisy = channel.noise_variance > 0.0;
    auto fill = [&](const Eigen::MatrixXcd& virt) {
        SymbolTensor y(P, Q, M, N);
        for (int p = 0; p < P; ++p)
            for (int q = 0; q < Q; ++q)
                for (int m = 0; m < M; ++m)
                    for (int n = 0; n < N; ++n) {
                        cplx value = virt(p + m * P, q + n * Q);
                        if (noisy) {
                            const double re = normal(noise_rng);
                            const double im = normal(noise_rng);
                            value += cplx(re, im);
                        }
                        y(p, q, m, n) = value;
                    }
        return y;
    };
    ReceivedPair pair;
    pair.reference = fill(ref_virtual);
    pair.information = fill(info_virtual);
    return pair;
}

/// Draws a fresh channel from `fading_rng`, then simulates reception.
inline ReceivedPair simulate_reception(const DeviceSet& devices, std::span<const double> measurements,
                                       const HapsGeometry& geom, const ScenarioConfig& c, Rng& fading_rng,
                                       Rng& noise_rng) {
    const ChannelRealization channel = draw_channel(devices, geom, c, fading_rng);
    return simulate_reception(devices, measurements, channel, geom, AmplitudeCodec::from(c), noise_rng);
}

/// v[p + m P, q + n Q] = y[p, q, m, n].
inline Eigen::MatrixXcd unfold_virtual(const SymbolTensor& y, const HapsGeometry& geom) {
    const int P = geom.array_p, Q = geom.array_q, M = geom.symbols_m, N = geom.subcarriers_n;
    if (y.array_p() != P || y.array_q() != Q || y.symbols() != M || y.subcarriers() != N)
        throw std::invalid_argument("unfold_virtual: tensor shape does not match geometry");
    Eigen::MatrixXcd v(P * M, Q * N);
    for (int p = 0; p < P; ++p)
        for (int q = 0; q < Q; ++q)
            for (int m = 0; m < M; ++m)
                for (int n = 0; n < N; ++n) v(p + m * P, q + n * Q) = y(p, q, m, n);
    return v;
}

inline SymbolTensor fold_virtual(const Eigen::MatrixXcd& v, const HapsGeometry& geom) {
    const int P = geom.array_p, Q = geom.array_q, M = geom.symbols_m, N = geom.subcarriers_n;
    if (v.rows() != P * M || v.cols() != Q * N)
        throw std::invalid_argument("fold_virtual: matrix shape does not match geometry");
    SymbolTensor y(P, Q, M, N);
    for (int p = 0; p < P; ++p)
        for (int q = 0; q < Q; ++q)
            for (int m = 0; m < M; ++m)
                for (int n = 0; n < N; ++n) y(p, q, m, n) = v(p + m * P, q + n * Q);
    return y;
}

}  // namespace mapx
