#pragma once

// Sensing target: a unit-variance Gaussian random field with Gaussian-shaped
// correlation, sampled at device positions and mapped to transmit amplitudes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapx/config.hpp"
#include "mapx/fft.hpp"
#include "mapx/random.hpp"
#include "mapx/scenario.hpp"

namespace mapx {

/// rho(d) = exp(-d^2 / (2 l^2)).
struct CorrelationKernel {
    double corr_len_m;

    double operator()(double distance_m) const {
        const double r = distance_m / corr_len_m;
        return std::exp(-0.5 * r * r);
    }
    double operator()(Vec2 a, Vec2 b) const { return (*this)(std::hypot(a.x - b.x, a.y - b.y)); }
};

/// Field values on side x side nodes spanning the area edge to edge.
/// Row index runs along y, column index along x.
struct GroundField {
    int side = 0;
    double area_side_m = 0.0;
    double corr_len_m = 0.0;
    std::vector<double> values;

    double cell_size() const { return area_side_m / (side - 1); }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * side + col]; }
    Vec2 node_position(int row, int col) const {
        const double half = area_side_m / 2.0;
        const double span = side - 1;
        return {area_side_m * col / span - half, area_side_m * row / span - half};
    }
    CorrelationKernel kernel() const { return {corr_len_m}; }
};

/// White Gaussian noise circularly convolved (via FFT) with a Gaussian kernel of
/// standard deviation l / sqrt(2), which yields the correlation rho(d) above.
/// The convolution runs on a grid padded by 4 l on every side and is cropped
/// back, so opposite edges of the area stay uncorrelated. The kernel is scaled
/// to unit energy, making the marginal variance exactly 1 in expectation.
inline GroundField generate_field(const ScenarioConfig& c, Rng& rng) {
    const int side = c.resolved_field_grid_side();
    if (side < 2) throw std::invalid_argument("field grid needs at least 2 nodes per side");
    GroundField field{side, c.area_side_m, c.field_corr_len_m, {}};
    const double cell = field.cell_size();
    if (cell > c.field_corr_len_m / 4.0)
        throw std::invalid_argument("field grid too coarse: cell size must be <= corr_len / 4");

    const int pad = static_cast<int>(std::ceil(4.0 * c.field_corr_len_m / cell));
    const int n = side + 2 * pad;
    const std::size_t total = static_cast<std::size_t>(n) * n;

    std::vector<std::complex<double>> noise(total);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& z : noise) z = normal(rng);

    std::vector<std::complex<double>> kernel(total);
    const double inv_l2 = 1.0 / (c.field_corr_len_m * c.field_corr_len_m);
    double energy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dy = std::min(i, n - i) * cell;
        for (int j = 0; j < n; ++j) {
            const double dx = std::min(j, n - j) * cell;
            const double h = std::exp(-(dx * dx + dy * dy) * inv_l2);
            kernel[static_cast<std::size_t>(i) * n + j] = h;
            energy += h * h;
        }
    }

    fft2_inplace(noise, n, n, FftDirection::forward);
    fft2_inplace(kernel, n, n, FftDirection::forward);
    for (std::size_t k = 0; k < total; ++k) noise[k] *= kernel[k];
    fft2_inplace(noise, n, n, FftDirection::backward);

    const double scale = 1.0 / (static_cast<double>(total) * std::sqrt(energy));
    field.values.resize(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r)
        for (int col = 0; col < side; ++col)
            field.values[static_cast<std::size_t>(r) * side + col] =
                noise[static_cast<std::size_t>(r + pad) * n + (col + pad)].real() * scale;
    return field;
}

/// Bilinear interpolation; throws std::out_of_range outside the area.
inline double sample_field(const GroundField& field, Vec2 p) {
    const double half = field.area_side_m / 2.0;
    if (!(std::abs(p.x) <= half && std::abs(p.y) <= half))
        throw std::out_of_range("sample_field: position outside the area");
    const double cell = field.cell_size();
    const double fx = (p.x + half) / cell;
    const double fy = (p.y + half) / cell;
    const int c0 = std::clamp(static_cast<int>(std::floor(fx)), 0, field.side - 2);
    const int r0 = std::clamp(static_cast<int>(std::floor(fy)), 0, field.side - 2);
    const double tx = fx - c0;
    const double ty = fy - r0;
    const double bottom = (1.0 - tx) * field.at(r0, c0) + tx * field.at(r0, c0 + 1);
    const double top = (1.0 - tx) * field.at(r0 + 1, c0) + tx * field.at(r0 + 1, c0 + 1);
    return (1.0 - ty) * bottom + ty * top;
}

inline std::vector<double> sample_field(const GroundField& field, std::span<const Vec2> positions) {
    std::vector<double> out;
    out.reserve(positions.size());
    for (const Vec2 p : positions) out.push_back(sample_field(field, p));
    return out;
}

/// The field sampled at the evaluation-grid cell centres (the scoring truth).
inline std::vector<double> truth_on_grid(const GroundField& field, const EvalGrid& grid) {
    std::vector<double> out(static_cast<std::size_t>(grid.side) * grid.side);
    for (int r = 0; r < grid.side; ++r)
        for (int c = 0; c < grid.side; ++c)
            out[static_cast<std::size_t>(r) * grid.side + c] = sample_field(field, grid.center(r, c));
    return out;
}

/// Affine measurement <-> amplitude map. Measurements are clamped to +-3
/// (field standard deviations) and mapped onto [min, max].
struct AmplitudeCodec {
    double min = 0.2;
    double max = 1.8;

    static constexpr double kMeasurementClamp = 3.0;

    static AmplitudeCodec from(const ScenarioConfig& c) { return {c.encode_min, c.encode_max}; }

    double reference() const { return 0.5 * (min + max); }
    double slope() const { return (max - min) / (2.0 * kMeasurementClamp); }

    double encode(double s) const {
        const double clamped = std::clamp(s, -kMeasurementClamp, kMeasurementClamp);
        return min + (max - min) * (clamped + kMeasurementClamp) / (2.0 * kMeasurementClamp);
    }

    /// Inverse of encode without the clamp; used where gradients must flow.
    double decode_affine(double a) const { return (a - min) / slope() - kMeasurementClamp; }

    double decode(double a) const {
        if (!std::isfinite(a)) throw std::invalid_argument("decode_amplitude: non-finite amplitude");
        return decode_affine(std::clamp(a, min, max));
    }
};

}  // namespace mapx
