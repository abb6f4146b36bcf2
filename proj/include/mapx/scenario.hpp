#pragma once

// HAPS/array geometry, device placement, and the ground <-> direction-cosine
// mapping. Ground coordinates are metres in a plane centred under the HAPS.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mapx/config.hpp"
#include "mapx/random.hpp"

namespace mapx {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct DirectionCosines {
    double u = 0.0;
    double v = 0.0;
};

/// Platform and receive-array geometry derived from a config.
struct HapsGeometry {
    double altitude_m;
    double area_side_m;
    double wavelength_m;
    double element_spacing_m;  // half wavelength
    int array_p, array_q;
    int symbols_m, subcarriers_n;

    static HapsGeometry from(const ScenarioConfig& c) {
        const double lambda = kSpeedOfLight / c.carrier_hz;
        return HapsGeometry{c.haps_altitude_m, c.area_side_m, lambda, lambda / 2.0,
                            c.array_p,         c.array_q,     c.symbols_m, c.subcarriers_n};
    }

    int virtual_kx() const { return array_p * symbols_m; }
    int virtual_ky() const { return array_q * subcarriers_n; }

    /// Largest |u| seen from any ground point of the area (edge midpoint).
    double max_direction_cosine() const {
        const double half = area_side_m / 2.0;
        return half / std::sqrt(half * half + altitude_m * altitude_m);
    }

    double slant_range(Vec2 p) const { return std::sqrt(p.x * p.x + p.y * p.y + altitude_m * altitude_m); }

    bool contains(Vec2 p) const {
        const double half = area_side_m / 2.0;
        return std::abs(p.x) <= half && std::abs(p.y) <= half;
    }
};

inline DirectionCosines ground_to_direction_cosines(Vec2 p, double altitude_m) {
    const double r = std::sqrt(p.x * p.x + p.y * p.y + altitude_m * altitude_m);
    return {p.x / r, p.y / r};
}

/// Closed-form inverse of ground_to_direction_cosines; requires u^2 + v^2 < 1.
inline Vec2 direction_cosines_to_ground(DirectionCosines d, double altitude_m) {
    const double w2 = 1.0 - d.u * d.u - d.v * d.v;
    if (!(w2 > 0.0)) throw std::domain_error("direction cosines must satisfy u^2 + v^2 < 1");
    const double scale = altitude_m / std::sqrt(w2);
    return {d.u * scale, d.v * scale};
}

struct DeviceSet {
    std::vector<Vec2> positions;
    std::vector<DirectionCosines> directions;

    std::size_t count() const { return positions.size(); }
};

/// round(density x area); throws when the result is zero.
inline std::size_t expected_device_count(const ScenarioConfig& c) {
    const double n = std::round(c.device_density_per_km2 * c.area_km2());
    if (!(n >= 1.0)) throw std::invalid_argument("device density x area rounds to zero devices");
    return static_cast<std::size_t>(n);
}

inline DeviceSet make_device_set(std::vector<Vec2> positions, const HapsGeometry& geom) {
    DeviceSet set;
    set.directions.reserve(positions.size());
    for (const Vec2 p : positions) set.directions.push_back(ground_to_direction_cosines(p, geom.altitude_m));
    set.positions = std::move(positions);
    return set;
}

/// Uniform i.i.d. placement over the square area.
inline DeviceSet place_devices(const ScenarioConfig& c, Rng& rng) {
    const std::size_t n = expected_device_count(c);
    const HapsGeometry geom = HapsGeometry::from(c);
    const double half = c.area_side_m / 2.0;
    std::uniform_real_distribution<double> coord(-half, half);
    std::vector<Vec2> positions(n);
    for (auto& p : positions) {
        p.x = coord(rng);
        p.y = coord(rng);
    }
    return make_device_set(std::move(positions), geom);
}

/// Cell centres of the square evaluation grid; row index runs along y, column along x.
struct EvalGrid {
    int side;
    double area_side_m;

    static EvalGrid from(const ScenarioConfig& c) { return {c.eval_grid_side, c.area_side_m}; }

    double cell_size() const { return area_side_m / side; }
    Vec2 center(int row, int col) const {
        const double half = area_side_m / 2.0;
        return {-half + (col + 0.5) * cell_size(), -half + (row + 0.5) * cell_size()};
    }
};

}  // namespace mapx
