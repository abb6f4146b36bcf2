#pragma once

// HAPS-standalone linear reconstruction: AoA transform of the virtual array,
// per-bin division of information by reference, hard clipping, nearest-bin
// mapping onto the ground grid, decoding, and averaging over subframe pairs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapx/config.hpp"
#include "mapx/estimate.hpp"
#include "mapx/fft.hpp"
#include "mapx/field.hpp"
#include "mapx/phy.hpp"
#include "mapx/scenario.hpp"

namespace mapx {

/// Centred bin index i of an axis with `extent` bins corresponds to
/// r = i - extent/2 and direction cosine u_r = 2 r / extent, u_r in [-1, 1).
inline double bin_direction(int index, int extent) {
    return 2.0 * static_cast<double>(index - extent / 2) / static_cast<double>(extent);
}

/// Nearest centred bin to direction cosine u; ties go to the smaller index.
inline int nearest_bin(double u, int extent) {
    const int half = extent / 2;
    long r = static_cast<long>(std::ceil(u * extent / 2.0 - 0.5));
    while (r >= extent - half) r -= extent;
    while (r < -half) r += extent;
    return static_cast<int>(r) + half;
}

/// b[r, t] = sum_{k,l} v[k, l] exp(-j pi (k u_r + l v_t)), stored in centred
/// bin order (row = u bin, col = v bin).
struct AoAMap {
    Eigen::MatrixXcd bins;

    int extent_u() const { return static_cast<int>(bins.rows()); }
    int extent_v() const { return static_cast<int>(bins.cols()); }
};

inline AoAMap aoa_transform(const Eigen::MatrixXcd& virtual_array) {
    const int kx = static_cast<int>(virtual_array.rows());
    const int ky = static_cast<int>(virtual_array.cols());
    if (kx == 0 || ky == 0) throw std::invalid_argument("aoa_transform: empty virtual array");
    std::vector<cplx> buf(static_cast<std::size_t>(kx) * ky);
    for (int k = 0; k < kx; ++k)
        for (int l = 0; l < ky; ++l) buf[static_cast<std::size_t>(k) * ky + l] = virtual_array(k, l);
    fft2_inplace(buf, kx, ky, FftDirection::forward);
    AoAMap out{Eigen::MatrixXcd(kx, ky)};
    for (int i = 0; i < kx; ++i) {
        const int fi = ((i - kx / 2) % kx + kx) % kx;
        for (int j = 0; j < ky; ++j) {
            const int fj = ((j - ky / 2) % ky + ky) % ky;
            out.bins(i, j) = buf[static_cast<std::size_t>(fi) * ky + fj];
        }
    }
    return out;
}

inline AoAMap aoa_transform(const SymbolTensor& y, const HapsGeometry& geom) {
    const Eigen::MatrixXcd v = unfold_virtual(y, geom);
    if (v.rows() != geom.virtual_kx() || v.cols() != geom.virtual_ky())
        throw std::invalid_argument("aoa_transform: shape does not match geometry");
    return aoa_transform(v);
}

/// Clipped per-bin amplitude ratio, in encoded-amplitude units.
struct AmplitudeMap {
    Eigen::MatrixXd amplitude;
    Mask valid;
};

/// Per-bin ratio statistic of info over reference, without clipping.
inline double bin_ratio(cplx info, cplx ref, RatioStatistic statistic) {
    const cplx q = info / ref;
    return statistic == RatioStatistic::real_part ? q.real() : std::abs(q);
}

/// Ratio clipped to [encode_min, encode_max]. Bins whose reference magnitude is
/// below clip_epsilon * max |b_ref| are invalid and carry the reference amplitude.
inline AmplitudeMap divide_and_clip(const AoAMap& ref, const AoAMap& info, const ScenarioConfig& c) {
    if (ref.bins.rows() != info.bins.rows() || ref.bins.cols() != info.bins.cols())
        throw std::invalid_argument("divide_and_clip: shape mismatch");
    const Eigen::MatrixXd mag = ref.bins.cwiseAbs();
    const double threshold = c.clip_epsilon * mag.maxCoeff();
    const AmplitudeCodec codec = AmplitudeCodec::from(c);
    AmplitudeMap out{Eigen::MatrixXd::Constant(mag.rows(), mag.cols(), codec.reference()),
                     Mask::Constant(mag.rows(), mag.cols(), false)};
    for (Eigen::Index i = 0; i < mag.rows(); ++i)
        for (Eigen::Index j = 0; j < mag.cols(); ++j) {
            if (!(mag(i, j) >= threshold) || mag(i, j) == 0.0) continue;
            const double ratio = bin_ratio(info.bins(i, j), ref.bins(i, j), c.ratio_statistic);
            out.amplitude(i, j) = std::clamp(ratio, codec.min, codec.max);
            out.valid(i, j) = true;
        }
    return out;
}

/// For each evaluation cell, the AoA bin nearest (in u and v independently,
/// which is nearest in Euclidean (u, v) distance on a rectangular bin lattice).
struct GroundBinLookup {
    int side = 0;
    std::vector<int> bin_u, bin_v;  // row-major over the evaluation grid
    std::vector<DirectionCosines> cell_direction;

    static GroundBinLookup build(const HapsGeometry& geom, const EvalGrid& grid) {
        GroundBinLookup lut;
        lut.side = grid.side;
        const std::size_t n = static_cast<std::size_t>(grid.side) * grid.side;
        lut.bin_u.resize(n);
        lut.bin_v.resize(n);
        lut.cell_direction.resize(n);
        for (int r = 0; r < grid.side; ++r)
            for (int c = 0; c < grid.side; ++c) {
                const std::size_t idx = static_cast<std::size_t>(r) * grid.side + c;
                const DirectionCosines d = ground_to_direction_cosines(grid.center(r, c), geom.altitude_m);
                lut.cell_direction[idx] = d;
                lut.bin_u[idx] = nearest_bin(d.u, geom.virtual_kx());
                lut.bin_v[idx] = nearest_bin(d.v, geom.virtual_ky());
            }
        return lut;
    }
};

inline GroundEstimate aoa_to_ground(const AmplitudeMap& map, const GroundBinLookup& lut, const AmplitudeCodec& codec) {
    GroundEstimate out{Eigen::MatrixXd::Zero(lut.side, lut.side), Mask::Constant(lut.side, lut.side, false)};
    for (int r = 0; r < lut.side; ++r)
        for (int c = 0; c < lut.side; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * lut.side + c;
            const int bu = lut.bin_u[idx], bv = lut.bin_v[idx];
            if (!map.valid(bu, bv)) continue;
            out.values(r, c) = codec.decode(map.amplitude(bu, bv));
            out.valid(r, c) = true;
        }
    return out;
}

inline GroundEstimate aoa_to_ground(const AmplitudeMap& map, const HapsGeometry& geom, const ScenarioConfig& c) {
    return aoa_to_ground(map, GroundBinLookup::build(geom, EvalGrid::from(c)), AmplitudeCodec::from(c));
}

/// Divided AoA-domain map of one pair (the per-pair input of image models).
inline AmplitudeMap divided_map(const ReceivedPair& pair, const HapsGeometry& geom, const ScenarioConfig& c) {
    return divide_and_clip(aoa_transform(pair.reference, geom), aoa_transform(pair.information, geom), c);
}

inline GroundEstimate reconstruct_linear(std::span<const ReceivedPair> pairs, const HapsGeometry& geom,
                                         const ScenarioConfig& c) {
    if (pairs.empty()) throw std::invalid_argument("reconstruct_linear: no subframe pairs");
    const GroundBinLookup lut = GroundBinLookup::build(geom, EvalGrid::from(c));
    const AmplitudeCodec codec = AmplitudeCodec::from(c);
    std::vector<GroundEstimate> per_pair;
    per_pair.reserve(pairs.size());
    for (const auto& pair : pairs) per_pair.push_back(aoa_to_ground(divided_map(pair, geom, c), lut, codec));
    return average_estimates(per_pair);
}

}  // namespace mapx
