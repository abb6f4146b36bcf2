#include <gtest/gtest.h>

#include <cmath>

#include "mapx/config.hpp"
#include "mapx/experiment.hpp"
#include "mapx/metrics.hpp"
#include "mapx/recon_linear.hpp"
#include "oracles.hpp"

using namespace mapx;

namespace {

Eigen::MatrixXcd random_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::noise);
    std::normal_distribution<double> normal;
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = {normal(rng), normal(rng)};
    return m;
}

double max_rel(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

ChannelRealization noiseless_los(const DeviceSet& devs, const HapsGeometry& g, const ScenarioConfig& c) {
    Rng rng = make_rng(1, Stream::fading);
    ChannelRealization ch = draw_channel(devs, g, c, rng);
    ch.noise_variance = 0.0;
    return ch;
}

AoAMap map_of(std::initializer_list<cplx> values) {
    AoAMap m{Eigen::MatrixXcd(1, static_cast<Eigen::Index>(values.size()))};
    Eigen::Index j = 0;
    for (const cplx v : values) m.bins(0, j++) = v;
    return m;
}

}  // namespace

TEST(AoATransform, MatchesSteeringSums) {
    for (const auto& [kx, ky] : {std::pair{48, 48}, std::pair{8, 12}, std::pair{6, 10}}) {
        const Eigen::MatrixXcd v = random_matrix(kx, ky, static_cast<std::uint64_t>(kx * 100 + ky));
        EXPECT_LT(max_rel(aoa_transform(v).bins, oracle::steering_sum(v)), 1e-9) << kx << "x" << ky;
    }
}

TEST(AoATransform, ConstantInputConcentratesAtNadirBin) {
    const Eigen::MatrixXcd v = Eigen::MatrixXcd::Constant(48, 48, cplx(0.3, -0.2));
    const AoAMap b = aoa_transform(v);
    const double peak = std::abs(b.bins(24, 24));
    EXPECT_NEAR(peak, std::abs(cplx(0.3, -0.2)) * 48 * 48, 1e-9);
    Eigen::MatrixXd rest = b.bins.cwiseAbs();
    rest(24, 24) = 0.0;
    EXPECT_LT(rest.maxCoeff() / peak, 1e-9);
}

TEST(AoATransform, DeviceOnBinDirectionSumsCoherently) {
    ScenarioConfig c = desk_config();
    c.rician_k_db = INFINITY;
    const HapsGeometry g = HapsGeometry::from(c);
    const DirectionCosines d{bin_direction(30, 48), bin_direction(20, 48)};
    const DeviceSet devs = make_device_set({direction_cosines_to_ground(d, g.altitude_m)}, g);
    const ChannelRealization ch = noiseless_los(devs, g, c);
    Rng noise = make_rng(1, Stream::noise);
    const auto pair = simulate_reception(devs, std::vector<double>{1.0}, ch, g, AmplitudeCodec::from(c), noise);
    const AoAMap b = aoa_transform(pair.information, g);
    const double a = AmplitudeCodec::from(c).encode(1.0);
    EXPECT_NEAR(std::abs(b.bins(30, 20)) / (ch.tx_amplitude * std::abs(ch.gains[0]) * a * 48 * 48), 1.0, 1e-9);
}

TEST(AoATransform, Parseval) {
    const Eigen::MatrixXcd v = random_matrix(48, 48, 3);
    const AoAMap b = aoa_transform(v);
    EXPECT_NEAR(b.bins.squaredNorm() / (48.0 * 48.0 * v.squaredNorm()), 1.0, 1e-12);
}

TEST(AoATransform, ShapeMismatch) {
    const HapsGeometry g = HapsGeometry::from(desk_config());
    EXPECT_THROW(aoa_transform(SymbolTensor(2, 2, 2, 2), g), std::invalid_argument);
}

TEST(DivideAndClip, Examples) {
    const ScenarioConfig c = desk_config();
    const AoAMap ref = map_of({1.0, cplx(0.0, 2.0), 1.0, 1.0, 1e-4});
    const AmplitudeMap same = divide_and_clip(ref, ref, c);
    for (int j = 0; j < 4; ++j) {
        EXPECT_TRUE(same.valid(0, j));
        EXPECT_NEAR(same.amplitude(0, j), 1.0, 1e-15);
    }
    EXPECT_FALSE(same.valid(0, 4));  // 1e-4 < 1e-3 * max |b_ref|

    const AoAMap info = map_of({2.5, cplx(0.0, -0.6), 0.7, cplx(1.0, 5.0), 1.0});
    const AmplitudeMap clipped = divide_and_clip(ref, info, c);
    EXPECT_DOUBLE_EQ(clipped.amplitude(0, 0), 1.8);
    EXPECT_DOUBLE_EQ(clipped.amplitude(0, 1), 0.2);  // Re(-0.6j / 2j) = -0.3
    EXPECT_DOUBLE_EQ(clipped.amplitude(0, 2), 0.7);
    EXPECT_DOUBLE_EQ(clipped.amplitude(0, 3), 1.0);

    EXPECT_THROW(divide_and_clip(ref, map_of({1.0}), c), std::invalid_argument);
}

TEST(GroundMapping, NearestBinRule) {
    EXPECT_EQ(nearest_bin(0.0, 48), 24);
    EXPECT_EQ(nearest_bin(bin_direction(31, 48), 48), 31);
    EXPECT_EQ(nearest_bin(bin_direction(31, 48) + 0.4 / 24.0, 48), 31);
    EXPECT_EQ(nearest_bin(bin_direction(31, 48) + 0.6 / 24.0, 48), 32);
    // Exactly halfway between bins 24 and 25: smaller index wins.
    EXPECT_EQ(nearest_bin(0.5 / 24.0, 48), 24);
    EXPECT_EQ(nearest_bin(-0.5 / 24.0, 48), 23);
    EXPECT_EQ(nearest_bin(-1.0, 48), 0);
    EXPECT_EQ(nearest_bin(0.999, 48), 0);  // wraps onto u = -1

    const ScenarioConfig c = desk_config();
    const HapsGeometry g = HapsGeometry::from(c);
    const GroundBinLookup lut = GroundBinLookup::build(g, EvalGrid::from(c));
    // Evaluation cell (24, 24) is the one just above/right of nadir.
    const std::size_t idx = 24 * 48 + 24;
    EXPECT_EQ(lut.bin_u[idx], 24);
    EXPECT_EQ(lut.bin_v[idx], 24);
}

TEST(Linear, ExactRecoveryOfUniformField) {
    ScenarioConfig c = desk_config();
    c.rician_k_db = INFINITY;
    const HapsGeometry g = HapsGeometry::from(c);
    Rng place = make_rng(1, Stream::placement);
    const DeviceSet devs = place_devices(c, place);
    const ChannelRealization ch = noiseless_los(devs, g, c);
    for (const double s0 : {-2.0, 0.0, 1.5}) {
        Rng noise = make_rng(1, Stream::noise);
        const std::vector<double> s(devs.count(), s0);
        const ReceivedPair pair = simulate_reception(devs, s, ch, g, AmplitudeCodec::from(c), noise);
        const AmplitudeMap amp = divided_map(pair, g, c);
        for (Eigen::Index i = 0; i < amp.amplitude.size(); ++i)
            if (amp.valid.data()[i]) {
                EXPECT_NEAR(amp.amplitude.data()[i], AmplitudeCodec::from(c).encode(s0), 1e-9);
            }
        const std::vector<ReceivedPair> pairs{pair};
        const GroundEstimate est = reconstruct_linear(pairs, g, c);
        ASSERT_GT(est.valid.count(), 0);
        for (Eigen::Index i = 0; i < est.values.size(); ++i)
            if (est.valid.data()[i]) {
                EXPECT_NEAR(est.values.data()[i], s0, 1e-6);
            }
    }
}

TEST(Linear, ChannelScaleInvariance) {
    const ScenarioConfig c = desk_config();
    const HapsGeometry g = HapsGeometry::from(c);
    const Trial t = realize_trial(c, 2);
    Rng fading = make_rng(2, Stream::fading);
    ChannelRealization ch = draw_channel(t.devices, g, c, fading);
    ch.noise_variance = 0.0;
    ChannelRealization scaled = ch;
    for (cplx& gi : scaled.gains) gi *= std::polar(0.01, -2.5);
    Rng n1 = make_rng(2, Stream::noise), n2 = make_rng(2, Stream::noise);
    const std::vector<ReceivedPair> a{simulate_reception(t.devices, t.measurements, ch, g, AmplitudeCodec::from(c), n1)};
    const std::vector<ReceivedPair> b{
        simulate_reception(t.devices, t.measurements, scaled, g, AmplitudeCodec::from(c), n2)};
    const GroundEstimate ea = reconstruct_linear(a, g, c), eb = reconstruct_linear(b, g, c);
    EXPECT_TRUE((ea.valid == eb.valid).all());
    EXPECT_LT((ea.values - eb.values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Linear, IdenticalPairsAverageToSingle) {
    const ScenarioConfig c = desk_config();
    const HapsGeometry g = HapsGeometry::from(c);
    const Trial t = realize_trial(c, 0);
    const auto one = simulate_pairs(t, c, 1);
    const std::vector<ReceivedPair> three{one[0], one[0], one[0]};
    const GroundEstimate a = reconstruct_linear(one, g, c), b = reconstruct_linear(three, g, c);
    EXPECT_TRUE((a.valid == b.valid).all());
    EXPECT_LT((a.values - b.values).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(reconstruct_linear(std::vector<ReceivedPair>{}, g, c), std::invalid_argument);
}

TEST(Linear, ValidValuesInDecodedRange) {
    const ScenarioConfig c = desk_config();
    const Trial t = realize_trial(c, 1);
    const GroundEstimate est = reconstruct_linear(simulate_pairs(t, c, 2), HapsGeometry::from(c), c);
    for (Eigen::Index i = 0; i < est.values.size(); ++i)
        if (est.valid.data()[i]) {
            EXPECT_GE(est.values.data()[i], -3.0);
            EXPECT_LE(est.values.data()[i], 3.0);
        }
}

TEST(Linear, AveragingReducesError) {
    const ScenarioConfig c = desk_config();
    const HapsGeometry g = HapsGeometry::from(c);
    int better = 0;
    std::vector<double> snr1, snr2, snr4;
    for (int s = 0; s < 100; ++s) {
        const Trial t = realize_trial(c, static_cast<std::uint64_t>(s));
        const auto pairs = simulate_pairs(t, c, 4);
        const std::span<const ReceivedPair> all(pairs);
        const Score s1 = score_estimate(reconstruct_linear(all.first(1), g, c), t.truth);
        const Score s2 = score_estimate(reconstruct_linear(all.first(2), g, c), t.truth);
        const Score s4 = score_estimate(reconstruct_linear(all, g, c), t.truth);
        better += s4.mse < s1.mse;
        snr1.push_back(s1.snr_db);
        snr2.push_back(s2.snr_db);
        snr4.push_back(s4.snr_db);
    }
    EXPECT_GE(better, 95);
    EXPECT_LE(oracle::median(snr1), oracle::median(snr2));
    EXPECT_LE(oracle::median(snr2), oracle::median(snr4));
}
