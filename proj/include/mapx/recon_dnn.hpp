#pragma once

// Pointwise estimation with two small learned components wrapped around the
// linear estimator:
//   * a filter network (u, v) -> real window w[0..K) applied separably along
//     both virtual-array axes before beamforming towards the query direction;
//   * a soft-clipping network mapping each pair's raw amplitude ratio to an
//     amplitude estimate, followed by decoding.
// The model is trained online on (position, measurement) pairs relayed from
// the ground. At its reference initialization (all-ones window, identity clip)
// it reproduces the linear estimator.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mapx/config.hpp"
#include "mapx/estimate.hpp"
#include "mapx/field.hpp"
#include "mapx/mlp.hpp"
#include "mapx/phy.hpp"
#include "mapx/random.hpp"
#include "mapx/recon_linear.hpp"
#include "mapx/scenario.hpp"

namespace mapx {

inline constexpr int kFilterHidden1 = 96;
inline constexpr int kFilterHidden2 = 192;
inline constexpr int kClipHidden = 3;

/// A received pair unfolded onto the (square) virtual array, plus the peak
/// unwindowed reference magnitude that scales the degeneracy guard.
struct PreparedPair {
    Eigen::MatrixXcd reference;
    Eigen::MatrixXcd information;
    double reference_peak = 0.0;

    static PreparedPair from(const ReceivedPair& pair, const HapsGeometry& geom) {
        if (geom.virtual_kx() != geom.virtual_ky())
            throw std::invalid_argument("pointwise model requires a square virtual array");
        PreparedPair out{unfold_virtual(pair.reference, geom), unfold_virtual(pair.information, geom), 0.0};
        out.reference_peak = aoa_transform(out.reference).bins.cwiseAbs().maxCoeff();
        return out;
    }
};

inline std::vector<PreparedPair> prepare_pairs(std::span<const ReceivedPair> pairs, const HapsGeometry& geom) {
    std::vector<PreparedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(PreparedPair::from(p, geom));
    return out;
}

struct BeamformResult {
    double ratio = 0.0;
    bool degenerate = true;
};

namespace detail {

inline Eigen::VectorXcd steering(double direction, int extent) {
    Eigen::VectorXcd e(extent);
    for (int k = 0; k < extent; ++k) e(k) = std::polar(1.0, -kPi * k * direction);
    return e;
}

/// Shared body of filtered_beamform; fills dratio/dwindow when `grad` is non-empty.
inline BeamformResult beamform_impl(const PreparedPair& pair, DirectionCosines dir, const Eigen::VectorXd& window,
                                    double clip_epsilon, RatioStatistic statistic, Eigen::VectorXd* grad) {
    const int K = static_cast<int>(pair.reference.rows());
    if (window.size() != K) throw std::invalid_argument("filtered_beamform: window length must equal virtual extent");
    const Eigen::VectorXcd eu = steering(dir.u, K);
    const Eigen::VectorXcd ev = steering(dir.v, K);
    const Eigen::VectorXcd a = window.cast<cplx>().cwiseProduct(eu);
    const Eigen::VectorXcd c = window.cast<cplx>().cwiseProduct(ev);

    const Eigen::VectorXcd ref_c = pair.reference * c;
    const Eigen::VectorXcd info_c = pair.information * c;
    const cplx b_ref = a.transpose() * ref_c;
    const cplx b_info = a.transpose() * info_c;

    const double mean_abs = window.cwiseAbs().sum() / K;
    const double threshold = clip_epsilon * mean_abs * mean_abs * pair.reference_peak;
    BeamformResult out;
    if (!(std::abs(b_ref) >= threshold) || b_ref == cplx(0.0, 0.0)) return out;
    const cplx q = b_info / b_ref;
    out.ratio = statistic == RatioStatistic::real_part ? q.real() : std::abs(q);
    out.degenerate = false;
    if (!std::isfinite(out.ratio)) out.degenerate = true;

    if (grad && !out.degenerate) {
        // dB/dw_k = eu_k (V c)_k + ev_k (V^T a)_k
        const Eigen::VectorXcd ref_a = pair.reference.transpose() * a;
        const Eigen::VectorXcd info_a = pair.information.transpose() * a;
        const Eigen::VectorXcd d_ref = eu.cwiseProduct(ref_c) + ev.cwiseProduct(ref_a);
        const Eigen::VectorXcd d_info = eu.cwiseProduct(info_c) + ev.cwiseProduct(info_a);
        const Eigen::VectorXcd dq = (d_info - q * d_ref) / b_ref;
        if (statistic == RatioStatistic::real_part)
            *grad = dq.real();
        else
            *grad = (std::conj(q) * dq).real() / std::abs(q);
    }
    return out;
}

}  // namespace detail

/// B(u, v) = sum_{k,l} w[k] w[l] v[k, l] exp(-j pi (k u + l v)) for both
/// subframes; returns the ratio statistic of B_info / B_ref. The result is
/// flagged degenerate when |B_ref| < clip_epsilon * (mean |w|)^2 * peak
/// reference magnitude, which with an all-ones window is the linear guard.
inline BeamformResult filtered_beamform(const PreparedPair& pair, DirectionCosines dir, const Eigen::VectorXd& window,
                                        double clip_epsilon, RatioStatistic statistic = RatioStatistic::real_part) {
    return detail::beamform_impl(pair, dir, window, clip_epsilon, statistic, nullptr);
}

/// As filtered_beamform, also writing d(ratio)/d(window) into `grad`.
inline BeamformResult filtered_beamform(const PreparedPair& pair, DirectionCosines dir, const Eigen::VectorXd& window,
                                        double clip_epsilon, RatioStatistic statistic, Eigen::VectorXd& grad) {
    return detail::beamform_impl(pair, dir, window, clip_epsilon, statistic, &grad);
}

struct PointwiseModel {
    Mlp filter_net;
    Mlp clip_net;
    double direction_scale = 1.0;  // filter-net input is (u, v) / direction_scale
    AdamOptimizer filter_optimizer;
    AdamOptimizer clip_optimizer;

    int window_length() const { return filter_net.output_size(); }

    Eigen::VectorXd window(DirectionCosines d) const {
        return filter_net.forward(Eigen::Vector2d(d.u / direction_scale, d.v / direction_scale));
    }
    double soft_clip(double ratio) const { return clip_net.forward(Eigen::VectorXd::Constant(1, ratio))(0); }

    void reset_optimizers(double learning_rate) {
        filter_optimizer = AdamOptimizer(filter_net.parameter_count(), learning_rate);
        clip_optimizer = AdamOptimizer(clip_net.parameter_count(), learning_rate);
    }
};

/// Filter net 2 -> 96 -> 192 -> K (ReLU); clip net 1 -> 3 -> 3 -> 1 (Tanh).
inline PointwiseModel make_untrained_model(const HapsGeometry& geom, const ScenarioConfig& c) {
    if (geom.virtual_kx() != geom.virtual_ky())
        throw std::invalid_argument("pointwise model requires a square virtual array");
    PointwiseModel m;
    m.filter_net = Mlp({2, kFilterHidden1, kFilterHidden2, geom.virtual_kx()}, Activation::relu);
    m.clip_net = Mlp({1, kClipHidden, kClipHidden, 1}, Activation::tanh);
    m.direction_scale = geom.max_direction_cosine();
    m.reset_optimizers(c.dnn_learning_rate);
    return m;
}

/// Small input gain of the identity-like clip net; its deviation from the
/// identity on [encode_min, encode_max] is about 2 gain^2 in decoded units.
inline constexpr double kClipIdentityGain = 0.015;

/// Reference initialization. Filter net: random hidden layers, zero output
/// weights and output biases 1, so the window is exactly all ones. Clip net: one channel carries the centred ratio through both Tanh
/// layers in their linear regime and is rescaled at the output, making the net
/// the identity on the encode range to within ~5e-4 decoded units; the other
/// channels start random but disconnected from the output.
inline PointwiseModel make_reference_model(const HapsGeometry& geom, const ScenarioConfig& c, Rng& rng) {
    PointwiseModel m = make_untrained_model(geom, c);

    m.filter_net.init_random(rng);
    const std::size_t last = m.filter_net.layer_count() - 1;
    m.filter_net.weight(last).setZero();
    m.filter_net.bias(last).setConstant(1.0);

    m.clip_net.init_random(rng);
    const AmplitudeCodec codec = AmplitudeCodec::from(c);
    const double centre = codec.reference();
    const double half = 0.5 * (codec.max - codec.min);
    const double g = kClipIdentityGain;
    m.clip_net.weight(0)(0, 0) = g / half;
    m.clip_net.bias(0)(0) = -g * centre / half;
    m.clip_net.weight(1).row(0).setZero();
    m.clip_net.weight(1)(0, 0) = 1.0;
    m.clip_net.bias(1)(0) = 0.0;
    m.clip_net.weight(2).setZero();
    m.clip_net.weight(2)(0, 0) = half / g;
    m.clip_net.bias(2)(0) = centre;
    return m;
}

/// Query direction snapped to the centre of the AoA bin containing it, the
/// same bin the linear method reads for that location.
inline DirectionCosines snapped_direction(DirectionCosines d, int extent) {
    return {bin_direction(nearest_bin(d.u, extent), extent), bin_direction(nearest_bin(d.v, extent), extent)};
}

/// Estimate at one direction: per pair, decode(soft_clip(ratio)); averaged
/// over the non-degenerate pairs. Empty when every pair is degenerate.
inline std::optional<double> dnn_estimate_direction(const PointwiseModel& model, std::span<const PreparedPair> pairs,
                                                    DirectionCosines query, const ScenarioConfig& c) {
    if (pairs.empty()) throw std::invalid_argument("dnn_estimate: no subframe pairs");
    const int K = static_cast<int>(pairs.front().reference.rows());
    const DirectionCosines dir = snapped_direction(query, K);
    const Eigen::VectorXd window = model.window(dir);
    const AmplitudeCodec codec = AmplitudeCodec::from(c);
    double sum = 0.0;
    int used = 0;
    for (const auto& pair : pairs) {
        const BeamformResult r = filtered_beamform(pair, dir, window, c.clip_epsilon, c.ratio_statistic);
        if (r.degenerate) continue;
        const double amp = model.soft_clip(r.ratio);
        if (!std::isfinite(amp)) continue;
        sum += codec.decode(amp);
        ++used;
    }
    if (used == 0) return std::nullopt;
    return sum / used;
}

/// Estimate at a ground position; throws when every pair is degenerate there.
inline double dnn_estimate(const PointwiseModel& model, std::span<const PreparedPair> pairs, Vec2 position,
                           const HapsGeometry& geom, const ScenarioConfig& c) {
    const auto est = dnn_estimate_direction(model, pairs, ground_to_direction_cosines(position, geom.altitude_m), c);
    if (!est) throw std::runtime_error("dnn_estimate: all pairs degenerate at the query location");
    return *est;
}

inline GroundEstimate dnn_map(const PointwiseModel& model, std::span<const PreparedPair> pairs,
                              const HapsGeometry& geom, const ScenarioConfig& c) {
    const GroundBinLookup lut = GroundBinLookup::build(geom, EvalGrid::from(c));
    GroundEstimate out{Eigen::MatrixXd::Zero(lut.side, lut.side), Mask::Constant(lut.side, lut.side, false)};
    for (int r = 0; r < lut.side; ++r)
        for (int col = 0; col < lut.side; ++col) {
            const auto est =
                dnn_estimate_direction(model, pairs, lut.cell_direction[static_cast<std::size_t>(r) * lut.side + col], c);
            if (!est) continue;
            out.values(r, col) = *est;
            out.valid(r, col) = true;
        }
    return out;
}

struct TrainingSample {
    Vec2 position;
    double measurement = 0.0;
};

namespace detail {

/// Squared error of one sample (training form: affine decode, no clamp) and
/// its gradients accumulated into the two buffers. Empty if all pairs are degenerate.
inline std::optional<double> sample_loss(const PointwiseModel& model, std::span<const PreparedPair> pairs,
                                         DirectionCosines dir, double target, const ScenarioConfig& c,
                                         std::span<double> filter_grad, std::span<double> clip_grad) {
    const AmplitudeCodec codec = AmplitudeCodec::from(c);
    Mlp::Tape filter_tape;
    const Eigen::VectorXd window =
        model.filter_net.forward(Eigen::Vector2d(dir.u / model.direction_scale, dir.v / model.direction_scale),
                                 filter_tape);

    struct PerPair {
        Mlp::Tape tape;
        Eigen::VectorXd dratio_dw;
        double estimate;
    };
    std::vector<PerPair> used;
    used.reserve(pairs.size());
    for (const auto& pair : pairs) {
        PerPair pp;
        const BeamformResult r = filtered_beamform(pair, dir, window, c.clip_epsilon, c.ratio_statistic, pp.dratio_dw);
        if (r.degenerate) continue;
        const double amp = model.clip_net.forward(Eigen::VectorXd::Constant(1, r.ratio), pp.tape)(0);
        pp.estimate = codec.decode_affine(amp);
        used.push_back(std::move(pp));
    }
    if (used.empty()) return std::nullopt;

    double estimate = 0.0;
    for (const auto& pp : used) estimate += pp.estimate;
    estimate /= static_cast<double>(used.size());
    const double err = estimate - target;

    const double d_amp = 2.0 * err / static_cast<double>(used.size()) / codec.slope();
    Eigen::VectorXd window_grad = Eigen::VectorXd::Zero(window.size());
    for (const auto& pp : used) {
        const Eigen::VectorXd d_ratio = model.clip_net.backward(pp.tape, Eigen::VectorXd::Constant(1, d_amp), clip_grad);
        window_grad += d_ratio(0) * pp.dratio_dw;
    }
    model.filter_net.backward(filter_tape, window_grad, filter_grad);
    return err * err;
}

}  // namespace detail

struct TrainReport {
    std::vector<double> loss;         // mean minibatch loss of every step
    std::vector<double> holdout_mse;  // held-out error at step 0, interval, 2 interval, ...
    int best_step = 0;                // training steps reflected in the returned model
};

/// Mean squared error of the inference estimator over samples whose query is
/// not degenerate; +inf when every query is.
inline double holdout_error(const PointwiseModel& model, std::span<const PreparedPair> pairs,
                            std::span<const DirectionCosines> dirs, std::span<const TrainingSample> samples,
                            const ScenarioConfig& c) {
    double sum = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto est = dnn_estimate_direction(model, pairs, dirs[i], c);
        if (!est) continue;
        const double e = *est - samples[i].measurement;
        sum += e * e;
        ++used;
    }
    return used ? sum / used : INFINITY;
}

/// Minibatch Adam on the squared error between the estimate and the relayed
/// measurement, both networks jointly. Minibatches walk a fresh permutation of
/// the fitting set each epoch.
///
/// With dnn_holdout_fraction > 0, an evenly strided share of the relayed
/// samples is held out of fitting; the inference-form error on it is measured
/// every dnn_eval_interval steps and the parameters with the lowest error
/// (possibly the initial ones) are restored at the end.
inline TrainReport train_online(PointwiseModel& model, std::span<const PreparedPair> pairs,
                                std::span<const TrainingSample> samples, const HapsGeometry& geom,
                                const ScenarioConfig& c, Rng& rng) {
    if (samples.empty()) throw std::invalid_argument("train_online: empty training set");
    if (pairs.empty()) throw std::invalid_argument("train_online: no subframe pairs");
    const int K = static_cast<int>(pairs.front().reference.rows());

    std::vector<TrainingSample> fit, held;
    std::vector<DirectionCosines> fit_dirs, held_dirs;
    const double f = samples.size() >= 2 ? c.dnn_holdout_fraction : 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!geom.contains(s.position)) throw std::invalid_argument("train_online: training position outside coverage");
        const DirectionCosines d = snapped_direction(ground_to_direction_cosines(s.position, geom.altitude_m), K);
        const bool hold = std::floor((i + 1) * f) > std::floor(i * f);
        (hold ? held : fit).push_back(s);
        (hold ? held_dirs : fit_dirs).push_back(d);
    }
    if (fit.empty()) throw std::invalid_argument("train_online: holdout leaves no samples to fit");

    model.reset_optimizers(c.dnn_learning_rate);
    std::vector<double> filter_grad(model.filter_net.parameter_count());
    std::vector<double> clip_grad(model.clip_net.parameter_count());
    std::vector<std::size_t> order(fit.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();

    TrainReport report;
    report.loss.reserve(static_cast<std::size_t>(c.dnn_steps));
    std::vector<double> best_filter, best_clip;
    double best_error = INFINITY;
    auto checkpoint = [&](int step) {
        if (held.empty()) return;
        const double err = holdout_error(model, pairs, held_dirs, held, c);
        report.holdout_mse.push_back(err);
        if (err < best_error) {
            best_error = err;
            report.best_step = step;
            best_filter.assign(model.filter_net.parameters().begin(), model.filter_net.parameters().end());
            best_clip.assign(model.clip_net.parameters().begin(), model.clip_net.parameters().end());
        }
    };
    checkpoint(0);

    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(c.dnn_batch), fit.size());
    for (int step = 0; step < c.dnn_steps; ++step) {
        std::fill(filter_grad.begin(), filter_grad.end(), 0.0);
        std::fill(clip_grad.begin(), clip_grad.end(), 0.0);
        double loss = 0.0;
        int counted = 0;
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            const auto l = detail::sample_loss(model, pairs, fit_dirs[idx], fit[idx].measurement, c, filter_grad,
                                               clip_grad);
            if (!l) continue;
            loss += *l;
            ++counted;
        }
        if (counted == 0) throw std::runtime_error("train_online: every sample in the minibatch is degenerate");
        const double inv = 1.0 / counted;
        for (double& g : filter_grad) g *= inv;
        for (double& g : clip_grad) g *= inv;
        model.filter_optimizer.step(model.filter_net.parameters(), filter_grad);
        model.clip_optimizer.step(model.clip_net.parameters(), clip_grad);
        report.loss.push_back(loss * inv);
        if ((step + 1) % c.dnn_eval_interval == 0 || step + 1 == c.dnn_steps) checkpoint(step + 1);
    }

    if (held.empty()) {
        report.best_step = c.dnn_steps;
    } else if (report.best_step != c.dnn_steps) {
        std::copy(best_filter.begin(), best_filter.end(), model.filter_net.parameters().begin());
        std::copy(best_clip.begin(), best_clip.end(), model.clip_net.parameters().begin());
    }
    return report;
}

/// Relayed training set: `count` distinct devices (or all of them) with their
/// true measurements.
inline std::vector<TrainingSample> relay_training_set(const DeviceSet& devices, std::span<const double> measurements,
                                                      std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx(devices.count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(count, idx.size()));
    std::sort(idx.begin(), idx.end());
    std::vector<TrainingSample> out;
    out.reserve(idx.size());
    for (const std::size_t i : idx) out.push_back({devices.positions[i], measurements[i]});
    return out;
}

// Model file: text header terminated by an empty line, then float64
// little-endian parameters (filter net, then clip net).
//
//   MAPX-POINTWISE-MODEL 1
//   direction_scale <value>
//   net filter <activation> <n> <w0> ... <w_{n-1}>
//   net clip <activation> <n> <w0> ... <w_{n-1}>
//   params <count>
//
inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline void write_f64_le(std::ostream& out, std::span<const double> values) {
    for (const double v : values) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
}

inline void read_f64_le(std::istream& in, std::span<double> values) {
    for (double& v : values) {
        std::uint64_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw std::runtime_error("model file truncated");
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
    }
}

inline void write_net_line(std::ostream& out, const char* name, const Mlp& net) {
    out << "net " << name << ' ' << to_string(net.hidden_activation()) << ' ' << net.widths().size();
    for (const int w : net.widths()) out << ' ' << w;
    out << '\n';
}

inline Mlp read_net_line(const std::string& line, const std::string& expected_name) {
    std::istringstream in(line);
    std::string tag, name, act;
    std::size_t n = 0;
    if (!(in >> tag >> name >> act >> n) || tag != "net" || name != expected_name)
        throw std::runtime_error("model file: malformed '" + expected_name + "' net line");
    std::vector<int> widths(n);
    for (auto& w : widths)
        if (!(in >> w)) throw std::runtime_error("model file: malformed widths");
    return Mlp(widths, activation_from_string(act));
}

}  // namespace detail

inline void save_model(const PointwiseModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
    std::ostringstream scale;
    scale.precision(17);
    scale << m.direction_scale;
    out << "MAPX-POINTWISE-MODEL " << kModelFormatVersion << '\n' << "direction_scale " << scale.str() << '\n';
    detail::write_net_line(out, "filter", m.filter_net);
    detail::write_net_line(out, "clip", m.clip_net);
    out << "params " << (m.filter_net.parameter_count() + m.clip_net.parameter_count()) << "\n\n";
    detail::write_f64_le(out, m.filter_net.parameters());
    detail::write_f64_le(out, m.clip_net.parameters());
    if (!out) throw std::runtime_error("failed writing model file '" + path + "'");
}

/// Loaded models carry fresh optimizer state.
inline PointwiseModel load_model(const std::string& path, double learning_rate = 1e-3) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    std::string line;
    std::getline(in, line);
    std::istringstream magic(line);
    std::string tag;
    int version = 0;
    if (!(magic >> tag >> version) || tag != "MAPX-POINTWISE-MODEL") throw std::runtime_error("not a model file");
    if (version != kModelFormatVersion)
        throw std::runtime_error("unsupported model format version " + std::to_string(version));
    PointwiseModel m;
    std::getline(in, line);
    {
        std::istringstream s(line);
        if (!(s >> tag >> m.direction_scale) || tag != "direction_scale")
            throw std::runtime_error("model file: missing direction_scale");
    }
    std::getline(in, line);
    m.filter_net = detail::read_net_line(line, "filter");
    std::getline(in, line);
    m.clip_net = detail::read_net_line(line, "clip");
    std::getline(in, line);
    {
        std::istringstream s(line);
        std::size_t count = 0;
        if (!(s >> tag >> count) || tag != "params" ||
            count != m.filter_net.parameter_count() + m.clip_net.parameter_count())
            throw std::runtime_error("model file: parameter count does not match widths");
    }
    std::getline(in, line);
    if (!line.empty()) throw std::runtime_error("model file: missing header terminator");
    detail::read_f64_le(in, m.filter_net.parameters());
    detail::read_f64_le(in, m.clip_net.parameters());
    m.reset_optimizers(learning_rate);
    return m;
}

}  // namespace mapx
