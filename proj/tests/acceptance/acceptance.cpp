// Acceptance checks: one PASS/FAIL line per criterion with the measured value
// and its pinned threshold. Exit status 1 if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "mapx/mapx.hpp"

using namespace mapx;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ChannelRealization noiseless(const DeviceSet& devs, const HapsGeometry& g, const ScenarioConfig& c,
                             std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::fading);
    ChannelRealization ch = draw_channel(devs, g, c, rng);
    ch.noise_variance = 0.0;
    return ch;
}

void virtual_array_exactness() {
    const auto start = std::chrono::steady_clock::now();
    ScenarioConfig c = desk_config();
    c.rician_k_db = INFINITY;
    const HapsGeometry g = HapsGeometry::from(c);
    const AmplitudeCodec codec = AmplitudeCodec::from(c);
    Rng rng = make_rng(1, Stream::placement);
    std::uniform_real_distribution<double> coord(-c.area_side_m / 2, c.area_side_m / 2);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const DeviceSet devs = make_device_set({{coord(rng), coord(rng)}}, g);
        const ChannelRealization ch = noiseless(devs, g, c, static_cast<std::uint64_t>(trial));
        const double s = 0.37 * trial - 1.5;
        Rng noise = make_rng(1, Stream::noise);
        const ReceivedPair pair = simulate_reception(devs, std::vector<double>{s}, ch, g, codec, noise);
        const Eigen::MatrixXcd v = unfold_virtual(pair.information, g);
        const DirectionCosines d = devs.directions[0];
        const oracle::cplx coeff = ch.tx_amplitude * ch.gains[0] * codec.encode(s);
        for (int k = 0; k < v.rows(); ++k)
            for (int l = 0; l < v.cols(); ++l) {
                const oracle::cplx ideal = coeff * std::polar(1.0, oracle::pi * (k * d.u + l * d.v));
                worst = std::max(worst, std::abs(v(k, l) - ideal) / std::abs(ideal));
            }
    }
    const double t = seconds_since(start);
    report(worst < 1e-12 && t < 1.0, "virtual_array_exactness",
           fmt("max relative error %.3e (< 1e-12), runtime %.2f s (< 1 s)", worst, t));
}

void oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng = make_rng(2, Stream::noise);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        Eigen::MatrixXcd v(48, 48);
        for (Eigen::Index j = 0; j < v.size(); ++j) v.data()[j] = {normal(rng), normal(rng)};
        const Eigen::MatrixXcd fast = aoa_transform(v).bins;
        const Eigen::MatrixXcd slow = oracle::steering_sum(v);
        worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff() / slow.cwiseAbs().maxCoeff());
    }
    const double t = seconds_since(start);
    report(worst < 1e-9 && t < 10.0, "oracle_equivalence",
           fmt("max relative error %.3e (< 1e-9), runtime %.2f s (< 10 s)", worst, t));
}

void exact_recovery() {
    ScenarioConfig c = desk_config();
    c.rician_k_db = INFINITY;
    const HapsGeometry g = HapsGeometry::from(c);
    Rng place = make_rng(3, Stream::placement);
    const DeviceSet devs = place_devices(c, place);
    const ChannelRealization ch = noiseless(devs, g, c, 3);
    double worst = 0.0;
    long cells = 0;
    for (const double s0 : {-2.0, 0.0, 1.5}) {
        Rng noise = make_rng(3, Stream::noise);
        const std::vector<ReceivedPair> pairs{
            simulate_reception(devs, std::vector<double>(devs.count(), s0), ch, g, AmplitudeCodec::from(c), noise)};
        const GroundEstimate est = reconstruct_linear(pairs, g, c);
        for (Eigen::Index i = 0; i < est.values.size(); ++i)
            if (est.valid.data()[i]) {
                worst = std::max(worst, std::abs(est.values.data()[i] - s0));
                ++cells;
            }
    }
    report(worst < 1e-6 && cells > 0, "exact_recovery",
           fmt("max |error| %.3e over %ld valid cells (< 1e-6)", worst, cells));
}

void field_statistics() {
    const ScenarioConfig c = desk_config();
    const double half = c.area_side_m / 2, ell = c.field_corr_len_m;
    double sum = 0.0, sum2 = 0.0, n = 0.0, sab = 0.0, saa = 0.0, sbb = 0.0;
    Rng pick = make_rng(4, Stream::collection);
    std::uniform_real_distribution<double> coord(-half, half), angle(0.0, 2.0 * kPi);
    for (int s = 0; s < 100; ++s) {
        Rng rng = make_rng(c.seed, Stream::field, static_cast<std::uint64_t>(s));
        const GroundField f = generate_field(c, rng);
        for (const double v : f.values) {
            sum += v;
            sum2 += v * v;
            n += 1.0;
        }
        for (int i = 0; i < 1000;) {
            const Vec2 a{coord(pick), coord(pick)};
            const double th = angle(pick);
            const Vec2 b{a.x + ell * std::cos(th), a.y + ell * std::sin(th)};
            if (std::abs(b.x) > half || std::abs(b.y) > half) continue;
            const double va = sample_field(f, a), vb = sample_field(f, b);
            sab += va * vb;
            saa += va * va;
            sbb += vb * vb;
            ++i;
        }
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    const double corr = sab / std::sqrt(saa * sbb);
    const double want = std::exp(-0.5);
    report(var >= 0.9 && var <= 1.1 && std::abs(corr - want) <= 0.05, "field_statistics",
           fmt("pooled variance %.4f (in [0.9, 1.1]), lag-l correlation %.4f (%.4f +- 0.05)", var, corr, want));
}

double gradient_error(Mlp& net, Rng& rng) {
    std::normal_distribution<double> normal;
    net.init_random(rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = 0.1 * normal(rng);
    Eigen::VectorXd x(net.input_size()), r(net.output_size());
    for (auto& v : x) v = normal(rng);
    for (auto& v : r) v = normal(rng);
    Mlp::Tape tape;
    net.forward(x, tape);
    std::vector<double> grad(net.parameter_count(), 0.0);
    net.backward(tape, r, grad);
    auto params = net.parameters();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = oracle::central_difference([&] { return r.dot(net.forward(x)); }, params[i], 1e-5);
        worst = std::max(worst, oracle::relative_error(fd, grad[i], 1e-6));
    }
    return worst;
}

void gradient_correctness() {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig c = desk_config();
    PointwiseModel m = make_untrained_model(HapsGeometry::from(c), c);
    Rng rng = make_rng(5, Stream::init);
    double worst_filter = 0.0, worst_clip = 0.0;
    for (int point = 0; point < 10; ++point) {
        worst_filter = std::max(worst_filter, gradient_error(m.filter_net, rng));
        worst_clip = std::max(worst_clip, gradient_error(m.clip_net, rng));
    }
    const double t = seconds_since(start);
    report(worst_filter < 1e-4 && worst_clip < 1e-4 && t < 30.0, "gradient_correctness",
           fmt("max relative error filter %.3e, clip %.3e (< 1e-4) over all parameters at 10 points, runtime %.1f s "
               "(< 30 s)",
               worst_filter, worst_clip, t));
}

void averaging_gain() {
    const ScenarioConfig c = desk_config();
    const HapsGeometry g = HapsGeometry::from(c);
    std::vector<double> s1, s2, s4;
    for (int s = 0; s < 100; ++s) {
        const Trial t = realize_trial(c, static_cast<std::uint64_t>(s));
        const auto pairs = simulate_pairs(t, c, 4);
        const std::span<const ReceivedPair> all(pairs);
        s1.push_back(recon_snr(reconstruct_linear(all.first(1), g, c), t.truth));
        s2.push_back(recon_snr(reconstruct_linear(all.first(2), g, c), t.truth));
        s4.push_back(recon_snr(reconstruct_linear(all, g, c), t.truth));
    }
    const double m1 = oracle::median(s1), m2 = oracle::median(s2), m4 = oracle::median(s4);
    report(m4 > m1 && m1 <= m2 && m2 <= m4, "averaging_gain",
           fmt("median SNR 1/2/4 pairs %.3f / %.3f / %.3f dB over 100 seeds (4 > 1, non-decreasing)", m1, m2, m4));
}

void method_ordering() {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig c = desk_config();
    std::vector<double> lin, wsn;
    for (const auto& r : run_sweep(c, {{Method::linear, Method::sblue}, {8}, 20, false, 0}))
        (r.method == "linear" ? lin : wsn).push_back(r.snr_db);
    const double ml = oracle::median(lin), mw = oracle::median(wsn);
    const double t = seconds_since(start);
    report(ml - mw >= 3.0 && t < 600.0, "mapx_over_sblue",
           fmt("median SNR linear %.3f dB vs S-BLUE %.3f dB at 8 subframes, margin %.3f dB (>= 3 dB), runtime %.1f s "
               "(< 600 s)",
               ml, mw, ml - mw, t));
}

void dnn_improvement() {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig c = desk_config();
    std::vector<double> lin, dnn;
    int wins = 0;
    for (const auto& r : run_sweep(c, {{Method::linear, Method::dnn}, {8}, 20, false, 0}))
        (r.method == "linear" ? lin : dnn).push_back(r.snr_db);
    for (std::size_t i = 0; i < lin.size(); ++i) wins += dnn[i] > lin[i];
    const double ml = oracle::median(lin), md = oracle::median(dnn);
    const double frac = wins / static_cast<double>(lin.size());
    const double t = seconds_since(start);
    report(md >= ml && frac >= 0.6 && t < 1200.0, "dnn_improvement",
           fmt("median SNR dnn %.3f dB vs linear %.3f dB (>=), dnn ahead in %d/20 seeds (>= 60%%), runtime %.1f s "
               "(< 1200 s)",
               md, ml, wins, t));
}

void reference_reduction() {
    const ScenarioConfig c = desk_config();
    const HapsGeometry g = HapsGeometry::from(c);
    double worst = 0.0;
    bool masks_equal = true;
    for (int s = 0; s < 5; ++s) {
        const Trial t = realize_trial(c, static_cast<std::uint64_t>(s));
        const auto raw = simulate_pairs(t, c, 4);
        Rng init = make_rng(c.seed, Stream::init, t.index);
        const PointwiseModel m = make_reference_model(g, c, init);
        const GroundEstimate dnn = dnn_map(m, prepare_pairs(raw, g), g, c);
        const GroundEstimate lin = reconstruct_linear(raw, g, c);
        masks_equal = masks_equal && (dnn.valid == lin.valid).all();
        for (Eigen::Index i = 0; i < lin.values.size(); ++i)
            if (lin.valid.data()[i]) worst = std::max(worst, std::abs(dnn.values.data()[i] - lin.values.data()[i]));
    }
    report(worst < 1e-3 && masks_equal, "reference_init_reduction",
           fmt("max cellwise |dnn - linear| %.3e over 5 realizations (< 1e-3), masks %s", worst,
               masks_equal ? "identical" : "differ"));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void cli_determinism() {
    const fs::path root = fs::temp_directory_path() / "mapx_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "short.cfg") << "dnn_steps = 200\nseed = 7\n";
    const std::string cfg = "--preset desk --config " + (root / "short.cfg").string();
    const std::vector<std::string> invocations{
        "gen-field " + cfg + " --trial 2",
        "simulate " + cfg + " --pairs 2",
        "reconstruct " + cfg + " --method linear --budget 8",
        "reconstruct " + cfg + " --method sblue --budget 8",
        "reconstruct " + cfg + " --method dnn --budget 4",
        "train-dnn " + cfg + " --budget 4 --trial 1",
        "sweep " + cfg + " --methods linear,sblue,dnn --budgets 2,4 --seeds 2",
        "export-dataset " + cfg + " --train 3 --val 1",
        "panels " + cfg + " --budget 4",
    };
    int status_errors = 0;
    for (const char* run : {"a", "b"}) {
        for (std::size_t i = 0; i < invocations.size(); ++i) {
            const fs::path dir = root / run / std::to_string(i);
            const std::string cmd =
                std::string(MAPX_CLI_PATH) + " " + invocations[i] + " --out-dir " + dir.string() + " >" +
                (dir.string() + ".stdout") + " 2>&1";
            fs::create_directories(dir);
            const int st = std::system(cmd.c_str());
            status_errors += !(WIFEXITED(st) && WEXITSTATUS(st) == 0);
        }
        const fs::path dir = root / run / "score";
        fs::create_directories(dir);
        const std::string cmd = std::string(MAPX_CLI_PATH) + " score --estimate " + (root / run / "2" / "linear.f32").string() +
                                " --truth " + (root / run / "2" / "truth.f32").string() + " --out-dir " + dir.string() +
                                " >" + (dir.string() + ".stdout") + " 2>&1";
        const int st = std::system(cmd.c_str());
        status_errors += !(WIFEXITED(st) && WEXITSTATUS(st) == 0);
    }
    int files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), root / "a");
        ++files;
        if (!fs::exists(root / "b" / rel) || slurp(e.path()) != slurp(root / "b" / rel)) {
            ++differing;
            std::printf("  differs: %s\n", rel.string().c_str());
        }
    }
    report(status_errors == 0 && differing == 0 && files > 0, "cli_determinism",
           fmt("%d of %d output files differ between repeated runs (0), %d invocations failed (0)", differing, files,
               status_errors));
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> checks{
        virtual_array_exactness, oracle_equivalence, exact_recovery,      field_statistics, gradient_correctness,
        averaging_gain,          method_ordering,    dnn_improvement,     reference_reduction, cli_determinism,
    };
    for (const auto& check : checks) {
        try {
            check();
        } catch (const std::exception& e) {
            report(false, "exception", e.what());
        }
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
