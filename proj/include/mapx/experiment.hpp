#pragma once

// Seeded trials, method runners, subframe-budget sweeps and dataset export.
//
// A trial index selects one independent realization (field, placement,
// channels, noise); every random draw comes from a substream keyed by
// (config seed, stream, trial, index), so any single cell of a sweep can be
// reproduced in isolation.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mapx/baseline_wsn.hpp"
#include "mapx/config.hpp"
#include "mapx/estimate.hpp"
#include "mapx/field.hpp"
#include "mapx/interchange.hpp"
#include "mapx/metrics.hpp"
#include "mapx/phy.hpp"
#include "mapx/random.hpp"
#include "mapx/recon_dnn.hpp"
#include "mapx/recon_linear.hpp"
#include "mapx/scenario.hpp"

namespace mapx {

struct Trial {
    std::uint64_t index = 0;
    GroundField field;
    DeviceSet devices;
    std::vector<double> measurements;
    Eigen::MatrixXd truth;  // field at evaluation-cell centres
};

inline Trial realize_trial(const ScenarioConfig& c, std::uint64_t trial) {
    Trial t;
    t.index = trial;
    Rng field_rng = make_rng(c.seed, Stream::field, trial);
    t.field = generate_field(c, field_rng);
    Rng place_rng = make_rng(c.seed, Stream::placement, trial);
    t.devices = place_devices(c, place_rng);
    t.measurements = sample_field(t.field, t.devices.positions);
    const EvalGrid grid = EvalGrid::from(c);
    t.truth = from_row_major(truth_on_grid(t.field, grid), grid.side, grid.side);
    return t;
}

/// Pairs [first, first + count) of a trial; each has its own fading and noise draw.
inline std::vector<ReceivedPair> simulate_pairs(const Trial& t, const ScenarioConfig& c, int count, int first = 0) {
    const HapsGeometry geom = HapsGeometry::from(c);
    std::vector<ReceivedPair> pairs;
    pairs.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = first; i < first + count; ++i) {
        Rng fading = make_rng(c.seed, Stream::fading, t.index, static_cast<std::uint64_t>(i));
        Rng noise = make_rng(c.seed, Stream::noise, t.index, static_cast<std::uint64_t>(i));
        pairs.push_back(simulate_reception(t.devices, t.measurements, geom, c, fading, noise));
    }
    return pairs;
}

enum class Method { linear, dnn, sblue };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::linear: return "linear";
        case Method::dnn: return "dnn";
        case Method::sblue: return "sblue";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "linear") return Method::linear;
    if (s == "dnn") return Method::dnn;
    if (s == "sblue") return Method::sblue;
    throw std::invalid_argument("unknown method '" + s + "' (expected linear, dnn or sblue)");
}

/// MAP-X methods spend subframes in (reference, information) pairs.
inline void check_budget(Method m, int budget) {
    if (budget < 1) throw std::invalid_argument("subframe budget must be >= 1");
    if (m != Method::sblue && budget % 2 != 0)
        throw std::invalid_argument(std::string("method ") + to_string(m) + " needs an even subframe budget, got " +
                                    std::to_string(budget));
}

/// Online-trained pointwise model for one trial: reference init, relayed
/// training set, train_online.
inline PointwiseModel train_trial_model(const Trial& t, std::span<const PreparedPair> pairs, const ScenarioConfig& c,
                                        TrainReport* report = nullptr) {
    const HapsGeometry geom = HapsGeometry::from(c);
    Rng init_rng = make_rng(c.seed, Stream::init, t.index);
    PointwiseModel model = make_reference_model(geom, c, init_rng);
    Rng relay_rng = make_rng(c.seed, Stream::training, t.index, 0);
    const auto samples = relay_training_set(t.devices, t.measurements,
                                            static_cast<std::size_t>(c.dnn_relayed_pairs), relay_rng);
    Rng train_rng = make_rng(c.seed, Stream::training, t.index, 1);
    TrainReport r = train_online(model, pairs, samples, geom, c, train_rng);
    if (report) *report = std::move(r);
    return model;
}

inline GroundEstimate run_method(Method m, const Trial& t, const ScenarioConfig& c, int budget) {
    check_budget(m, budget);
    const HapsGeometry geom = HapsGeometry::from(c);
    switch (m) {
        case Method::linear: {
            const auto pairs = simulate_pairs(t, c, budget / 2);
            return reconstruct_linear(pairs, geom, c);
        }
        case Method::dnn: {
            const auto pairs = prepare_pairs(simulate_pairs(t, c, budget / 2), geom);
            const PointwiseModel model = train_trial_model(t, pairs, c);
            return dnn_map(model, pairs, geom, c);
        }
        case Method::sblue: {
            Rng rng = make_rng(c.seed, Stream::collection, t.index);
            const ObservationSet obs = orthogonal_collect(t.devices, t.measurements, budget, c, rng);
            return sblue_estimate(obs, CorrelationKernel{c.field_corr_len_m}, EvalGrid::from(c));
        }
    }
    throw std::logic_error("run_method: unhandled method");
}

struct ExperimentRow {
    std::string method;
    int budget = 0;
    std::uint64_t seed = 0;  // trial index
    double snr_db = 0.0;
    double nmse = 0.0;
    double valid_frac = 0.0;
    double wall_ms = 0.0;
};

struct SweepOptions {
    std::vector<Method> methods;
    std::vector<int> budgets;
    int n_seeds = 1;
    bool record_timing = false;  // off: wall_ms written as 0 so CSV output is reproducible
    unsigned threads = 0;        // 0: hardware concurrency
};

/// Rows ordered method-major, then budget, then seed. Cells run on a thread
/// pool; each cell depends only on its own (method, budget, seed) key.
inline std::vector<ExperimentRow> run_sweep(const ScenarioConfig& c, const SweepOptions& opt) {
    validate(c);
    if (opt.methods.empty()) throw std::invalid_argument("sweep: no methods");
    if (opt.budgets.empty()) throw std::invalid_argument("sweep: no budgets");
    if (opt.n_seeds < 1) throw std::invalid_argument("sweep: need at least one seed");
    for (const Method m : opt.methods)
        for (const int b : opt.budgets) check_budget(m, b);

    struct Cell {
        Method method;
        int budget;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const Method m : opt.methods)
        for (const int b : opt.budgets)
            for (int s = 0; s < opt.n_seeds; ++s) cells.push_back({m, b, static_cast<std::uint64_t>(s)});

    std::vector<ExperimentRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                const Cell& cell = cells[i];
                const Trial t = realize_trial(c, cell.seed);
                const auto start = std::chrono::steady_clock::now();
                const GroundEstimate est = run_method(cell.method, t, c, cell.budget);
                const auto stop = std::chrono::steady_clock::now();
                const Score s = score_estimate(est, t.truth);
                rows[i] = {to_string(cell.method), cell.budget,   cell.seed, s.snr_db, s.nmse, s.valid_fraction,
                           opt.record_timing ? std::chrono::duration<double, std::milli>(stop - start).count() : 0.0};
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = cells.size();
            }
        }
    };
    const unsigned hw = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(hw, cells.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

inline std::string rows_to_csv(std::span<const ExperimentRow> rows) {
    std::ostringstream out;
    out << "method,budget,seed,snr_db,nmse,valid_frac,wall_ms\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%llu,%.6f,%.8g,%.6f,%.3f\n", r.method.c_str(), r.budget,
                      static_cast<unsigned long long>(r.seed), r.snr_db, r.nmse, r.valid_frac, r.wall_ms);
        out << buf;
    }
    return out.str();
}

// Dataset export ------------------------------------------------------------

/// Upper bound on the observations behind one target map; keeps the dense
/// kriging solve tractable at full scale.
inline constexpr std::size_t kMaxTargetObservations = 4000;

/// Divided AoA map of one pair with invalid bins set to the reference amplitude.
inline Eigen::MatrixXd filled_divided_map(const ReceivedPair& pair, const HapsGeometry& geom, const ScenarioConfig& c) {
    const AmplitudeMap m = divided_map(pair, geom, c);
    const double fill = AmplitudeCodec::from(c).reference();
    Eigen::MatrixXd out = m.amplitude;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (!m.valid.data()[i]) out.data()[i] = fill;
    return out;
}

/// Terrestrial target: kriging from a noiseless dense subset of devices.
inline GroundEstimate dataset_target(const Trial& t, const ScenarioConfig& c) {
    const std::size_t n = std::min(
        kMaxTargetObservations,
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.dataset_target_fraction *
                                                                        static_cast<double>(t.devices.count())))));
    Rng rng = make_rng(c.seed, Stream::collection, t.index, 1);
    std::vector<std::size_t> idx(t.devices.count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    ObservationSet obs;
    for (std::size_t i = 0; i < n; ++i)
        obs.observations.push_back({t.devices.positions[idx[i]], t.measurements[idx[i]], idx[i]});
    return sblue_estimate(obs, CorrelationKernel{c.field_corr_len_m}, EvalGrid::from(c));
}

struct DatasetOptions {
    int n_train = 0;
    int n_val = 0;
    int pairs = 4;
};

/// Layout:
///   <dir>/manifest.json
///   <dir>/ex_00000/{input, target, truth, linear, linear_mask}.{f32,json}
/// Example e uses trial index e; the first n_train examples form the train split.
inline void export_dataset(const ScenarioConfig& c, const DatasetOptions& opt, const fs::path& dir) {
    validate(c);
    if (opt.n_train < 0 || opt.n_val < 0 || opt.n_train + opt.n_val < 1)
        throw std::invalid_argument("export_dataset: need n_train, n_val >= 0 and at least one example");
    if (opt.pairs < 1) throw std::invalid_argument("export_dataset: need at least one pair per example");
    const HapsGeometry geom = HapsGeometry::from(c);
    const std::string hash = scenario_hash(c);
    const std::int64_t kx = geom.virtual_kx(), ky = geom.virtual_ky(), g = c.eval_grid_side;
    fs::create_directories(dir);

    nlohmann::json examples = nlohmann::json::array();
    const int total = opt.n_train + opt.n_val;
    for (int e = 0; e < total; ++e) {
        char name[32];
        std::snprintf(name, sizeof name, "ex_%05d", e);
        const fs::path ex_dir = dir / name;
        const Trial t = realize_trial(c, static_cast<std::uint64_t>(e));
        const auto pairs = simulate_pairs(t, c, opt.pairs);

        std::vector<double> input;
        input.reserve(static_cast<std::size_t>(opt.pairs * kx * ky));
        for (const auto& p : pairs) {
            const auto m = to_row_major(filled_divided_map(p, geom, c));
            input.insert(input.end(), m.begin(), m.end());
        }
        write_tensor(ex_dir / "input.f32", {"input", {opt.pairs, kx, ky}, hash}, input);
        write_tensor(ex_dir / "target.f32", {"target", {g, g}, hash}, to_row_major(dataset_target(t, c).values));
        write_tensor(ex_dir / "truth.f32", {"truth", {g, g}, hash}, to_row_major(t.truth));
        write_estimate(ex_dir, "linear", reconstruct_linear(pairs, geom, c), hash);
        examples.push_back({{"dir", name}, {"split", e < opt.n_train ? "train" : "val"}, {"trial", e}});
    }

    nlohmann::json manifest = {
        {"scenario_hash", hash},
        {"seed", c.seed},
        {"pairs", opt.pairs},
        {"n_train", opt.n_train},
        {"n_val", opt.n_val},
        {"input_shape", {opt.pairs, kx, ky}},
        {"target_shape", {g, g}},
        {"tensors", {"input", "target", "truth", "linear", "linear_mask"}},
        {"examples", examples},
    };
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write '" + (dir / "manifest.json").string() + "'");
    out << manifest.dump(2) << '\n';
}

}  // namespace mapx
