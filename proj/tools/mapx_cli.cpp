// mapx: command-line front end for the simulator.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mapx/mapx.hpp"

namespace fs = std::filesystem;
using namespace mapx;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Common {
    std::string config_path;
    std::string preset = "full";
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::uint64_t trial = 0;
};

ScenarioConfig resolve_config(const Common& o) {
    ScenarioConfig base;
    if (o.preset == "desk")
        base = desk_config();
    else if (o.preset != "full")
        throw UsageError("--preset must be 'full' or 'desk'");
    ScenarioConfig c = o.config_path.empty() ? base : load_config(o.config_path, base);
    if (o.seed) c.seed = *o.seed;
    validate(c);
    return c;
}

void add_common(CLI::App* cmd, Common& o, bool with_trial = true) {
    cmd->add_option("--config", o.config_path, "key = value scenario file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "base parameters before --config: full or desk")->capture_default_str();
    cmd->add_option("--seed", o.seed, "overrides the configured seed");
    cmd->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
    if (with_trial) cmd->add_option("--trial", o.trial, "realization index")->capture_default_str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

std::string score_csv(const std::string& label, const Score& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "estimate,snr_db,nmse,valid_frac\n%s,%.6f,%.8g,%.6f\n", label.c_str(), s.snr_db,
                  s.nmse, s.valid_fraction);
    return buf;
}

void write_symbol_tensor(const fs::path& file, const std::string& name, const SymbolTensor& y,
                         const std::string& hash) {
    std::vector<double> flat;
    flat.reserve(y.size() * 2);
    for (const cplx v : y.data()) {
        flat.push_back(v.real());
        flat.push_back(v.imag());
    }
    write_tensor(file, {name, {y.array_p(), y.array_q(), y.symbols(), y.subcarriers(), 2}, hash}, flat);
}

std::vector<int> parse_int_list(const std::string& s, const char* flag) {
    std::vector<int> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": '" + item + "' is not an integer");
        }
    }
    if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
    return out;
}

Method parse_method(const std::string& s) {
    try {
        return method_from_string(s);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void check_usage_budget(Method m, int budget) {
    try {
        check_budget(m, budget);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple-access field sensing simulator"};
    app.require_subcommand(1);

    Common common;

    auto* gen = app.add_subcommand("gen-field", "draw a field; write field, truth tensors and a heatmap");
    add_common(gen, common);

    int sim_pairs = 1;
    auto* sim = app.add_subcommand("simulate", "simulate received subframe pairs; write symbol tensors");
    add_common(sim, common);
    sim->add_option("--pairs", sim_pairs, "number of (reference, information) pairs")->capture_default_str();

    std::string method = "linear";
    int budget = 8;
    auto* rec = app.add_subcommand("reconstruct", "reconstruct one realization and score it");
    add_common(rec, common);
    rec->add_option("--method", method, "linear, dnn or sblue")->capture_default_str();
    rec->add_option("--budget", budget, "subframe budget")->capture_default_str();

    std::string model_path;
    auto* train = app.add_subcommand("train-dnn", "train the pointwise model online; save it");
    add_common(train, common);
    train->add_option("--budget", budget, "subframe budget")->capture_default_str();
    train->add_option("--model", model_path, "model file (default <out-dir>/model.bin)");

    auto* evald = app.add_subcommand("eval-dnn", "apply a saved pointwise model to a realization");
    add_common(evald, common);
    evald->add_option("--budget", budget, "subframe budget")->capture_default_str();
    evald->add_option("--model", model_path, "model file")->required()->check(CLI::ExistingFile);

    DatasetOptions ds;
    auto* exp = app.add_subcommand("export-dataset", "write train/val examples for image models");
    add_common(exp, common, false);
    exp->add_option("--train", ds.n_train, "training examples")->required();
    exp->add_option("--val", ds.n_val, "validation examples")->required();
    exp->add_option("--pairs", ds.pairs, "pairs per example")->capture_default_str();

    std::string estimate_path, truth_path;
    auto* score = app.add_subcommand("score", "score an estimate tensor against a truth tensor");
    score->add_option("--estimate", estimate_path, "estimate .f32 (optional <stem>_mask.f32 alongside)")
        ->required()
        ->check(CLI::ExistingFile);
    score->add_option("--truth", truth_path, "truth .f32")->required()->check(CLI::ExistingFile);
    score->add_option("--out-dir", common.out_dir, "also write score.csv here");

    std::string methods_arg = "linear,sblue", budgets_arg = "2,4,8";
    int n_seeds = 20;
    unsigned threads = 0;
    bool timing = false;
    auto* sweep = app.add_subcommand("sweep", "subframe-budget sweep; writes sweep.csv");
    add_common(sweep, common, false);
    sweep->add_option("--methods", methods_arg, "comma-separated methods")->capture_default_str();
    sweep->add_option("--budgets", budgets_arg, "comma-separated subframe budgets")->capture_default_str();
    sweep->add_option("--seeds", n_seeds, "realizations per method and budget")->capture_default_str();
    sweep->add_option("--threads", threads, "worker threads (0: all cores)")->capture_default_str();
    sweep->add_flag("--timing", timing, "record wall-clock per reconstruction (output no longer reproducible)");

    std::string cnn_path;
    auto* panels = app.add_subcommand("panels", "truth / WSN / DNN / CNN comparison image");
    add_common(panels, common);
    panels->add_option("--budget", budget, "subframe budget")->capture_default_str();
    panels->add_option("--cnn", cnn_path, "externally produced estimate .f32 for the fourth panel")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        const fs::path out = common.out_dir;

        if (*score) {
            const GroundEstimate est = read_estimate(estimate_path);
            const GroundEstimate truth = read_estimate(truth_path);
            const std::string csv = score_csv(fs::path(estimate_path).stem().string(), score_estimate(est, truth.values));
            std::cout << csv;
            if (score->count("--out-dir")) write_text(out / "score.csv", csv);
            return 0;
        }

        const ScenarioConfig c = resolve_config(common);
        const HapsGeometry geom = HapsGeometry::from(c);
        const std::string hash = scenario_hash(c);
        const int g = c.eval_grid_side;

        if (*gen) {
            const Trial t = realize_trial(c, common.trial);
            const std::int64_t f = t.field.side;
            write_tensor(out / "field.f32", {"field", {f, f}, hash}, t.field.values);
            write_tensor(out / "truth.f32", {"truth", {g, g}, hash}, to_row_major(t.truth));
            export_heatmap(out / "truth.ppm", HeatmapPanel::of(t.truth));
            write_text(out / "config.txt", to_text(c));
        } else if (*sim) {
            if (sim_pairs < 1) throw UsageError("--pairs must be >= 1");
            const Trial t = realize_trial(c, common.trial);
            const auto pairs = simulate_pairs(t, c, sim_pairs);
            std::vector<double> dev;
            for (std::size_t i = 0; i < t.devices.count(); ++i)
                dev.insert(dev.end(), {t.devices.positions[i].x, t.devices.positions[i].y, t.measurements[i]});
            write_tensor(out / "devices.f32", {"devices", {static_cast<std::int64_t>(t.devices.count()), 3}, hash},
                         dev);
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                char stem[32];
                std::snprintf(stem, sizeof stem, "pair_%03zu", i);
                write_symbol_tensor(out / (std::string(stem) + "_ref.f32"), std::string(stem) + "_ref",
                                    pairs[i].reference, hash);
                write_symbol_tensor(out / (std::string(stem) + "_info.f32"), std::string(stem) + "_info",
                                    pairs[i].information, hash);
            }
        } else if (*rec) {
            const Method m = parse_method(method);
            check_usage_budget(m, budget);
            const Trial t = realize_trial(c, common.trial);
            const GroundEstimate est = run_method(m, t, c, budget);
            write_estimate(out, to_string(m), est, hash);
            write_tensor(out / "truth.f32", {"truth", {g, g}, hash}, to_row_major(t.truth));
            export_heatmap(out / (std::string(to_string(m)) + ".ppm"), HeatmapPanel::of(est));
            const std::string csv = score_csv(to_string(m), score_estimate(est, t.truth));
            write_text(out / (std::string(to_string(m)) + "_score.csv"), csv);
            std::cout << csv;
        } else if (*train) {
            check_usage_budget(Method::dnn, budget);
            const Trial t = realize_trial(c, common.trial);
            const auto pairs = prepare_pairs(simulate_pairs(t, c, budget / 2), geom);
            TrainReport report;
            const PointwiseModel model = train_trial_model(t, pairs, c, &report);
            save_model(model, model_path.empty() ? (out / "model.bin").string() : model_path);
            std::ostringstream loss;
            loss << "step,loss\n";
            char buf[64];
            for (std::size_t i = 0; i < report.loss.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i + 1, report.loss[i]);
                loss << buf;
            }
            std::ostringstream held;
            held << "evaluation,holdout_mse\n";
            for (std::size_t i = 0; i < report.holdout_mse.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%zu,%.10g\n", i, report.holdout_mse[i]);
                held << buf;
            }
            write_text(out / "holdout.csv", held.str());
            std::cout << "kept parameters after step " << report.best_step << " of " << c.dnn_steps << '\n';
            write_text(out / "loss.csv", loss.str());
        } else if (*evald) {
            check_usage_budget(Method::dnn, budget);
            const PointwiseModel model = load_model(model_path, c.dnn_learning_rate);
            if (model.window_length() != geom.virtual_kx())
                throw UsageError("model window length does not match the configured virtual array");
            const Trial t = realize_trial(c, common.trial);
            const auto pairs = prepare_pairs(simulate_pairs(t, c, budget / 2), geom);
            const GroundEstimate est = dnn_map(model, pairs, geom, c);
            write_estimate(out, "dnn", est, hash);
            write_tensor(out / "truth.f32", {"truth", {g, g}, hash}, to_row_major(t.truth));
            const std::string csv = score_csv("dnn", score_estimate(est, t.truth));
            write_text(out / "dnn_score.csv", csv);
            std::cout << csv;
        } else if (*exp) {
            if (ds.n_train < 0 || ds.n_val < 0 || ds.n_train + ds.n_val < 1 || ds.pairs < 1)
                throw UsageError("export-dataset: need --train, --val >= 0 with at least one example and --pairs >= 1");
            export_dataset(c, ds, out);
        } else if (*sweep) {
            SweepOptions opt;
            std::stringstream in(methods_arg);
            for (std::string item; std::getline(in, item, ',');) opt.methods.push_back(parse_method(item));
            if (opt.methods.empty()) throw UsageError("--methods: empty list");
            opt.budgets = parse_int_list(budgets_arg, "--budgets");
            if (n_seeds < 1) throw UsageError("--seeds must be >= 1");
            for (const Method m : opt.methods)
                for (const int b : opt.budgets) check_usage_budget(m, b);
            opt.n_seeds = n_seeds;
            opt.threads = threads;
            opt.record_timing = timing;
            const std::string csv = rows_to_csv(run_sweep(c, opt));
            write_text(out / "sweep.csv", csv);
            std::cout << csv;
        } else if (*panels) {
            check_usage_budget(Method::dnn, budget);
            const Trial t = realize_trial(c, common.trial);
            std::vector<HeatmapPanel> p{HeatmapPanel::of(t.truth),
                                        HeatmapPanel::of(run_method(Method::sblue, t, c, budget)),
                                        HeatmapPanel::of(run_method(Method::dnn, t, c, budget))};
            if (!cnn_path.empty()) {
                const GroundEstimate cnn = read_estimate(cnn_path);
                if (cnn.side() != g) throw UsageError("--cnn tensor does not match the evaluation grid");
                p.push_back(HeatmapPanel::of(cnn));
            }
            write_ppm(out / "panels.ppm", render_panels(p, 4));
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "mapx: config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& e) {
        std::cerr << "mapx: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "mapx: " << e.what() << '\n';
        return kExitRuntime;
    }
}
