#pragma once

// Scenario configuration: every physical and protocol parameter of one
// simulated deployment, plus the flat key/value file format it is read from.
//
// File format: one `key = value` per line; `#` starts a comment; blank lines
// are ignored. Keys are the field names of ScenarioConfig. Unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

namespace mapx {

/// Raised for unreadable, malformed, or invalid configuration. `field()` names
/// the offending key when there is one.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& what)
        : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

enum class RatioStatistic { real_part, magnitude };

struct ScenarioConfig {
    // Geometry and deployment.
    double area_side_m = 40000.0;
    double device_density_per_km2 = 31.25;
    double haps_altitude_m = 20000.0;
    int array_p = 16;
    int array_q = 16;
    int symbols_m = 12;
    int subcarriers_n = 12;

    // Link budget.
    double carrier_hz = 2.5e9;
    double tx_power_dbm = 0.0;
    double subcarrier_spacing_hz = 15e3;
    double noise_figure_db = 5.0;
    double rician_k_db = 10.0;  // "inf" gives a pure line-of-sight channel
    double nlos_penalty_db = 0.0;
    double clock_phase_std_rad = 0.0;  // residual per-device phase ramp across subcarriers

    // Sensing target and amplitude encoding.
    double field_corr_len_m = 2000.0;
    int field_grid_side = 0;  // 0: twice eval_grid_side
    double encode_min = 0.2;
    double encode_max = 1.8;

    // Reconstruction.
    double clip_epsilon = 1e-3;
    RatioStatistic ratio_statistic = RatioStatistic::real_part;
    int eval_grid_side = 192;

    // Orthogonal-collection baseline.
    double wsn_obs_snr_db = 20.0;

    // Online pointwise model.
    int dnn_steps = 2000;
    int dnn_batch = 64;
    double dnn_learning_rate = 1e-4;
    int dnn_relayed_pairs = 512;
    double dnn_holdout_fraction = 0.2;  // share of relayed samples used only for checkpoint selection
    int dnn_eval_interval = 50;

    // Dataset export: fraction of devices feeding the terrestrial target map.
    double dataset_target_fraction = 0.25;

    std::uint64_t seed = 1;

    int virtual_kx() const { return array_p * symbols_m; }
    int virtual_ky() const { return array_q * subcarriers_n; }
    double area_km2() const { return area_side_m * area_side_m * 1e-6; }
    int resolved_field_grid_side() const { return field_grid_side > 0 ? field_grid_side : 2 * eval_grid_side; }
};

/// Full-scale deployment: 40 km square, 16x16 array, 12x12 resources.
inline ScenarioConfig full_scale_config() { return ScenarioConfig{}; }

/// Desk-scale deployment used by the test and acceptance suites:
/// 4 km square, 2 km altitude, 8x8 array, 6x6 resources (48x48 virtual array),
/// 800 devices, 400 m correlation length, 48x48 evaluation grid.
inline ScenarioConfig desk_config() {
    ScenarioConfig c;
    c.area_side_m = 4000.0;
    c.device_density_per_km2 = 50.0;
    c.haps_altitude_m = 2000.0;
    c.array_p = c.array_q = 8;
    c.symbols_m = c.subcarriers_n = 6;
    c.field_corr_len_m = 400.0;
    c.eval_grid_side = 48;
    c.field_grid_side = 96;
    return c;
}

inline void validate(const ScenarioConfig& c) {
    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw ConfigError(field, what);
    };
    require(std::isfinite(c.area_side_m) && c.area_side_m > 0, "area_side_m", "must be > 0");
    require(std::isfinite(c.device_density_per_km2) && c.device_density_per_km2 >= 0, "device_density_per_km2",
            "must be >= 0");
    require(std::isfinite(c.haps_altitude_m) && c.haps_altitude_m > 0, "haps_altitude_m", "must be > 0");
    require(c.array_p >= 2, "array_p", "must be >= 2");
    require(c.array_q >= 2, "array_q", "must be >= 2");
    require(c.symbols_m >= 1, "symbols_m", "must be >= 1");
    require(c.subcarriers_n >= 1, "subcarriers_n", "must be >= 1");
    require(std::isfinite(c.carrier_hz) && c.carrier_hz > 0, "carrier_hz", "must be > 0");
    require(std::isfinite(c.tx_power_dbm), "tx_power_dbm", "must be finite");
    require(std::isfinite(c.subcarrier_spacing_hz) && c.subcarrier_spacing_hz > 0, "subcarrier_spacing_hz",
            "must be > 0");
    require(std::isfinite(c.noise_figure_db), "noise_figure_db", "must be finite");
    require(!std::isnan(c.rician_k_db), "rician_k_db", "must not be NaN");
    require(std::isfinite(c.nlos_penalty_db) && c.nlos_penalty_db >= 0, "nlos_penalty_db", "must be >= 0");
    require(std::isfinite(c.clock_phase_std_rad) && c.clock_phase_std_rad >= 0, "clock_phase_std_rad",
            "must be >= 0");
    require(std::isfinite(c.field_corr_len_m) && c.field_corr_len_m > 0, "field_corr_len_m", "must be > 0");
    require(c.field_grid_side >= 0, "field_grid_side", "must be >= 0");
    require(std::isfinite(c.encode_min) && c.encode_min > 0, "encode_min", "must be > 0");
    require(std::isfinite(c.encode_max) && c.encode_max > c.encode_min, "encode_max", "must be > encode_min");
    require(std::isfinite(c.clip_epsilon) && c.clip_epsilon > 0, "clip_epsilon", "must be > 0");
    require(c.eval_grid_side >= 1, "eval_grid_side", "must be >= 1");
    require(std::isfinite(c.wsn_obs_snr_db), "wsn_obs_snr_db", "must be finite");
    require(c.dnn_steps >= 0, "dnn_steps", "must be >= 0");
    require(c.dnn_batch >= 1, "dnn_batch", "must be >= 1");
    require(std::isfinite(c.dnn_learning_rate) && c.dnn_learning_rate >= 0, "dnn_learning_rate", "must be >= 0");
    require(c.dnn_relayed_pairs >= 1, "dnn_relayed_pairs", "must be >= 1");
    require(std::isfinite(c.dnn_holdout_fraction) && c.dnn_holdout_fraction >= 0 && c.dnn_holdout_fraction < 1,
            "dnn_holdout_fraction", "must be in [0, 1)");
    require(c.dnn_eval_interval >= 1, "dnn_eval_interval", "must be >= 1");
    require(c.dataset_target_fraction > 0 && c.dataset_target_fraction <= 1, "dataset_target_fraction",
            "must be in (0, 1]");
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

inline double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double d = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + value + "'");
    }
}

inline long long parse_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return i;
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + value + "'");
    }
}

using Setter = std::function<void(ScenarioConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& setters() {
    auto dbl = [](double ScenarioConfig::*field) -> Setter {
        return [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.*field = parse_double(k, v);
        };
    };
    auto integer = [](int ScenarioConfig::*field) -> Setter {
        return [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.*field = static_cast<int>(parse_integer(k, v));
        };
    };
    static const std::map<std::string, Setter> table = {
        {"area_side_m", dbl(&ScenarioConfig::area_side_m)},
        {"device_density_per_km2", dbl(&ScenarioConfig::device_density_per_km2)},
        {"haps_altitude_m", dbl(&ScenarioConfig::haps_altitude_m)},
        {"array_p", integer(&ScenarioConfig::array_p)},
        {"array_q", integer(&ScenarioConfig::array_q)},
        {"symbols_m", integer(&ScenarioConfig::symbols_m)},
        {"subcarriers_n", integer(&ScenarioConfig::subcarriers_n)},
        {"carrier_hz", dbl(&ScenarioConfig::carrier_hz)},
        {"tx_power_dbm", dbl(&ScenarioConfig::tx_power_dbm)},
        {"subcarrier_spacing_hz", dbl(&ScenarioConfig::subcarrier_spacing_hz)},
        {"noise_figure_db", dbl(&ScenarioConfig::noise_figure_db)},
        {"rician_k_db", dbl(&ScenarioConfig::rician_k_db)},
        {"nlos_penalty_db", dbl(&ScenarioConfig::nlos_penalty_db)},
        {"clock_phase_std_rad", dbl(&ScenarioConfig::clock_phase_std_rad)},
        {"field_corr_len_m", dbl(&ScenarioConfig::field_corr_len_m)},
        {"field_grid_side", integer(&ScenarioConfig::field_grid_side)},
        {"encode_min", dbl(&ScenarioConfig::encode_min)},
        {"encode_max", dbl(&ScenarioConfig::encode_max)},
        {"clip_epsilon", dbl(&ScenarioConfig::clip_epsilon)},
        {"ratio_statistic",
         [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             if (v == "real")
                 c.ratio_statistic = RatioStatistic::real_part;
             else if (v == "magnitude")
                 c.ratio_statistic = RatioStatistic::magnitude;
             else
                 throw ConfigError(k, "expected 'real' or 'magnitude', got '" + v + "'");
         }},
        {"eval_grid_side", integer(&ScenarioConfig::eval_grid_side)},
        {"wsn_obs_snr_db", dbl(&ScenarioConfig::wsn_obs_snr_db)},
        {"dnn_steps", integer(&ScenarioConfig::dnn_steps)},
        {"dnn_batch", integer(&ScenarioConfig::dnn_batch)},
        {"dnn_learning_rate", dbl(&ScenarioConfig::dnn_learning_rate)},
        {"dnn_relayed_pairs", integer(&ScenarioConfig::dnn_relayed_pairs)},
        {"dnn_holdout_fraction", dbl(&ScenarioConfig::dnn_holdout_fraction)},
        {"dnn_eval_interval", integer(&ScenarioConfig::dnn_eval_interval)},
        {"dataset_target_fraction", dbl(&ScenarioConfig::dataset_target_fraction)},
        {"seed",
         [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             const long long s = parse_integer(k, v);
             if (s < 0) throw ConfigError(k, "must be >= 0");
             c.seed = static_cast<std::uint64_t>(s);
         }},
    };
    return table;
}

}  // namespace detail

/// Applies `key = value` lines on top of `base` and validates the result.
inline ScenarioConfig parse_config(std::string_view text, ScenarioConfig base = ScenarioConfig{}) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(stripped).substr(0, eq));
        const std::string value = detail::trim(std::string_view(stripped).substr(eq + 1));
        const auto it = detail::setters().find(key);
        if (it == detail::setters().end()) throw ConfigError(key, "unknown key");
        if (value.empty()) throw ConfigError(key, "missing value");
        it->second(base, key, value);
    }
    validate(base);
    return base;
}

inline ScenarioConfig load_config(const std::string& path, ScenarioConfig base = ScenarioConfig{}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::move(base));
}

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
    char buf[64];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

template <class T>
    requires std::is_integral_v<T>
inline std::string shortest(T v) {
    return std::to_string(v);
}

}  // namespace detail

/// Canonical text form; parse_config(to_text(c)) == c. Also the input of the
/// scenario hash stamped on exported tensors.
inline std::string to_text(const ScenarioConfig& c) {
    std::ostringstream out;
    out << "area_side_m = " << detail::shortest(c.area_side_m) << '\n'
        << "device_density_per_km2 = " << detail::shortest(c.device_density_per_km2) << '\n'
        << "haps_altitude_m = " << detail::shortest(c.haps_altitude_m) << '\n'
        << "array_p = " << detail::shortest(c.array_p) << '\n'
        << "array_q = " << detail::shortest(c.array_q) << '\n'
        << "symbols_m = " << detail::shortest(c.symbols_m) << '\n'
        << "subcarriers_n = " << detail::shortest(c.subcarriers_n) << '\n'
        << "carrier_hz = " << detail::shortest(c.carrier_hz) << '\n'
        << "tx_power_dbm = " << detail::shortest(c.tx_power_dbm) << '\n'
        << "subcarrier_spacing_hz = " << detail::shortest(c.subcarrier_spacing_hz) << '\n'
        << "noise_figure_db = " << detail::shortest(c.noise_figure_db) << '\n'
        << "rician_k_db = " << detail::shortest(c.rician_k_db) << '\n'
        << "nlos_penalty_db = " << detail::shortest(c.nlos_penalty_db) << '\n'
        << "clock_phase_std_rad = " << detail::shortest(c.clock_phase_std_rad) << '\n'
        << "field_corr_len_m = " << detail::shortest(c.field_corr_len_m) << '\n'
        << "field_grid_side = " << detail::shortest(c.field_grid_side) << '\n'
        << "encode_min = " << detail::shortest(c.encode_min) << '\n'
        << "encode_max = " << detail::shortest(c.encode_max) << '\n'
        << "clip_epsilon = " << detail::shortest(c.clip_epsilon) << '\n'
        << "ratio_statistic = " << (c.ratio_statistic == RatioStatistic::real_part ? "real" : "magnitude") << '\n'
        << "eval_grid_side = " << detail::shortest(c.eval_grid_side) << '\n'
        << "wsn_obs_snr_db = " << detail::shortest(c.wsn_obs_snr_db) << '\n'
        << "dnn_steps = " << detail::shortest(c.dnn_steps) << '\n'
        << "dnn_batch = " << detail::shortest(c.dnn_batch) << '\n'
        << "dnn_learning_rate = " << detail::shortest(c.dnn_learning_rate) << '\n'
        << "dnn_relayed_pairs = " << detail::shortest(c.dnn_relayed_pairs) << '\n'
        << "dnn_holdout_fraction = " << detail::shortest(c.dnn_holdout_fraction) << '\n'
        << "dnn_eval_interval = " << detail::shortest(c.dnn_eval_interval) << '\n'
        << "dataset_target_fraction = " << detail::shortest(c.dataset_target_fraction) << '\n'
        << "seed = " << detail::shortest(c.seed) << '\n';
    return out.str();
}

/// FNV-1a over the canonical text, rendered as 16 hex digits.
inline std::string scenario_hash(const ScenarioConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : to_text(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 0xF];
    return out;
}

}  // namespace mapx
