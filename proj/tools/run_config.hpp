#pragma once

// Flat key=value run configuration shared by every subcommand. The same
// keys are the long flag names, so a config file line `tau=864` and the
// flag `--tau 864` go through one parser.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "circdmd/circdmd.hpp"

namespace circdmd::cli {

using circdmd::detail::format_double;
using circdmd::detail::trim;

struct RunConfig {
    // data
    std::string input;
    Layout layout = Layout::SensorsAsRows;
    double delta_t = 1.0 / 12.0;
    std::optional<Index> split_index;  // training columns; the rest is the test split

    // decomposition
    Method method = Method::CircSp;
    Index tau = 1;
    RankRule rank_rule = RankRule::automatic();
    double gamma = 0.0;
    std::vector<double> gamma_grid;
    ModeFlavor mode_flavor = ModeFlavor::Exact;
    AdmmOptions admm;

    // outputs
    std::string output = "out";
    std::string bundle = "out";
    Index horizon = 0;
    double window_days = 3.0;  // Pred-F / Pred-L boundary inside the horizon

    // analyses
    bool stability = false;
    bool periods = false;
    std::vector<Index> modes;
    bool mape = false;
    bool acf = false;
    Index max_lag = 288;
    bool residual_corr = false;
    std::vector<Index> lags{1, 2, 6, 12};
    std::string estimate;  // second matrix for `metrics`

    // synthetic data
    Index sensors = 20;
    Index samples = 2016;
    double mean = 55.0;
    std::vector<double> synth_periods{24.0, 168.0};
    std::vector<double> synth_amplitudes{10.0, 5.0};
    double noise = 0.0;
    double outlier_rate = 0.0;
    double outlier_magnitude = 20.0;
    std::uint64_t seed = 0;

    void set(const std::string& key, const std::string& value);
    /// Turns on one analysis by name; unknown names are a usage error.
    void enable_analysis(const std::string& name);
    bool any_analysis() const { return stability || periods || !modes.empty() || mape || acf || residual_corr; }
    std::string to_text() const;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

inline Index to_index(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return static_cast<Index>(out);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = trim(item);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, F convert) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(convert(item));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        if constexpr (std::is_floating_point_v<T>)
            out << format_double(v[i]);
        else
            out << v[i];
    }
    return out.str();
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& raw) {
    using namespace detail;
    const std::string value(trim(raw));
    auto idx = [&](const std::string& s) { return to_index(key, s); };
    auto num = [&](const std::string& s) { return to_double(key, s); };

    if (key == "input") input = value;
    else if (key == "layout") {
        if (value == "rows") layout = Layout::SensorsAsRows;
        else if (value == "cols") layout = Layout::SensorsAsColumns;
        else throw ConfigError("layout must be rows or cols");
    } else if (key == "dt") {
        delta_t = num(value);
        if (!(delta_t > 0.0)) throw ConfigError("dt must be positive");
    } else if (key == "split") {
        if (value == "none" || value.empty()) split_index.reset();
        else split_index = idx(value);
    } else if (key == "method") {
        method = parse_method(value);
    } else if (key == "tau") tau = idx(value);
    else if (key == "rank") {
        if (value == "auto") rank_rule = RankRule::automatic();
        else rank_rule = RankRule::fixed_rank(idx(value));
    } else if (key == "gamma") gamma = num(value);
    else if (key == "gamma-grid") gamma_grid = to_list<double>(value, num);
    else if (key == "modes-flavor") {
        if (value == "exact") mode_flavor = ModeFlavor::Exact;
        else if (value == "projected") mode_flavor = ModeFlavor::Projected;
        else throw ConfigError("modes-flavor must be exact or projected");
    } else if (key == "admm-rho") admm.rho = num(value);
    else if (key == "admm-max-iter") admm.max_iter = static_cast<int>(idx(value));
    else if (key == "admm-eps-abs") admm.eps_abs = num(value);
    else if (key == "admm-eps-rel") admm.eps_rel = num(value);
    else if (key == "output") output = value;
    else if (key == "bundle") bundle = value;
    else if (key == "horizon") horizon = idx(value);
    else if (key == "window-days") window_days = num(value);
    else if (key == "stability") stability = to_bool(key, value);
    else if (key == "periods") periods = to_bool(key, value);
    else if (key == "modes") modes = to_list<Index>(value, idx);
    else if (key == "mape") mape = to_bool(key, value);
    else if (key == "acf") acf = to_bool(key, value);
    else if (key == "max-lag") max_lag = idx(value);
    else if (key == "residual-corr") residual_corr = to_bool(key, value);
    else if (key == "lags") lags = to_list<Index>(value, idx);
    else if (key == "analyses") {
        for (const auto& name : split_list(value)) enable_analysis(name);
    } else if (key == "estimate") estimate = value;
    else if (key == "sensors") sensors = idx(value);
    else if (key == "samples") samples = idx(value);
    else if (key == "mean") mean = num(value);
    else if (key == "synth-periods") synth_periods = to_list<double>(value, num);
    else if (key == "synth-amplitudes") synth_amplitudes = to_list<double>(value, num);
    else if (key == "noise") noise = num(value);
    else if (key == "outlier-rate") outlier_rate = num(value);
    else if (key == "outlier-magnitude") outlier_magnitude = num(value);
    else if (key == "seed") seed = static_cast<std::uint64_t>(idx(value));
    else throw ConfigError("unknown config key '" + key + "'");
}

inline void RunConfig::enable_analysis(const std::string& name) {
    if (name == "stability") stability = true;
    else if (name == "periods") periods = true;
    else if (name == "mape") mape = true;
    else if (name == "acf") acf = true;
    else if (name == "residual-corr") residual_corr = true;
    else if (name == "modes") {
        if (modes.empty()) modes = {0};
    } else
        throw UsageError("unknown analysis '" + name +
                         "' (expected stability, periods, modes, mape, acf or residual-corr)");
}

inline std::string RunConfig::to_text() const {
    using detail::join;
    std::ostringstream out;
    auto flag = [](bool b) { return b ? "true" : "false"; };
    out << "input=" << input << '\n'
        << "layout=" << (layout == Layout::SensorsAsRows ? "rows" : "cols") << '\n'
        << "dt=" << format_double(delta_t) << '\n'
        << "split=" << (split_index ? std::to_string(*split_index) : "none") << '\n'
        << "method=" << method_name(method) << '\n'
        << "tau=" << tau << '\n'
        << "rank=" << (rank_rule.is_auto() ? "auto" : std::to_string(*rank_rule.fixed)) << '\n'
        << "gamma=" << format_double(gamma) << '\n'
        << "gamma-grid=" << join(gamma_grid) << '\n'
        << "modes-flavor=" << (mode_flavor == ModeFlavor::Exact ? "exact" : "projected") << '\n'
        << "admm-rho=" << format_double(admm.rho) << '\n'
        << "admm-max-iter=" << admm.max_iter << '\n'
        << "admm-eps-abs=" << format_double(admm.eps_abs) << '\n'
        << "admm-eps-rel=" << format_double(admm.eps_rel) << '\n'
        << "output=" << output << '\n'
        << "bundle=" << bundle << '\n'
        << "horizon=" << horizon << '\n'
        << "window-days=" << format_double(window_days) << '\n'
        << "stability=" << flag(stability) << '\n'
        << "periods=" << flag(periods) << '\n'
        << "modes=" << join(modes) << '\n'
        << "mape=" << flag(mape) << '\n'
        << "acf=" << flag(acf) << '\n'
        << "max-lag=" << max_lag << '\n'
        << "residual-corr=" << flag(residual_corr) << '\n'
        << "lags=" << join(lags) << '\n'
        << "estimate=" << estimate << '\n'
        << "sensors=" << sensors << '\n'
        << "samples=" << samples << '\n'
        << "mean=" << format_double(mean) << '\n'
        << "synth-periods=" << join(synth_periods) << '\n'
        << "synth-amplitudes=" << join(synth_amplitudes) << '\n'
        << "noise=" << format_double(noise) << '\n'
        << "outlier-rate=" << format_double(outlier_rate) << '\n'
        << "outlier-magnitude=" << format_double(outlier_magnitude) << '\n'
        << "seed=" << seed << '\n';
    return out.str();
}

/// Parses `key=value` lines; blank lines and lines starting with '#' are
/// ignored. Returned in file order so later duplicates win when applied.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
        out.emplace_back(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
    }
    return out;
}

inline std::vector<std::pair<std::string, std::string>> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config_text(in);
}

inline RunConfig from_text(const std::string& text) {
    std::istringstream in(text);
    RunConfig cfg;
    for (const auto& [k, v] : parse_config_text(in)) cfg.set(k, v);
    return cfg;
}

inline VariantConfig variant_config(const RunConfig& rc) {
    VariantConfig v;
    v.method = rc.method;
    v.tau = rc.tau;
    v.rank_rule = rc.rank_rule;
    v.gamma = rc.gamma;
    v.mode_flavor = rc.mode_flavor;
    v.admm = rc.admm;
    return v;
}

}  // namespace circdmd::cli
