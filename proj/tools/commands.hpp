#pragma once

// Subcommand bodies. Each takes the merged RunConfig, writes its artifacts
// under cfg.output and returns the process exit code. Artifacts that fail
// to write are listed on stderr and make the exit code nonzero.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bundle.hpp"
#include "circdmd/circdmd.hpp"
#include "run_config.hpp"

namespace circdmd::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,     // numerical failure or artifacts not written
    kUsage = 2,       // bad flags, config or analysis names
    kInput = 3,       // unreadable or malformed input / bundle
    kProvenance = 4,  // refused to overwrite a bundle from other input
};

/// Input file missing or unreadable.
struct InputError : Error {
    using Error::Error;
};

inline SpeedMatrix read_input(const std::string& path, Layout layout, double delta_t) {
    if (!fs::is_regular_file(path)) throw InputError("cannot read input " + path);
    return load_matrix(path, layout, delta_t);
}

/// Collects artifact writes so one failure does not hide the others.
class Artifacts {
public:
    explicit Artifacts(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        try {
            std::ostringstream buf;
            body(buf);
            std::ofstream out(path(name));
            out << buf.str();
            if (!out) throw Error("write failed");
            written_.push_back(name);
        } catch (const std::exception& e) {
            failed_.push_back(name + ": " + e.what());
        }
    }

    void json(const std::string& name, const nlohmann::json& j) {
        write(name, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
    }

    int finish() const {
        for (const auto& f : failed_) std::cerr << "failed artifact " << f << '\n';
        return failed_.empty() ? kOk : kFailure;
    }

private:
    fs::path dir_;
    std::vector<std::string> written_;
    std::vector<std::string> failed_;
};

namespace detail {

using circdmd::detail::format_double;

inline void write_table(std::ostream& out, const Eigen::Ref<const Matrix>& m, const std::vector<std::string>& ids,
                        Layout layout) {
    if (layout == Layout::SensorsAsColumns) {
        for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? "," : "") << ids[i];
        out << '\n';
        for (Index t = 0; t < m.cols(); ++t) {
            for (Index n = 0; n < m.rows(); ++n) out << (n ? "," : "") << format_double(m(n, t));
            out << '\n';
        }
        return;
    }
    for (Index n = 0; n < m.rows(); ++n) {
        for (Index t = 0; t < m.cols(); ++t) out << (t ? "," : "") << format_double(m(n, t));
        out << '\n';
    }
}

inline nlohmann::json metrics_json(const ErrorMetrics& m, Index columns) {
    return {{"mae", m.mae}, {"rmse", m.rmse}, {"columns", columns}};
}

inline SpeedMatrix load_input(const RunConfig& cfg) {
    if (cfg.input.empty()) throw UsageError("--input is required");
    return read_input(cfg.input, cfg.layout, cfg.delta_t);
}

inline SpeedMatrix training_part(const SpeedMatrix& data, const std::optional<Index>& split) {
    if (!split) return data;
    if (*split < 2 || *split > data.t())
        throw RangeError("split " + std::to_string(*split) + " outside [2, " + std::to_string(data.t()) + "]");
    return data.columns(0, *split);
}

/// Input for commands that read a bundle: --input if given, else the path
/// recorded at fit time. Warns when the file no longer matches the digest.
inline std::optional<SpeedMatrix> bundle_input(const RunConfig& cfg, const Bundle& b, bool required) {
    const std::string path = cfg.input.empty() ? b.input_path : cfg.input;
    if (path.empty() || !fs::exists(path)) {
        if (required) throw UsageError("this analysis needs the input data; pass --input");
        return std::nullopt;
    }
    if (!b.input_digest.empty() && sha256_file(path) != b.input_digest)
        warn("input " + path + " differs from the data the bundle was fitted on");
    return read_input(path, cfg.input.empty() ? b.layout : cfg.layout, b.delta_t);
}

inline void check_bundle_fits(const Bundle& b, const SpeedMatrix& data) {
    if (data.n() != b.spectrum.meta.n)
        throw ShapeError("input has " + std::to_string(data.n()) + " sensors, bundle expects " +
                         std::to_string(b.spectrum.meta.n));
}

}  // namespace detail

inline int cmd_synth(const RunConfig& cfg) {
    if (cfg.synth_periods.size() != cfg.synth_amplitudes.size())
        throw ConfigError("synth-periods and synth-amplitudes must have the same length");
    SyntheticSpec spec;
    spec.n = cfg.sensors;
    spec.t = cfg.samples;
    spec.delta_t = cfg.delta_t;
    spec.noise_sigma = cfg.noise;
    spec.outlier_rate = cfg.outlier_rate;
    spec.outlier_magnitude = cfg.outlier_magnitude;
    spec.seed = cfg.seed;
    spec.components.push_back({std::numeric_limits<double>::infinity(), cfg.mean, 0.0, Vector::Ones(cfg.sensors)});
    // sensors weight each oscillation differently so the modes have spatial structure
    const double span = static_cast<double>(std::max<Index>(cfg.sensors - 1, 1));
    for (std::size_t k = 0; k < cfg.synth_periods.size(); ++k) {
        Vector profile(cfg.sensors);
        for (Index i = 0; i < cfg.sensors; ++i) {
            const double u = static_cast<double>(i) / span;
            profile(i) = k % 2 == 0 ? 1.0 - 0.5 * u : 0.5 + 0.5 * u;
        }
        spec.components.push_back({cfg.synth_periods[k], cfg.synth_amplitudes[k], 0.3 * static_cast<double>(k),
                                   std::move(profile)});
    }
    const auto data = generate(spec);
    Artifacts out(cfg.output);
    out.write("synthetic.csv", [&](std::ostream& os) { write_matrix(os, data, cfg.layout); });
    std::cout << "wrote " << data.n() << " x " << data.t() << " synthetic matrix to "
              << out.path("synthetic.csv").string() << '\n';
    return out.finish();
}

inline int cmd_fit(const RunConfig& cfg, bool force) {
    const auto data = detail::load_input(cfg);
    const auto train = detail::training_part(data, cfg.split_index);
    const auto vcfg = variant_config(cfg);

    Bundle b;
    b.delta_t = cfg.delta_t;
    b.split_index = cfg.split_index;
    b.input_path = fs::absolute(cfg.input).string();
    b.input_digest = sha256_file(cfg.input);
    b.layout = cfg.layout;
    // refuse early rather than after a long fit
    if (auto old = existing_digest(cfg.output); old && *old != b.input_digest && !force)
        throw ProvenanceError(cfg.output + " holds a bundle fitted on different input; rerun with --force to replace it");

    nlohmann::json path_json = nlohmann::json::array();
    if (!cfg.gamma_grid.empty() && cfg.method == Method::CircSp) {
        auto grid = cfg.gamma_grid;
        std::sort(grid.begin(), grid.end());
        const auto problem = sparsity_problem(train, vcfg);
        const auto path = gamma_path(problem.form, grid, cfg.admm);
        for (const auto& sol : path)
            path_json.push_back({{"gamma", sol.gamma},
                                 {"nonzero_count", sol.nonzero_count},
                                 {"loss", sol.loss},
                                 {"iterations", sol.iterations},
                                 {"converged", sol.converged}});
        if (cfg.gamma > 0.0) {
            const auto sol = sparsify(problem.form, cfg.gamma, cfg.admm);
            if (!sol.converged) warn("ADMM stopped before meeting tolerance");
            b.spectrum = with_amplitudes(problem.spectrum, sol);
            sort_by_dominance(b.spectrum);
        }
    } else if (!cfg.gamma_grid.empty()) {
        warn("gamma-grid only applies to circ-sp; ignored");
    }
    if (b.spectrum.size() == 0) b.spectrum = fit(train, vcfg);

    write_bundle(cfg.output, b, cfg, force);
    Artifacts out(cfg.output);
    if (!path_json.empty()) {
        out.write("gamma_path.csv", [&](std::ostream& os) {
            os << "gamma,nonzero_count,loss,iterations,converged\n";
            for (const auto& p : path_json)
                os << detail::format_double(p["gamma"].get<double>()) << ',' << p["nonzero_count"].get<Index>() << ','
                   << detail::format_double(p["loss"].get<double>()) << ',' << p["iterations"].get<int>() << ','
                   << (p["converged"].get<bool>() ? 1 : 0) << '\n';
        });
    }
    const auto& s = b.spectrum;
    Index nonzero = 0;
    for (bool a : s.active) nonzero += a;
    std::cout << "method " << method_name(s.meta.method) << ", tau " << s.meta.tau << ", r " << s.size()
              << ", nonzero " << nonzero << ", gamma " << s.meta.gamma << "\n"
              << "bundle written to " << cfg.output << '\n';
    return out.finish();
}

inline int cmd_reconstruct(const RunConfig& cfg) {
    const auto b = read_bundle(cfg.bundle);
    const Matrix recon = predict(b.spectrum, 0);
    const auto data = detail::bundle_input(cfg, b, false);
    const auto ids = data ? data->sensor_ids() : default_sensor_ids(recon.rows());
    Artifacts out(cfg.output);
    out.write("reconstruction.csv", [&](std::ostream& os) { detail::write_table(os, recon, ids, cfg.layout); });
    if (data) {
        detail::check_bundle_fits(b, *data);
        const auto train = detail::training_part(*data, b.split_index);
        const auto m = mae_rmse(train.values(), recon);
        out.json("reconstruction_metrics.json", detail::metrics_json(m, recon.cols()));
        std::cout << "reconstruction MAE " << m.mae << ", RMSE " << m.rmse << '\n';
    }
    return out.finish();
}

inline int cmd_forecast(const RunConfig& cfg) {
    if (cfg.horizon < 1) throw UsageError("--horizon must be at least 1");
    const auto b = read_bundle(cfg.bundle);
    const Index t = b.spectrum.meta.source_t;
    const Matrix pred = predict(b.spectrum, cfg.horizon).rightCols(cfg.horizon);
    const auto data = detail::bundle_input(cfg, b, false);
    const auto ids = data ? data->sensor_ids() : default_sensor_ids(pred.rows());

    Artifacts out(cfg.output);
    out.write("forecast.csv", [&](std::ostream& os) { detail::write_table(os, pred, ids, cfg.layout); });

    if (data && data->t() > t) {
        detail::check_bundle_fits(b, *data);
        const Index test_t = data->t() - t;
        if (test_t != cfg.horizon)
            warn("horizon " + std::to_string(cfg.horizon) + " differs from the " + std::to_string(test_t) +
                 " test columns; metrics use the overlap only");
        const Index overlap = std::min(test_t, cfg.horizon);
        const Matrix truth = data->values().middleCols(t, overlap);
        const Matrix est = pred.leftCols(overlap);

        nlohmann::json j;
        j["overall"] = detail::metrics_json(mae_rmse(truth, est), overlap);
        const auto per_day = static_cast<Index>(std::llround(24.0 / b.delta_t));
        const auto boundary = std::min(overlap, static_cast<Index>(std::llround(cfg.window_days * per_day)));
        const double total_days = static_cast<double>(overlap) / static_cast<double>(per_day);
        auto label = [](const char* side, double days) {
            std::ostringstream s;
            s << "Pred-" << side << days;
            return s.str();
        };
        const std::string first = label("F", cfg.window_days);
        const std::string last = label("L", std::max(0.0, total_days - cfg.window_days));
        j["window_days"] = cfg.window_days;
        if (boundary > 0) j[first] = detail::metrics_json(mae_rmse(truth.leftCols(boundary), est.leftCols(boundary)), boundary);
        if (boundary < overlap)
            j[last] = detail::metrics_json(
                mae_rmse(truth.rightCols(overlap - boundary), est.rightCols(overlap - boundary)), overlap - boundary);
        out.json("forecast_metrics.json", j);

        std::cout << "window        MAE       RMSE  columns\n";
        for (const auto& key : {std::string("overall"), first, last}) {
            if (!j.contains(key)) continue;
            char line[128];
            std::snprintf(line, sizeof line, "%-10s %8.4f  %9.4f  %7lld\n", key.c_str(), j[key]["mae"].get<double>(),
                          j[key]["rmse"].get<double>(), static_cast<long long>(j[key]["columns"].get<Index>()));
            std::cout << line;
        }
    } else {
        std::cout << "forecast of " << cfg.horizon << " columns written; no test split to score against\n";
    }
    return out.finish();
}

inline int cmd_analyze(const RunConfig& cfg) {
    if (!cfg.any_analysis())
        throw UsageError("nothing to analyze; pass --stability, --periods, --modes, --mape, --acf or --residual-corr");
    const auto b = read_bundle(cfg.bundle);
    const auto& s = b.spectrum;
    Artifacts out(cfg.output);

    if (cfg.stability) {
        const auto rep = classify_stability(s.eigenvalues);
        out.write("stability.csv", [&](std::ostream& os) {
            os << "index,re,im,modulus,steady\n";
            for (Index i = 0; i < s.size(); ++i)
                os << i << ',' << detail::format_double(s.eigenvalues(i).real()) << ','
                   << detail::format_double(s.eigenvalues(i).imag()) << ','
                   << detail::format_double(std::abs(s.eigenvalues(i))) << ','
                   << (rep.steady_mask[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
        });
        out.json("stability.json", {{"deviation_sum", rep.deviation_sum},
                                    {"steady_count", rep.steady_count()},
                                    {"modes", s.size()},
                                    {"tolerance", rep.tolerance}});
        std::cout << "deviation_sum " << rep.deviation_sum << " (" << rep.steady_count() << " of " << s.size()
                  << " modes on the unit circle)\n";
    }

    if (cfg.periods) {
        const auto rep = oscillation_periods(s.eigenvalues, b.delta_t, &s.amplitudes);
        std::vector<std::size_t> order(rep.included.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto mag = [&](std::size_t k) { return std::abs(s.amplitudes(rep.included[k])); };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return mag(a) > mag(c); });
        out.write("periods.csv", [&](std::ostream& os) {
            os << "mode,period_hours,abs_b,re_b,modulus,active\n";
            for (auto k : order) {
                const Index i = rep.included[k];
                os << i << ',' << detail::format_double(rep.periods(static_cast<Index>(k))) << ','
                   << detail::format_double(mag(k)) << ',' << detail::format_double(s.amplitudes(i).real()) << ','
                   << detail::format_double(std::abs(s.eigenvalues(i))) << ','
                   << (s.active.empty() || s.active[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
            }
        });
        std::cout << "period (h)    |b|\n";
        for (std::size_t k = 0; k < std::min<std::size_t>(order.size(), 10); ++k) {
            char line[64];
            std::snprintf(line, sizeof line, "%10.3f  %10.4g\n", rep.periods(static_cast<Index>(order[k])), mag(order[k]));
            std::cout << line;
        }
    }

    for (Index k : cfg.modes) {
        if (k < 0 || k >= s.size())
            throw RangeError("mode index " + std::to_string(k) + " outside [0, " + std::to_string(s.size()) + ")");
        const CMatrix m = reshape_mode(s.modes().col(k), s.amplitudes(k), s.meta.n, s.meta.tau);
        const std::vector<std::string> ids = default_sensor_ids(s.meta.n);
        out.write("mode_" + std::to_string(k) + "_re.csv",
                  [&](std::ostream& os) { detail::write_table(os, m.real(), ids, Layout::SensorsAsRows); });
        out.write("mode_" + std::to_string(k) + "_im.csv",
                  [&](std::ostream& os) { detail::write_table(os, m.imag(), ids, Layout::SensorsAsRows); });
    }

    if (cfg.mape || cfg.acf || cfg.residual_corr) {
        const auto data = detail::bundle_input(cfg, b, true);
        detail::check_bundle_fits(b, *data);
        const auto train = detail::training_part(*data, b.split_index);
        const Matrix recon = predict(s, 0);
        const Matrix residuals = train.values() - recon;
        const auto& ids = train.sensor_ids();

        if (cfg.mape) {
            const auto m = mape_per_sensor(train.values(), recon);
            Index bands[3] = {0, 0, 0};
            out.write("mape.csv", [&](std::ostream& os) {
                os << "sensor,mape_percent,band\n";
                for (Index n = 0; n < m.percent.size(); ++n) {
                    const auto band = mape_band(m.percent(n));
                    ++bands[static_cast<int>(band)];
                    os << ids[static_cast<std::size_t>(n)] << ',' << detail::format_double(m.percent(n)) << ','
                       << (band == MapeBand::Below5 ? "<5" : band == MapeBand::From5To10 ? "5-10" : ">10") << '\n';
                }
            });
            out.json("mape_summary.json", {{"below_5", bands[0]},
                                           {"from_5_to_10", bands[1]},
                                           {"above_10", bands[2]},
                                           {"skipped_zero_truth", m.skipped}});
            std::cout << "MAPE bands: <5% " << bands[0] << ", 5-10% " << bands[1] << ", >10% " << bands[2] << '\n';
        }

        if (cfg.acf) {
            Matrix acf(cfg.max_lag + 1, residuals.rows());
            double bound = 0.0;
            for (Index n = 0; n < residuals.rows(); ++n) {
                try {
                    const auto r = residual_acf(residuals.row(n).transpose(), cfg.max_lag);
                    acf.col(n) = r.acf;
                    bound = r.bound;
                } catch (const DegenerateSeriesError&) {
                    warn("sensor " + ids[static_cast<std::size_t>(n)] + " has constant residuals; ACF left as NaN");
                    acf.col(n).setConstant(std::numeric_limits<double>::quiet_NaN());
                }
            }
            out.write("acf.csv", [&](std::ostream& os) {
                os << "lag";
                for (const auto& id : ids) os << ',' << id;
                os << '\n';
                for (Index l = 0; l <= cfg.max_lag; ++l) {
                    os << l;
                    for (Index n = 0; n < acf.cols(); ++n) os << ',' << detail::format_double(acf(l, n));
                    os << '\n';
                }
            });
            out.json("acf_bound.json", {{"bound", bound}, {"max_lag", cfg.max_lag}});
        }

        if (cfg.residual_corr) {
            nlohmann::json summary = nlohmann::json::array();
            for (Index lag : cfg.lags) {
                const auto c = residual_lag_correlation(residuals, lag);
                out.write("residual_corr_lag" + std::to_string(lag) + ".csv",
                          [&](std::ostream& os) { detail::write_table(os, c.corr, ids, Layout::SensorsAsRows); });
                summary.push_back({{"lag", lag}, {"mean_abs", c.mean_abs}});
                std::cout << "lag " << lag << ": mean |corr| " << c.mean_abs << '\n';
            }
            out.json("residual_corr.json", summary);
        }
    }
    return out.finish();
}

inline int cmd_metrics(const RunConfig& cfg) {
    if (cfg.estimate.empty()) throw UsageError("--estimate is required");
    const auto truth = detail::load_input(cfg);
    const auto est = read_input(cfg.estimate, cfg.layout, cfg.delta_t);
    const auto m = mae_rmse(truth.values(), est.values());
    nlohmann::json j = detail::metrics_json(m, truth.t());
    if (cfg.mape) {
        const auto p = mape_per_sensor(truth.values(), est.values());
        j["mape_per_sensor"] = std::vector<double>(p.percent.data(), p.percent.data() + p.percent.size());
    }
    Artifacts out(cfg.output);
    out.json("metrics.json", j);
    std::cout << "MAE " << m.mae << ", RMSE " << m.rmse << '\n';
    return out.finish();
}

}  // namespace circdmd::cli
