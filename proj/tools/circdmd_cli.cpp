// circdmd command-line tool: synth, fit, reconstruct, forecast, analyze,
// metrics. Every value flag is also a key in the --config file; flags given
// on the command line win over the file.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "commands.hpp"

using namespace circdmd;
using namespace circdmd::cli;

namespace {

// clang-format off
const std::map<std::string, std::string> kHelp = {
    {"input", "input CSV (speed matrix)"},
    {"layout", "CSV orientation: rows (sensors as rows) or cols"},
    {"dt", "sampling interval in hours"},
    {"split", "number of training columns; the rest is the test split"},
    {"method", "dmd | hankel | fb-hankel | tls-hankel | circ | circ-sp"},
    {"tau", "embedding depth (delays or cyclic shifts)"},
    {"rank", "truncation rank, or auto for the hard threshold"},
    {"gamma", "sparsity weight for circ-sp"},
    {"gamma-grid", "comma list of gammas to sweep (circ-sp)"},
    {"modes-flavor", "exact or projected modes"},
    {"admm-rho", "ADMM penalty parameter"},
    {"admm-max-iter", "ADMM iteration cap"},
    {"admm-eps-abs", "ADMM absolute tolerance"},
    {"admm-eps-rel", "ADMM relative tolerance"},
    {"output", "output directory"},
    {"bundle", "decomposition bundle directory"},
    {"horizon", "forecast columns"},
    {"window-days", "days in the first forecast window (Pred-F)"},
    {"modes", "comma list of mode indices to reshape"},
    {"max-lag", "largest ACF lag"},
    {"lags", "comma list of lags for residual correlation"},
    {"estimate", "estimate CSV compared against --input"},
    {"sensors", "number of synthetic sensors"},
    {"samples", "number of synthetic columns"},
    {"mean", "mean speed of the synthetic data"},
    {"synth-periods", "comma list of oscillation periods in hours"},
    {"synth-amplitudes", "comma list of oscillation amplitudes"},
    {"noise", "Gaussian noise standard deviation"},
    {"outlier-rate", "fraction of entries replaced by outliers"},
    {"outlier-magnitude", "outlier magnitude"},
    {"seed", "random seed"},
};
// clang-format on

const std::vector<std::string> kToggles = {"stability", "periods", "mape", "acf", "residual-corr"};

class Command {
public:
    Command(CLI::App& app, const std::string& name, const std::string& description, RunConfig& cfg)
        : sub_(app.add_subcommand(name, description)), cfg_(cfg) {
        sub_->add_option("--config", config_path_, "key=value config file; flags override it");
    }

    Command& values(std::initializer_list<const char*> keys) {
        for (const char* key : keys) {
            const std::string k(key);
            sub_->add_option_function<std::string>("--" + k, [this, k](const std::string& v) { cfg_.set(k, v); },
                                                   kHelp.at(k));
        }
        return *this;
    }

    Command& toggles() {
        for (const auto& k : kToggles)
            sub_->add_flag_callback("--" + k, [this, k] { cfg_.set(k, "true"); }, "run the " + k + " analysis");
        sub_->add_option_function<std::vector<std::string>>(
            "--analysis", [this](const std::vector<std::string>& names) {
                for (const auto& n : names) cfg_.enable_analysis(n);
            },
            "enable analyses by name (repeatable)");
        return *this;
    }

    CLI::App* app() const { return sub_; }

    /// Applies config-file keys that were not given as flags.
    void merge_config() {
        if (config_path_.empty()) return;
        for (const auto& [key, value] : load_config_file(config_path_)) {
            const auto* opt = sub_->get_option_no_throw("--" + key);
            if (opt && opt->count() > 0) continue;
            if (opt || key == "analyses") {
                cfg_.set(key, value);
                continue;
            }
            RunConfig probe;
            probe.set(key, value);  // throws on keys no command knows
        }
    }

private:
    CLI::App* sub_;
    RunConfig& cfg_;
    std::string config_path_;
};

int report(const char* kind, const std::exception& e, int code) {
    std::cerr << "circdmd: " << kind << ": " << e.what() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"circulant and Hankel DMD toolkit for sensor time series"};
    app.set_version_flag("--version", std::string(CIRCDMD_VERSION));
    app.require_subcommand(1);

    RunConfig cfg;
    bool force = false;

    Command synth(app, "synth", "generate a synthetic traffic-like speed matrix", cfg);
    synth.values({"sensors", "samples", "dt", "mean", "synth-periods", "synth-amplitudes", "noise", "outlier-rate",
                  "outlier-magnitude", "seed", "layout", "output"});

    Command fit(app, "fit", "fit a decomposition and write a bundle", cfg);
    fit.values({"input", "layout", "dt", "split", "method", "tau", "rank", "gamma", "gamma-grid", "modes-flavor",
                "admm-rho", "admm-max-iter", "admm-eps-abs", "admm-eps-rel", "seed", "output"});
    fit.app()->add_flag("--force", force, "replace a bundle fitted on different input");

    Command recon(app, "reconstruct", "reconstruct the training window from a bundle", cfg);
    recon.values({"bundle", "input", "layout", "output"});

    Command forecast(app, "forecast", "forecast past the training window and score the test split", cfg);
    forecast.values({"bundle", "input", "layout", "horizon", "window-days", "output"});

    Command analyze(app, "analyze", "stability, periods, modes, MAPE, ACF and residual correlation", cfg);
    analyze.values({"bundle", "input", "layout", "modes", "max-lag", "lags", "output"}).toggles();

    Command metrics(app, "metrics", "MAE and RMSE between two matrices", cfg);
    metrics.values({"input", "estimate", "layout", "dt", "output"});
    metrics.app()->add_flag_callback("--mape", [&] { cfg.mape = true; }, "also report per-sensor MAPE");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const UsageError& e) {
        return report("usage", e, kUsage);
    } catch (const ConfigError& e) {
        return report("config", e, kUsage);
    }

    try {
        for (Command* c : {&synth, &fit, &recon, &forecast, &analyze, &metrics}) {
            if (!c->app()->parsed()) continue;
            c->merge_config();
            if (c == &synth) return cmd_synth(cfg);
            if (c == &fit) return cmd_fit(cfg, force);
            if (c == &recon) return cmd_reconstruct(cfg);
            if (c == &forecast) return cmd_forecast(cfg);
            if (c == &analyze) return cmd_analyze(cfg);
            return cmd_metrics(cfg);
        }
    } catch (const UsageError& e) {
        return report("usage", e, kUsage);
    } catch (const ConfigError& e) {
        return report("config", e, kUsage);
    } catch (const ProvenanceError& e) {
        return report("refused", e, kProvenance);
    } catch (const ParseError& e) {
        return report("input", e, kInput);
    } catch (const DataError& e) {
        return report("input", e, kInput);
    } catch (const InputError& e) {
        return report("input", e, kInput);
    } catch (const ShapeError& e) {
        return report("input", e, kInput);
    } catch (const BundleError& e) {
        return report("bundle", e, kInput);
    } catch (const std::exception& e) {
        return report("error", e, kFailure);
    }
    return kFailure;
}
