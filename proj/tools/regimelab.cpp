// regimelab: command-line front end for the regime identification and
// allocation toolkit. Subcommands cover ingestion, feature building, model
// fitting, jump-penalty cross-validation, walk-forward backtesting, synthetic
// data generation and report rendering.
//
// Exit codes: 0 ok, 1 finished with computation warnings (e.g. degenerate
// refits), 2 config or data error (a JSON error report goes to stderr).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regime/backtest.hpp"
#include "regime/config.hpp"
#include "regime/features.hpp"
#include "regime/io.hpp"
#include "regime/synth.hpp"

namespace fs = std::filesystem;
using regime::json;

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::string> engine;
    std::optional<double> lambda;
    std::vector<double> grid;
    std::optional<double> cost_bps;
    std::optional<std::uint64_t> seed;
    std::optional<int> refit_every;
    std::optional<int> lookback;
    std::optional<std::string> out;
};

void add_common_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON run config file");
    cmd->add_option("--engine", o.engine, "regime engine: jm or hmm");
    cmd->add_option("--lambda", o.lambda, "jump penalty");
    cmd->add_option("--grid", o.grid, "jump penalty candidates (cv)")->delimiter(',');
    cmd->add_option("--cost-bps", o.cost_bps, "one-way transaction cost in basis points");
    cmd->add_option("--seed", o.seed, "root random seed");
    cmd->add_option("--refit-every", o.refit_every, "refit interval in trading days");
    cmd->add_option("--lookback", o.lookback, "fitting window length in trading days");
    cmd->add_option("--out", o.out, "output directory");
}

regime::RunConfig resolve_config(const Overrides& o) {
    regime::RunConfig cfg = o.config_path.empty() ? regime::RunConfig{}
                                                  : regime::RunConfig::from_file(o.config_path);
    if (o.engine) {
        if (*o.engine == "jm")
            cfg.engine = regime::Engine::jump_model;
        else if (*o.engine == "hmm")
            cfg.engine = regime::Engine::hmm_baseline;
        else
            throw regime::ConfigError("--engine must be 'jm' or 'hmm'");
    }
    if (o.lambda) cfg.lambda = *o.lambda;
    if (!o.grid.empty()) cfg.grid = o.grid;
    if (o.cost_bps) cfg.cost_per_side = *o.cost_bps / 1e4;
    if (o.seed) cfg.seed = *o.seed;
    if (o.refit_every) cfg.refit_interval_days = *o.refit_every;
    if (o.lookback) cfg.lookback_days = *o.lookback;
    if (o.out) cfg.out_dir = *o.out;
    return cfg;
}

std::string out_path(const regime::RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    return (fs::path(cfg.out_dir) / name).string();
}

int finish(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return warnings.empty() ? 0 : 1;
}

int cmd_ingest(const Overrides& o) {
    const auto cfg = resolve_config(o);
    const auto dataset = cfg.load_dataset();
    regime::write_dataset_csv(out_path(cfg, "dataset.csv"), dataset, cfg.meta());
    std::cout << "wrote " << out_path(cfg, "dataset.csv") << " (" << dataset.size() << " days, "
              << regime::to_string(dataset.dates().front()) << " .. "
              << regime::to_string(dataset.dates().back()) << ")\n";
    return 0;
}

int cmd_features(const Overrides& o) {
    const auto cfg = resolve_config(o);
    const auto dataset = cfg.load_dataset();
    const auto features = regime::build_feature_set(dataset.log_returns);
    regime::write_features_csv(out_path(cfg, "features.csv"), features, cfg.meta());
    std::cout << "wrote " << out_path(cfg, "features.csv") << " (" << features.rows()
              << " rows; first " << regime::kFeatureWarmup << " are warm-up)\n";
    return 0;
}

int cmd_fit(const Overrides& o) {
    const auto cfg = resolve_config(o);
    const auto dataset = cfg.load_dataset();

    // fit window: explicit from config, otherwise the trailing lookback
    std::size_t begin, end;  // [begin, end)
    if (cfg.fit_start && cfg.fit_end) {
        begin = dataset.index_prices.lower_bound(*cfg.fit_start);
        const auto last = dataset.index_prices.last_at_or_before(*cfg.fit_end);
        if (!last || begin > *last) throw regime::ConfigError("fit: empty fit window");
        end = *last + 1;
    } else {
        const auto lookback = static_cast<std::size_t>(cfg.lookback_days);
        if (dataset.size() < lookback) throw regime::ConfigError("fit: dataset shorter than lookback");
        begin = dataset.size() - lookback;
        end = dataset.size();
    }
    if (begin < regime::kFeatureWarmup)
        throw regime::ConfigError("fit: window must start at or after the feature warm-up (index " +
                                  std::to_string(regime::kFeatureWarmup) + ")");

    std::vector<std::string> warnings;
    json out;
    const std::span<const regime::Date> window_dates{dataset.dates().data() + begin, end - begin};
    if (cfg.engine == regime::Engine::jump_model) {
        const auto features = regime::build_feature_set(dataset.log_returns);
        const auto params = regime::fit_standardizer(features, begin, end);
        const auto z = regime::apply_standardizer(features, params, begin, end);
        const std::span<const double> window_returns{dataset.index_returns.values.data() + begin,
                                                     end - begin};
        const auto fit = regime::fit_jump_model(
            z.values, cfg.n_states, regime::JumpPenalty(cfg.lambda.value_or(100.0)),
            {cfg.n_restarts, 300, cfg.seed}, window_returns);
        if (fit.all_restarts_degenerate)
            warnings.push_back("all restarts degenerate (" + std::to_string(fit.effective_states) +
                               " states populated)");
        out = regime::fit_to_json(fit, window_dates);
        const auto transitions =
            regime::estimate_transitions(fit.states, cfg.n_states);
        json trans = json::array();
        for (std::size_t i = 0; i < cfg.n_states; ++i) {
            json row = json::array();
            for (double v : transitions.matrix.row(i)) row.push_back(v);
            trans.push_back(std::move(row));
        }
        out["estimated_transitions"] = std::move(trans);
    } else {
        const std::span<const double> window_returns{dataset.log_returns.values.data() + begin,
                                                     end - begin};
        const auto model =
            regime::baum_welch_fit(window_returns, cfg.n_states, {cfg.n_restarts, 500, 1e-6, cfg.seed});
        if (model.variance_floored) warnings.push_back("variance floored during EM");
        const auto decoded = regime::smoothed_states(model, window_returns);
        out = regime::hmm_to_json(model, decoded.states, window_dates);
    }
    out["window"] = {{"start", regime::to_string(dataset.dates()[begin])},
                     {"end", regime::to_string(dataset.dates()[end - 1])}};
    cfg.meta().annotate(out);
    regime::write_json(out_path(cfg, "fit.json"), out);
    std::cout << "wrote " << out_path(cfg, "fit.json") << "\n";
    return finish(warnings);
}

int cmd_cv(const Overrides& o) {
    const auto cfg = resolve_config(o);
    if (cfg.grid.empty()) throw regime::ConfigError("cv: a non-empty --grid is required");
    if (!cfg.split) throw regime::ConfigError("cv: config must define split dates");
    if (cfg.engine != regime::Engine::jump_model)
        throw regime::ConfigError("cv: the jump-penalty search applies to the jm engine");
    const auto dataset = cfg.load_dataset();
    const auto selection = regime::select_lambda(dataset, cfg.walk_forward(), cfg.grid, *cfg.split);

    regime::write_cv_table_csv(out_path(cfg, "cv_table.csv"), selection, cfg.meta());
    json chosen;
    chosen["lambda"] = selection.chosen_lambda;
    for (const auto& row : selection.table)
        if (row.lambda == selection.chosen_lambda && row.report.sharpe)
            chosen["validation_sharpe"] = *row.report.sharpe;
    cfg.meta().annotate(chosen);
    regime::write_json(out_path(cfg, "chosen_lambda.json"), chosen);

    std::vector<std::string> names;
    std::vector<regime::MetricReport> reports;
    for (const auto& row : selection.table) {
        names.push_back("l=" + regime::format_double(row.lambda));
        reports.push_back(row.report);
    }
    std::cout << regime::render_metric_table(names, reports);
    std::cout << "chosen lambda: " << regime::format_double(selection.chosen_lambda) << "\n";

    std::vector<std::string> warnings;
    for (const auto& row : selection.table)
        if (row.n_warnings > 0)
            warnings.push_back("lambda " + regime::format_double(row.lambda) + ": " +
                               std::to_string(row.n_warnings) + " degenerate refit(s)");
    return finish(warnings);
}

int cmd_backtest(const Overrides& o) {
    const auto cfg = resolve_config(o);
    if (!cfg.split) throw regime::ConfigError("backtest: config must define split dates");
    if (cfg.engine == regime::Engine::jump_model && !cfg.lambda)
        throw regime::ConfigError("backtest: --lambda is required (run cv first or supply one)");
    const auto dataset = cfg.load_dataset();
    const auto evaluation =
        regime::evaluate_test(dataset, cfg.walk_forward(), *cfg.split, cfg.include_hmm_baseline);

    json result;
    result["engine"] = cfg.engine == regime::Engine::jump_model ? "jm" : "hmm";
    if (cfg.engine == regime::Engine::jump_model) result["lambda"] = *cfg.lambda;
    result["config"] = cfg.to_json();
    result["backtest"] = regime::backtest_to_json(evaluation.result);
    result["metrics"]["strategy"] = regime::report_to_json(evaluation.strategy);
    result["metrics"]["benchmark"] = regime::report_to_json(evaluation.benchmark);
    if (evaluation.hmm_report) {
        result["metrics"]["hmm_baseline"] = regime::report_to_json(*evaluation.hmm_report);
        result["hmm_backtest"] = regime::backtest_to_json(*evaluation.hmm_result);
    }
    cfg.meta().annotate(result);
    regime::write_json(out_path(cfg, "result.json"), result);
    regime::write_equity_csv(out_path(cfg, "equity.csv"), evaluation.result, cfg.meta());
    regime::write_regimes_csv(out_path(cfg, "regimes.csv"), evaluation.result, cfg.meta());

    std::vector<std::string> names{result["engine"].get<std::string>(), "index"};
    std::vector<regime::MetricReport> reports{evaluation.strategy, evaluation.benchmark};
    if (evaluation.hmm_report) {
        names.insert(names.begin() + 1, "hmm");
        reports.insert(reports.begin() + 1, *evaluation.hmm_report);
    }
    std::cout << regime::render_metric_table(names, reports);

    std::vector<std::string> warnings = evaluation.result.warnings;
    if (evaluation.hmm_result)
        warnings.insert(warnings.end(), evaluation.hmm_result->warnings.begin(),
                        evaluation.hmm_result->warnings.end());
    return finish(warnings);
}

int cmd_synth(const Overrides& o, const std::string& spec_path) {
    const auto cfg = resolve_config(o);
    auto spec = regime::synth_spec_from_file(spec_path);
    if (o.seed) spec.seed = *o.seed;
    const auto sim = regime::simulate(spec);

    json spec_json;
    spec_json["n_days"] = spec.n_days;
    spec_json["state_means"] = spec.state_means;
    spec_json["state_stds"] = spec.state_stds;
    spec_json["initial_state"] = spec.initial_state;
    spec_json["annual_yield"] = spec.annual_yield;
    spec_json["seed"] = spec.seed;
    spec_json["start_date"] = regime::to_string(spec.start_date);
    spec_json["initial_price"] = spec.initial_price;
    json trans = json::array();
    for (std::size_t i = 0; i < spec.n_states(); ++i) {
        json row = json::array();
        for (double v : spec.transitions.row(i)) row.push_back(v);
        trans.push_back(std::move(row));
    }
    spec_json["transitions"] = std::move(trans);
    const regime::OutputMeta meta{regime::hash_hex(regime::fnv1a_hash(spec_json.dump())), spec.seed};

    regime::write_series_csv(out_path(cfg, "prices.csv"), sim.prices, "price", meta);
    regime::write_series_csv(out_path(cfg, "yields.csv"), sim.yields, "yield", meta);
    {
        auto out = regime::detail::open_out(out_path(cfg, "truth.csv"));
        out << meta.comment_line() << "\n";
        out << "date,state\n";
        for (std::size_t i = 0; i < sim.dataset.size(); ++i)
            out << regime::to_string(sim.dataset.dates()[i]) << ',' << sim.true_states[i] << "\n";
    }
    regime::write_json(out_path(cfg, "synth_spec.json"), spec_json);
    std::cout << "wrote prices.csv, yields.csv, truth.csv to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_report(const Overrides& o, const std::string& result_dir) {
    const fs::path dir = result_dir.empty() ? fs::path(resolve_config(o).out_dir)
                                            : fs::path(result_dir);
    const auto path = dir / "result.json";
    std::ifstream in(path);
    if (!in) throw regime::FileError(path.string(), "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw regime::ConfigError(path.string() + ": invalid JSON (" + e.what() + ")");
    }

    std::vector<std::string> names;
    std::vector<regime::MetricReport> reports;
    const auto& metrics = j.at("metrics");
    names.push_back(j.value("engine", "strategy"));
    reports.push_back(regime::report_from_json(metrics.at("strategy")));
    if (metrics.contains("hmm_baseline")) {
        names.push_back("hmm");
        reports.push_back(regime::report_from_json(metrics.at("hmm_baseline")));
    }
    names.push_back("index");
    reports.push_back(regime::report_from_json(metrics.at("benchmark")));
    std::cout << regime::render_metric_table(names, reports);

    const auto& bt = j.at("backtest");
    std::cout << "span " << bt.at("span").at("start").get<std::string>() << " .. "
              << bt.at("span").at("end").get<std::string>() << ", "
              << bt.at("n_reallocations").get<int>() << " reallocations, "
              << bt.at("regime_intervals").size() << " high-volatility interval(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regime identification and regime-aware allocation toolkit"};
    app.require_subcommand(1);

    Overrides o;
    std::string synth_spec_path;
    std::string report_dir;

    auto* ingest = app.add_subcommand("ingest", "load and align price/yield CSVs");
    auto* features = app.add_subcommand("features", "emit the feature matrix CSV");
    auto* fit = app.add_subcommand("fit", "fit one model on a fixed window");
    auto* cv = app.add_subcommand("cv", "jump-penalty grid search on the validation span");
    auto* backtest = app.add_subcommand("backtest", "walk-forward test-span evaluation");
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    auto* report = app.add_subcommand("report", "render the metric table of a finished run");
    for (auto* cmd : {ingest, features, fit, cv, backtest, synth, report})
        add_common_options(cmd, o);
    synth->add_option("spec", synth_spec_path, "synth spec JSON file")->required();
    report->add_option("dir", report_dir, "backtest output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(o);
        if (features->parsed()) return cmd_features(o);
        if (fit->parsed()) return cmd_fit(o);
        if (cv->parsed()) return cmd_cv(o);
        if (backtest->parsed()) return cmd_backtest(o);
        if (synth->parsed()) return cmd_synth(o, synth_spec_path);
        if (report->parsed()) return cmd_report(o, report_dir);
    } catch (const regime::FileError& e) {
        json err{{"error", e.what()}, {"path", e.path}};
        std::cerr << err.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        json err{{"error", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    return 0;
}
