#ifndef REGIME_CONFIG_HPP
#define REGIME_CONFIG_HPP

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "regime/backtest.hpp"
#include "regime/io.hpp"
#include "regime/series.hpp"
#include "regime/synth.hpp"

namespace regime {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Date require_date(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_string())
        throw ConfigError("config: missing date field '" + key + "'");
    const auto parsed = parse_date(j[key].get<std::string>());
    if (!parsed) throw ConfigError("config: bad ISO date in '" + key + "'");
    return *parsed;
}

inline CsvSchema schema_from_json(const json& j, const std::string& default_value_column) {
    CsvSchema s;
    s.value_column = default_value_column;
    if (j.contains("date_column")) s.date_column = j["date_column"].get<std::string>();
    if (j.contains("value_column")) s.value_column = j["value_column"].get<std::string>();
    if (j.contains("date_format")) s.date_format = j["date_format"].get<std::string>();
    return s;
}

}  // namespace detail

/// Declarative run description: data paths and schemas, split dates, engine
/// and hyperparameters, output directory. Loaded from a JSON config file;
/// command-line flags override individual fields. The canonical JSON dump of
/// the effective values is hashed into every output file.
struct RunConfig {
    std::string prices_csv;
    std::string yields_csv;
    CsvSchema price_schema{"date", "price", "%Y-%m-%d"};
    CsvSchema yield_schema{"date", "yield", "%Y-%m-%d"};

    std::optional<SplitSpec> split;

    Engine engine = Engine::jump_model;
    std::optional<double> lambda;
    std::vector<double> grid;
    double cost_per_side = 0.0010;
    std::uint64_t seed = 0;
    int lookback_days = 2000;
    std::optional<int> refit_interval_days;  // engine default when unset
    std::size_t n_states = 2;
    int n_restarts = 10;
    int hmm_filter_window = 5;
    HmmDecodeMode hmm_decode = HmmDecodeMode::smoothed;
    int hmm_refit_interval_days = 21;
    bool include_hmm_baseline = false;
    std::string out_dir = "out";

    std::optional<Date> fit_start;  // window for the standalone `fit` subcommand
    std::optional<Date> fit_end;

    int effective_refit_interval() const {
        if (refit_interval_days) return *refit_interval_days;
        return engine == Engine::hmm_baseline ? hmm_refit_interval_days : 126;
    }

    WalkForwardConfig walk_forward() const {
        WalkForwardConfig wf;
        wf.lookback_days = lookback_days;
        wf.refit_interval_days = effective_refit_interval();
        wf.n_states = n_states;
        wf.lambda = JumpPenalty(lambda.value_or(100.0));
        wf.cost_per_side = cost_per_side;
        wf.engine = engine;
        wf.seed = seed;
        wf.n_restarts = n_restarts;
        wf.hmm_filter_window = hmm_filter_window;
        wf.hmm_decode = hmm_decode;
        wf.hmm_refit_interval_days = hmm_refit_interval_days;
        wf.validate();
        return wf;
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        if (j.contains("data")) {
            const auto& d = j["data"];
            if (d.contains("prices_csv")) c.prices_csv = d["prices_csv"].get<std::string>();
            if (d.contains("yields_csv")) c.yields_csv = d["yields_csv"].get<std::string>();
            if (d.contains("price_schema"))
                c.price_schema = detail::schema_from_json(d["price_schema"], "price");
            if (d.contains("yield_schema"))
                c.yield_schema = detail::schema_from_json(d["yield_schema"], "yield");
        }
        if (j.contains("split")) {
            SplitSpec s;
            s.train_end = detail::require_date(j["split"], "train_end");
            s.validation_end = detail::require_date(j["split"], "validation_end");
            s.test_end = detail::require_date(j["split"], "test_end");
            s.validate();
            c.split = s;
        }
        if (j.contains("engine")) {
            const auto name = j["engine"].get<std::string>();
            if (name == "jm")
                c.engine = Engine::jump_model;
            else if (name == "hmm")
                c.engine = Engine::hmm_baseline;
            else
                throw ConfigError("config: engine must be 'jm' or 'hmm'");
        }
        if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
        if (j.contains("grid")) c.grid = j["grid"].get<std::vector<double>>();
        if (j.contains("cost_per_side")) c.cost_per_side = j["cost_per_side"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("lookback_days")) c.lookback_days = j["lookback_days"].get<int>();
        if (j.contains("refit_interval_days"))
            c.refit_interval_days = j["refit_interval_days"].get<int>();
        if (j.contains("n_states")) c.n_states = j["n_states"].get<std::size_t>();
        if (j.contains("n_restarts")) c.n_restarts = j["n_restarts"].get<int>();
        if (j.contains("hmm")) {
            const auto& h = j["hmm"];
            if (h.contains("filter_window")) c.hmm_filter_window = h["filter_window"].get<int>();
            if (h.contains("refit_interval_days"))
                c.hmm_refit_interval_days = h["refit_interval_days"].get<int>();
            if (h.contains("decode")) {
                const auto mode = h["decode"].get<std::string>();
                if (mode == "smoothed")
                    c.hmm_decode = HmmDecodeMode::smoothed;
                else if (mode == "viterbi")
                    c.hmm_decode = HmmDecodeMode::viterbi;
                else
                    throw ConfigError("config: hmm.decode must be 'smoothed' or 'viterbi'");
            }
        }
        if (j.contains("include_hmm_baseline"))
            c.include_hmm_baseline = j["include_hmm_baseline"].get<bool>();
        if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("fit_window")) {
            c.fit_start = detail::require_date(j["fit_window"], "start");
            c.fit_end = detail::require_date(j["fit_window"], "end");
        }
        return c;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw FileError(path, "cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw ConfigError(path + ": invalid JSON (" + e.what() + ")");
        }
        try {
            return from_json(j);
        } catch (const json::exception& e) {
            throw ConfigError(path + ": bad config value (" + e.what() + ")");
        }
    }

    /// Canonical effective values (keys sorted by nlohmann's object ordering);
    /// the hash of this dump fingerprints the run.
    json to_json() const {
        json j;
        j["data"] = {{"prices_csv", prices_csv},
                     {"yields_csv", yields_csv},
                     {"price_schema",
                      {{"date_column", price_schema.date_column},
                       {"value_column", price_schema.value_column},
                       {"date_format", price_schema.date_format}}},
                     {"yield_schema",
                      {{"date_column", yield_schema.date_column},
                       {"value_column", yield_schema.value_column},
                       {"date_format", yield_schema.date_format}}}};
        if (split)
            j["split"] = {{"train_end", to_string(split->train_end)},
                          {"validation_end", to_string(split->validation_end)},
                          {"test_end", to_string(split->test_end)}};
        j["engine"] = engine == Engine::jump_model ? "jm" : "hmm";
        if (lambda) j["lambda"] = *lambda;
        if (!grid.empty()) j["grid"] = grid;
        j["cost_per_side"] = cost_per_side;
        j["seed"] = seed;
        j["lookback_days"] = lookback_days;
        j["refit_interval_days"] = effective_refit_interval();
        j["n_states"] = n_states;
        j["n_restarts"] = n_restarts;
        j["hmm"] = {{"filter_window", hmm_filter_window},
                    {"refit_interval_days", hmm_refit_interval_days},
                    {"decode", hmm_decode == HmmDecodeMode::smoothed ? "smoothed" : "viterbi"}};
        j["include_hmm_baseline"] = include_hmm_baseline;
        j["out_dir"] = out_dir;
        if (fit_start && fit_end)
            j["fit_window"] = {{"start", to_string(*fit_start)}, {"end", to_string(*fit_end)}};
        return j;
    }

    std::string config_hash() const { return hash_hex(fnv1a_hash(to_json().dump())); }

    OutputMeta meta() const { return OutputMeta{config_hash(), seed}; }

    MarketDataset load_dataset() const {
        if (prices_csv.empty() || yields_csv.empty())
            throw ConfigError("config: data.prices_csv and data.yields_csv are required");
        const AlignedSeries prices = load_csv(prices_csv, price_schema);
        const AlignedSeries yields = load_csv(yields_csv, yield_schema);
        return build_dataset(prices, yields);
    }
};

/// Synth generator description file (see SynthSpec).
inline SynthSpec synth_spec_from_json(const json& j) {
    SynthSpec s;
    try {
        s.n_days = j.at("n_days").get<std::size_t>();
        s.state_means = j.at("state_means").get<std::vector<double>>();
        s.state_stds = j.at("state_stds").get<std::vector<double>>();
        const auto rows = j.at("transitions").get<std::vector<std::vector<double>>>();
        s.transitions = Matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != s.transitions.cols)
                throw ConfigError("synth spec: ragged transition matrix");
            for (std::size_t k = 0; k < rows[i].size(); ++k) s.transitions.at(i, k) = rows[i][k];
        }
        if (j.contains("initial_state")) s.initial_state = j["initial_state"].get<int>();
        if (j.contains("annual_yield")) s.annual_yield = j["annual_yield"].get<double>();
        if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("start_date")) {
            const auto d = parse_date(j["start_date"].get<std::string>());
            if (!d) throw ConfigError("synth spec: bad start_date");
            s.start_date = *d;
        }
        if (j.contains("initial_price")) s.initial_price = j["initial_price"].get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    return s;
}

inline SynthSpec synth_spec_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError(path, "cannot open synth spec: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON (" + e.what() + ")");
    }
    return synth_spec_from_json(j);
}

}  // namespace regime

#endif
