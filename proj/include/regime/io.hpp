#ifndef REGIME_IO_HPP
#define REGIME_IO_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "regime/backtest.hpp"
#include "regime/features.hpp"
#include "regime/hmm.hpp"
#include "regime/jump_model.hpp"
#include "regime/metrics.hpp"
#include "regime/series.hpp"

namespace regime {

using nlohmann::json;

/// FNV-1a 64-bit; platform-independent, used to fingerprint run configs.
inline std::uint64_t fnv1a_hash(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Shortest round-trip decimal representation; keeps output files byte-stable.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// Identifies the producing run in every output file.
struct OutputMeta {
    std::string config_hash;
    std::uint64_t seed = 0;

    std::string comment_line() const {
        return "# config_hash=" + config_hash + " seed=" + std::to_string(seed);
    }
    void annotate(json& j) const {
        j["config_hash"] = config_hash;
        j["seed"] = seed;
    }
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FileError(path, "cannot write file: " + path);
    return out;
}

}  // namespace detail

inline void write_series_csv(const std::string& path, const AlignedSeries& series,
                             const std::string& value_column, const OutputMeta& meta) {
    auto out = detail::open_out(path);
    out << meta.comment_line() << "\n";
    out << "date," << value_column << "\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        out << to_string(series.dates[i]) << ',' << format_double(series.values[i]) << "\n";
}

inline void write_dataset_csv(const std::string& path, const MarketDataset& dataset,
                              const OutputMeta& meta) {
    auto out = detail::open_out(path);
    out << meta.comment_line() << "\n";
    out << "date,price,return,log_return,rf_daily\n";
    for (std::size_t i = 0; i < dataset.size(); ++i)
        out << to_string(dataset.dates()[i]) << ',' << format_double(dataset.index_prices.values[i])
            << ',' << format_double(dataset.index_returns.values[i]) << ','
            << format_double(dataset.log_returns.values[i]) << ','
            << format_double(dataset.risk_free_daily.values[i]) << "\n";
}

inline void write_features_csv(const std::string& path, const FeatureMatrix& features,
                               const OutputMeta& meta) {
    auto out = detail::open_out(path);
    out << meta.comment_line() << "\n";
    out << "date";
    for (const auto& name : features.names) out << ',' << name;
    out << "\n";
    for (std::size_t t = 0; t < features.rows(); ++t) {
        out << to_string(features.dates[t]);
        for (double v : features.row(t)) out << ',' << format_double(v);
        out << "\n";
    }
}

inline void write_equity_csv(const std::string& path, const BacktestResult& result,
                             const OutputMeta& meta) {
    auto out = detail::open_out(path);
    out << meta.comment_line() << "\n";
    out << "date,index_equity,strategy_equity\n";
    for (std::size_t i = 0; i < result.size(); ++i)
        out << to_string(result.dates[i]) << ',' << format_double(result.index_equity[i]) << ','
            << format_double(result.equity_curve[i]) << "\n";
}

inline void write_regimes_csv(const std::string& path, const BacktestResult& result,
                              const OutputMeta& meta) {
    auto out = detail::open_out(path);
    out << meta.comment_line() << "\n";
    out << "start,end\n";
    for (const auto& iv : result.regime_intervals)
        out << to_string(iv.start) << ',' << to_string(iv.end) << "\n";
}

inline json report_to_json(const MetricReport& r) {
    auto ratio = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["ann_return"] = r.ann_return;
    j["ann_vol"] = r.ann_vol;
    j["sharpe"] = ratio(r.sharpe);
    j["downside_dev"] = r.downside_dev;
    j["sortino"] = ratio(r.sortino);
    j["max_drawdown"] = r.max_drawdown;
    j["calmar"] = ratio(r.calmar);
    j["avg_daily_turnover"] = r.avg_daily_turnover;
    if (r.mdd_peak_date) j["mdd_peak_date"] = to_string(*r.mdd_peak_date);
    if (r.mdd_trough_date) j["mdd_trough_date"] = to_string(*r.mdd_trough_date);
    return j;
}

inline MetricReport report_from_json(const json& j) {
    MetricReport r;
    auto ratio = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<double>();
    };
    r.ann_return = j.at("ann_return").get<double>();
    r.ann_vol = j.at("ann_vol").get<double>();
    r.sharpe = ratio("sharpe");
    r.downside_dev = j.at("downside_dev").get<double>();
    r.sortino = ratio("sortino");
    r.max_drawdown = j.at("max_drawdown").get<double>();
    r.calmar = ratio("calmar");
    r.avg_daily_turnover = j.at("avg_daily_turnover").get<double>();
    if (j.contains("mdd_peak_date")) r.mdd_peak_date = parse_date(j["mdd_peak_date"].get<std::string>());
    if (j.contains("mdd_trough_date"))
        r.mdd_trough_date = parse_date(j["mdd_trough_date"].get<std::string>());
    return r;
}

/// Table 3/4-style fixed row order for CSV and text rendering.
inline const std::vector<std::string>& metric_row_names() {
    static const std::vector<std::string> names = {"ret",     "vol",    "Sharpe", "DD",
                                                   "Sortino", "MDD",    "Calmar", "turnover"};
    return names;
}

inline std::vector<std::optional<double>> metric_row_values(const MetricReport& r) {
    return {r.ann_return, r.ann_vol, r.sharpe,  r.downside_dev,
            r.sortino,    r.max_drawdown, r.calmar, r.avg_daily_turnover};
}

/// Aligned plain-text metric table; one column per strategy, rows in the
/// published order. Undefined ratios render as "undef".
inline std::string render_metric_table(const std::vector<std::string>& column_names,
                                       const std::vector<MetricReport>& columns) {
    std::string out;
    char buf[64];
    constexpr int name_width = 10, col_width = 12;
    std::snprintf(buf, sizeof(buf), "%-*s", name_width, "");
    out += buf;
    for (const auto& name : column_names) {
        std::snprintf(buf, sizeof(buf), "%*s", col_width, name.c_str());
        out += buf;
    }
    out += "\n";
    const auto& rows = metric_row_names();
    std::vector<std::vector<std::optional<double>>> values;
    values.reserve(columns.size());
    for (const auto& c : columns) values.push_back(metric_row_values(c));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%-*s", name_width, rows[r].c_str());
        out += buf;
        for (const auto& col : values) {
            if (col[r])
                std::snprintf(buf, sizeof(buf), "%*.4f", col_width, *col[r]);
            else
                std::snprintf(buf, sizeof(buf), "%*s", col_width, "undef");
            out += buf;
        }
        out += "\n";
    }
    return out;
}

/// Run-length encoding of a state sequence as [state, start, end] intervals
/// (dates when available, indices otherwise).
inline json states_to_intervals(std::span<const int> states, std::span<const Date> dates) {
    json intervals = json::array();
    for (std::size_t i = 0; i < states.size();) {
        std::size_t j = i;
        while (j + 1 < states.size() && states[j + 1] == states[i]) ++j;
        json iv;
        iv["state"] = states[i];
        if (dates.size() == states.size()) {
            iv["start"] = to_string(dates[i]);
            iv["end"] = to_string(dates[j]);
        } else {
            iv["start"] = i;
            iv["end"] = j;
        }
        intervals.push_back(std::move(iv));
        i = j + 1;
    }
    return intervals;
}

inline json fit_to_json(const JumpModelFit& fit, std::span<const Date> dates = {}) {
    json j;
    j["model"] = "jump_model";
    j["lambda"] = fit.lambda.value;
    j["seed"] = fit.seed;
    j["objective"] = fit.objective;
    j["n_restarts_used"] = fit.n_restarts_used;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["effective_states"] = fit.effective_states;
    j["degenerate_warning"] = fit.all_restarts_degenerate;
    json centroids = json::array();
    for (std::size_t k = 0; k < fit.centroids.rows; ++k) {
        json row = json::array();
        for (double v : fit.centroids.row(k)) row.push_back(v);
        centroids.push_back(std::move(row));
    }
    j["centroids"] = std::move(centroids);
    j["state_intervals"] = states_to_intervals(fit.states, dates);
    return j;
}

inline json hmm_to_json(const GaussianHmm& model, std::span<const int> states = {},
                        std::span<const Date> dates = {}) {
    json j;
    j["model"] = "gaussian_hmm";
    j["seed"] = model.seed;
    j["log_likelihood"] = model.log_likelihood;
    j["converged"] = model.converged;
    j["iterations"] = model.iterations;
    j["variance_floored"] = model.variance_floored;
    j["initial"] = model.initial;
    j["means"] = model.means;
    j["stds"] = model.stds;
    json trans = json::array();
    for (std::size_t i = 0; i < model.transitions.rows; ++i) {
        json row = json::array();
        for (double v : model.transitions.row(i)) row.push_back(v);
        trans.push_back(std::move(row));
    }
    j["transitions"] = std::move(trans);
    if (!states.empty()) j["state_intervals"] = states_to_intervals(states, dates);
    return j;
}

inline void write_cv_table_csv(const std::string& path, const LambdaSelection& selection,
                               const OutputMeta& meta) {
    auto out = detail::open_out(path);
    out << meta.comment_line() << "\n";
    out << "lambda,ann_return,ann_vol,sharpe,downside_dev,sortino,max_drawdown,calmar,"
           "avg_daily_turnover,n_reallocations\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string("undefined");
    };
    for (const auto& row : selection.table) {
        const auto& r = row.report;
        out << format_double(row.lambda) << ',' << format_double(r.ann_return) << ','
            << format_double(r.ann_vol) << ',' << cell(r.sharpe) << ','
            << format_double(r.downside_dev) << ',' << cell(r.sortino) << ','
            << format_double(r.max_drawdown) << ',' << cell(r.calmar) << ','
            << format_double(r.avg_daily_turnover) << ',' << row.n_reallocations << "\n";
    }
}

inline json backtest_to_json(const BacktestResult& result) {
    json j;
    j["span"] = {{"start", to_string(result.dates.front())},
                 {"end", to_string(result.dates.back())}};
    j["n_days"] = result.size();
    j["n_reallocations"] = result.n_reallocations;
    j["final_equity"] = result.equity_curve.back();
    j["final_index_equity"] = result.index_equity.back();
    json refits = json::array();
    for (const auto& d : result.refit_dates) refits.push_back(to_string(d));
    j["refit_dates"] = std::move(refits);
    json intervals = json::array();
    for (const auto& iv : result.regime_intervals)
        intervals.push_back({{"start", to_string(iv.start)}, {"end", to_string(iv.end)}});
    j["regime_intervals"] = std::move(intervals);
    j["warnings"] = result.warnings;
    return j;
}

inline void write_json(const std::string& path, const json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << "\n";
}

}  // namespace regime

#endif
