#ifndef REGIME_BACKTEST_HPP
#define REGIME_BACKTEST_HPP

#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime/features.hpp"
#include "regime/hmm.hpp"
#include "regime/jump_model.hpp"
#include "regime/metrics.hpp"
#include "regime/series.hpp"

namespace regime {

enum class Engine { jump_model, hmm_baseline };
enum class HmmDecodeMode { smoothed, viterbi };

/// Walk-forward protocol parameters. The jump-model engine refits biannually
/// (126 trading days) by default; the HMM baseline defaults to a 21-day refit
/// with daily decoding, and `refit_interval_days = 1` restores Bulla-style
/// daily refits for it.
struct WalkForwardConfig {
    int lookback_days = 2000;
    int refit_interval_days = 126;
    std::size_t n_states = 2;
    JumpPenalty lambda{100.0};
    double cost_per_side = 0.0010;  // 10 bps per one-way trade
    Engine engine = Engine::jump_model;
    std::uint64_t seed = 0;
    int n_restarts = 10;
    int hmm_filter_window = 5;
    HmmDecodeMode hmm_decode = HmmDecodeMode::smoothed;
    int hmm_refit_interval_days = 21;  // used for the secondary baseline column

    void validate() const {
        if (lookback_days < kTradingDaysPerYear)
            throw std::invalid_argument("WalkForwardConfig: lookback must be >= 252 days");
        if (refit_interval_days < 1 || hmm_refit_interval_days < 1)
            throw std::invalid_argument("WalkForwardConfig: refit interval must be >= 1");
        if (cost_per_side < 0.0)
            throw std::invalid_argument("WalkForwardConfig: cost must be >= 0");
        if (n_states < 1) throw std::invalid_argument("WalkForwardConfig: need K >= 1");
        if (n_restarts < 1) throw std::invalid_argument("WalkForwardConfig: need n_restarts >= 1");
        if (hmm_filter_window < 1 || hmm_filter_window % 2 == 0)
            throw std::invalid_argument("WalkForwardConfig: filter window must be odd and >= 1");
        if (engine == Engine::hmm_baseline && n_states != 2)
            throw std::invalid_argument("WalkForwardConfig: the HMM engine is two-state");
    }
};

struct DateRange {
    Date start;
    Date end;
};

struct RegimeInterval {
    Date start;
    Date end;
};

/// Daily record of one walk-forward run. forecasts[i] is the regime forecast
/// f_t that applies to dates[i] (emitted at the close of the previous trading
/// day); weights obey w_t = 1 - f_t exactly. Net returns charge
/// cost * |w_t - w_{t-1}| on the day a new weight takes effect, with the
/// portfolio starting fully invested (w = 1) at no charge.
struct BacktestResult {
    std::vector<Date> dates;
    std::vector<int> forecasts;
    std::vector<double> weights;
    std::vector<double> gross_returns;
    std::vector<double> net_returns;
    std::vector<double> equity_curve;  // cumulative product of (1 + net), start value 1
    std::vector<double> index_equity;  // buy-and-hold benchmark on the same span
    std::vector<RegimeInterval> regime_intervals;  // maximal runs with forecast = 1
    std::vector<Date> refit_dates;
    int n_reallocations = 0;
    std::vector<std::string> warnings;

    std::size_t size() const { return dates.size(); }
};

/// Step-three accounting: turns a forecast stream into weights, returns after
/// costs and equity curves. `span_begin` indexes the dataset row of the first
/// forecast day. Pure bookkeeping, shared by every engine.
inline BacktestResult apply_forecasts(const MarketDataset& dataset, std::size_t span_begin,
                                      std::span<const int> forecasts, double cost_per_side) {
    const std::size_t n = forecasts.size();
    if (n == 0) throw std::invalid_argument("apply_forecasts: empty span");
    if (span_begin + n > dataset.size())
        throw std::invalid_argument("apply_forecasts: span exceeds dataset");

    BacktestResult r;
    r.dates.assign(dataset.dates().begin() + static_cast<std::ptrdiff_t>(span_begin),
                   dataset.dates().begin() + static_cast<std::ptrdiff_t>(span_begin + n));
    r.forecasts.assign(forecasts.begin(), forecasts.end());
    r.weights.resize(n);
    r.gross_returns.resize(n);
    r.net_returns.resize(n);
    r.equity_curve.resize(n);
    r.index_equity.resize(n);

    double equity = 1.0, index_equity = 1.0, prev_weight = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = span_begin + i;
        if (forecasts[i] != 0 && forecasts[i] != 1)
            throw std::invalid_argument("apply_forecasts: forecasts must be binary");
        const double w = 1.0 - forecasts[i];
        const double market = dataset.index_returns.values[t];
        const double cash = dataset.risk_free_daily.values[t];
        const double gross = w * market + (1.0 - w) * cash;
        const double charge = cost_per_side * std::abs(w - prev_weight);
        r.weights[i] = w;
        r.gross_returns[i] = gross;
        r.net_returns[i] = gross - charge;
        equity *= 1.0 + r.net_returns[i];
        index_equity *= 1.0 + market;
        r.equity_curve[i] = equity;
        r.index_equity[i] = index_equity;
        if (w != prev_weight) ++r.n_reallocations;
        prev_weight = w;
    }

    for (std::size_t i = 0; i < n;) {
        if (r.forecasts[i] == 1) {
            std::size_t j = i;
            while (j + 1 < n && r.forecasts[j + 1] == 1) ++j;
            r.regime_intervals.push_back({r.dates[i], r.dates[j]});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return r;
}

namespace detail {

struct LabelStream {
    std::vector<int> labels;  // nowcast s_t for each decision day
    std::vector<std::size_t> refit_indices;
    std::vector<std::string> warnings;
};

/// Step-one engine loop. Emits the nowcast label s_t once per decision day in
/// [first_day, last_day], refitting every refit_interval days on the trailing
/// lookback window and decoding online (frozen parameters, data through day t
/// only) in between. A refit that degenerates to a single populated state
/// holds the previous label until the next refit.
inline LabelStream walk_forward_labels(const MarketDataset& dataset, const FeatureMatrix& features,
                                       const WalkForwardConfig& config, std::size_t first_day,
                                       std::size_t last_day) {
    LabelStream out;
    out.labels.reserve(last_day - first_day + 1);

    const auto lookback = static_cast<std::size_t>(config.lookback_days);
    const auto interval = static_cast<std::size_t>(config.refit_interval_days);

    // jump-model engine state
    bool jm_active = false;
    StandardizationParams frozen_params;
    Matrix frozen_centroids;
    // hmm engine state
    bool hmm_active = false;
    GaussianHmm hmm;

    std::size_t window_start = 0;
    int prev_label = 0;

    for (std::size_t t = first_day; t <= last_day; ++t) {
        const std::size_t offset = t - first_day;
        if (offset % interval == 0) {
            const std::uint64_t refit_seed = derive_seed(config.seed, offset / interval);
            window_start = t + 1 - lookback;
            out.refit_indices.push_back(t);
            if (config.engine == Engine::jump_model) {
                jm_active = false;
                try {
                    frozen_params = fit_standardizer(features, window_start, t + 1);
                    const FeatureMatrix z =
                        apply_standardizer(features, frozen_params, window_start, t + 1);
                    const std::span<const double> window_returns{
                        dataset.index_returns.values.data() + window_start, t + 1 - window_start};
                    const JumpModelFit fit = fit_jump_model(
                        z.values, config.n_states, config.lambda,
                        {config.n_restarts, 300, refit_seed}, window_returns);
                    if (fit.degenerate() && config.n_states > 1) {
                        out.warnings.push_back(
                            "degenerate fit (" + std::to_string(fit.effective_states) + "/" +
                            std::to_string(config.n_states) + " states populated) at refit " +
                            to_string(dataset.dates()[t]) + "; holding previous regime label");
                    } else {
                        frozen_centroids = fit.centroids;
                        jm_active = true;
                    }
                } catch (const std::invalid_argument& e) {
                    out.warnings.push_back("refit at " + to_string(dataset.dates()[t]) +
                                           " skipped (" + e.what() + "); holding previous label");
                }
            } else {
                const std::span<const double> window_returns{
                    dataset.log_returns.values.data() + window_start, t + 1 - window_start};
                hmm = baum_welch_fit(window_returns, config.n_states,
                                     {config.n_restarts, 500, 1e-6, refit_seed});
                if (hmm.variance_floored)
                    out.warnings.push_back("variance floored at refit " +
                                           to_string(dataset.dates()[t]));
                hmm_active = true;
            }
        }

        int label = prev_label;
        if (config.engine == Engine::jump_model && jm_active) {
            const FeatureMatrix z = apply_standardizer(features, frozen_params, window_start, t + 1);
            label = online_infer(z.values, frozen_centroids, config.lambda);
        } else if (config.engine == Engine::hmm_baseline && hmm_active) {
            const std::span<const double> upto_t{dataset.log_returns.values.data() + window_start,
                                                 t + 1 - window_start};
            std::vector<int> decoded = config.hmm_decode == HmmDecodeMode::smoothed
                                           ? smoothed_states(hmm, upto_t).states
                                           : viterbi_states(hmm, upto_t);
            label = median_filter(decoded, config.hmm_filter_window).back();
        }
        out.labels.push_back(label);
        prev_label = label;
    }
    return out;
}

}  // namespace detail

/// Step One + Two + Three over one date span: walk-forward regime nowcasts,
/// persistence forecast f_{t+1} = s_t, and the 0/1 risk-free switch with
/// transaction costs. The first decision day is the trading day before the
/// span start (its nowcast sets the first day's forecast); refits anchor
/// there. History must cover the lookback window plus feature warm-up.
inline BacktestResult run_walk_forward(const MarketDataset& dataset,
                                       const WalkForwardConfig& config, DateRange span) {
    config.validate();
    if (!(span.start <= span.end)) throw std::invalid_argument("run_walk_forward: empty span");

    const auto& dates = dataset.dates();
    const std::size_t s = dataset.index_prices.lower_bound(span.start);
    const auto last = dataset.index_prices.last_at_or_before(span.end);
    if (s >= dataset.size() || !last || *last < s)
        throw std::invalid_argument("run_walk_forward: span contains no trading days");
    const std::size_t e = *last;

    const std::size_t required = static_cast<std::size_t>(config.lookback_days) + kFeatureWarmup;
    if (s < required)
        throw std::invalid_argument(
            "run_walk_forward: insufficient history before span start (need " +
            std::to_string(required) + " rows, have " + std::to_string(s) + ")");

    const FeatureMatrix features = build_feature_set(dataset.log_returns);
    const auto stream = detail::walk_forward_labels(dataset, features, config, s - 1, e - 1);

    // f_t = s_{t-1}: the label stream shifted by one day onto the span
    BacktestResult result =
        apply_forecasts(dataset, s, std::span<const int>{stream.labels}, config.cost_per_side);
    result.warnings = stream.warnings;
    result.refit_dates.reserve(stream.refit_indices.size());
    for (std::size_t idx : stream.refit_indices) result.refit_dates.push_back(dates[idx]);
    return result;
}

/// One candidate's validation outcome.
struct LambdaRow {
    double lambda = 0.0;
    MetricReport report;
    int n_reallocations = 0;
    std::size_t n_warnings = 0;
};

struct LambdaSelection {
    double chosen_lambda = 0.0;
    std::vector<LambdaRow> table;  // one row per candidate, grid order
};

/// Single time-series split boundaries: training history ends at train_end,
/// validation covers (train_end, validation_end], test (validation_end, test_end].
struct SplitSpec {
    Date train_end;
    Date validation_end;
    Date test_end;

    void validate() const {
        if (!(train_end < validation_end && validation_end < test_end))
            throw std::invalid_argument("SplitSpec: boundaries must be strictly ordered");
    }
};

inline DateRange validation_span(const MarketDataset& dataset, const SplitSpec& split) {
    const std::size_t begin = dataset.index_prices.lower_bound(split.train_end) +
                              (dataset.index_prices.find(split.train_end) ? 1 : 0);
    if (begin >= dataset.size())
        throw std::invalid_argument("validation span is empty");
    return {dataset.dates()[begin], split.validation_end};
}

inline DateRange test_span(const MarketDataset& dataset, const SplitSpec& split) {
    const std::size_t begin = dataset.index_prices.lower_bound(split.validation_end) +
                              (dataset.index_prices.find(split.validation_end) ? 1 : 0);
    if (begin >= dataset.size())
        throw std::invalid_argument("test span is empty");
    return {dataset.dates()[begin], split.test_end};
}

/// Step Four, selection half: runs the validation walk-forward per candidate
/// jump penalty (concurrently; each run is independent and seeded identically)
/// and picks the highest validation Sharpe, breaking ties toward the larger
/// penalty. The full table is kept for the inverted-U diagnostic.
inline LambdaSelection select_lambda(const MarketDataset& dataset, const WalkForwardConfig& config,
                                     std::span<const double> grid, const SplitSpec& split) {
    if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
    split.validate();
    const DateRange span = validation_span(dataset, split);

    const std::size_t vbegin = dataset.index_prices.lower_bound(span.start);
    const std::size_t vend = *dataset.index_prices.last_at_or_before(span.end);
    const std::size_t v_days = vend - vbegin + 1;
    if (v_days < 2 * static_cast<std::size_t>(kTradingDaysPerYear))
        throw std::invalid_argument("select_lambda: validation period must cover >= 2 years");
    if (v_days < 2 * static_cast<std::size_t>(config.refit_interval_days))
        throw std::invalid_argument("select_lambda: validation period must contain >= 2 refits");

    std::vector<std::future<BacktestResult>> runs;
    runs.reserve(grid.size());
    for (double lam : grid) {
        WalkForwardConfig candidate = config;
        candidate.lambda = JumpPenalty(lam);
        runs.push_back(std::async(std::launch::async, [candidate, &dataset, span] {
            return run_walk_forward(dataset, candidate, span);
        }));
    }

    LambdaSelection out;
    bool chosen = false;
    double best_sharpe = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const BacktestResult run = runs[i].get();
        const std::span<const double> rf{dataset.risk_free_daily.values.data() + vbegin,
                                         run.size()};
        LambdaRow row;
        row.lambda = grid[i];
        row.report = performance_report(run.net_returns, rf, run.weights, run.dates);
        row.n_reallocations = run.n_reallocations;
        row.n_warnings = run.warnings.size();
        if (row.report.sharpe) {
            const double sh = *row.report.sharpe;
            if (!chosen || sh > best_sharpe || (sh == best_sharpe && row.lambda > out.chosen_lambda)) {
                chosen = true;
                best_sharpe = sh;
                out.chosen_lambda = row.lambda;
            }
        }
        out.table.push_back(std::move(row));
    }
    if (!chosen)
        throw std::runtime_error("select_lambda: Sharpe undefined for every candidate");
    return out;
}

/// Step Four, evaluation half: a single walk-forward over the test span with
/// the chosen penalty, reported against the buy-and-hold benchmark and, when
/// requested, the median-filtered HMM baseline run under its own refit cadence.
struct TestEvaluation {
    BacktestResult result;
    MetricReport strategy;
    MetricReport benchmark;
    std::optional<BacktestResult> hmm_result;
    std::optional<MetricReport> hmm_report;
};

inline TestEvaluation evaluate_test(const MarketDataset& dataset, const WalkForwardConfig& config,
                                    const SplitSpec& split, bool include_hmm_baseline = false) {
    split.validate();
    const DateRange span = test_span(dataset, split);

    TestEvaluation out;
    out.result = run_walk_forward(dataset, config, span);

    const std::size_t begin = dataset.index_prices.lower_bound(span.start);
    const std::size_t n = out.result.size();
    const std::span<const double> rf{dataset.risk_free_daily.values.data() + begin, n};
    const std::span<const double> market{dataset.index_returns.values.data() + begin, n};
    out.strategy = performance_report(out.result.net_returns, rf, out.result.weights,
                                      out.result.dates);
    const std::vector<double> hold(n, 1.0);
    out.benchmark = performance_report(market, rf, hold, out.result.dates);

    if (include_hmm_baseline && config.engine != Engine::hmm_baseline) {
        WalkForwardConfig baseline = config;
        baseline.engine = Engine::hmm_baseline;
        baseline.n_states = 2;
        baseline.refit_interval_days = config.hmm_refit_interval_days;
        out.hmm_result = run_walk_forward(dataset, baseline, span);
        out.hmm_report = performance_report(out.hmm_result->net_returns, rf,
                                            out.hmm_result->weights, out.hmm_result->dates);
    }
    return out;
}

}  // namespace regime

#endif
