#ifndef REGIME_METRICS_HPP
#define REGIME_METRICS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "regime/dates.hpp"
#include "regime/series.hpp"

namespace regime {

/// The eight performance statistics reported for every strategy column.
/// Ratios whose denominator is zero are left unset rather than forced to a
/// number; renderers print an explicit undefined marker.
struct MetricReport {
    double ann_return = 0.0;
    double ann_vol = 0.0;
    std::optional<double> sharpe;
    double downside_dev = 0.0;
    std::optional<double> sortino;
    double max_drawdown = 0.0;  // <= 0
    std::optional<double> calmar;
    double avg_daily_turnover = 0.0;
    std::size_t mdd_peak_index = 0;
    std::size_t mdd_trough_index = 0;
    std::optional<Date> mdd_peak_date;
    std::optional<Date> mdd_trough_date;
};

/// Computes the report from daily net returns and the aligned daily risk-free
/// series. Conventions: geometric annualization for returns and the risk-free
/// leg, population std * sqrt(252) for vol, zero downside threshold, turnover
/// as the mean absolute day-over-day weight change (0 when weights absent).
inline MetricReport performance_report(std::span<const double> net_returns,
                                       std::span<const double> rf_daily,
                                       std::span<const double> weights = {}) {
    const std::size_t T = net_returns.size();
    if (T == 0) throw std::invalid_argument("performance_report: empty series");
    if (rf_daily.size() != T) throw std::invalid_argument("performance_report: rf length mismatch");
    if (!weights.empty() && weights.size() != T)
        throw std::invalid_argument("performance_report: weights length mismatch");

    const double years = static_cast<double>(T) / kTradingDaysPerYear;

    double log_growth = 0.0, log_growth_rf = 0.0;
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        log_growth += std::log1p(net_returns[t]);
        log_growth_rf += std::log1p(rf_daily[t]);
        mean += net_returns[t];
    }
    mean /= static_cast<double>(T);

    MetricReport r;
    r.ann_return = std::expm1(log_growth / years);
    const double ann_rf = std::expm1(log_growth_rf / years);

    double var = 0.0, downside = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double c = net_returns[t] - mean;
        var += c * c;
        const double d = net_returns[t] < 0.0 ? net_returns[t] : 0.0;
        downside += d * d;
    }
    r.ann_vol = std::sqrt(var / static_cast<double>(T)) * std::sqrt(double(kTradingDaysPerYear));
    r.downside_dev = std::sqrt(kTradingDaysPerYear * downside / static_cast<double>(T));

    if (r.ann_vol > 0.0) r.sharpe = (r.ann_return - ann_rf) / r.ann_vol;
    if (r.downside_dev > 0.0) r.sortino = (r.ann_return - ann_rf) / r.downside_dev;

    // max drawdown on the compounded equity curve: min_t equity_t / max_{u<=t} equity_u - 1
    double equity = 1.0, peak = -std::numeric_limits<double>::infinity(), mdd = 0.0;
    std::size_t peak_idx = 0;
    for (std::size_t t = 0; t < T; ++t) {
        equity *= 1.0 + net_returns[t];
        if (equity > peak) {
            peak = equity;
            peak_idx = t;
        }
        const double dd = equity / peak - 1.0;
        if (dd < mdd) {
            mdd = dd;
            r.mdd_peak_index = peak_idx;
            r.mdd_trough_index = t;
        }
    }
    r.max_drawdown = mdd;
    if (mdd < 0.0) r.calmar = r.ann_return / std::abs(mdd);

    if (!weights.empty()) {
        double turnover = 0.0;
        for (std::size_t t = 1; t < T; ++t) turnover += std::abs(weights[t] - weights[t - 1]);
        r.avg_daily_turnover = turnover / static_cast<double>(T);
    }
    return r;
}

/// Same report with MDD peak/trough dates resolved against the span calendar.
inline MetricReport performance_report(std::span<const double> net_returns,
                                       std::span<const double> rf_daily,
                                       std::span<const double> weights,
                                       std::span<const Date> dates) {
    MetricReport r = performance_report(net_returns, rf_daily, weights);
    if (dates.size() == net_returns.size() && r.max_drawdown < 0.0) {
        r.mdd_peak_date = dates[r.mdd_peak_index];
        r.mdd_trough_date = dates[r.mdd_trough_index];
    }
    return r;
}

}  // namespace regime

#endif
