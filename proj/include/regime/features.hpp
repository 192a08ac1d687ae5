#ifndef REGIME_FEATURES_HPP
#define REGIME_FEATURES_HPP

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regime/matrix.hpp"
#include "regime/series.hpp"

namespace regime {

/// Rows before this index are dominated by too few EWM terms (the longest
/// half-life is 120 days); fitting windows must start at or after it.
constexpr std::size_t kFeatureWarmup = 120;

/// Finite-history exponentially weighted mean with normalized weights
/// w_i = 2^(-i/half_life): output[t] = sum_i w_i x[t-i] / sum_i w_i.
inline std::vector<double> ewm_mean(std::span<const double> x, double half_life) {
    if (x.empty()) throw std::invalid_argument("ewm_mean: empty series");
    if (!(half_life > 0.0)) throw std::invalid_argument("ewm_mean: half-life must be positive");
    const double decay = std::exp2(-1.0 / half_life);
    std::vector<double> out(x.size());
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        num = x[t] + decay * num;
        den = 1.0 + decay * den;
        out[t] = num / den;
    }
    return out;
}

/// EWM downside deviation: sqrt of the EWM of min(r, 0)^2. Only negative
/// returns contribute; the threshold is zero, not the risk-free rate.
inline std::vector<double> ewm_downside_deviation(std::span<const double> returns, double half_life) {
    if (returns.empty()) throw std::invalid_argument("ewm_downside_deviation: empty series");
    std::vector<double> neg_sq(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        const double d = returns[t] < 0.0 ? returns[t] : 0.0;
        neg_sq[t] = d * d;
    }
    auto out = ewm_mean(neg_sq, half_life);
    for (double& v : out) v = std::sqrt(v);
    return out;
}

/// Date-indexed observation matrix feeding the clustering objective.
struct FeatureMatrix {
    std::vector<Date> dates;
    std::vector<std::string> names;
    Matrix values;

    std::size_t rows() const { return values.rows; }
    std::size_t cols() const { return values.cols; }
    std::span<const double> row(std::size_t r) const { return values.row(r); }
};

inline const std::array<std::string, 4>& feature_names() {
    static const std::array<std::string, 4> names = {
        "dd_hl20", "dd_hl20_minus_hl60", "dd_hl60_minus_hl120", "ewma_ret_hl120"};
    return names;
}

/// Builds the four-column feature set from daily log returns:
/// [DD(20), DD(20)-DD(60), DD(60)-DD(120), EWM mean return (120)].
inline FeatureMatrix build_feature_set(const AlignedSeries& log_returns) {
    if (log_returns.size() < kFeatureWarmup)
        throw std::invalid_argument("build_feature_set: need at least " +
                                    std::to_string(kFeatureWarmup) + " observations, got " +
                                    std::to_string(log_returns.size()));
    const std::span<const double> r{log_returns.values};
    const auto dd20 = ewm_downside_deviation(r, 20.0);
    const auto dd60 = ewm_downside_deviation(r, 60.0);
    const auto dd120 = ewm_downside_deviation(r, 120.0);
    const auto ret120 = ewm_mean(r, 120.0);

    FeatureMatrix out;
    out.dates = log_returns.dates;
    out.names.assign(feature_names().begin(), feature_names().end());
    out.values = Matrix(log_returns.size(), 4);
    for (std::size_t t = 0; t < log_returns.size(); ++t) {
        auto row = out.values.row(t);
        row[0] = dd20[t];
        row[1] = dd20[t] - dd60[t];
        row[2] = dd60[t] - dd120[t];
        row[3] = ret120[t];
    }
    return out;
}

/// Per-feature moments frozen on a fitting window.
struct StandardizationParams {
    std::vector<double> means;
    std::vector<double> stds;
};

/// Mean and population standard deviation per feature over rows [begin, end).
/// A zero-variance feature signals a degenerate window and is an error.
inline StandardizationParams fit_standardizer(const FeatureMatrix& features, std::size_t begin,
                                              std::size_t end) {
    if (end > features.rows() || begin >= end)
        throw std::invalid_argument("fit_standardizer: bad window");
    const std::size_t n = end - begin;
    if (n < 2) throw std::invalid_argument("fit_standardizer: window length must be >= 2");

    const std::size_t d = features.cols();
    StandardizationParams p;
    p.means.assign(d, 0.0);
    p.stds.assign(d, 0.0);
    for (std::size_t t = begin; t < end; ++t) {
        auto row = features.row(t);
        for (std::size_t j = 0; j < d; ++j) p.means[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) p.means[j] /= static_cast<double>(n);
    for (std::size_t t = begin; t < end; ++t) {
        auto row = features.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            const double c = row[j] - p.means[j];
            p.stds[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        p.stds[j] = std::sqrt(p.stds[j] / static_cast<double>(n));
        if (!(p.stds[j] > 0.0))
            throw std::invalid_argument("fit_standardizer: zero-variance feature '" +
                                        features.names[j] + "' on window");
    }
    return p;
}

/// Standardizes rows [begin, end) with frozen params; out-of-window rows use
/// the same moments, never re-estimated.
inline FeatureMatrix apply_standardizer(const FeatureMatrix& features,
                                        const StandardizationParams& params, std::size_t begin,
                                        std::size_t end) {
    if (end > features.rows() || begin > end)
        throw std::invalid_argument("apply_standardizer: bad range");
    if (params.means.size() != features.cols() || params.stds.size() != features.cols())
        throw std::invalid_argument("apply_standardizer: dimension mismatch");

    FeatureMatrix out;
    out.dates.assign(features.dates.begin() + static_cast<std::ptrdiff_t>(begin),
                     features.dates.begin() + static_cast<std::ptrdiff_t>(end));
    out.names = features.names;
    out.values = Matrix(end - begin, features.cols());
    for (std::size_t t = begin; t < end; ++t) {
        auto src = features.row(t);
        auto dst = out.values.row(t - begin);
        for (std::size_t j = 0; j < features.cols(); ++j)
            dst[j] = (src[j] - params.means[j]) / params.stds[j];
    }
    return out;
}

}  // namespace regime

#endif
