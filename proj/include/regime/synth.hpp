#ifndef REGIME_SYNTH_HPP
#define REGIME_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "regime/matrix.hpp"
#include "regime/rng.hpp"
#include "regime/series.hpp"

namespace regime {

/// Regime-switching Gaussian path generator used by oracle tests and the
/// `synth` CLI subcommand. Fully reproducible from the seed.
struct SynthSpec {
    std::size_t n_days = 0;
    std::vector<double> state_means;  // daily log-return mean per state
    std::vector<double> state_stds;   // daily log-return std per state
    Matrix transitions;               // K x K row-stochastic
    int initial_state = 0;
    double annual_yield = 0.0;        // decimal, flat
    std::uint64_t seed = 0;
    Date start_date{1960, 1, 4};
    double initial_price = 100.0;

    std::size_t n_states() const { return state_means.size(); }

    void validate() const {
        const std::size_t k = n_states();
        if (n_days == 0) throw std::invalid_argument("SynthSpec: n_days must be positive");
        if (k == 0 || state_stds.size() != k)
            throw std::invalid_argument("SynthSpec: means/stds must be non-empty and equal length");
        for (double s : state_stds)
            if (!(s > 0.0)) throw std::invalid_argument("SynthSpec: stds must be positive");
        if (transitions.rows != k || transitions.cols != k)
            throw std::invalid_argument("SynthSpec: transition matrix must be K x K");
        for (std::size_t i = 0; i < k; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double p = transitions.at(i, j);
                if (p < 0.0 || p > 1.0) throw std::invalid_argument("SynthSpec: probabilities in [0,1]");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-12)
                throw std::invalid_argument("SynthSpec: transition rows must sum to 1");
        }
        if (initial_state < 0 || static_cast<std::size_t>(initial_state) >= k)
            throw std::invalid_argument("SynthSpec: initial_state out of range");
        if (initial_price <= 0.0) throw std::invalid_argument("SynthSpec: initial_price must be positive");
    }
};

struct SynthResult {
    MarketDataset dataset;
    std::vector<int> true_states;  // one per dataset row
    AlignedSeries prices;          // n_days + 1 levels (ingestible CSV source)
    AlignedSeries yields;          // flat annual yield on the same calendar
};

/// Simulates the Markov state path, draws per-state Gaussian log returns,
/// compounds the price level and assembles the dataset through the same
/// build_dataset path the CSV loaders use. The leading price point carries no
/// state, so true_states aligns one-to-one with dataset rows.
inline SynthResult simulate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    std::vector<int> states(spec.n_days);
    states[0] = spec.initial_state;
    for (std::size_t t = 1; t < spec.n_days; ++t)
        states[t] = static_cast<int>(
            rng.discrete(spec.transitions.row(static_cast<std::size_t>(states[t - 1]))));

    std::vector<double> log_returns(spec.n_days);
    for (std::size_t t = 0; t < spec.n_days; ++t) {
        const auto s = static_cast<std::size_t>(states[t]);
        log_returns[t] = spec.state_means[s] + spec.state_stds[s] * rng.normal();
    }

    const auto calendar = weekday_calendar(spec.start_date, spec.n_days + 1);
    std::vector<double> prices(spec.n_days + 1);
    prices[0] = spec.initial_price;
    for (std::size_t t = 0; t < spec.n_days; ++t) prices[t + 1] = prices[t] * std::exp(log_returns[t]);

    SynthResult out;
    out.prices = AlignedSeries(calendar, std::move(prices));
    out.yields = AlignedSeries(calendar, std::vector<double>(spec.n_days + 1, spec.annual_yield));
    out.dataset = build_dataset(out.prices, out.yields);
    out.true_states = std::move(states);
    if (out.dataset.size() != out.true_states.size())
        throw std::logic_error("simulate: state/dataset alignment failure");
    return out;
}

/// Mean per-class recall between binary sequences, after resolving the label
/// permutation to the better of the two mappings. Undefined (nullopt) when the
/// truth contains a single class.
inline std::optional<double> balanced_accuracy(std::span<const int> predicted,
                                               std::span<const int> truth) {
    if (predicted.size() != truth.size())
        throw std::invalid_argument("balanced_accuracy: length mismatch");
    std::size_t n0 = 0, n1 = 0, hit0 = 0, hit1 = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        if (truth[t] == 0) {
            ++n0;
            hit0 += predicted[t] == 0;
        } else {
            ++n1;
            hit1 += predicted[t] == 1;
        }
    }
    if (n0 == 0 || n1 == 0) return std::nullopt;
    const double direct = 0.5 * (static_cast<double>(hit0) / n0 + static_cast<double>(hit1) / n1);
    const double flipped =
        0.5 * (static_cast<double>(n0 - hit0) / n0 + static_cast<double>(n1 - hit1) / n1);
    return std::max(direct, flipped);
}

}  // namespace regime

#endif
