#ifndef REGIME_JUMP_MODEL_HPP
#define REGIME_JUMP_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "regime/matrix.hpp"
#include "regime/rng.hpp"

namespace regime {

/// Fixed cost charged per state change in the clustering objective.
struct JumpPenalty {
    double value = 0.0;

    JumpPenalty() = default;
    explicit JumpPenalty(double v) : value(v) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw std::invalid_argument("JumpPenalty: value must be finite and >= 0");
    }
};

/// Half squared Euclidean distance; the 1/2 keeps penalties comparable across
/// implementations that share this loss convention.
inline double half_sq_loss(std::span<const double> y, std::span<const double> theta) {
    return 0.5 * squared_distance(y, theta);
}

/// Total objective of a (centroids, states) pair:
/// sum_t 0.5*||y_t - theta_{s_t}||^2 + lambda * #transitions.
inline double jump_objective(const Matrix& features, const Matrix& centroids,
                             std::span<const int> states, JumpPenalty lambda) {
    double total = 0.0;
    for (std::size_t t = 0; t < features.rows; ++t) {
        total += half_sq_loss(features.row(t), centroids.row(static_cast<std::size_t>(states[t])));
        if (t > 0 && states[t] != states[t - 1]) total += lambda.value;
    }
    return total;
}

struct DpResult {
    std::vector<int> states;
    double objective = 0.0;
};

namespace detail {

/// Pointwise losses L[t][k] = 0.5*||y_t - theta_k||^2.
inline Matrix pointwise_losses(const Matrix& features, const Matrix& centroids) {
    Matrix L(features.rows, centroids.rows);
    for (std::size_t t = 0; t < features.rows; ++t) {
        auto y = features.row(t);
        for (std::size_t k = 0; k < centroids.rows; ++k)
            L.at(t, k) = half_sq_loss(y, centroids.row(k));
    }
    return L;
}

/// Forward value recursion over precomputed losses. Returns the T x K table
/// V[t][k] = cost of the best length-(t+1) sequence ending in state k.
inline Matrix dp_values(const Matrix& losses, double lambda) {
    const std::size_t T = losses.rows, K = losses.cols;
    Matrix V(T, K);
    for (std::size_t k = 0; k < K; ++k) V.at(0, k) = losses.at(0, k);
    for (std::size_t t = 1; t < T; ++t) {
        // min_j V[t-1][j] + lambda*(j != k) == min(V[t-1][k], min_j V[t-1][j] + lambda)
        double prev_min = V.at(t - 1, 0);
        for (std::size_t j = 1; j < K; ++j) prev_min = std::min(prev_min, V.at(t - 1, j));
        for (std::size_t k = 0; k < K; ++k)
            V.at(t, k) = losses.at(t, k) + std::min(V.at(t - 1, k), prev_min + lambda);
    }
    return V;
}

inline int argmin_row(const Matrix& V, std::size_t t) {
    int best = 0;
    for (std::size_t k = 1; k < V.cols; ++k)
        if (V.at(t, k) < V.at(t, static_cast<std::size_t>(best))) best = static_cast<int>(k);
    return best;
}

}  // namespace detail

/// Exact minimizer of the jump objective over all K^T state sequences via the
/// Viterbi-style recursion V_t(k) = loss(t,k) + min_j(V_{t-1}(j) + lambda*1[j!=k]).
/// Tie-breaking is pinned for reproducibility: the final state takes the lowest
/// index among minima, and the backward pass prefers continuing the current
/// state, then the lowest index.
inline DpResult optimal_states_dp(const Matrix& features, const Matrix& centroids,
                                  JumpPenalty lambda) {
    if (features.rows == 0) throw std::invalid_argument("optimal_states_dp: empty features");
    if (centroids.rows == 0) throw std::invalid_argument("optimal_states_dp: no centroids");
    if (features.cols != centroids.cols)
        throw std::invalid_argument("optimal_states_dp: dimension mismatch");

    const Matrix losses = detail::pointwise_losses(features, centroids);
    const Matrix V = detail::dp_values(losses, lambda.value);
    const std::size_t T = features.rows, K = centroids.rows;

    DpResult out;
    out.states.resize(T);
    out.states[T - 1] = detail::argmin_row(V, T - 1);
    out.objective = V.at(T - 1, static_cast<std::size_t>(out.states[T - 1]));
    for (std::size_t t = T - 1; t-- > 0;) {
        const int k = out.states[t + 1];
        int best = k;
        double best_cost = V.at(t, static_cast<std::size_t>(k));
        for (std::size_t j = 0; j < K; ++j) {
            const double cost = V.at(t, j) + (static_cast<int>(j) != k ? lambda.value : 0.0);
            if (cost < best_cost) {
                best_cost = cost;
                best = static_cast<int>(j);
            }
        }
        out.states[t] = best;
    }
    return out;
}

/// Decodes only the final day's state with frozen centroids, using the rolling
/// form of the same recursion. Matches the last state of optimal_states_dp on
/// identical inputs.
inline int online_infer(const Matrix& features_upto_t, const Matrix& centroids, JumpPenalty lambda) {
    if (features_upto_t.rows == 0) throw std::invalid_argument("online_infer: empty features");
    const std::size_t K = centroids.rows;
    std::vector<double> prev(K), cur(K);
    for (std::size_t k = 0; k < K; ++k)
        prev[k] = half_sq_loss(features_upto_t.row(0), centroids.row(k));
    for (std::size_t t = 1; t < features_upto_t.rows; ++t) {
        auto y = features_upto_t.row(t);
        const double prev_min = *std::min_element(prev.begin(), prev.end());
        for (std::size_t k = 0; k < K; ++k)
            cur[k] = half_sq_loss(y, centroids.row(k)) + std::min(prev[k], prev_min + lambda.value);
        std::swap(prev, cur);
    }
    int best = 0;
    for (std::size_t k = 1; k < K; ++k)
        if (prev[k] < prev[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

/// k-means++ seeding: first centroid uniform, each further centroid sampled
/// with probability proportional to the squared distance to the nearest
/// already-chosen centroid. Deterministic given the seed.
inline Matrix kmeanspp_init(const Matrix& features, std::size_t k, std::uint64_t seed) {
    const std::size_t T = features.rows, D = features.cols;
    if (k == 0 || T < k) throw std::invalid_argument("kmeanspp_init: need T >= K >= 1");

    Rng rng(seed);
    Matrix centroids(k, D);
    std::vector<double> d2(T, std::numeric_limits<double>::infinity());

    const std::size_t first = static_cast<std::size_t>(rng.below(T));
    std::copy_n(features.row(first).begin(), D, centroids.row(0).begin());

    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double d = squared_distance(features.row(t), centroids.row(c - 1));
            d2[t] = std::min(d2[t], d);
            total += d2[t];
        }
        if (!(total > 0.0))
            throw std::invalid_argument("kmeanspp_init: fewer than K distinct rows");
        const std::size_t pick = rng.discrete(d2);
        std::copy_n(features.row(pick).begin(), D, centroids.row(c).begin());
    }
    return centroids;
}

/// Fitted jump model: centroids, penalty and the decoded state sequence, with
/// provenance (seed, restart count) and health flags.
struct JumpModelFit {
    Matrix centroids;          // K x D
    JumpPenalty lambda;
    std::vector<int> states;   // length T, values in [0, K)
    double objective = 0.0;
    int n_restarts_used = 0;
    bool converged = false;
    int iterations = 0;
    int effective_states = 0;           // populated states of the winning restart
    bool all_restarts_degenerate = false;
    std::uint64_t seed = 0;

    std::size_t n_states() const { return centroids.rows; }
    bool degenerate() const { return effective_states < static_cast<int>(centroids.rows); }
};

struct JumpFitOptions {
    int n_restarts = 10;
    int max_iterations = 300;
    std::uint64_t seed = 0;
};

namespace detail {

inline int count_populated(std::span<const int> states, std::size_t k) {
    std::vector<char> seen(k, 0);
    for (int s : states) seen[static_cast<std::size_t>(s)] = 1;
    int n = 0;
    for (char c : seen) n += c;
    return n;
}

}  // namespace detail

/// Canonicalizes labels so that state 1 carries the higher return volatility
/// (general K: states ordered by ascending volatility of their assigned
/// returns). Centroids and states are permuted consistently; the objective is
/// unchanged. Identity when fewer than two states are populated.
inline JumpModelFit relabel_by_volatility(JumpModelFit fit, std::span<const double> raw_returns) {
    if (raw_returns.size() != fit.states.size())
        throw std::invalid_argument("relabel_by_volatility: returns/states length mismatch");
    const std::size_t K = fit.n_states();
    if (K < 2 || detail::count_populated(fit.states, K) < 2) return fit;

    std::vector<double> sum(K, 0.0), sumsq(K, 0.0);
    std::vector<std::size_t> count(K, 0);
    for (std::size_t t = 0; t < raw_returns.size(); ++t) {
        const auto k = static_cast<std::size_t>(fit.states[t]);
        sum[k] += raw_returns[t];
        sumsq[k] += raw_returns[t] * raw_returns[t];
        ++count[k];
    }
    std::vector<double> vol(K, -1.0);  // unpopulated states sort first
    for (std::size_t k = 0; k < K; ++k) {
        if (count[k] == 0) continue;
        const double m = sum[k] / static_cast<double>(count[k]);
        vol[k] = std::sqrt(std::max(0.0, sumsq[k] / static_cast<double>(count[k]) - m * m));
    }
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vol[a] < vol[b]; });

    std::vector<int> relabel(K);
    for (std::size_t pos = 0; pos < K; ++pos) relabel[order[pos]] = static_cast<int>(pos);

    Matrix centroids(K, fit.centroids.cols);
    for (std::size_t k = 0; k < K; ++k)
        std::copy_n(fit.centroids.row(order[k]).begin(), fit.centroids.cols,
                    centroids.row(k).begin());
    fit.centroids = std::move(centroids);
    for (int& s : fit.states) s = relabel[static_cast<std::size_t>(s)];
    return fit;
}

/// Fits the jump model by coordinate descent (centroid means given states,
/// exact DP decode given centroids) with k-means++ multi-start. Restart r uses
/// seed `options.seed + r`; the best restart by objective wins, with the lower
/// restart index on ties. When `returns_for_labeling` is non-empty the result
/// is canonicalized via relabel_by_volatility.
///
/// A restart whose converged decode populates fewer than K states is recorded
/// as degenerate; if every restart degenerates (and K > 1) the fit carries the
/// all_restarts_degenerate warning flag rather than failing.
inline JumpModelFit fit_jump_model(const Matrix& features, std::size_t k, JumpPenalty lambda,
                                   const JumpFitOptions& options = {},
                                   std::span<const double> returns_for_labeling = {}) {
    const std::size_t T = features.rows;
    if (T < k || k == 0) throw std::invalid_argument("fit_jump_model: need T >= K >= 1");
    if (options.n_restarts < 1) throw std::invalid_argument("fit_jump_model: need n_restarts >= 1");

    JumpModelFit best;
    bool have_best = false;
    bool any_nondegenerate = false;

    for (int r = 0; r < options.n_restarts; ++r) {
        Matrix centroids = kmeanspp_init(features, k, options.seed + static_cast<std::uint64_t>(r));
        std::vector<int> prev_states;
        DpResult dp;
        double prev_objective = std::numeric_limits<double>::infinity();
        bool converged = false;
        int iter = 0;
        while (iter < options.max_iterations) {
            ++iter;
            dp = optimal_states_dp(features, centroids, lambda);
            if (dp.objective > prev_objective + 1e-9 * std::max(1.0, std::abs(prev_objective)))
                throw std::logic_error("fit_jump_model: objective increased during descent");
            prev_objective = dp.objective;
            if (dp.states == prev_states) {
                converged = true;
                break;
            }
            prev_states = dp.states;
            // centroid step: mean of assigned rows; empty clusters keep their value
            Matrix sums(k, features.cols);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t t = 0; t < T; ++t) {
                const auto s = static_cast<std::size_t>(dp.states[t]);
                auto row = features.row(t);
                auto acc = sums.row(s);
                for (std::size_t j = 0; j < features.cols; ++j) acc[j] += row[j];
                ++counts[s];
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] == 0) continue;
                auto dst = centroids.row(c);
                auto src = sums.row(c);
                for (std::size_t j = 0; j < features.cols; ++j)
                    dst[j] = src[j] / static_cast<double>(counts[c]);
            }
        }
        const int populated = detail::count_populated(dp.states, k);
        if (populated == static_cast<int>(k)) any_nondegenerate = true;
        if (!have_best || dp.objective < best.objective) {
            have_best = true;
            best.centroids = std::move(centroids);
            best.states = std::move(dp.states);
            best.objective = dp.objective;
            best.converged = converged;
            best.iterations = iter;
            best.effective_states = populated;
        }
    }

    best.lambda = lambda;
    best.n_restarts_used = options.n_restarts;
    best.seed = options.seed;
    best.all_restarts_degenerate = !any_nondegenerate && k > 1;
    if (!returns_for_labeling.empty()) best = relabel_by_volatility(std::move(best), returns_for_labeling);
    return best;
}

/// Row-stochastic K x K matrix of empirical transition frequencies.
struct TransitionEstimate {
    Matrix matrix;
};

/// matrix[i][j] = count(i -> j) / count(i -> any); unvisited rows default to
/// the identity row.
inline TransitionEstimate estimate_transitions(std::span<const int> states, std::size_t k) {
    if (states.size() < 2) throw std::invalid_argument("estimate_transitions: need length >= 2");
    Matrix counts(k, k);
    for (std::size_t t = 1; t < states.size(); ++t)
        counts.at(static_cast<std::size_t>(states[t - 1]), static_cast<std::size_t>(states[t])) += 1.0;
    TransitionEstimate out{Matrix(k, k)};
    for (std::size_t i = 0; i < k; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += counts.at(i, j);
        if (total == 0.0) {
            out.matrix.at(i, i) = 1.0;
        } else {
            for (std::size_t j = 0; j < k; ++j) out.matrix.at(i, j) = counts.at(i, j) / total;
        }
    }
    return out;
}

/// Number of state changes in a label sequence.
inline int count_transitions(std::span<const int> states) {
    int n = 0;
    for (std::size_t t = 1; t < states.size(); ++t) n += states[t] != states[t - 1];
    return n;
}

}  // namespace regime

#endif
