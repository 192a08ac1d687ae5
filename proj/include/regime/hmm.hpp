#ifndef REGIME_HMM_HPP
#define REGIME_HMM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "regime/matrix.hpp"
#include "regime/rng.hpp"

namespace regime {

constexpr double kHmmStdFloor = 1e-8;

/// Two-state (or K-state) Gaussian HMM on daily log returns.
/// Canonical labeling: states ordered by ascending emission std, so state 1
/// is the high-volatility state when K = 2.
struct GaussianHmm {
    std::vector<double> initial;   // K
    Matrix transitions;            // K x K row-stochastic
    std::vector<double> means;     // K, daily return units
    std::vector<double> stds;      // K, floored at kHmmStdFloor
    double log_likelihood = -std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
    bool variance_floored = false;
    std::uint64_t seed = 0;

    std::size_t n_states() const { return means.size(); }
};

namespace detail {

inline double log_normal_pdf(double x, double mean, double std) {
    const double z = (x - mean) / std;
    return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// T x K log emission densities.
inline Matrix log_emissions(std::span<const double> x, const GaussianHmm& m) {
    Matrix le(x.size(), m.n_states());
    for (std::size_t t = 0; t < x.size(); ++t)
        for (std::size_t k = 0; k < m.n_states(); ++k)
            le.at(t, k) = log_normal_pdf(x[t], m.means[k], m.stds[k]);
    return le;
}

struct ForwardBackward {
    Matrix alpha;            // scaled forward variables, rows sum to 1
    Matrix beta;             // scaled backward variables
    Matrix gamma;            // smoothed state probabilities, rows sum to 1
    std::vector<double> shift;  // per-step max-shift applied to emissions
    double log_likelihood = 0.0;
};

/// Scaled forward-backward. Emission densities are exponentiated after a
/// per-step max shift, so extreme observations cannot underflow the scaling.
inline ForwardBackward forward_backward(std::span<const double> x, const GaussianHmm& m,
                                        const Matrix& le) {
    const std::size_t T = x.size(), K = m.n_states();
    ForwardBackward fb;
    fb.alpha = Matrix(T, K);
    fb.beta = Matrix(T, K);
    fb.gamma = Matrix(T, K);
    fb.shift.resize(T);

    for (std::size_t t = 0; t < T; ++t) {
        double mx = le.at(t, 0);
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, le.at(t, k));
        fb.shift[t] = mx;
    }

    double ll = 0.0;
    {
        double c = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double v = m.initial[k] * std::exp(le.at(0, k) - fb.shift[0]);
            fb.alpha.at(0, k) = v;
            c += v;
        }
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::runtime_error("forward_backward: non-finite forward scaling");
        for (std::size_t k = 0; k < K; ++k) fb.alpha.at(0, k) /= c;
        ll = fb.shift[0] + std::log(c);
    }
    for (std::size_t t = 1; t < T; ++t) {
        double c = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < K; ++j) s += fb.alpha.at(t - 1, j) * m.transitions.at(j, k);
            const double v = s * std::exp(le.at(t, k) - fb.shift[t]);
            fb.alpha.at(t, k) = v;
            c += v;
        }
        if (!(c > 0.0) || !std::isfinite(c))
            throw std::runtime_error("forward_backward: non-finite forward scaling");
        for (std::size_t k = 0; k < K; ++k) fb.alpha.at(t, k) /= c;
        ll += fb.shift[t] + std::log(c);
    }
    fb.log_likelihood = ll;

    for (std::size_t k = 0; k < K; ++k) fb.beta.at(T - 1, k) = 1.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        double mx = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                s += m.transitions.at(j, k) * std::exp(le.at(t + 1, k) - fb.shift[t + 1]) *
                     fb.beta.at(t + 1, k);
            fb.beta.at(t, j) = s;
            mx = std::max(mx, s);
        }
        if (!(mx > 0.0) || !std::isfinite(mx))
            throw std::runtime_error("forward_backward: non-finite backward scaling");
        for (std::size_t j = 0; j < K; ++j) fb.beta.at(t, j) /= mx;
    }

    for (std::size_t t = 0; t < T; ++t) {
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double g = fb.alpha.at(t, k) * fb.beta.at(t, k);
            fb.gamma.at(t, k) = g;
            total += g;
        }
        if (!(total > 0.0) || !std::isfinite(total))
            throw std::runtime_error("forward_backward: non-finite smoothing");
        for (std::size_t k = 0; k < K; ++k) fb.gamma.at(t, k) /= total;
    }
    return fb;
}

inline GaussianHmm sort_states_by_std(GaussianHmm m) {
    const std::size_t K = m.n_states();
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.stds[a] < m.stds[b]; });
    GaussianHmm out = m;
    for (std::size_t k = 0; k < K; ++k) {
        out.initial[k] = m.initial[order[k]];
        out.means[k] = m.means[order[k]];
        out.stds[k] = m.stds[order[k]];
        for (std::size_t j = 0; j < K; ++j)
            out.transitions.at(k, j) = m.transitions.at(order[k], order[j]);
    }
    return out;
}

}  // namespace detail

struct HmmFitOptions {
    int n_restarts = 10;
    int max_iterations = 500;
    double tolerance = 1e-6;   // stop when log-likelihood improves less than this
    std::uint64_t seed = 0;
};

/// Baum-Welch (EM) estimation with random multi-start. Restart r draws its
/// initial means from sample-mean +- sample-std perturbations and its stds as
/// scaled sample std, with sticky (0.95 self) transition initialization; the
/// best restart by final log-likelihood wins. States are relabeled so state 1
/// has the larger std. Variance collapse is floored and flagged, not fatal.
inline GaussianHmm baum_welch_fit(std::span<const double> returns, std::size_t k = 2,
                                  const HmmFitOptions& options = {}) {
    const std::size_t T = returns.size();
    if (k == 0) throw std::invalid_argument("baum_welch_fit: K must be >= 1");
    if (T < 10 * k) throw std::invalid_argument("baum_welch_fit: need at least 10*K observations");

    double sample_mean = 0.0;
    for (double x : returns) sample_mean += x;
    sample_mean /= static_cast<double>(T);
    double sample_var = 0.0;
    for (double x : returns) sample_var += (x - sample_mean) * (x - sample_mean);
    const double sample_std = std::max(std::sqrt(sample_var / static_cast<double>(T)), kHmmStdFloor);

    GaussianHmm best;
    bool have_best = false;

    for (int r = 0; r < options.n_restarts; ++r) {
        Rng rng(options.seed + static_cast<std::uint64_t>(r));
        GaussianHmm m;
        m.initial.assign(k, 1.0 / static_cast<double>(k));
        m.means.resize(k);
        m.stds.resize(k);
        m.transitions = Matrix(k, k, k > 1 ? 0.05 / static_cast<double>(k - 1) : 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            m.means[i] = sample_mean + sample_std * rng.normal();
            m.stds[i] = std::max(sample_std * (0.5 + 1.5 * rng.uniform01()), kHmmStdFloor);
            m.transitions.at(i, i) = k > 1 ? 0.95 : 1.0;
        }
        m.seed = options.seed + static_cast<std::uint64_t>(r);

        double prev_ll = -std::numeric_limits<double>::infinity();
        bool converged = false;
        int iter = 0;
        while (iter < options.max_iterations) {
            ++iter;
            const Matrix le = detail::log_emissions(returns, m);
            const auto fb = detail::forward_backward(returns, m, le);
            if (fb.log_likelihood < prev_ll - 1e-9 * std::max(1.0, std::abs(prev_ll)))
                throw std::logic_error("baum_welch_fit: log-likelihood decreased");
            const double gain = fb.log_likelihood - prev_ll;
            prev_ll = fb.log_likelihood;

            // M-step
            Matrix xi(k, k);
            for (std::size_t t = 0; t + 1 < T; ++t) {
                double total = 0.0;
                Matrix step(k, k);
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) {
                        const double v = fb.alpha.at(t, i) * m.transitions.at(i, j) *
                                         std::exp(le.at(t + 1, j) - fb.shift[t + 1]) *
                                         fb.beta.at(t + 1, j);
                        step.at(i, j) = v;
                        total += v;
                    }
                if (!(total > 0.0)) throw std::runtime_error("baum_welch_fit: degenerate xi step");
                for (std::size_t i = 0; i < k; ++i)
                    for (std::size_t j = 0; j < k; ++j) xi.at(i, j) += step.at(i, j) / total;
            }
            for (std::size_t i = 0; i < k; ++i) m.initial[i] = fb.gamma.at(0, i);
            if (T > 1) {
                for (std::size_t i = 0; i < k; ++i) {
                    double row_total = 0.0;
                    for (std::size_t j = 0; j < k; ++j) row_total += xi.at(i, j);
                    if (row_total > 0.0)
                        for (std::size_t j = 0; j < k; ++j)
                            m.transitions.at(i, j) = xi.at(i, j) / row_total;
                }
            }
            for (std::size_t i = 0; i < k; ++i) {
                double w = 0.0, wx = 0.0;
                for (std::size_t t = 0; t < T; ++t) {
                    w += fb.gamma.at(t, i);
                    wx += fb.gamma.at(t, i) * returns[t];
                }
                if (w > 0.0) {
                    m.means[i] = wx / w;
                    double wv = 0.0;
                    for (std::size_t t = 0; t < T; ++t) {
                        const double c = returns[t] - m.means[i];
                        wv += fb.gamma.at(t, i) * c * c;
                    }
                    const double std_i = std::sqrt(wv / w);
                    if (std_i < kHmmStdFloor) m.variance_floored = true;
                    m.stds[i] = std::max(std_i, kHmmStdFloor);
                }
            }

            if (iter > 1 && gain < options.tolerance) {
                converged = true;
                break;
            }
        }
        // log-likelihood of the final parameters
        const Matrix le = detail::log_emissions(returns, m);
        m.log_likelihood = detail::forward_backward(returns, m, le).log_likelihood;
        m.converged = converged;
        m.iterations = iter;
        if (!have_best || m.log_likelihood > best.log_likelihood) {
            have_best = true;
            best = std::move(m);
        }
    }
    return detail::sort_states_by_std(std::move(best));
}

/// Smoothed (posterior-argmax) decoding: forward-backward with per-step
/// scaling; states[t] = argmax_k P(s_t = k | all observations), lower index
/// on ties. Probability rows sum to 1.
struct SmoothedStates {
    std::vector<int> states;
    Matrix probabilities;  // T x K
};

inline SmoothedStates smoothed_states(const GaussianHmm& model, std::span<const double> returns) {
    if (returns.empty()) throw std::invalid_argument("smoothed_states: empty series");
    const Matrix le = detail::log_emissions(returns, model);
    auto fb = detail::forward_backward(returns, model, le);
    SmoothedStates out;
    out.states.resize(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        int arg = 0;
        for (std::size_t k = 1; k < model.n_states(); ++k)
            if (fb.gamma.at(t, k) > fb.gamma.at(t, static_cast<std::size_t>(arg)))
                arg = static_cast<int>(k);
        out.states[t] = arg;
    }
    out.probabilities = std::move(fb.gamma);
    return out;
}

/// Most likely single path (log-space Viterbi); ties toward the lower index.
inline std::vector<int> viterbi_states(const GaussianHmm& model, std::span<const double> returns) {
    if (returns.empty()) throw std::invalid_argument("viterbi_states: empty series");
    const std::size_t T = returns.size(), K = model.n_states();
    const Matrix le = detail::log_emissions(returns, model);
    Matrix V(T, K);
    std::vector<std::vector<int>> from(T, std::vector<int>(K, 0));
    for (std::size_t kk = 0; kk < K; ++kk)
        V.at(0, kk) = std::log(model.initial[kk]) + le.at(0, kk);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t kk = 0; kk < K; ++kk) {
            int arg = 0;
            double bestv = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < K; ++j) {
                const double v = V.at(t - 1, j) + std::log(model.transitions.at(j, kk));
                if (v > bestv) {
                    bestv = v;
                    arg = static_cast<int>(j);
                }
            }
            V.at(t, kk) = bestv + le.at(t, kk);
            from[t][kk] = arg;
        }
    }
    std::vector<int> states(T);
    int arg = 0;
    for (std::size_t kk = 1; kk < K; ++kk)
        if (V.at(T - 1, kk) > V.at(T - 1, static_cast<std::size_t>(arg))) arg = static_cast<int>(kk);
    states[T - 1] = arg;
    for (std::size_t t = T - 1; t-- > 0;) states[t] = from[t + 1][static_cast<std::size_t>(states[t + 1])];
    return states;
}

/// Causal majority filter over the trailing `window` labels (window odd, >= 1).
/// output[t] uses labels[max(0, t-window+1) .. t] only; during the warm-up the
/// window is truncated and an even-count tie keeps the previous output.
inline std::vector<int> median_filter(std::span<const int> labels, int window) {
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("median_filter: window must be odd and >= 1");
    std::vector<int> out(labels.size());
    int prev = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const std::size_t begin = t + 1 >= static_cast<std::size_t>(window)
                                      ? t + 1 - static_cast<std::size_t>(window)
                                      : 0;
        int ones = 0, total = 0;
        for (std::size_t u = begin; u <= t; ++u) {
            ones += labels[u];
            ++total;
        }
        if (2 * ones > total)
            out[t] = 1;
        else if (2 * ones < total)
            out[t] = 0;
        else
            out[t] = prev;
        prev = out[t];
    }
    return out;
}

}  // namespace regime

#endif
