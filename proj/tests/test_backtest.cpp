#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "regime/backtest.hpp"
#include "regime/synth.hpp"
#include "support/oracles.hpp"

using namespace regime;
using Catch::Matchers::WithinAbs;

namespace {

// persistent two-regime market with plenty of history
SynthSpec market_spec(std::size_t n_days, std::uint64_t seed) {
    SynthSpec spec;
    spec.n_days = n_days;
    spec.state_means = {0.0005, -0.0010};
    spec.state_stds = {0.007, 0.022};
    spec.transitions = Matrix(2, 2, {0.995, 0.005, 0.02, 0.98});
    spec.annual_yield = 0.04;
    spec.seed = seed;
    return spec;
}

WalkForwardConfig jm_config(double lambda, std::uint64_t seed = 5) {
    WalkForwardConfig cfg;
    cfg.lookback_days = 750;
    cfg.refit_interval_days = 63;
    cfg.lambda = JumpPenalty(lambda);
    cfg.engine = Engine::jump_model;
    cfg.seed = seed;
    cfg.n_restarts = 6;
    return cfg;
}

}  // namespace

TEST_CASE("all-zero forecasts reproduce buy-and-hold exactly") {
    const auto sim = simulate(market_spec(1500, 1));
    const std::vector<int> zeros(400, 0);
    const auto r = apply_forecasts(sim.dataset, 1000, zeros, 0.0010);
    REQUIRE(r.size() == 400);
    CHECK(r.n_reallocations == 0);
    CHECK(r.regime_intervals.empty());
    double index_equity = 1.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(r.net_returns[i] == sim.dataset.index_returns.values[1000 + i]);
        index_equity *= 1.0 + sim.dataset.index_returns.values[1000 + i];
        CHECK(r.equity_curve[i] == r.index_equity[i]);
    }
    CHECK_THAT(r.equity_curve.back(), WithinAbs(index_equity, 1e-12));
}

TEST_CASE("all-one forecasts earn the compounded risk-free rate minus one cost") {
    const auto sim = simulate(market_spec(1500, 2));
    const std::vector<int> ones(300, 1);
    const auto r = apply_forecasts(sim.dataset, 900, ones, 0.0010);
    CHECK(r.n_reallocations == 1);  // initial switch out of the index
    REQUIRE(r.regime_intervals.size() == 1);
    CHECK(r.regime_intervals[0].start == r.dates.front());
    CHECK(r.regime_intervals[0].end == r.dates.back());
    double expected = 1.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double rf = sim.dataset.risk_free_daily.values[900 + i];
        expected *= 1.0 + rf - (i == 0 ? 0.0010 : 0.0);
    }
    CHECK_THAT(r.equity_curve.back(), WithinAbs(expected, 1e-12));
}

TEST_CASE("a one-day flip charges exactly two one-way costs") {
    const auto sim = simulate(market_spec(1200, 3));
    std::vector<int> forecasts(200, 0);
    forecasts[80] = 1;
    const auto r = apply_forecasts(sim.dataset, 800, forecasts, 0.0010);
    CHECK(r.n_reallocations == 2);
    REQUIRE(r.regime_intervals.size() == 1);
    CHECK(r.regime_intervals[0].start == r.regime_intervals[0].end);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double charge = (i == 80 || i == 81) ? 0.0010 : 0.0;
        CHECK_THAT(r.gross_returns[i] - r.net_returns[i], WithinAbs(charge, 1e-15));
    }
}

TEST_CASE("hand-computed ten-day accounting with two regime flips") {
    // fixed inputs: returns 1% daily, rf such that (1+y)^(1/252)-1 is exact in the data
    std::vector<Date> cal = weekday_calendar(Date{2010, 1, 4}, 11);
    std::vector<double> px(11);
    px[0] = 100.0;
    const double r = 0.01;
    for (std::size_t i = 1; i < px.size(); ++i) px[i] = px[i - 1] * (1.0 + r);
    const AlignedSeries prices(cal, px);
    const AlignedSeries yields(cal, std::vector<double>(11, 0.05));
    const auto ds = build_dataset(prices, yields);
    REQUIRE(ds.size() == 10);
    const double rf = deannualize_yield(0.05);

    //            day:  0  1  2  3  4  5  6  7  8  9
    std::vector<int> f{0, 0, 0, 1, 1, 1, 0, 0, 0, 0};
    const auto result = apply_forecasts(ds, 0, f, 0.0010);

    const double c = 0.0010;
    const std::vector<double> expected_net{
        r, r, r,             // invested
        rf - c,              // switch to cash, pay one way
        rf, rf,              // cash
        r - c,               // switch back, pay one way
        r, r, r};
    for (std::size_t i = 0; i < 10; ++i)
        CHECK_THAT(result.net_returns[i], WithinAbs(expected_net[i], 1e-12));
    CHECK(result.n_reallocations == 2);
    double equity = 1.0;
    for (double v : expected_net) equity *= 1.0 + v;
    CHECK_THAT(result.equity_curve.back(), WithinAbs(equity, 1e-12));
}

TEST_CASE("accounting identity recomputes from stored fields") {
    const auto sim = simulate(market_spec(2000, 4));
    Rng rng(41);
    std::vector<int> forecasts(500);
    int cur = 0;
    for (int& v : forecasts) {
        if (rng.uniform01() < 0.05) cur = 1 - cur;
        v = cur;
    }
    const auto r = apply_forecasts(sim.dataset, 1200, forecasts, 0.0010);
    double prev_w = 1.0, equity = 1.0;
    int charges = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const std::size_t t = 1200 + i;
        CHECK(r.weights[i] == (r.forecasts[i] == 1 ? 0.0 : 1.0));
        const double net = r.weights[i] * sim.dataset.index_returns.values[t] +
                           (1.0 - r.weights[i]) * sim.dataset.risk_free_daily.values[t] -
                           0.0010 * std::abs(r.weights[i] - prev_w);
        CHECK_THAT(r.net_returns[i], WithinAbs(net, 1e-12));
        equity *= 1.0 + net;
        CHECK_THAT(r.equity_curve[i], WithinAbs(equity, 1e-12));
        charges += r.weights[i] != prev_w;
        prev_w = r.weights[i];
    }
    CHECK(r.n_reallocations == charges);
    CHECK(r.n_reallocations == count_transitions(forecasts) + (forecasts[0] == 1 ? 1 : 0));
}

TEST_CASE("higher costs never help, for fixed forecasts") {
    const auto sim = simulate(market_spec(1500, 5));
    Rng rng(42);
    std::vector<int> forecasts(400);
    int cur = 0;
    for (int& v : forecasts) {
        if (rng.uniform01() < 0.08) cur = 1 - cur;
        v = cur;
    }
    double prev_total = std::numeric_limits<double>::infinity();
    for (double cost : {0.0, 0.0005, 0.0010, 0.0050}) {
        const auto r = apply_forecasts(sim.dataset, 1000, forecasts, cost);
        CHECK(r.equity_curve.back() <= prev_total + 1e-15);
        prev_total = r.equity_curve.back();
    }
}

TEST_CASE("run_walk_forward end to end") {
    const auto sim = simulate(market_spec(2400, 6));
    const auto& dates = sim.dataset.dates();
    const auto cfg = jm_config(30.0);
    const DateRange span{dates[1000], dates[2399]};
    const auto r = run_walk_forward(sim.dataset, cfg, span);
    REQUIRE(r.size() == 1400);
    CHECK(r.dates.front() == dates[1000]);
    CHECK(r.dates.back() == dates[2399]);
    // refits every 63 trading days anchored at the decision day before the span
    REQUIRE_FALSE(r.refit_dates.empty());
    CHECK(r.refit_dates.front() == dates[999]);
    CHECK(r.refit_dates.size() == (1400 + 62) / 63);
    // the strategy actually reacts on this market
    CHECK(r.n_reallocations > 0);
    // weights follow forecasts
    for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(r.weights[i] == 1.0 - r.forecasts[i]);
    // intervals are disjoint, ordered, and cover exactly the f=1 days
    std::size_t covered = 0;
    for (std::size_t k = 0; k < r.regime_intervals.size(); ++k) {
        if (k > 0) CHECK(r.regime_intervals[k - 1].end < r.regime_intervals[k].start);
        covered += 1;
    }
    CHECK(covered == r.regime_intervals.size());
}

TEST_CASE("insufficient history is rejected") {
    const auto sim = simulate(market_spec(1200, 7));
    const auto& dates = sim.dataset.dates();
    auto cfg = jm_config(50.0);
    cfg.lookback_days = 1000;  // needs 1000 + 120 rows before the span
    CHECK_THROWS_WITH(run_walk_forward(sim.dataset, cfg, {dates[1100], dates[1199]}),
                      Catch::Matchers::ContainsSubstring("insufficient history"));
}

TEST_CASE("truncating the dataset never changes already-made forecasts") {
    const auto sim = simulate(market_spec(2200, 8));
    const auto& dates = sim.dataset.dates();
    const auto cfg = jm_config(20.0, 11);
    const DateRange span{dates[1000], dates[2199]};
    const auto full = run_walk_forward(sim.dataset, cfg, span);

    Rng rng(43);
    for (int rep = 0; rep < 6; ++rep) {
        const std::size_t cut = 1001 + rng.below(1150);
        MarketDataset truncated;
        auto slice = [&](const AlignedSeries& s) {
            return AlignedSeries(
                std::vector<Date>(s.dates.begin(), s.dates.begin() + static_cast<long>(cut) + 1),
                std::vector<double>(s.values.begin(), s.values.begin() + static_cast<long>(cut) + 1));
        };
        truncated.index_prices = slice(sim.dataset.index_prices);
        truncated.index_returns = slice(sim.dataset.index_returns);
        truncated.log_returns = slice(sim.dataset.log_returns);
        truncated.risk_free_daily = slice(sim.dataset.risk_free_daily);

        const auto partial = run_walk_forward(truncated, cfg, {dates[1000], dates[cut]});
        REQUIRE(partial.size() == cut - 1000 + 1);
        for (std::size_t i = 0; i < partial.size(); ++i) {
            REQUIRE(partial.forecasts[i] == full.forecasts[i]);
            REQUIRE(partial.net_returns[i] == full.net_returns[i]);
        }
    }
}

TEST_CASE("hmm engine walk-forward produces causal filtered labels") {
    const auto sim = simulate(market_spec(1600, 9));
    const auto& dates = sim.dataset.dates();
    WalkForwardConfig cfg;
    cfg.lookback_days = 750;
    cfg.refit_interval_days = 63;
    cfg.engine = Engine::hmm_baseline;
    cfg.seed = 3;
    cfg.n_restarts = 3;
    const auto r = run_walk_forward(sim.dataset, cfg, {dates[1100], dates[1500]});
    REQUIRE(r.size() == 401);
    for (int f : r.forecasts) CHECK((f == 0 || f == 1));
}

TEST_CASE("degenerate engine holds the previous label") {
    // constant-regime market: every refit is a single-cluster fit, so the
    // strategy stays at the initial label and matches buy-and-hold
    SynthSpec spec = market_spec(1800, 10);
    spec.transitions = Matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    spec.initial_state = 0;
    const auto sim = simulate(spec);
    const auto& dates = sim.dataset.dates();
    auto cfg = jm_config(1e9, 12);
    const auto r = run_walk_forward(sim.dataset, cfg, {dates[1000], dates[1799]});
    CHECK_FALSE(r.warnings.empty());
    CHECK(r.n_reallocations == 0);
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(r.weights[i] == 1.0);
    CHECK(r.equity_curve.back() == r.index_equity.back());
}

TEST_CASE("refit alignment offset does not matter for a constant-regime engine") {
    SynthSpec spec = market_spec(2000, 13);
    spec.transitions = Matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    const auto sim = simulate(spec);
    const auto& dates = sim.dataset.dates();
    auto cfg = jm_config(100.0, 14);
    cfg.refit_interval_days = cfg.lookback_days;  // refit once per lookback
    const auto a = run_walk_forward(sim.dataset, cfg, {dates[1000], dates[1900]});
    const auto b = run_walk_forward(sim.dataset, cfg, {dates[1007], dates[1900]});
    // overlapping dates carry identical weights in both runs
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.weights[i] == a.weights[i + 7]);
}

TEST_CASE("select_lambda picks the best validation Sharpe") {
    const auto sim = simulate(market_spec(3200, 15));
    const auto& dates = sim.dataset.dates();
    auto cfg = jm_config(0.0, 16);
    const SplitSpec split{dates[1049], dates[2599], dates[3199]};

    SECTION("singleton grid returns its only candidate") {
        const std::vector<double> grid{50.0};
        const auto sel = select_lambda(sim.dataset, cfg, grid, split);
        CHECK(sel.chosen_lambda == 50.0);
        REQUIRE(sel.table.size() == 1);
        CHECK(sel.table[0].report.ann_vol > 0.0);
    }
    SECTION("argmax over the grid, larger lambda on ties") {
        const std::vector<double> grid{15.0, 40.0, 40.0};  // duplicate produces an exact tie
        const auto sel = select_lambda(sim.dataset, cfg, grid, split);
        REQUIRE(sel.table.size() == 3);
        double best = -1e9;
        for (const auto& row : sel.table) best = std::max(best, *row.report.sharpe);
        CHECK(*sel.table[std::distance(
                  sel.table.begin(),
                  std::find_if(sel.table.begin(), sel.table.end(),
                               [&](const LambdaRow& r) { return r.lambda == sel.chosen_lambda; }))]
                   .report.sharpe == best);
        CHECK(sel.table[1].report.ann_return == sel.table[2].report.ann_return);
        if (*sel.table[1].report.sharpe == best) CHECK(sel.chosen_lambda == 40.0);
    }
    SECTION("validation span must be long enough") {
        const SplitSpec tight{dates[1049], dates[1200], dates[3199]};
        CHECK_THROWS_WITH(select_lambda(sim.dataset, cfg, std::vector<double>{10.0}, tight),
                          Catch::Matchers::ContainsSubstring("2 years"));
        CHECK_THROWS(select_lambda(sim.dataset, cfg, std::vector<double>{}, split));
    }
}

TEST_CASE("evaluate_test reports strategy, benchmark and optional baseline") {
    const auto sim = simulate(market_spec(3000, 17));
    const auto& dates = sim.dataset.dates();
    auto cfg = jm_config(30.0, 18);
    cfg.hmm_refit_interval_days = 63;
    const SplitSpec split{dates[1049], dates[2000], dates[2999]};
    const auto eval = evaluate_test(sim.dataset, cfg, split, true);

    CHECK(eval.result.dates.front() == dates[2001]);
    CHECK(eval.benchmark.avg_daily_turnover == 0.0);
    REQUIRE(eval.hmm_report);
    REQUIRE(eval.hmm_result);
    CHECK(eval.hmm_result->size() == eval.result.size());

    // zero-cost run with an all-zero forecast engine equals the benchmark
    const std::size_t begin = 2001;
    const std::vector<int> zeros(eval.result.size(), 0);
    const auto hold = apply_forecasts(sim.dataset, begin, zeros, 0.0);
    const std::span<const double> rf{sim.dataset.risk_free_daily.values.data() + begin,
                                     eval.result.size()};
    const auto hold_report = performance_report(hold.net_returns, rf, hold.weights, hold.dates);
    CHECK_THAT(hold_report.ann_return, WithinAbs(eval.benchmark.ann_return, 1e-12));
    CHECK_THAT(hold_report.ann_vol, WithinAbs(eval.benchmark.ann_vol, 1e-12));
    CHECK(hold_report.avg_daily_turnover == 0.0);
}

TEST_CASE("config validation") {
    WalkForwardConfig cfg;
    cfg.lookback_days = 100;
    CHECK_THROWS(cfg.validate());
    cfg = WalkForwardConfig{};
    cfg.cost_per_side = -0.1;
    CHECK_THROWS(cfg.validate());
    cfg = WalkForwardConfig{};
    cfg.hmm_filter_window = 4;
    CHECK_THROWS(cfg.validate());
    cfg = WalkForwardConfig{};
    cfg.engine = Engine::hmm_baseline;
    cfg.n_states = 3;
    CHECK_THROWS(cfg.validate());
    SplitSpec bad{Date{2000, 1, 1}, Date{1999, 1, 1}, Date{2001, 1, 1}};
    CHECK_THROWS(bad.validate());
}
