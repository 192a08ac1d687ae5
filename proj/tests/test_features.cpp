#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "regime/features.hpp"
#include "regime/rng.hpp"
#include "regime/synth.hpp"

using namespace regime;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

AlignedSeries series_of(std::vector<double> values) {
    const std::size_t n = values.size();
    return AlignedSeries(weekday_calendar(Date{2000, 1, 3}, n), std::move(values));
}

}  // namespace

TEST_CASE("ewm_mean basics") {
    SECTION("constant input stays constant") {
        const std::vector<double> x(50, 3.25);
        for (double hl : {1.0, 20.0, 120.0}) {
            const auto out = ewm_mean(x, hl);
            for (double v : out) CHECK_THAT(v, WithinAbs(3.25, 1e-14));
        }
    }
    SECTION("two-term hand computation") {
        const std::vector<double> x{0.0, 1.0};
        const auto out = ewm_mean(x, 1.0);
        CHECK_THAT(out[1], WithinAbs(2.0 / 3.0, 1e-15));
    }
    SECTION("single observation") {
        const auto out = ewm_mean(std::vector<double>{5.0}, 10.0);
        REQUIRE(out.size() == 1);
        CHECK(out[0] == 5.0);
    }
    SECTION("errors") {
        CHECK_THROWS(ewm_mean(std::vector<double>{}, 10.0));
        CHECK_THROWS(ewm_mean(std::vector<double>{1.0}, 0.0));
        CHECK_THROWS(ewm_mean(std::vector<double>{1.0}, -3.0));
    }
}

TEST_CASE("ewm_mean stays within the observed range") {
    Rng rng(31);
    std::vector<double> x(300);
    for (double& v : x) v = rng.normal();
    for (double hl : {2.0, 20.0, 60.0}) {
        const auto out = ewm_mean(x, hl);
        double lo = x[0], hi = x[0];
        for (std::size_t t = 0; t < x.size(); ++t) {
            lo = std::min(lo, x[t]);
            hi = std::max(hi, x[t]);
            CHECK(out[t] >= lo - 1e-12);
            CHECK(out[t] <= hi + 1e-12);
        }
    }
}

TEST_CASE("ewm_downside_deviation basics") {
    SECTION("no downside means zero") {
        const std::vector<double> r{0.0, 0.01, 0.002, 0.03};
        for (double v : ewm_downside_deviation(r, 20.0)) CHECK(v == 0.0);
    }
    SECTION("single negative return") {
        const auto out = ewm_downside_deviation(std::vector<double>{-0.1}, 20.0);
        CHECK_THAT(out[0], WithinAbs(0.1, 1e-15));
    }
    SECTION("two-term hand computation") {
        const auto out = ewm_downside_deviation(std::vector<double>{-0.1, 0.1}, 1.0);
        // weights 1 (on +0.1 -> 0) and 0.5 (on 0.01), normalized by 1.5
        CHECK_THAT(out[1], WithinAbs(std::sqrt(0.5 * 0.01 / 1.5), 1e-15));
    }
}

TEST_CASE("downside deviation depends only on negative returns") {
    Rng rng(32);
    std::vector<double> r(250), negatives_only(250);
    for (std::size_t t = 0; t < r.size(); ++t) {
        r[t] = 0.01 * rng.normal();
        negatives_only[t] = r[t] < 0.0 ? r[t] : (t % 2 == 0 ? 0.0 : 0.5);  // arbitrary non-negatives
    }
    CHECK(ewm_downside_deviation(r, 20.0) == ewm_downside_deviation(negatives_only, 20.0));
}

TEST_CASE("DD half-life controls the decay speed") {
    // long zero warm-up saturates the weights, then a single negative spike
    std::vector<double> r(2500, 0.0);
    const std::size_t spike = 1500;
    r[spike] = -1.0;
    for (double hl : {20.0, 60.0}) {
        const auto dd = ewm_downside_deviation(r, hl);
        const double peak_sq = dd[spike] * dd[spike];
        std::size_t steps = 0;
        for (std::size_t t = spike + 1; t < r.size(); ++t) {
            if (dd[t] * dd[t] <= 0.5 * peak_sq) {
                steps = t - spike;
                break;
            }
        }
        // the EWM of squared returns halves once per half-life
        CHECK(steps >= static_cast<std::size_t>(hl) - 1);
        CHECK(steps <= static_cast<std::size_t>(hl) + 1);
    }
    // and the shorter half-life decays faster pointwise
    const auto dd20 = ewm_downside_deviation(r, 20.0);
    const auto dd60 = ewm_downside_deviation(r, 60.0);
    for (std::size_t t = spike + 5; t < spike + 200; ++t)
        CHECK(dd20[t] / dd20[spike] < dd60[t] / dd60[spike]);
}

TEST_CASE("build_feature_set layout and degenerate inputs") {
    SECTION("all-zero returns give all-zero features") {
        const auto f = build_feature_set(series_of(std::vector<double>(200, 0.0)));
        REQUIRE(f.rows() == 200);
        REQUIRE(f.cols() == 4);
        for (double v : f.values.data) CHECK(v == 0.0);
    }
    SECTION("positive-only returns: DD columns zero, return column constant") {
        const auto f = build_feature_set(series_of(std::vector<double>(200, 0.01)));
        for (std::size_t t = 0; t < f.rows(); ++t) {
            CHECK(f.row(t)[0] == 0.0);
            CHECK(f.row(t)[1] == 0.0);
            CHECK(f.row(t)[2] == 0.0);
            CHECK_THAT(f.row(t)[3], WithinAbs(0.01, 1e-14));
        }
    }
    SECTION("too-short input") {
        CHECK_THROWS(build_feature_set(series_of(std::vector<double>(50, 0.0))));
    }
}

TEST_CASE("feature columns match their definitions") {
    Rng rng(33);
    std::vector<double> r(400);
    for (double& v : r) v = 0.01 * rng.normal();
    const auto input = series_of(r);
    const auto f = build_feature_set(input);
    const auto dd20 = ewm_downside_deviation(r, 20.0);
    const auto dd60 = ewm_downside_deviation(r, 60.0);
    const auto dd120 = ewm_downside_deviation(r, 120.0);
    const auto ret120 = ewm_mean(r, 120.0);
    for (std::size_t t = 0; t < f.rows(); ++t) {
        CHECK(f.row(t)[0] == dd20[t]);
        CHECK(f.row(t)[1] == dd20[t] - dd60[t]);  // exact, by construction
        CHECK(f.row(t)[2] == dd60[t] - dd120[t]);
        CHECK(f.row(t)[3] == ret120[t]);
    }
    CHECK(f.dates == input.dates);
    CHECK(f.names == std::vector<std::string>{feature_names().begin(), feature_names().end()});
}

TEST_CASE("DD20 spikes inside the high-volatility segment") {
    SynthSpec spec;
    spec.n_days = 1200;
    spec.state_means = {0.0004, -0.0008};
    spec.state_stds = {0.006, 0.025};
    spec.transitions = Matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    spec.seed = 77;
    // deterministic block structure: 600 calm days then 600 turbulent days
    auto calm = simulate(spec);
    spec.initial_state = 1;
    auto wild = simulate(spec);
    std::vector<double> logret = calm.dataset.log_returns.values;
    logret.insert(logret.end(), wild.dataset.log_returns.values.begin(),
                  wild.dataset.log_returns.values.end());
    const auto f = build_feature_set(series_of(logret));

    double mean_calm = 0.0, mean_wild = 0.0;
    const std::size_t half = logret.size() / 2;
    for (std::size_t t = kFeatureWarmup; t < half; ++t) mean_calm += f.row(t)[0];
    for (std::size_t t = half + kFeatureWarmup; t < logret.size(); ++t) mean_wild += f.row(t)[0];
    mean_calm /= static_cast<double>(half - kFeatureWarmup);
    mean_wild /= static_cast<double>(logret.size() - half - kFeatureWarmup);
    CHECK(mean_wild > 2.0 * mean_calm);
}

TEST_CASE("standardizer moments and application") {
    SECTION("two-point window") {
        FeatureMatrix f;
        f.dates = weekday_calendar(Date{2001, 1, 1}, 2);
        f.names = {"a", "b", "c", "d"};
        f.values = Matrix(2, 4, {0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0});
        const auto p = fit_standardizer(f, 0, 2);
        for (double m : p.means) CHECK_THAT(m, WithinAbs(1.0, 1e-15));
        for (double s : p.stds) CHECK_THAT(s, WithinAbs(1.0, 1e-15));
    }
    SECTION("standard-normal draws have near-identity moments") {
        Rng rng(34);
        FeatureMatrix f;
        const std::size_t n = 4000;
        f.dates = weekday_calendar(Date{2001, 1, 1}, n);
        f.names = {"a", "b", "c", "d"};
        f.values = Matrix(n, 4);
        for (double& v : f.values.data) v = rng.normal();
        const auto p = fit_standardizer(f, 0, n);
        const double tol = 5.0 / std::sqrt(static_cast<double>(n));
        for (double m : p.means) CHECK_THAT(m, WithinAbs(0.0, tol));
        for (double s : p.stds) CHECK_THAT(s, WithinAbs(1.0, tol));
    }
    SECTION("constant column is an error") {
        FeatureMatrix f;
        f.dates = weekday_calendar(Date{2001, 1, 1}, 10);
        f.names = {"a", "b", "c", "d"};
        f.values = Matrix(10, 4, 1.0);
        CHECK_THROWS_WITH(fit_standardizer(f, 0, 10),
                          Catch::Matchers::ContainsSubstring("zero-variance"));
    }
}

TEST_CASE("apply_standardizer contract") {
    Rng rng(35);
    FeatureMatrix f;
    const std::size_t n = 500;
    f.dates = weekday_calendar(Date{2001, 1, 1}, n);
    f.names = {"a", "b", "c", "d"};
    f.values = Matrix(n, 4);
    for (double& v : f.values.data) v = 2.0 + 3.0 * rng.normal();

    SECTION("identity params leave the matrix unchanged") {
        const StandardizationParams identity{{0, 0, 0, 0}, {1, 1, 1, 1}};
        const auto z = apply_standardizer(f, identity, 0, n);
        CHECK(z.values.data == f.values.data);
    }
    SECTION("self-application yields zero mean, unit std") {
        const auto p = fit_standardizer(f, 100, 400);
        const auto z = apply_standardizer(f, p, 100, 400);
        for (std::size_t j = 0; j < 4; ++j) {
            double mean = 0.0;
            for (std::size_t t = 0; t < z.rows(); ++t) mean += z.row(t)[j];
            mean /= static_cast<double>(z.rows());
            CHECK_THAT(mean, WithinAbs(0.0, 1e-9));
            double var = 0.0;
            for (std::size_t t = 0; t < z.rows(); ++t)
                var += (z.row(t)[j] - mean) * (z.row(t)[j] - mean);
            CHECK_THAT(std::sqrt(var / static_cast<double>(z.rows())), WithinAbs(1.0, 1e-9));
        }
        CHECK(z.dates.front() == f.dates[100]);
    }
    SECTION("out-of-window rows reuse the same params") {
        const auto p = fit_standardizer(f, 0, 250);
        const auto z_all = apply_standardizer(f, p, 0, n);
        const auto z_tail = apply_standardizer(f, p, 250, n);
        for (std::size_t t = 250; t < n; ++t)
            for (std::size_t j = 0; j < 4; ++j)
                CHECK(z_all.row(t)[j] == z_tail.row(t - 250)[j]);
    }
}
