#include "doctest.h"
#include "perc/rng.hpp"
#include "perc/stats.hpp"

#include <cmath>

using namespace perc;

TEST_CASE("loglog_fit recovers an exact power law") {
    // p = s^2 with dyadic scales and exact tallies: slope 2, r2 = 1.
    std::vector<ProbPoint> pts;
    for (int i = 1; i <= 4; ++i) {
        const double s = std::pow(2.0, -i);
        const int64_t trials = 1 << 20;
        pts.push_back({s, static_cast<int64_t>(s * s * trials), trials});
    }
    auto fit = loglog_fit(pts, 50);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.n_points == 4);
    CHECK(fit.slope_lo <= fit.slope);
    CHECK(fit.slope_hi >= fit.slope);
}

TEST_CASE("loglog_fit: constant probability gives slope 0") {
    std::vector<ProbPoint> pts;
    for (int i = 1; i <= 4; ++i) pts.push_back({std::pow(2.0, -i), 1 << 12, 1 << 14});
    auto fit = loglog_fit(pts, 50);
    CHECK(fit.slope == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("loglog_fit: zero points excluded, too few points throws") {
    std::vector<ProbPoint> pts = {{0.5, 100, 1000}, {0.25, 0, 1000}, {0.125, 25, 1000}};
    CHECK_THROWS_AS(loglog_fit(pts), FitError);  // only 2 usable
    pts.push_back({0.0625, 12, 1000});
    auto fit = loglog_fit(pts, 50);
    CHECK(fit.n_excluded == 1);
    CHECK(fit.n_points == 3);
}

TEST_CASE("loglog_fit equivariance: scaling p shifts intercept only") {
    std::vector<ProbPoint> a, b;
    for (int i = 1; i <= 4; ++i) {
        const double s = std::pow(2.0, -i);
        const int64_t trials = 1 << 18;
        const int64_t hits = static_cast<int64_t>(s * trials);  // p = s, dyadic
        a.push_back({s, hits, trials});
        b.push_back({s, hits / 2, trials});  // p scaled by 1/2, still exact
    }
    auto fa = loglog_fit(a, 10);
    auto fb = loglog_fit(b, 10);
    CHECK(std::abs(fa.slope - fb.slope) < 1e-12);
    CHECK(fb.intercept == doctest::Approx(fa.intercept + std::log(0.5)).epsilon(1e-9));
}

TEST_CASE("loglog_fit calibration: binomial noise around s^(5/48)") {
    // 100 synthetic replications; the 95% bootstrap CI should cover the true
    // exponent in at least 90 of them.
    const double alpha = 5.0 / 48.0;
    const std::vector<double> scales = {0.5, 0.25, 0.125, 0.0625};
    int covered = 0;
    for (int rep = 0; rep < 100; ++rep) {
        CounterRng rng(555, rep, kStreamScratch);
        std::vector<ProbPoint> pts;
        for (double s : scales) {
            const double p = std::pow(s, alpha);
            const int64_t trials = 1500;
            int64_t hits = 0;
            for (int64_t t = 0; t < trials; ++t) hits += rng.bernoulli(p);
            pts.push_back({s, hits, trials});
        }
        auto fit = loglog_fit(pts, 300, 1000 + rep);
        if (fit.slope_lo <= alpha && alpha <= fit.slope_hi) ++covered;
    }
    CHECK(covered >= 90);
}

TEST_CASE("tail_fit: synthetic Exp(1) recovers decay constant 1") {
    CounterRng rng(77, 0, kStreamScratch);
    std::vector<double> xs(6000);
    for (auto& x : xs) x = -std::log(1.0 - rng.uniform01());
    auto tf = tail_fit(xs, TailFamily::Exponential, 200);
    CHECK(tf.decay == doctest::Approx(1.0).epsilon(0.15));
    CHECK(tf.beta == 1.0);
    // CI from the bootstrap brackets the point estimate
    CHECK(-tf.fit.slope_lo >= tf.decay);
    CHECK(-tf.fit.slope_hi <= tf.decay);
}

TEST_CASE("tail_fit error paths") {
    std::vector<double> tiny(10, 1.0);
    CHECK_THROWS_AS(tail_fit(tiny, TailFamily::Exponential), FitError);
    std::vector<double> constant(200, 3.0);
    CHECK_THROWS_AS(tail_fit(constant, TailFamily::Exponential), FitError);
}

TEST_CASE("tail_fit: stretched family at beta=1 matches exponential") {
    CounterRng rng(78, 0, kStreamScratch);
    std::vector<double> xs(3000);
    for (auto& x : xs) x = -std::log(1.0 - rng.uniform01());
    auto te = tail_fit(xs, TailFamily::Exponential, 10);
    auto ts = tail_fit(xs, TailFamily::Stretched, 10);
    // profiled beta should sit near 1 for genuinely exponential data
    CHECK(ts.beta == doctest::Approx(1.0).epsilon(0.35));
    CHECK(ts.fit.r2 >= te.fit.r2 - 1e-12);
}

TEST_CASE("ks_distance: identity, disjoint supports, symmetry") {
    std::vector<double> x = {1, 2, 3, 4}, y = {10, 11, 12};
    CHECK(ks_distance(x, x) == 0.0);
    CHECK(ks_distance(x, y) == 1.0);
    CHECK(ks_distance(x, y) == ks_distance(y, x));
    std::vector<double> empty;
    CHECK_THROWS_AS(ks_distance(empty, x), DomainError);

    CounterRng rng(5, 0, kStreamScratch);
    std::vector<double> a(500), b(400);
    for (auto& v : a) v = rng.uniform01();
    for (auto& v : b) v = rng.uniform01() * 1.1;
    const double d = ks_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == ks_distance(b, a));
}

TEST_CASE("ks_distance: same-law samples below the 1% critical value") {
    int below = 0;
    const size_t n = 10000;
    for (int rep = 0; rep < 40; ++rep) {
        CounterRng rng(99, rep, kStreamScratch);
        std::vector<double> a(n), b(n);
        for (auto& v : a) v = rng.uniform01();
        for (auto& v : b) v = rng.uniform01();
        if (ks_distance(a, b) < ks_critical_value(n, n, 0.01)) ++below;
    }
    CHECK(below >= 36);  // >= 95% of replications, with MC slack
}
