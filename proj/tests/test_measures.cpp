#include "doctest.h"
#include "oracles.hpp"
#include "perc/measures.hpp"
#include "perc/rng.hpp"

#include <map>
#include <set>

using namespace perc;

namespace {

const NormEntry kNorm{0.5, 1000, 0.03};  // pi1_hat = 0.5

MeshSpec tri(double eta, double k, double p, uint64_t seed, uint64_t idx = 0) {
    MeshSpec s;
    s.kind = LatticeKind::TriangularSite;
    s.eta = eta;
    s.k = k;
    s.p = p;
    s.seed = seed;
    s.sample_index = idx;
    return s;
}

CountingMeasure from_points(std::vector<double> xs, std::vector<double> ys, double w) {
    CountingMeasure m;
    m.xs = std::move(xs);
    m.ys = std::move(ys);
    m.weight = w;
    return m;
}

}  // namespace

TEST_CASE("counting_measure: arithmetic of the definition") {
    auto g = LatticeGeometry::get(LatticeKind::TriangularSite, 1.0 / 8, 1.0);
    std::vector<int32_t> verts;
    for (int32_t v = 0; v < 16; ++v) verts.push_back(v);
    auto m = counting_measure(*g, verts, kNorm);
    // eta^2/pi1 = (1/64)/0.5 = 1/32 per atom; 16 atoms -> mass 0.5
    CHECK(m.weight == doctest::Approx(1.0 / 32));
    CHECK(m.total_mass() == doctest::Approx(0.5));

    auto empty = counting_measure(*g, {}, kNorm);
    CHECK(empty.total_mass() == 0.0);

    NormEntry bad{0.0, 10, 0.0};
    CHECK_THROWS_AS(counting_measure(*g, verts, bad), ConfigError);
}

TEST_CASE("mass additivity over disjoint vertex sets") {
    auto g = LatticeGeometry::get(LatticeKind::TriangularSite, 1.0 / 8, 1.0);
    std::vector<int32_t> a, b, both;
    for (int32_t v = 0; v < 30; ++v) (v % 2 ? a : b).push_back(v);
    for (int32_t v = 0; v < 30; ++v) both.push_back(v);
    auto ma = counting_measure(*g, a, kNorm);
    auto mb = counting_measure(*g, b, kNorm);
    auto mu = counting_measure(*g, both, kNorm);
    CHECK(mu.total_mass() == doctest::Approx(ma.total_mass() + mb.total_mass()));
}

TEST_CASE("one_arm_measure: degenerate configurations") {
    auto blue = sample_bernoulli(tri(1.0 / 8, 1.0, 0.0, 1));
    auto cs_b = find_clusters(blue);
    auto m0 = one_arm_measure(blue, cs_b, 0.0, 0.0, 0.25, 0.75, kNorm);
    CHECK(m0.atom_count() == 0);

    auto red = sample_bernoulli(tri(1.0 / 8, 1.0, 1.0, 1));
    auto cs_r = find_clusters(red);
    auto m1 = one_arm_measure(red, cs_r, 0.0, 0.0, 0.25, 0.75, kNorm);
    // every vertex of the half-open box is an atom
    int64_t expect = 0;
    const auto& g = *red.geom;
    g.for_box(-0.25, 0.25, -0.25, 0.25, [&](int32_t v) {
        if (g.px(v) < 0.25 && g.py(v) < 0.25) ++expect;
    });
    CHECK(static_cast<int64_t>(m1.atom_count()) == expect);

    CHECK_THROWS_AS(one_arm_measure(red, cs_r, 0.9, 0.0, 0.25, 0.75, kNorm), DomainError);
}

TEST_CASE("one_arm_measure matches per-vertex BFS oracle") {
    const double eta = 1.0 / 6;
    const double a = eta, b = 3 * eta;
    for (int i = 0; i < 300; ++i) {
        auto c = sample_bernoulli(tri(eta, 1.0, 0.5, 321, i));
        auto cs = find_clusters(c);
        auto m = one_arm_measure(c, cs, 0.0, 0.0, a, b, kNorm);
        std::set<std::pair<double, double>> got;
        for (size_t j = 0; j < m.atom_count(); ++j) got.insert({m.xs[j], m.ys[j]});

        // oracle: BFS from each red vertex of the half-open box
        const auto& g = *c.geom;
        std::set<std::pair<double, double>> expect;
        g.for_box(-a, a, -a, a, [&](int32_t v) {
            if (g.px(v) >= a || g.py(v) >= a || !c.is_red(v)) return;
            std::vector<int32_t> stack{v};
            std::set<int32_t> seen{v};
            bool reach = false;
            while (!stack.empty() && !reach) {
                const int32_t u = stack.back();
                stack.pop_back();
                if (std::abs(g.px(u)) >= b || std::abs(g.py(u)) >= b) {
                    reach = true;
                    break;
                }
                for (const int32_t* w = g.nbr_begin(u); w != g.nbr_end(u); ++w)
                    if (c.is_red(*w) && seen.insert(*w).second) stack.push_back(*w);
            }
            if (reach) expect.insert({g.px(v), g.py(v)});
        });
        REQUIRE(got == expect);
    }
}

TEST_CASE("one-arm domination: mass bounded by red mass of the box") {
    for (int i = 0; i < 50; ++i) {
        auto c = sample_bernoulli(tri(1.0 / 8, 1.0, 0.5, 11, i));
        auto cs = find_clusters(c);
        auto m = one_arm_measure(c, cs, 0.0, 0.0, 0.25, 0.7, kNorm);
        int64_t red_in_box = 0;
        const auto& g = *c.geom;
        g.for_box(-0.25, 0.25, -0.25, 0.25, [&](int32_t v) {
            if (g.px(v) < 0.25 && g.py(v) < 0.25 && c.is_red(v)) ++red_in_box;
        });
        CHECK(m.total_mass() <= m.weight * static_cast<double>(red_in_box) + 1e-12);
    }
}

TEST_CASE("box_sum_measure: empty S, scale guard, monotonicity, terminal equality") {
    const double eta = 1.0 / 16, delta = 0.5;
    auto c = sample_bernoulli(tri(eta, 1.5, 0.5, 2025, 0));
    auto cs = find_clusters(c);

    auto zero = box_sum_measure(c, cs, {}, 3, delta, kNorm);
    CHECK(zero.atom_count() == 0);

    CHECK_THROWS_AS(box_sum_measure(c, cs, {}, 1, delta, kNorm), ParamError);  // 10/3 >= delta

    // pick clusters with diameter >= delta inside Lambda_1
    int found = 0;
    for (int i = 0; i < 40 && found < 6; ++i) {
        auto ci = sample_bernoulli(tri(eta, 1.5, 0.5, 2025, i));
        auto csi = find_clusters(ci);
        auto coll = clusters_in_domain(csi, Box::centered(0, 0, 1.0), delta);
        for (int32_t cid : coll.members) {
            ++found;
            auto verts = csi.vertices_of(cid);
            auto mu_c = counting_measure(*ci.geom, verts, kNorm);

            auto m3 = box_sum_measure(ci, csi, verts, 3, delta, kNorm);
            auto m4 = box_sum_measure(ci, csi, verts, 4, delta, kNorm);

            // Obs 7.1 monotonicity: finer scale never gains mass
            CHECK(m4.total_mass() <= m3.total_mass() + 1e-12);

            // terminal resolution: exact atom-set equality with mu_C
            // (3^-4 = 1/81 < 0.75 * eta = 3/64)
            std::set<std::pair<double, double>> got, expect;
            for (size_t j = 0; j < m4.atom_count(); ++j) got.insert({m4.xs[j], m4.ys[j]});
            for (size_t j = 0; j < mu_c.atom_count(); ++j) expect.insert({mu_c.xs[j], mu_c.ys[j]});
            REQUIRE(got == expect);

            // and the box-sum dominates the cluster measure at coarse scales
            CHECK(m3.total_mass() >= mu_c.total_mass() - 1e-12);
        }
    }
    REQUIRE(found > 0);
}

TEST_CASE("recovered_measure: degenerate inputs and grid membership") {
    auto zero = recovered_measure({}, {}, 0.25, 0.6, 0.01);
    CHECK(zero.atom_count() == 0);

    // single point at origin: one atom at the covering grid center
    auto one = recovered_measure({0.0}, {0.0}, 0.25, 0.6, 0.01);
    REQUIRE(one.atom_count() == 1);
    CHECK(one.xs[0] == 0.0);
    CHECK(one.ys[0] == 0.0);
    CHECK(one.weight == doctest::Approx(4 * 0.25 * 0.25 / 0.6));

    // a point exactly on a cell boundary belongs to both closed boxes
    auto edge = recovered_measure({0.125}, {0.0}, 0.25, 1.0, 0.01);
    CHECK(edge.atom_count() == 2);

    CHECK_THROWS_AS(recovered_measure({0.0}, {0.0}, 0.6, 1.0, 0.01), ParamError);
    CHECK_THROWS_AS(recovered_measure({0.0}, {0.0}, 0.05, 1.0, 0.1), ParamError);
}

TEST_CASE("recovered_measure covers a dense set with the expected cell mass") {
    // filled box of side 1: every psi-cell meeting the box carries 4 psi^2,
    // so the total mass is 4 (1 + psi)^2 / pi up to grid rounding
    auto g = LatticeGeometry::get(LatticeKind::TriangularSite, 1.0 / 64, 1.0);
    std::vector<double> xs, ys;
    g->for_box(-0.5, 0.5, -0.5, 0.5, [&](int32_t v) {
        xs.push_back(g->px(v));
        ys.push_back(g->py(v));
    });
    const double psi = 1.0 / 16;
    auto rec = recovered_measure(xs, ys, psi, 1.0, 1.0 / 64);
    CHECK(rec.total_mass() == doctest::Approx(4.0 * (1 + psi) * (1 + psi)).epsilon(0.05));
}

TEST_CASE("tv_distance: identity, disjoint supports, brute-force oracle") {
    auto m1 = from_points({0, 0.5, 1.0}, {0, 0, 0}, 0.25);
    CHECK(tv_distance(m1, m1) == 0.0);

    auto m2 = from_points({3.0, 4.0}, {0, 0}, 0.5);
    CHECK(tv_distance(m1, m2) == doctest::Approx(m1.total_mass() + m2.total_mass()));

    CounterRng rng(8, 0, kStreamScratch);
    for (int rep = 0; rep < 100; ++rep) {
        // random atom sets on a small integer grid so collisions occur
        auto draw = [&](double w) {
            CountingMeasure m;
            m.weight = w;
            const int n = 1 + static_cast<int>(rng.below(12));
            for (int i = 0; i < n; ++i) {
                m.xs.push_back(static_cast<double>(rng.below(4)));
                m.ys.push_back(static_cast<double>(rng.below(4)));
            }
            return m;
        };
        auto a = draw(0.3), b = draw(0.7);
        // oracle: per-point accumulation into a map
        std::map<std::pair<double, double>, double> acc;
        for (size_t i = 0; i < a.xs.size(); ++i) acc[{a.xs[i], a.ys[i]}] += a.weight;
        for (size_t i = 0; i < b.xs.size(); ++i) acc[{b.xs[i], b.ys[i]}] -= b.weight;
        double expect = 0;
        for (auto& [k, v] : acc) expect += std::abs(v);
        CHECK(tv_distance(a, b) == doctest::Approx(expect));
    }
}

TEST_CASE("tv_distance is a metric on the atom lattice") {
    CounterRng rng(9, 0, kStreamScratch);
    auto draw = [&](double w) {
        CountingMeasure m;
        m.weight = w;
        const int n = 1 + static_cast<int>(rng.below(8));
        for (int i = 0; i < n; ++i) {
            m.xs.push_back(static_cast<double>(rng.below(3)));
            m.ys.push_back(static_cast<double>(rng.below(3)));
        }
        return m;
    };
    for (int rep = 0; rep < 60; ++rep) {
        auto a = draw(0.5), b = draw(0.25), c = draw(1.0);
        CHECK(tv_distance(a, b) == doctest::Approx(tv_distance(b, a)));
        CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12);
    }
}

TEST_CASE("prokhorov_upper: slack-only for identical measures") {
    auto m = from_points({0, 0.3, 0.7}, {0.1, 0.2, 0.9}, 0.4);
    CHECK(prokhorov_upper(m, m, 0.05) <= 0.05 + 1e-12);
}

TEST_CASE("prokhorov_upper: two point masses against the analytic value") {
    for (double d : {0.3, 0.8}) {
        for (double mass : {0.1, 0.6}) {
            auto a = from_points({0.0}, {0.0}, mass);
            auto b = from_points({d}, {0.0}, mass);
            const double exact = std::min(d, mass);
            const double rho = 0.05;
            const double bound = prokhorov_upper(a, b, rho);
            CHECK(bound >= exact - 1e-12);
            CHECK(bound <= exact + 2 * rho + 1e-12);
        }
    }
}

TEST_CASE("prokhorov_exact_small: two deltas and upper-bound soundness") {
    auto a = from_points({0.0}, {0.0}, 0.4);
    auto b = from_points({0.25}, {0.0}, 0.4);
    CHECK(prokhorov_exact_small(a, b) == doctest::Approx(0.25));  // min(d, m) = d
    auto c = from_points({2.0}, {0.0}, 0.4);
    CHECK(prokhorov_exact_small(a, c) == doctest::Approx(0.4));  // min(d, m) = m

    CounterRng rng(12, 0, kStreamScratch);
    for (int rep = 0; rep < 80; ++rep) {
        auto draw = [&]() {
            CountingMeasure m;
            m.weight = 0.1 + 0.2 * rng.uniform01();
            const int n = 1 + static_cast<int>(rng.below(3));
            for (int i = 0; i < n; ++i) {
                m.xs.push_back(rng.uniform01());
                m.ys.push_back(rng.uniform01());
            }
            return m;
        };
        auto u = draw(), v = draw();
        const double exact = prokhorov_exact_small(u, v);
        for (double rho : {0.02, 0.1}) {
            CHECK(prokhorov_upper(u, v, rho) >= exact - 1e-12);
        }
    }
}
