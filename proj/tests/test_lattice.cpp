#include "doctest.h"
#include "perc/clusters.hpp"
#include "perc/lattice.hpp"

#include <cstdio>
#include <filesystem>

using namespace perc;

TEST_CASE("triangular geometry: counts, positions, neighbors") {
    auto g = LatticeGeometry::get(LatticeKind::TriangularSite, 0.5, 1.0);
    // Rows at py = 0.5*sqrt(3)/2*w: w in {-2,..,2}; row w=0 has a in
    // {-4,..,4} even -> 5 vertices; odd rows have a odd in [-4,4] -> 4.
    CHECK(g->wmin() == -2);
    CHECK(g->wmax() == 2);
    CHECK(g->row_count(0) == 5);
    CHECK(g->row_count(1) == 4);
    CHECK(g->size() == 5 + 4 + 5 + 4 + 5);

    const int32_t o = g->origin();
    REQUIRE(o >= 0);
    CHECK(g->px(o) == 0.0);
    CHECK(g->py(o) == 0.0);
    // Interior vertex has 6 unit-distance neighbors.
    int deg = 0;
    for (const int32_t* u = g->nbr_begin(o); u != g->nbr_end(o); ++u) {
        ++deg;
        const double dx = g->px(*u), dy = g->py(*u);
        CHECK(std::sqrt(dx * dx + dy * dy) == doctest::Approx(0.5));
    }
    CHECK(deg == 6);
}

TEST_CASE("square geometry: bonds") {
    auto g = LatticeGeometry::get(LatticeKind::SquareFk, 0.5, 1.0);
    CHECK(g->size() == 25);
    const int32_t o = g->origin();
    int deg = 0;
    for (const int32_t* u = g->nbr_begin(o); u != g->nbr_end(o); ++u) ++deg;
    CHECK(deg == 4);
    // 4 east bonds per row x 5 rows + the transpose = 40 valid bonds.
    int valid = 0;
    for (int32_t b = 0; b < g->bond_count(); ++b)
        if (g->bond_valid(b)) ++valid;
    CHECK(valid == 40);
}

TEST_CASE("sample_bernoulli degenerate parameters") {
    MeshSpec s;
    s.kind = LatticeKind::TriangularSite;
    s.eta = 1.0 / 8;
    s.k = 1.0;
    s.seed = 9;

    s.p = 0.0;
    auto all_blue = sample_bernoulli(s);
    for (int32_t v = 0; v < all_blue.geom->size(); ++v) CHECK_FALSE(all_blue.is_red(v));

    s.p = 1.0;
    auto all_red = sample_bernoulli(s);
    for (int32_t v = 0; v < all_red.geom->size(); ++v) CHECK(all_red.is_red(v));
}

TEST_CASE("sample_bernoulli p=1/2: mean red fraction near 1/2, deterministic") {
    MeshSpec s;
    s.kind = LatticeKind::TriangularSite;
    s.eta = 1.0 / 32;
    s.k = 1.0;
    s.p = 0.5;
    s.seed = 1234;

    int64_t red = 0, total = 0;
    for (int i = 0; i < 20; ++i) {
        s.sample_index = i;
        auto c = sample_bernoulli(s);
        for (int32_t v = 0; v < c.geom->size(); ++v) {
            red += c.is_red(v);
            ++total;
        }
    }
    const double frac = static_cast<double>(red) / static_cast<double>(total);
    // ~95k draws: 5 sigma ~ 0.008
    CHECK(frac == doctest::Approx(0.5).epsilon(0.02));

    s.sample_index = 3;
    auto c1 = sample_bernoulli(s);
    auto c2 = sample_bernoulli(s);
    CHECK(c1.red == c2.red);
}

TEST_CASE("mesh validation") {
    MeshSpec s;
    s.eta = 0.0;
    CHECK_THROWS_AS(sample_bernoulli(s), ConfigError);
    s.eta = 2.0;
    s.k = 1.0;
    CHECK_THROWS_AS(sample_bernoulli(s), ConfigError);
}

TEST_CASE("fk sampler: edge cases and Edwards-Sokal consistency") {
    MeshSpec s;
    s.kind = LatticeKind::SquareFk;
    s.eta = 0.25;
    s.k = 1.0;
    s.p = fk_critical_p();
    s.seed = 77;

    CHECK_THROWS_AS(sample_fk_ising(s, 0), ParamError);

    for (uint64_t i = 0; i < 8; ++i) {
        s.sample_index = i;
        auto c = sample_fk_ising(s, 30);
        // spins constant on open clusters
        const auto& g = *c.geom;
        for (int32_t b = 0; b < g.bond_count(); ++b) {
            if (!g.bond_valid(b) || !c.bond_open(b)) continue;
            CHECK(c.spin_of(g.bond_from(b)) == c.spin_of(g.bond_to(b)));
        }
    }

    // Determinism: same (spec, sweeps) -> bit-identical configuration.
    s.sample_index = 5;
    auto a = sample_fk_ising(s, 25);
    auto b = sample_fk_ising(s, 25);
    CHECK(a.open == b.open);
    CHECK(a.spin == b.spin);
}

TEST_CASE("pi1 estimation: degenerate p") {
    MeshSpec s;
    s.kind = LatticeKind::TriangularSite;
    s.eta = 1.0 / 8;
    s.k = 1.25;
    s.seed = 4;

    s.p = 1.0;
    auto e1 = estimate_pi1_normalization(s, 50);
    CHECK(e1.pi1_hat == 1.0);

    s.p = 0.0;
    auto e0 = estimate_pi1_normalization(s, 50);
    CHECK(e0.pi1_hat == 0.0);

    CHECK_THROWS_AS(estimate_pi1_normalization(s, 0), ParamError);
}

TEST_CASE("normalization table merge and json round trip") {
    NormalizationTable t;
    NormEntry a{0.5, 100, 0.1};
    NormEntry b{0.7, 300, 0.05};
    t.merge(LatticeKind::TriangularSite, 0.125, a);
    t.merge(LatticeKind::TriangularSite, 0.125, b);
    auto e = t.lookup(LatticeKind::TriangularSite, 0.125);
    REQUIRE(e.has_value());
    CHECK(e->n_samples == 400);
    CHECK(e->pi1_hat == doctest::Approx((0.5 * 100 + 0.7 * 300) / 400.0));

    auto t2 = NormalizationTable::from_json(t.to_json());
    auto e2 = t2.lookup(LatticeKind::TriangularSite, 0.125);
    REQUIRE(e2.has_value());
    CHECK(e2->pi1_hat == e->pi1_hat);
    CHECK_FALSE(t2.lookup(LatticeKind::SquareFk, 0.125).has_value());
}

TEST_CASE("binary config round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "perc_io_test";
    fs::create_directories(dir);

    MeshSpec s;
    s.kind = LatticeKind::TriangularSite;
    s.eta = 1.0 / 16;
    s.k = 1.0;
    s.p = 0.5;
    s.seed = 99;
    s.sample_index = 2;
    auto c = sample_bernoulli(s);
    const auto path = (dir / "site.bin").string();
    save_config(c, path);
    CHECK(peek_config_kind(path) == LatticeKind::TriangularSite);
    auto c2 = load_site_config(path);
    CHECK(c2.red == c.red);
    CHECK(c2.spec.eta == s.eta);
    CHECK(c2.spec.seed == s.seed);

    MeshSpec f;
    f.kind = LatticeKind::SquareFk;
    f.eta = 0.25;
    f.k = 1.0;
    f.p = fk_critical_p();
    f.seed = 31;
    auto cf = sample_fk_ising(f, 20);
    const auto fpath = (dir / "fk.bin").string();
    save_config(cf, fpath);
    auto cf2 = load_fk_config(fpath);
    CHECK(cf2.open == cf.open);
    CHECK(cf2.spin == cf.spin);
    CHECK(cf2.sign_seed == cf.sign_seed);
    fs::remove_all(dir);
}
