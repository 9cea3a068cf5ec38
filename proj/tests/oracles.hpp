#pragma once

// Independent test oracles: plain flood fills, exhaustive enumerations and
// brute-force searches kept deliberately separate from the library's
// implementation paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "perc/clusters.hpp"
#include "perc/lattice.hpp"

namespace oracle {

// Flood-fill labeling of the red (or blue) phase of a site configuration.
// Returns per-vertex component id (-1 off-phase), ids in discovery order of
// an ascending vertex scan.
inline std::vector<int32_t> flood_fill_site(const perc::SiteConfig& c, bool red_phase) {
    const auto& g = *c.geom;
    std::vector<int32_t> lab(g.size(), -1);
    int32_t next = 0;
    std::vector<int32_t> stack;
    for (int32_t s = 0; s < g.size(); ++s) {
        if (lab[s] >= 0 || c.is_red(s) != red_phase) continue;
        lab[s] = next;
        stack.assign(1, s);
        while (!stack.empty()) {
            const int32_t v = stack.back();
            stack.pop_back();
            for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) {
                if (lab[*u] < 0 && c.is_red(*u) == red_phase) {
                    lab[*u] = next;
                    stack.push_back(*u);
                }
            }
        }
        ++next;
    }
    return lab;
}

// Flood fill of open-bond components of an FK configuration.
inline std::vector<int32_t> flood_fill_fk(const perc::FkConfig& c) {
    const auto& g = *c.geom;
    const int32_t n = g.size();
    std::vector<int32_t> lab(n, -1);
    int32_t next = 0;
    std::vector<int32_t> stack;
    auto bonds_of = [&](int32_t v, auto fn) {
        for (const int32_t b : {v, n + v})
            if (g.bond_to(b) >= 0 && c.bond_open(b)) fn(g.bond_to(b));
        const int32_t west = g.id(g.a_of(v) - 2, g.w_of(v));
        if (west >= 0 && c.bond_open(west)) fn(west);
        const int32_t south = g.id(g.a_of(v), g.w_of(v) - 2);
        if (south >= 0 && c.bond_open(n + south)) fn(south);
    };
    for (int32_t s = 0; s < n; ++s) {
        if (lab[s] >= 0) continue;
        lab[s] = next;
        stack.assign(1, s);
        while (!stack.empty()) {
            const int32_t v = stack.back();
            stack.pop_back();
            bonds_of(v, [&](int32_t u) {
                if (lab[u] < 0) {
                    lab[u] = next;
                    stack.push_back(u);
                }
            });
        }
        ++next;
    }
    return lab;
}

// Flood fill restricted to a domain: components of (phase  *  domain).
inline std::vector<int32_t> flood_fill_in_domain(const perc::SiteConfig& c, const perc::Box& d) {
    const auto& g = *c.geom;
    std::vector<int32_t> lab(g.size(), -1);
    auto in = [&](int32_t v) { return c.is_red(v) && d.contains(g.px(v), g.py(v)); };
    int32_t next = 0;
    std::vector<int32_t> stack;
    for (int32_t s = 0; s < g.size(); ++s) {
        if (lab[s] >= 0 || !in(s)) continue;
        lab[s] = next;
        stack.assign(1, s);
        while (!stack.empty()) {
            const int32_t v = stack.back();
            stack.pop_back();
            for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u)
                if (lab[*u] < 0 && in(*u)) {
                    lab[*u] = next;
                    stack.push_back(*u);
                }
        }
        ++next;
    }
    return lab;
}

// Plain double-loop Hausdorff (no early exits).
inline double hausdorff_brute(const perc::PointSet& a, const perc::PointSet& b) {
    double h = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        double best = 1e300;
        for (size_t j = 0; j < b.size(); ++j) best = std::min(best, perc::linf(a.xs[i], a.ys[i], b.xs[j], b.ys[j]));
        h = std::max(h, best);
    }
    for (size_t j = 0; j < b.size(); ++j) {
        double best = 1e300;
        for (size_t i = 0; i < a.size(); ++i) best = std::min(best, perc::linf(a.xs[i], a.ys[i], b.xs[j], b.ys[j]));
        h = std::max(h, best);
    }
    return h;
}

// Exhaustive bottleneck distance over all bijections.
inline double collection_distance_brute(const std::vector<perc::PointSet>& s, const std::vector<perc::PointSet>& t) {
    if (s.size() != t.size()) return std::numeric_limits<double>::infinity();
    std::vector<int> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double mx = 0;
        for (size_t i = 0; i < s.size(); ++i) mx = std::max(mx, hausdorff_brute(s[i], t[perm[i]]));
        best = std::min(best, mx);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Exact random-cluster measure on a tiny square patch by enumerating all
// bond states with weight p^o (1-p)^c 2^{k(w)}. Returns the probability of
// each bond being open, plus P(u <-> v) for a given pair.
struct RcEnumeration {
    std::vector<double> edge_marginal;
    double p_connect = 0;  // P(u <-> v)
};

inline RcEnumeration enumerate_rc(const perc::LatticeGeometry& g, double p, int32_t u, int32_t v) {
    std::vector<int32_t> bonds;
    for (int32_t b = 0; b < g.bond_count(); ++b)
        if (g.bond_valid(b)) bonds.push_back(b);
    const int m = static_cast<int>(bonds.size());
    const int32_t n = g.size();

    RcEnumeration out;
    out.edge_marginal.assign(m, 0.0);
    double z = 0, z_conn = 0;
    std::vector<int32_t> uf(n);
    for (uint32_t mask = 0; mask < (1u << m); ++mask) {
        std::iota(uf.begin(), uf.end(), 0);
        std::function<int32_t(int32_t)> find = [&](int32_t x) { return uf[x] == x ? x : uf[x] = find(uf[x]); };
        int open = 0;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) {
                ++open;
                const int32_t a = find(g.bond_from(bonds[i])), b2 = find(g.bond_to(bonds[i]));
                if (a != b2) uf[a] = b2;
            }
        int comps = 0;
        for (int32_t x = 0; x < n; ++x)
            if (find(x) == x) ++comps;
        const double w = std::pow(p, open) * std::pow(1 - p, m - open) * std::pow(2.0, comps);
        z += w;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) out.edge_marginal[i] += w;
        if (find(u) == find(v)) z_conn += w;
    }
    for (auto& e : out.edge_marginal) e /= z;
    out.p_connect = z_conn / z;
    return out;
}

// Build a triangular-lattice configuration with an explicit red set given in
// axial (x, y) coordinates.
inline perc::SiteConfig make_tri_config(double eta, double k, const std::vector<std::pair<int, int>>& red_xy) {
    perc::MeshSpec s;
    s.kind = perc::LatticeKind::TriangularSite;
    s.eta = eta;
    s.k = k;
    s.p = 0.0;
    perc::SiteConfig c;
    c.spec = s;
    c.geom = perc::LatticeGeometry::get(s.kind, eta, k);
    c.red.assign((c.geom->size() + 63) / 64, 0);
    for (auto [x, y] : red_xy) {
        const int32_t v = c.geom->id(2 * x + y, y);
        if (v < 0) throw std::runtime_error("make_tri_config: vertex outside region");
        c.set_red(v, true);
    }
    return c;
}

}  // namespace oracle
