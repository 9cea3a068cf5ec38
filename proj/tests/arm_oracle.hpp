#pragma once

// Brute-force arm-event oracle: explicit graphs, exhaustive tuple
// enumeration, and backtracking disjoint-path search. Shares only the
// *definition* of the discrete event with the library implementation
// (anchors in the closed box with an outside neighbor, paths outside the
// box, exit at distance >= b, same tie-breaking for the anchor order);
// the decision procedure is entirely independent.

#include <algorithm>
#include <cmath>
#include <vector>

#include "perc/arms.hpp"
#include "perc/lattice.hpp"

namespace oracle {

struct Graph {
    std::vector<double> px, py;
    std::vector<char> on;                    // medium membership (colour)
    std::vector<std::vector<int>> med_adj;   // medium adjacency (colour/bond aware)
    std::vector<std::vector<int>> geo_adj;   // geometric lattice adjacency
};

inline Graph graph_of_site(const perc::SiteConfig& c, bool want_red) {
    const auto& g = *c.geom;
    Graph out;
    const int n = g.size();
    out.px.resize(n);
    out.py.resize(n);
    out.on.resize(n);
    out.med_adj.resize(n);
    out.geo_adj.resize(n);
    for (int v = 0; v < n; ++v) {
        out.px[v] = g.px(v);
        out.py[v] = g.py(v);
        out.on[v] = (c.is_red(v) == want_red);
        for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) {
            out.geo_adj[v].push_back(*u);
            if (c.is_red(v) == want_red && c.is_red(*u) == want_red) out.med_adj[v].push_back(*u);
        }
    }
    return out;
}

inline Graph graph_of_fk_primal(const perc::FkConfig& c) {
    const auto& g = *c.geom;
    Graph out;
    const int n = g.size();
    out.px.resize(n);
    out.py.resize(n);
    out.on.assign(n, 1);
    out.med_adj.resize(n);
    out.geo_adj.resize(n);
    for (int v = 0; v < n; ++v) {
        out.px[v] = g.px(v);
        out.py[v] = g.py(v);
        for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) out.geo_adj[v].push_back(*u);
    }
    for (int32_t b = 0; b < g.bond_count(); ++b) {
        if (!g.bond_valid(b) || !c.bond_open(b)) continue;
        out.med_adj[g.bond_from(b)].push_back(g.bond_to(b));
        out.med_adj[g.bond_to(b)].push_back(g.bond_from(b));
    }
    return out;
}

inline Graph graph_of_fk_dual(const perc::FkConfig& c) {
    const auto& g = *c.geom;
    const perc::DualGeometry d = c.dual();
    Graph out;
    const int n = d.size();
    const int32_t np = g.size();
    out.px.resize(n);
    out.py.resize(n);
    out.on.assign(n, 1);
    out.med_adj.resize(n);
    out.geo_adj.resize(n);
    for (int v = 0; v < n; ++v) {
        out.px[v] = d.px(v);
        out.py[v] = d.py(v);
        const int x = d.x_of(v), y = d.y_of(v);
        struct Cand {
            int u;
            int32_t bond;
        };
        std::vector<Cand> cands;
        if (int u = d.id(x + 1, y); u >= 0) cands.push_back({u, np + g.id(2 * (x + 1), 2 * y)});
        if (int u = d.id(x - 1, y); u >= 0) cands.push_back({u, np + g.id(2 * x, 2 * y)});
        if (int u = d.id(x, y + 1); u >= 0) cands.push_back({u, g.id(2 * x, 2 * (y + 1))});
        if (int u = d.id(x, y - 1); u >= 0) cands.push_back({u, g.id(2 * x, 2 * y)});
        for (const auto& cd : cands) {
            out.geo_adj[v].push_back(cd.u);
            if (!c.bond_open(cd.bond)) out.med_adj[v].push_back(cd.u);
        }
    }
    return out;
}

struct OracleQuery {
    double zx, zy, a, b, step;
    int side = 0;  // for the half-plane factor
    double slack = 0;
};

inline bool in_halfplane(const OracleQuery& q, double px, double py) {
    switch (q.side) {
        case 1: return px <= q.zx + q.a + q.slack;
        case 2: return py <= q.zy + q.a + q.slack;
        case 3: return px >= q.zx - q.a - q.slack;
        case 4: return py >= q.zy - q.a - q.slack;
        default: return true;
    }
}

// All anchors of one colour graph: on-medium vertex of the closed box with
// a geometric neighbor outside.
inline std::vector<int> anchors_of(const Graph& g, const OracleQuery& q) {
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(g.px.size()); ++v) {
        if (!g.on[v]) continue;
        if (perc::linf(g.px[v], g.py[v], q.zx, q.zy) > q.a) continue;
        bool ring = false;
        for (int u : g.geo_adj[v])
            if (perc::linf(g.px[u], g.py[u], q.zx, q.zy) > q.a) ring = true;
        if (ring) out.push_back(v);
    }
    return out;
}

// Backtracking search for vertex-disjoint arms from the fixed anchors.
struct PathSearch {
    const Graph* g;
    const OracleQuery* q;
    bool confined;
    std::vector<char> used;
    int64_t budget = 20'000'000;

    bool vertex_ok(int v) const {
        const double r = perc::linf(g->px[v], g->py[v], q->zx, q->zy);
        if (!(r > q->a) || r > q->b + q->step) return false;
        if (confined && !in_halfplane(*q, g->px[v], g->py[v])) return false;
        return true;
    }

    bool arms_from(const std::vector<int>& anchors, size_t idx) {
        if (idx == anchors.size()) return true;
        return extend(anchors, idx, anchors[idx], true);
    }

    bool extend(const std::vector<int>& anchors, size_t idx, int v, bool is_anchor) {
        if (--budget < 0) throw std::runtime_error("oracle budget exceeded");
        if (!is_anchor && perc::linf(g->px[v], g->py[v], q->zx, q->zy) >= q->b) {
            used[v] = 1;
            if (arms_from(anchors, idx + 1)) return true;
            used[v] = 0;
            return false;
        }
        used[v] = 1;
        for (int u : g->med_adj[v]) {
            if (used[u] || !vertex_ok(u)) continue;
            if (extend(anchors, idx, u, false)) return true;
        }
        used[v] = 0;
        return false;
    }
};

// One factor: does a disjoint family matching `word` (cyclically if
// cyclic=true) exist? Exhaustive over anchor tuples in key order.
inline bool oracle_factor(const Graph& red, const Graph& blue, const OracleQuery& q,
                          const std::vector<uint8_t>& word, bool cyclic, bool confined) {
    struct Unit {
        double key;
        int64_t tie;
        uint8_t colour;
        int vertex;
    };
    const double cut = confined ? (q.side == 1 ? 0.0 : q.side == 2 ? M_PI / 2 : q.side == 3 ? M_PI : -M_PI / 2) : 0.0;
    std::vector<Unit> units;
    auto push = [&](const Graph& g, uint8_t colour) {
        for (int v : anchors_of(g, q)) {
            double th = std::atan2(g.py[v] - q.zy, g.px[v] - q.zx) - cut;
            while (th < 0) th += 2 * M_PI;
            while (th >= 2 * M_PI) th -= 2 * M_PI;
            units.push_back({th, (static_cast<int64_t>(colour) << 32) | v, colour, v});
        }
    };
    bool has_red = false, has_blue = false;
    for (uint8_t b : word) (b ? has_red : has_blue) = true;
    if (has_red) push(red, 1);
    if (has_blue) push(blue, 0);
    std::sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) {
        if (a.key != b.key) return a.key < b.key;
        return a.tie < b.tie;
    });

    const size_t l = word.size();
    if (units.size() < l) return false;

    // every increasing index tuple whose colours match `word` (some rotation
    // thereof when cyclic)
    std::vector<size_t> pick(l);
    std::vector<std::vector<uint8_t>> targets;
    if (cyclic) {
        for (size_t r = 0; r < l; ++r) {
            std::vector<uint8_t> rot(word.begin() + r, word.end());
            rot.insert(rot.end(), word.begin(), word.begin() + r);
            if (std::find(targets.begin(), targets.end(), rot) == targets.end()) targets.push_back(rot);
        }
    } else {
        targets.push_back(word);
    }

    std::function<bool(size_t, size_t, const std::vector<uint8_t>&)> choose =
        [&](size_t slot, size_t from, const std::vector<uint8_t>& target) -> bool {
        if (slot == l) {
            // feasibility per colour via backtracking path search
            std::vector<int> red_anchors, blue_anchors;
            for (size_t s = 0; s < l; ++s)
                (target[s] ? red_anchors : blue_anchors).push_back(units[pick[s]].vertex);
            PathSearch psr{&red, &q, confined, std::vector<char>(red.px.size(), 0)};
            if (!red_anchors.empty() && !psr.arms_from(red_anchors, 0)) return false;
            PathSearch psb{&blue, &q, confined, std::vector<char>(blue.px.size(), 0)};
            if (!blue_anchors.empty() && !psb.arms_from(blue_anchors, 0)) return false;
            return true;
        }
        for (size_t p = from; p + (l - slot - 1) < units.size(); ++p) {
            if (units[p].colour != target[slot]) continue;
            pick[slot] = p;
            if (choose(slot + 1, p + 1, target)) return true;
        }
        return false;
    };

    for (const auto& target : targets)
        if (choose(0, 0, target)) return true;
    return false;
}

inline bool oracle_detect_site(const perc::SiteConfig& c, const perc::ArmQuery& aq) {
    const Graph red = graph_of_site(c, true);
    const Graph blue = graph_of_site(c, false);
    const double step = c.geom->eta();
    OracleQuery q{aq.zx, aq.zy, aq.a, aq.b, step, 0, 0};
    std::vector<uint8_t> word = aq.kappa.bits;
    word.insert(word.end(), aq.kappa_hp.bits.begin(), aq.kappa_hp.bits.end());
    if (!oracle_factor(red, blue, q, word, true, false)) return false;
    if (aq.kappa_hp.empty()) return true;
    OracleQuery qh{aq.zx, aq.zy, aq.a, aq.b, step, aq.side, step * (1 + 1e-9)};
    return oracle_factor(red, blue, qh, aq.kappa_hp.bits, false, true);
}

inline bool oracle_detect_fk(const perc::FkConfig& c, const perc::ArmQuery& aq) {
    const Graph red = graph_of_fk_primal(c);
    const Graph blue = graph_of_fk_dual(c);
    const double step = c.geom->eta();
    OracleQuery q{aq.zx, aq.zy, aq.a, aq.b, step, 0, 0};
    std::vector<uint8_t> word = aq.kappa.bits;
    word.insert(word.end(), aq.kappa_hp.bits.begin(), aq.kappa_hp.bits.end());
    if (!oracle_factor(red, blue, q, word, true, false)) return false;
    if (aq.kappa_hp.empty()) return true;
    OracleQuery qh{aq.zx, aq.zy, aq.a, aq.b, step, aq.side, step * (1 + 1e-9)};
    return oracle_factor(red, blue, qh, aq.kappa_hp.bits, false, true);
}

}  // namespace oracle
