#include "perc/arms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace perc {

namespace {

constexpr int kNoComp = -1;

// Half-plane H_side(z, a), dilated by `slack` (one lattice step): side 1 =
// left of the line through the box's right side, 2 = below its top side,
// 3 = right of its left side, 4 = above its bottom side.
struct Constraint {
    int side = 0;
    double zx = 0, zy = 0, a = 0, slack = 0;

    bool test(double px, double py) const {
        switch (side) {
            case 1: return px <= zx + a + slack;
            case 2: return py <= zy + a + slack;
            case 3: return px >= zx - a - slack;
            case 4: return py >= zy - a - slack;
            default: return true;
        }
    }
    // cut for the linear ordering of confined arms: the side's outward axis
    double cut_angle() const {
        switch (side) {
            case 1: return 0.0;
            case 2: return M_PI / 2;
            case 3: return M_PI;
            case 4: return -M_PI / 2;
            default: return 0.0;
        }
    }
};

// --- medium policies ---------------------------------------------------------

struct SiteMedium {
    const SiteConfig* c;
    const LatticeGeometry* g;
    bool want_red;

    int32_t size() const { return g->size(); }
    double px(int32_t v) const { return g->px(v); }
    double py(int32_t v) const { return g->py(v); }
    bool on(int32_t v) const { return c->is_red(v) == want_red; }
    template <typename F>
    void medium_neighbors(int32_t v, F f) const {
        for (const int32_t* u = g->nbr_begin(v); u != g->nbr_end(v); ++u)
            if (on(*u)) f(*u);
    }
    template <typename F>
    void geometric_neighbors(int32_t v, F f) const {
        for (const int32_t* u = g->nbr_begin(v); u != g->nbr_end(v); ++u) f(*u);
    }
    template <typename F>
    void for_near(double x0, double x1, double y0, double y1, F f) const {
        g->for_box(x0, x1, y0, y1, f);
    }
    double step() const { return g->eta(); }
};

struct FkPrimalMedium {
    const FkConfig* c;
    const LatticeGeometry* g;

    int32_t size() const { return g->size(); }
    double px(int32_t v) const { return g->px(v); }
    double py(int32_t v) const { return g->py(v); }
    bool on(int32_t) const { return true; }
    template <typename F>
    void medium_neighbors(int32_t v, F f) const {
        const int32_t n = g->size();
        for (const int32_t b : {v, n + v}) {
            const int32_t u = g->bond_to(b);
            if (u >= 0 && c->bond_open(b)) f(u);
        }
        const int32_t west = g->id(g->a_of(v) - 2, g->w_of(v));
        if (west >= 0 && c->bond_open(west)) f(west);
        const int32_t south = g->id(g->a_of(v), g->w_of(v) - 2);
        if (south >= 0 && c->bond_open(n + south)) f(south);
    }
    template <typename F>
    void geometric_neighbors(int32_t v, F f) const {
        for (const int32_t* u = g->nbr_begin(v); u != g->nbr_end(v); ++u) f(*u);
    }
    template <typename F>
    void for_near(double x0, double x1, double y0, double y1, F f) const {
        g->for_box(x0, x1, y0, y1, f);
    }
    double step() const { return g->eta(); }
};

struct FkDualMedium {
    const FkConfig* c;
    const LatticeGeometry* g;
    const DualGeometry* d;

    int32_t size() const { return d->size(); }
    double px(int32_t v) const { return d->px(v); }
    double py(int32_t v) const { return d->py(v); }
    bool on(int32_t) const { return true; }
    template <typename F>
    void medium_neighbors(int32_t v, F f) const {
        const int x = d->x_of(v), y = d->y_of(v);
        const int32_t n = g->size();
        if (const int32_t de = d->id(x + 1, y); de >= 0) {  // crosses north bond of (x+1, y)
            const int32_t pv = g->id(2 * (x + 1), 2 * y);
            if (pv >= 0 && g->bond_to(n + pv) >= 0 && !c->bond_open(n + pv)) f(de);
        }
        if (const int32_t dw = d->id(x - 1, y); dw >= 0) {
            const int32_t pv = g->id(2 * x, 2 * y);
            if (pv >= 0 && g->bond_to(n + pv) >= 0 && !c->bond_open(n + pv)) f(dw);
        }
        if (const int32_t dn = d->id(x, y + 1); dn >= 0) {  // crosses east bond of (x, y+1)
            const int32_t pv = g->id(2 * x, 2 * (y + 1));
            if (pv >= 0 && g->bond_to(pv) >= 0 && !c->bond_open(pv)) f(dn);
        }
        if (const int32_t ds = d->id(x, y - 1); ds >= 0) {
            const int32_t pv = g->id(2 * x, 2 * y);
            if (pv >= 0 && g->bond_to(pv) >= 0 && !c->bond_open(pv)) f(ds);
        }
    }
    template <typename F>
    void geometric_neighbors(int32_t v, F f) const {
        const int x = d->x_of(v), y = d->y_of(v);
        for (auto [dx, dy] : {std::pair<int, int>{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            const int32_t u = d->id(x + dx, y + dy);
            if (u >= 0) f(u);
        }
    }
    template <typename F>
    void for_near(double x0, double x1, double y0, double y1, F f) const {
        const double eta = d->eta;
        const int xlo = std::max(d->xmin, static_cast<int>(std::floor(x0 / eta - 0.5 - 1e-9)));
        const int xhi = std::min(d->xmin + d->nx - 1, static_cast<int>(std::ceil(x1 / eta - 0.5 + 1e-9)));
        const int ylo = std::max(d->ymin, static_cast<int>(std::floor(y0 / eta - 0.5 - 1e-9)));
        const int yhi = std::min(d->ymin + d->ny - 1, static_cast<int>(std::ceil(y1 / eta - 0.5 + 1e-9)));
        for (int y = ylo; y <= yhi; ++y)
            for (int x = xlo; x <= xhi; ++x) {
                const int32_t v = d->id(x, y);
                if (v < 0) continue;
                const double vx = d->px(v), vy = d->py(v);
                if (vx >= x0 && vx <= x1 && vy >= y0 && vy <= y1) f(v);
            }
    }
    double step() const { return d->eta; }
};

// --- per-query annulus analysis ------------------------------------------------

struct Anchor {
    int32_t vertex;
    double angle;
    std::vector<int> comps;    // live comps attached in one medium step
    bool global_live = false;  // necessary-condition flag from global clusters
};

struct Analysis {
    std::vector<int32_t> wverts;
    std::vector<int> comp;
    std::vector<uint8_t> exit_flag;
    std::vector<uint8_t> comp_live;
    std::vector<std::vector<int32_t>> comp_members;  // window-local indices
    std::vector<Anchor> anchors;
    int n_comps = 0;
};

// Window: a < r_inf(v - z) <= b + step, on-medium, constraint-dilated;
// components over medium edges; exit where r_inf >= b. Anchors are
// on-medium vertices of the closed box with a geometric neighbor outside.
template <typename M>
Analysis analyze(const M& m, double zx, double zy, double a, double b, const Constraint& cons,
                 const ClusterSet* global, std::vector<int32_t>& scratch) {
    Analysis out;
    const double step = m.step();
    const double outer = b + step;

    // clip the scan to the constrained half-plane
    double x0 = zx - outer, x1 = zx + outer, y0 = zy - outer, y1 = zy + outer;
    switch (cons.side) {
        case 1: x1 = std::min(x1, zx + cons.a + cons.slack); break;
        case 2: y1 = std::min(y1, zy + cons.a + cons.slack); break;
        case 3: x0 = std::max(x0, zx - cons.a - cons.slack); break;
        case 4: y0 = std::max(y0, zy - cons.a - cons.slack); break;
        default: break;
    }

    m.for_near(x0, x1, y0, y1, [&](int32_t v) {
        if (!m.on(v)) return;
        const double r = linf(m.px(v), m.py(v), zx, zy);
        if (!(r > a) || r > outer) return;
        if (!cons.test(m.px(v), m.py(v))) return;
        scratch[v] = static_cast<int32_t>(out.wverts.size());
        out.wverts.push_back(v);
        out.exit_flag.push_back(r >= b);
    });

    const int32_t nw = static_cast<int32_t>(out.wverts.size());
    out.comp.assign(nw, kNoComp);
    std::vector<int32_t> stack;
    for (int32_t i = 0; i < nw; ++i) {
        if (out.comp[i] != kNoComp) continue;
        const int cid = out.n_comps++;
        out.comp_members.push_back({});
        out.comp_live.push_back(0);
        out.comp[i] = cid;
        stack.assign(1, i);
        while (!stack.empty()) {
            const int32_t wi = stack.back();
            stack.pop_back();
            out.comp_members[cid].push_back(wi);
            if (out.exit_flag[wi]) out.comp_live[cid] = 1;
            m.medium_neighbors(out.wverts[wi], [&](int32_t u) {
                const int32_t wu = scratch[u];
                if (wu < 0) return;  // outside the window
                if (out.comp[wu] == kNoComp) {
                    out.comp[wu] = cid;
                    stack.push_back(wu);
                }
            });
        }
    }

    m.for_near(zx - a, zx + a, zy - a, zy + a, [&](int32_t v) {
        if (!m.on(v)) return;
        if (linf(m.px(v), m.py(v), zx, zy) > a) return;
        bool ring = false;
        m.geometric_neighbors(v, [&](int32_t u) {
            if (linf(m.px(u), m.py(u), zx, zy) > a) ring = true;
        });
        if (!ring) return;
        Anchor anc;
        anc.vertex = v;
        anc.angle = std::atan2(m.py(v) - zy, m.px(v) - zx);
        m.medium_neighbors(v, [&](int32_t u) {
            if (linf(m.px(u), m.py(u), zx, zy) <= a) return;
            const int32_t wu = scratch[u];
            if (wu < 0) return;
            const int cid = out.comp[wu];
            if (!out.comp_live[cid]) return;
            if (std::find(anc.comps.begin(), anc.comps.end(), cid) == anc.comps.end()) anc.comps.push_back(cid);
        });
        if (global) {
            const int32_t gcid = global->label_of(v);
            anc.global_live = (gcid >= 0) && global->exits_box(gcid, zx, zy, b);
        }
        if (!anc.comps.empty() || anc.global_live) out.anchors.push_back(std::move(anc));
    });

    for (int32_t i = 0; i < nw; ++i) scratch[out.wverts[i]] = -1;

    std::sort(out.anchors.begin(), out.anchors.end(), [](const Anchor& p, const Anchor& q) {
        if (p.angle != q.angle) return p.angle < q.angle;
        return p.vertex < q.vertex;
    });
    return out;
}

// --- per-comp disjoint-path feasibility (Menger via unit-capacity flow) --------

// Can `anchor_verts.size()` vertex-disjoint arms run from the given anchors
// through component `cid` to exit vertices? Exact via vertex-splitting and
// BFS augmentation (flow value <= word length).
template <typename M>
bool comp_flow_feasible(const M& m, const Analysis& an, int cid, const std::vector<int32_t>& anchor_verts,
                        std::vector<int32_t>& scratch) {
    const auto& members = an.comp_members[cid];
    const int nloc = static_cast<int>(members.size());
    const int need = static_cast<int>(anchor_verts.size());
    for (int i = 0; i < nloc; ++i) scratch[an.wverts[members[i]]] = i;

    struct E {
        int to, rev, cap;
    };
    std::vector<std::vector<E>> adj(2 * nloc + 2);
    const int S = 2 * nloc, T = 2 * nloc + 1;
    auto add_edge = [&](int a, int b, int cap) {
        adj[a].push_back({b, static_cast<int>(adj[b].size()), cap});
        adj[b].push_back({a, static_cast<int>(adj[a].size()) - 1, 0});
    };
    for (int i = 0; i < nloc; ++i) {
        add_edge(2 * i, 2 * i + 1, 1);  // vertex capacity
        if (an.exit_flag[members[i]]) add_edge(2 * i + 1, T, 1);
        m.medium_neighbors(an.wverts[members[i]], [&](int32_t u) {
            const int32_t j = scratch[u];
            if (j >= 0 && j < nloc) add_edge(2 * i + 1, 2 * j, 1);
        });
    }
    for (int32_t av : anchor_verts) {
        const int anode = static_cast<int>(adj.size());
        adj.push_back({});
        add_edge(S, anode, 1);
        m.medium_neighbors(av, [&](int32_t u) {
            const int32_t j = scratch[u];
            if (j >= 0 && j < nloc) add_edge(anode, 2 * j, 1);
        });
    }

    int flow = 0;
    std::vector<int> par_node(adj.size()), par_edge(adj.size());
    while (flow < need) {
        std::fill(par_node.begin(), par_node.end(), -1);
        std::vector<int> q{S};
        par_node[S] = S;
        bool found = false;
        for (size_t h = 0; h < q.size() && !found; ++h) {
            const int v = q[h];
            for (size_t ei = 0; ei < adj[v].size(); ++ei) {
                const auto& e = adj[v][ei];
                if (e.cap > 0 && par_node[e.to] < 0) {
                    par_node[e.to] = v;
                    par_edge[e.to] = static_cast<int>(ei);
                    if (e.to == T) {
                        found = true;
                        break;
                    }
                    q.push_back(e.to);
                }
            }
        }
        if (!found) break;
        for (int v = T; v != S;) {
            const int pv = par_node[v], pe = par_edge[v];
            adj[pv][pe].cap -= 1;
            adj[adj[pv][pe].to][adj[pv][pe].rev].cap += 1;
            v = pv;
        }
        ++flow;
    }

    for (int i = 0; i < nloc; ++i) scratch[an.wverts[members[i]]] = -1;
    return flow >= need;
}

// --- the matcher -----------------------------------------------------------------

struct Unit {
    double angle;
    int64_t tie;
    uint8_t colour;
    int anchor_idx;
};

struct MatchInput {
    const Analysis* red = nullptr;
    const Analysis* blue = nullptr;
    std::vector<Unit> units;  // sorted by (angle, tie); doubled for cyclic use
    size_t n = 0;             // original (undoubled) count
};

MatchInput merge_units(const Analysis* red, const Analysis* blue, double cut, bool cyclic) {
    MatchInput mi;
    mi.red = red;
    mi.blue = blue;
    auto push = [&](const Analysis* an, uint8_t colour) {
        if (!an) return;
        for (size_t i = 0; i < an->anchors.size(); ++i) {
            double th = an->anchors[i].angle - cut;
            while (th < 0) th += 2 * M_PI;
            while (th >= 2 * M_PI) th -= 2 * M_PI;
            mi.units.push_back(
                {th, (static_cast<int64_t>(colour) << 32) | an->anchors[i].vertex, colour, static_cast<int>(i)});
        }
    };
    push(red, 1);
    push(blue, 0);
    std::sort(mi.units.begin(), mi.units.end(), [](const Unit& a, const Unit& b) {
        if (a.angle != b.angle) return a.angle < b.angle;
        return a.tie < b.tie;
    });
    mi.n = mi.units.size();
    if (cyclic) mi.units.insert(mi.units.end(), mi.units.begin(), mi.units.end());
    return mi;
}

struct MatchState {
    const MatchInput* mi;
    const std::vector<uint8_t>* word;
    bool use_comps;
    std::vector<std::pair<int, int32_t>> chosen_red, chosen_blue;  // (comp, anchor vertex)
    int64_t nodes = 0;

    const Analysis* an_of(uint8_t colour) const { return colour ? mi->red : mi->blue; }
};

template <typename MR, typename MB>
bool verify_flows(MatchState& st, const MR& mr, const MB& mb, std::vector<int32_t>& scr_r,
                  std::vector<int32_t>& scr_b) {
    auto check = [&](const auto& medium, const Analysis* an, std::vector<std::pair<int, int32_t>> chosen,
                     std::vector<int32_t>& scratch) {
        std::sort(chosen.begin(), chosen.end());
        for (size_t i = 0; i < chosen.size();) {
            size_t j = i;
            while (j < chosen.size() && chosen[j].first == chosen[i].first) ++j;
            if (j - i >= 2) {
                std::vector<int32_t> anchors;
                for (size_t k = i; k < j; ++k) anchors.push_back(chosen[k].second);
                if (!comp_flow_feasible(medium, *an, chosen[i].first, anchors, scratch)) return false;
            }
            i = j;
        }
        return true;
    };
    if (st.mi->red && !check(mr, st.mi->red, st.chosen_red, scr_r)) return false;
    if (st.mi->blue && !check(mb, st.mi->blue, st.chosen_blue, scr_b)) return false;
    return true;
}

template <typename MR, typename MB>
bool match_slots(MatchState& st, size_t slot, size_t from, size_t limit, const MR& mr, const MB& mb,
                 std::vector<int32_t>& scr_r, std::vector<int32_t>& scr_b) {
    if (++st.nodes > 4'000'000) throw std::runtime_error("arm matcher: search budget exceeded");
    const auto& word = *st.word;
    if (slot == word.size()) return verify_flows(st, mr, mb, scr_r, scr_b);
    if (limit < from + (word.size() - slot)) return false;

    for (size_t p = from; p + (word.size() - slot - 1) < limit; ++p) {
        const Unit& u = st.mi->units[p];
        if (u.colour != word[slot]) continue;
        const Anchor& anc = st.an_of(u.colour)->anchors[u.anchor_idx];
        if (!st.use_comps) {
            if (!anc.global_live) continue;
            if (match_slots(st, slot + 1, p + 1, limit, mr, mb, scr_r, scr_b)) return true;
            continue;
        }
        for (const int cid : anc.comps) {
            auto& chosen = u.colour ? st.chosen_red : st.chosen_blue;
            chosen.push_back({cid, anc.vertex});
            if (match_slots(st, slot + 1, p + 1, limit, mr, mb, scr_r, scr_b)) return true;
            chosen.pop_back();
        }
    }
    return false;
}

// Cyclic event: slot 0 anchored at each unit in turn; the rest follow in
// angular order along the doubled unit list.
template <typename MR, typename MB>
bool match_cyclic(MatchState& st, const MR& mr, const MB& mb, std::vector<int32_t>& scr_r,
                  std::vector<int32_t>& scr_b) {
    const auto& word = *st.word;
    if (word.empty()) return true;
    for (size_t p0 = 0; p0 < st.mi->n; ++p0) {
        const Unit& u = st.mi->units[p0];
        if (u.colour != word[0]) continue;
        const Anchor& anc = st.an_of(u.colour)->anchors[u.anchor_idx];
        if (!st.use_comps) {
            if (!anc.global_live) continue;
            if (match_slots(st, 1, p0 + 1, p0 + st.mi->n, mr, mb, scr_r, scr_b)) return true;
            continue;
        }
        for (const int cid : anc.comps) {
            auto& chosen = u.colour ? st.chosen_red : st.chosen_blue;
            chosen.push_back({cid, anc.vertex});
            if (match_slots(st, 1, p0 + 1, p0 + st.mi->n, mr, mb, scr_r, scr_b)) return true;
            chosen.pop_back();
        }
    }
    return false;
}

// Single whole-plane arm of colour c: some box vertex's global cluster
// leaves Lambda_b (re-anchoring at the last box exit makes this exact).
bool single_arm_global(const ArmContext& ctx, uint8_t colour, double zx, double zy, double a, double b) {
    const ClusterSet& cs = colour ? ctx.red : ctx.blue;
    bool found = false;
    if (ctx.site != nullptr || colour == 1) {
        ctx.geom->for_box(zx - a, zx + a, zy - a, zy + a, [&](int32_t v) {
            if (found) return;
            const int32_t cid = cs.label_of(v);
            if (cid >= 0 && cs.exits_box(cid, zx, zy, b)) found = true;
        });
    } else {
        const DualGeometry& d = ctx.dual;
        const double eta = d.eta;
        const int xlo = std::max(d.xmin, static_cast<int>(std::floor((zx - a) / eta - 0.5 - 1e-9)));
        const int xhi = std::min(d.xmin + d.nx - 1, static_cast<int>(std::ceil((zx + a) / eta - 0.5 + 1e-9)));
        const int ylo = std::max(d.ymin, static_cast<int>(std::floor((zy - a) / eta - 0.5 - 1e-9)));
        const int yhi = std::min(d.ymin + d.ny - 1, static_cast<int>(std::ceil((zy + a) / eta - 0.5 + 1e-9)));
        for (int y = ylo; y <= yhi && !found; ++y)
            for (int x = xlo; x <= xhi && !found; ++x) {
                const int32_t v = d.id(x, y);
                if (v < 0 || linf(d.px(v), d.py(v), zx, zy) > a) continue;
                const int32_t cid = cs.label_of(v);
                if (cid >= 0 && cs.exits_box(cid, zx, zy, b)) found = true;
            }
    }
    return found;
}

template <typename MR, typename MB>
bool detect_with_media(const ArmContext& ctx, const ArmQuery& q, const MR& mr, const MB& mb) {
    const double step = mr.step();
    const double k = ctx.geom->k();
    if (q.zx - (q.b + 2 * step) < -k || q.zx + q.b + 2 * step > k || q.zy - (q.b + 2 * step) < -k ||
        q.zy + q.b + 2 * step > k)
        throw DomainError("detect_arms: Lambda_b(z) must sit two lattice steps inside the region");
    if (q.b - q.a < 2 * step) throw ParamError("detect_arms: annulus thinner than two lattice steps");

    std::vector<uint8_t> word = q.kappa.bits;
    word.insert(word.end(), q.kappa_hp.bits.begin(), q.kappa_hp.bits.end());

    std::vector<int32_t> scr_r(mr.size(), -1), scr_b(mb.size(), -1);

    // whole-plane factor on the concatenated word; when kappa is empty the
    // confined family realizes it, so only the half-plane factor decides
    bool free_ok;
    if (q.kappa.empty()) {
        free_ok = true;
    } else if (word.size() == 1) {
        free_ok = single_arm_global(ctx, word[0], q.zx, q.zy, q.a, q.b);
    } else {
        const Constraint none{};
        const bool need_red = std::find(word.begin(), word.end(), 1) != word.end();
        const bool need_blue = std::find(word.begin(), word.end(), 0) != word.end();
        Analysis ar, ab;
        if (need_red) ar = analyze(mr, q.zx, q.zy, q.a, q.b, none, &ctx.red, scr_r);
        if (need_blue) ab = analyze(mb, q.zx, q.zy, q.a, q.b, none, &ctx.blue, scr_b);
        MatchInput mi = merge_units(need_red ? &ar : nullptr, need_blue ? &ab : nullptr, 0.0, true);

        // global-liveness prefilter, then the exact comp/flow search
        MatchState pre{&mi, &word, false, {}, {}, 0};
        if (!match_cyclic(pre, mr, mb, scr_r, scr_b)) {
            free_ok = false;
        } else {
            MatchState full{&mi, &word, true, {}, {}, 0};
            free_ok = match_cyclic(full, mr, mb, scr_r, scr_b);
        }
    }
    if (!free_ok) return false;
    if (q.kappa_hp.empty()) return true;

    // half-plane factor: linear matching in the constrained medium
    const Constraint cons{q.side, q.zx, q.zy, q.a, step * (1 + 1e-9)};
    const auto& hp = q.kappa_hp.bits;
    const bool need_red = std::find(hp.begin(), hp.end(), 1) != hp.end();
    const bool need_blue = std::find(hp.begin(), hp.end(), 0) != hp.end();
    Analysis ar, ab;
    if (need_red) ar = analyze(mr, q.zx, q.zy, q.a, q.b, cons, &ctx.red, scr_r);
    if (need_blue) ab = analyze(mb, q.zx, q.zy, q.a, q.b, cons, &ctx.blue, scr_b);
    MatchInput mi = merge_units(need_red ? &ar : nullptr, need_blue ? &ab : nullptr, cons.cut_angle(), false);

    MatchState pre{&mi, &hp, false, {}, {}, 0};
    if (!match_slots(pre, 0, 0, mi.units.size(), mr, mb, scr_r, scr_b)) return false;
    MatchState full{&mi, &hp, true, {}, {}, 0};
    return match_slots(full, 0, 0, mi.units.size(), mr, mb, scr_r, scr_b);
}

}  // namespace

ArmContext make_arm_context(const SiteConfig& c) {
    ArmContext ctx;
    ctx.site = &c;
    ctx.geom = c.geom.get();
    ctx.red = find_clusters(c, Medium::Red);
    ctx.blue = find_clusters(c, Medium::Blue);
    return ctx;
}

ArmContext make_arm_context(const FkConfig& c) {
    ArmContext ctx;
    ctx.fk = &c;
    ctx.geom = c.geom.get();
    ctx.dual = c.dual();
    ctx.red = find_clusters(c);
    ctx.blue = find_dual_clusters(c);
    return ctx;
}

bool detect_arms(const ArmContext& ctx, const ArmQuery& q) {
    q.validate();
    if (ctx.site) {
        const SiteMedium mr{ctx.site, ctx.geom, true};
        const SiteMedium mb{ctx.site, ctx.geom, false};
        return detect_with_media(ctx, q, mr, mb);
    }
    const FkPrimalMedium mr{ctx.fk, ctx.geom};
    const FkDualMedium mb{ctx.fk, ctx.geom, &ctx.dual};
    return detect_with_media(ctx, q, mr, mb);
}

namespace {

// Anchor list with only the global-liveness flags (no window BFS).
template <typename M>
Analysis light_anchors(const M& m, double zx, double zy, double a, double b, const ClusterSet& global) {
    Analysis out;
    m.for_near(zx - a, zx + a, zy - a, zy + a, [&](int32_t v) {
        if (!m.on(v)) return;
        if (linf(m.px(v), m.py(v), zx, zy) > a) return;
        bool ring = false;
        m.geometric_neighbors(v, [&](int32_t u) {
            if (linf(m.px(u), m.py(u), zx, zy) > a) ring = true;
        });
        if (!ring) return;
        const int32_t gcid = global.label_of(v);
        if (gcid < 0 || !global.exits_box(gcid, zx, zy, b)) return;
        Anchor anc;
        anc.vertex = v;
        anc.angle = std::atan2(m.py(v) - zy, m.px(v) - zx);
        anc.global_live = true;
        out.anchors.push_back(std::move(anc));
    });
    std::sort(out.anchors.begin(), out.anchors.end(), [](const Anchor& p, const Anchor& q2) {
        if (p.angle != q2.angle) return p.angle < q2.angle;
        return p.vertex < q2.vertex;
    });
    return out;
}

template <typename MR, typename MB>
bool prefilter_with_media(const ArmContext& ctx, const ArmQuery& q, const MR& mr, const MB& mb) {
    std::vector<uint8_t> word = q.kappa.bits;
    word.insert(word.end(), q.kappa_hp.bits.begin(), q.kappa_hp.bits.end());
    if (word.size() == 1) return single_arm_global(ctx, word[0], q.zx, q.zy, q.a, q.b);

    const bool need_red = std::find(word.begin(), word.end(), 1) != word.end();
    const bool need_blue = std::find(word.begin(), word.end(), 0) != word.end();
    Analysis ar, ab;
    if (need_red) ar = light_anchors(mr, q.zx, q.zy, q.a, q.b, ctx.red);
    if (need_blue) ab = light_anchors(mb, q.zx, q.zy, q.a, q.b, ctx.blue);
    MatchInput mi = merge_units(need_red ? &ar : nullptr, need_blue ? &ab : nullptr, 0.0, true);
    std::vector<int32_t> scr_r, scr_b;  // untouched in prefilter mode
    MatchState pre{&mi, &word, false, {}, {}, 0};
    return match_cyclic(pre, mr, mb, scr_r, scr_b);
}

}  // namespace

bool arm_pattern_prefilter(const ArmContext& ctx, const ArmQuery& q) {
    q.validate();
    if (ctx.site) {
        const SiteMedium mr{ctx.site, ctx.geom, true};
        const SiteMedium mb{ctx.site, ctx.geom, false};
        return prefilter_with_media(ctx, q, mr, mb);
    }
    const FkPrimalMedium mr{ctx.fk, ctx.geom};
    const FkDualMedium mb{ctx.fk, ctx.geom, &ctx.dual};
    return prefilter_with_media(ctx, q, mr, mb);
}

bool detect_arms(const SiteConfig& c, const ArmQuery& q) {
    const ArmContext ctx = make_arm_context(c);
    return detect_arms(ctx, q);
}

bool detect_arms(const FkConfig& c, const ArmQuery& q) {
    const ArmContext ctx = make_arm_context(c);
    return detect_arms(ctx, q);
}

ArmEstimate arm_probability(const MeshSpec& spec, const ArmQuery& q, int64_t n_samples, const FkRunParams& fk) {
    if (n_samples < 1) throw ParamError("arm_probability: n_samples must be >= 1");
    q.validate();
    ArmEstimate est;
    est.query = q;
    est.trials = n_samples;

    if (spec.kind == LatticeKind::TriangularSite) {
        MeshSpec s = spec;
        for (int64_t i = 0; i < n_samples; ++i) {
            s.sample_index = spec.sample_index + i;
            const SiteConfig c = sample_bernoulli(s);
            const ArmContext ctx = make_arm_context(c);
            if (detect_arms(ctx, q)) ++est.hits;
        }
    } else {
        std::vector<std::unique_ptr<FkChain>> chains;
        for (int s = 0; s < fk.n_streams; ++s)
            chains.push_back(std::make_unique<FkChain>(spec, static_cast<uint32_t>(s), fk.burn_in, fk.gap));
        for (int64_t i = 0; i < n_samples; ++i) {
            const int s = static_cast<int>(i % fk.n_streams);
            const FkConfig c = chains[s]->sample(static_cast<uint64_t>(i / fk.n_streams), spec.sample_index + i);
            const ArmContext ctx = make_arm_context(c);
            if (detect_arms(ctx, q)) ++est.hits;
        }
    }
    est.p_hat = static_cast<double>(est.hits) / static_cast<double>(est.trials);
    est.ci_halfwidth = wilson_halfwidth(est.hits, est.trials);
    return est;
}

double quasi_mult_ratio(const MeshSpec& spec, double a, double b, double c, int64_t n_samples,
                        const FkRunParams& fk) {
    if (!(spec.eta < a) || !(a <= b) || !(b <= c)) throw ParamError("quasi_mult_ratio: need eta < a <= b <= c");
    if (n_samples < 1) throw ParamError("quasi_mult_ratio: n_samples must be >= 1");
    if (a == b || b == c) return 1.0;  // collapsed middle scale, pi(x,x) = 1

    int64_t h_ab = 0, h_bc = 0, h_ac = 0;
    auto tally = [&](const ArmContext& ctx) {
        if (single_arm_global(ctx, 1, 0, 0, a, b)) ++h_ab;
        if (single_arm_global(ctx, 1, 0, 0, b, c)) ++h_bc;
        if (single_arm_global(ctx, 1, 0, 0, a, c)) ++h_ac;
    };

    if (spec.kind == LatticeKind::TriangularSite) {
        MeshSpec s = spec;
        for (int64_t i = 0; i < n_samples; ++i) {
            s.sample_index = spec.sample_index + i;
            const SiteConfig cfg = sample_bernoulli(s);
            tally(make_arm_context(cfg));
        }
    } else {
        std::vector<std::unique_ptr<FkChain>> chains;
        for (int s = 0; s < fk.n_streams; ++s)
            chains.push_back(std::make_unique<FkChain>(spec, static_cast<uint32_t>(s), fk.burn_in, fk.gap));
        for (int64_t i = 0; i < n_samples; ++i) {
            const int s = static_cast<int>(i % fk.n_streams);
            const FkConfig cfg = chains[s]->sample(static_cast<uint64_t>(i / fk.n_streams), spec.sample_index + i);
            tally(make_arm_context(cfg));
        }
    }
    if (h_ac == 0) return std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(n_samples);
    return (static_cast<double>(h_ab) / n) * (static_cast<double>(h_bc) / n) / (static_cast<double>(h_ac) / n);
}

int64_t count_connected_vertices(const ArmContext& ctx, double a) {
    if (a + ctx.geom->eta() > ctx.geom->k()) throw DomainError("count_connected_vertices: Lambda_a escapes the region");
    int64_t n = 0;
    ctx.geom->for_box(-a / 2, a / 2, -a / 2, a / 2, [&](int32_t v) {
        const int32_t cid = ctx.red.label_of(v);
        if (cid >= 0 && ctx.red.exits_box(cid, 0, 0, a)) ++n;
    });
    return n;
}

int64_t count_local_arm_vertices(const ArmContext& ctx, double a) {
    if (!(a < 0.5)) throw ParamError("count_local_arm_vertices: a must be < 1/2");
    if (1 + a + ctx.geom->eta() > ctx.geom->k())
        throw DomainError("count_local_arm_vertices: Lambda_{1+a} escapes the region");
    int64_t n = 0;
    ctx.geom->for_box(-1, 1, -1, 1, [&](int32_t v) {
        const int32_t cid = ctx.red.label_of(v);
        if (cid >= 0 && ctx.red.exits_box(cid, ctx.geom->px(v), ctx.geom->py(v), a)) ++n;
    });
    return n;
}

std::string arm_estimates_csv(const std::vector<ArmEstimate>& rows, const MeshSpec& spec) {
    std::ostringstream os;
    os << "kind,eta,zx,zy,a,b,kappa,kappa_hp,side,hits,trials,p_hat,ci\n";
    os.precision(17);
    for (const auto& r : rows) {
        os << kind_name(spec.kind) << ',' << spec.eta << ',' << r.query.zx << ',' << r.query.zy << ',' << r.query.a
           << ',' << r.query.b << ',' << r.query.kappa.str() << ',' << r.query.kappa_hp.str() << ',' << r.query.side
           << ',' << r.hits << ',' << r.trials << ',' << r.p_hat << ',' << r.ci_halfwidth << '\n';
    }
    return os.str();
}

}  // namespace perc
