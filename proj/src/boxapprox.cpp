#include "perc/boxapprox.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace perc {

namespace {

bool sorted_intersect(const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return true;
        if (a[i] < b[j])
            ++i;
        else
            ++j;
    }
    return false;
}

}  // namespace

bool BoxGraph::red_connected(int32_t b1, int32_t b2) const {
    return b1 != b2 && sorted_intersect(clusters_[b1], clusters_[b2]);
}

BoxGraph build_box_graph(const SiteConfig& c, const ClusterSet& red, double eps) {
    const auto& g = *c.geom;
    // eta < eps is the regime of the probability bounds; the graph itself is
    // well defined for sub-mesh boxes too, which the acceptance grid uses.
    if (g.k() < 1 + 2 * eps) throw ParamError("build_box_graph: region must contain Lambda_{1+2eps}");

    BoxGraph bg;
    bg.eps_ = eps;
    bg.zmax_ = static_cast<int>(std::ceil(1.0 / eps - 1e-9));
    bg.clusters_.assign(bg.box_count(), {});

    // One vertex pass; a red vertex registers its cluster with every closed
    // box containing it (several on shared box boundaries).
    const double reach = eps * (bg.zmax_ + 0.5);
    g.for_box(-reach, reach, -reach, reach, [&](int32_t v) {
        const int32_t cid = red.label_of(v);
        if (cid < 0) return;
        const double px = g.px(v), py = g.py(v);
        const int zx0 = static_cast<int>(std::floor(px / eps - 0.5)) - 1;
        const int zy0 = static_cast<int>(std::floor(py / eps - 0.5)) - 1;
        for (int zx = zx0; zx <= zx0 + 3; ++zx) {
            if (std::abs(px - eps * zx) > eps / 2) continue;
            for (int zy = zy0; zy <= zy0 + 3; ++zy) {
                if (std::abs(py - eps * zy) > eps / 2) continue;
                const int32_t b = bg.box_id(zx, zy);
                if (b >= 0) bg.clusters_[b].push_back(cid);
            }
        }
    });
    for (auto& list : bg.clusters_) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return bg;
}

std::vector<std::pair<int, int>> k_eps_boxes(const std::vector<double>& xs, const std::vector<double>& ys,
                                             double eps) {
    std::set<std::pair<int, int>> out;
    for (size_t i = 0; i < xs.size(); ++i) {
        const int zx0 = static_cast<int>(std::floor(xs[i] / eps - 0.5)) - 1;
        const int zy0 = static_cast<int>(std::floor(ys[i] / eps - 0.5)) - 1;
        for (int zx = zx0; zx <= zx0 + 3; ++zx) {
            if (std::abs(xs[i] - eps * zx) > eps / 2) continue;
            for (int zy = zy0; zy <= zy0 + 3; ++zy) {
                if (std::abs(ys[i] - eps * zy) > eps / 2) continue;
                out.insert({zx, zy});
            }
        }
    }
    return {out.begin(), out.end()};
}

// --- good subgraphs --------------------------------------------------------------

namespace {

struct StripQuery {
    bool vertical;  // true: strip bounds x (SV); false: bounds y (SH)
    double lo, hi;  // dilated strip bounds
    Box from, to;
};

// An endpoint touches a box if it lies inside or is lattice-adjacent to a
// vertex inside (the box may contain no vertex of the path's colour).
bool touches(const LatticeGeometry& g, int32_t v, const Box& box) {
    if (box.contains(g.px(v), g.py(v))) return true;
    for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u)
        if (box.contains(g.px(*u), g.py(*u))) return true;
    return false;
}

bool in_strip(const LatticeGeometry& g, int32_t v, const StripQuery& q) {
    const double c = q.vertical ? g.px(v) : g.py(v);
    return c >= q.lo && c <= q.hi;
}

bool strip_reach(const SiteConfig& cfg, bool want_red, const StripQuery& q, std::vector<int32_t>& scratch,
                 std::vector<int32_t>& touched) {
    const auto& g = *cfg.geom;
    std::vector<int32_t> stack;
    bool found = false;
    touched.clear();
    g.for_box(q.from.x0 - g.eta(), q.from.x1 + g.eta(), q.from.y0 - g.eta(), q.from.y1 + g.eta(), [&](int32_t v) {
        if (cfg.is_red(v) != want_red || !in_strip(g, v, q) || !touches(g, v, q.from)) return;
        if (scratch[v] == 0) {
            scratch[v] = 1;
            touched.push_back(v);
            stack.push_back(v);
        }
    });
    while (!stack.empty() && !found) {
        const int32_t v = stack.back();
        stack.pop_back();
        if (touches(g, v, q.to)) {
            found = true;
            break;
        }
        for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) {
            if (scratch[*u] || cfg.is_red(*u) != want_red || !in_strip(g, *u, q)) continue;
            scratch[*u] = 1;
            touched.push_back(*u);
            stack.push_back(*u);
        }
    }
    for (int32_t v : touched) scratch[v] = 0;
    return found;
}

// Two vertex-disjoint paths of the given colour between the boxes, inside
// the strip: unit-vertex-capacity flow >= 2.
bool strip_two_disjoint(const SiteConfig& cfg, bool want_red, const StripQuery& q, std::vector<int32_t>& scratch,
                        std::vector<int32_t>& touched) {
    const auto& g = *cfg.geom;
    std::vector<int32_t> verts;
    touched.clear();
    const double x0 = q.vertical ? q.lo : -g.k(), x1 = q.vertical ? q.hi : g.k();
    const double y0 = q.vertical ? -g.k() : q.lo, y1 = q.vertical ? g.k() : q.hi;
    g.for_box(x0, x1, y0, y1, [&](int32_t v) {
        if (cfg.is_red(v) != want_red) return;
        scratch[v] = static_cast<int32_t>(verts.size()) + 1;  // 1-based
        verts.push_back(v);
        touched.push_back(v);
    });

    const int n = static_cast<int>(verts.size());
    struct E {
        int to, rev, cap;
    };
    std::vector<std::vector<E>> adj(2 * static_cast<size_t>(n) + 2);
    const int S = 2 * n, T = 2 * n + 1;
    auto add_edge = [&](int a, int b, int cap) {
        adj[a].push_back({b, static_cast<int>(adj[b].size()), cap});
        adj[b].push_back({a, static_cast<int>(adj[a].size()) - 1, 0});
    };
    for (int i = 0; i < n; ++i) {
        const int32_t v = verts[i];
        add_edge(2 * i, 2 * i + 1, 1);
        if (touches(g, v, q.from)) add_edge(S, 2 * i, 1);
        if (touches(g, v, q.to)) add_edge(2 * i + 1, T, 1);
        for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) {
            const int32_t j = scratch[*u] - 1;
            if (j >= 0) add_edge(2 * i + 1, 2 * static_cast<int>(j), 1);
        }
    }

    int flow = 0;
    std::vector<int> par_node(adj.size()), par_edge(adj.size());
    while (flow < 2) {
        std::fill(par_node.begin(), par_node.end(), -1);
        std::vector<int> bfsq{S};
        par_node[S] = S;
        bool found = false;
        for (size_t h = 0; h < bfsq.size() && !found; ++h) {
            const int v = bfsq[h];
            for (size_t ei = 0; ei < adj[v].size(); ++ei) {
                const auto& e = adj[v][ei];
                if (e.cap > 0 && par_node[e.to] < 0) {
                    par_node[e.to] = v;
                    par_edge[e.to] = static_cast<int>(ei);
                    if (e.to == T) {
                        found = true;
                        break;
                    }
                    bfsq.push_back(e.to);
                }
            }
        }
        if (!found) break;
        for (int v2 = T; v2 != S;) {
            const int pv = par_node[v2], pe = par_edge[v2];
            adj[pv][pe].cap -= 1;
            adj[adj[pv][pe].to][adj[pv][pe].rev].cap += 1;
            v2 = pv;
        }
        ++flow;
    }
    for (int32_t v : touched) scratch[v] = 0;
    return flow >= 2;
}

std::vector<int32_t> adjacent_to_all(const BoxGraph& bg, const std::vector<std::vector<int32_t>>& cluster_boxes,
                                     const std::vector<int32_t>& H);

struct GoodChecker {
    const SiteConfig* cfg;
    const BoxGraph* bg;
    double delta;
    std::vector<int32_t> scratch;
    std::vector<int32_t> touched;

    // geometry (2, 4) and strip connections (5); completeness and
    // maximality are handled by the callers
    bool geometry_and_strips(const std::vector<int32_t>& boxes) {
        const auto& g = *cfg->geom;
        const double eps = bg->eps();
        double minx = 1e18, maxx = -1e18, miny = 1e18, maxy = -1e18;
        for (int32_t b : boxes) {
            minx = std::min(minx, bg->cx_of(b));
            maxx = std::max(maxx, bg->cx_of(b));
            miny = std::min(miny, bg->cy_of(b));
            maxy = std::max(maxy, bg->cy_of(b));
        }
        if (minx - eps / 2 < -1 - 1e-12 || maxx + eps / 2 > 1 + 1e-12 || miny - eps / 2 < -1 - 1e-12 ||
            maxy + eps / 2 > 1 + 1e-12)
            return false;
        if (std::max(maxx - minx, maxy - miny) + eps < delta) return false;

        std::vector<int32_t> L, R, T, B;
        for (int32_t b : boxes) {
            if (bg->cx_of(b) == minx) L.push_back(b);
            if (bg->cx_of(b) == maxx) R.push_back(b);
            if (bg->cy_of(b) == maxy) T.push_back(b);
            if (bg->cy_of(b) == miny) B.push_back(b);
        }
        const double slack = g.eta() * (1 + 1e-9);
        auto box_of = [&](int32_t b) { return Box::centered(bg->cx_of(b), bg->cy_of(b), eps / 2); };
        for (int32_t l : L)
            for (int32_t r : R) {
                StripQuery q{true, minx - eps / 2 - slack, maxx + eps / 2 + slack, box_of(l), box_of(r)};
                if (!strip_reach(*cfg, true, q, scratch, touched)) return false;
                if (!strip_two_disjoint(*cfg, false, q, scratch, touched)) return false;
            }
        for (int32_t t : T)
            for (int32_t b2 : B) {
                StripQuery q{false, miny - eps / 2 - slack, maxy + eps / 2 + slack, box_of(t), box_of(b2)};
                if (!strip_reach(*cfg, true, q, scratch, touched)) return false;
                if (!strip_two_disjoint(*cfg, false, q, scratch, touched)) return false;
            }
        return true;
    }

    // for candidates complete by construction: maximality via the inverted
    // index, then geometry and strips
    bool is_good_fast(const std::vector<int32_t>& boxes, const std::vector<std::vector<int32_t>>& cluster_boxes) {
        if (!adjacent_to_all(*bg, cluster_boxes, boxes).empty()) return false;
        return geometry_and_strips(boxes);
    }

    // literal conditions 1-5 for arbitrary input (test oracle path)
    bool is_good(const std::vector<int32_t>& boxes) {
        for (size_t i = 0; i < boxes.size(); ++i)
            for (size_t j = i + 1; j < boxes.size(); ++j)
                if (!bg->adjacent(boxes[i], boxes[j])) return false;
        std::vector<char> inset(bg->box_count(), 0);
        for (int32_t b : boxes) inset[b] = 1;
        for (int32_t b = 0; b < bg->box_count(); ++b) {
            if (inset[b]) continue;
            bool all = true;
            for (int32_t h : boxes)
                if (!bg->adjacent(b, h)) {
                    all = false;
                    break;
                }
            if (all) return false;
        }
        return geometry_and_strips(boxes);
    }
};

void bron_kerbosch(const BoxGraph& bg, std::vector<int32_t>& R, std::vector<int32_t> P, std::vector<int32_t> X,
                   std::vector<std::vector<int32_t>>& out, int64_t& budget) {
    if (--budget < 0) throw std::runtime_error("good_subgraphs: clique search budget exceeded");
    if (P.empty() && X.empty()) {
        out.push_back(R);
        return;
    }
    int32_t pivot = -1;
    size_t best = 0;
    for (const auto* set : {&P, &X})
        for (int32_t u : *set) {
            size_t cnt = 0;
            for (int32_t v : P) cnt += bg.adjacent(u, v);
            if (pivot < 0 || cnt > best) {
                pivot = u;
                best = cnt;
            }
        }
    std::vector<int32_t> cands;
    for (int32_t v : P)
        if (!bg.adjacent(pivot, v)) cands.push_back(v);
    for (int32_t v : cands) {
        std::vector<int32_t> P2, X2;
        for (int32_t u : P)
            if (bg.adjacent(v, u)) P2.push_back(u);
        for (int32_t u : X)
            if (bg.adjacent(v, u)) X2.push_back(u);
        R.push_back(v);
        bron_kerbosch(bg, R, std::move(P2), std::move(X2), out, budget);
        R.pop_back();
        P.erase(std::find(P.begin(), P.end(), v));
        X.push_back(v);
    }
}

}  // namespace

namespace {

// Boxes of the graph adjacent to every member of H (H sorted). Candidates
// come from the common neighbors of an extremal pair: any such box is
// adjacent to both, and the neighbor sets are grid neighbors plus boxes of
// shared clusters (via the inverted cluster -> boxes index).
std::vector<int32_t> adjacent_to_all(const BoxGraph& bg, const std::vector<std::vector<int32_t>>& cluster_boxes,
                                     const std::vector<int32_t>& H) {
    auto neighbors_of = [&](int32_t b) {
        std::vector<int32_t> out;
        const int zx = bg.zx_of(b), zy = bg.zy_of(b);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
                if (dx == 0 && dy == 0) continue;
                const int32_t nb = bg.box_id(zx + dx, zy + dy);
                if (nb >= 0) out.push_back(nb);
            }
        for (int32_t cid : bg.clusters_of(b))
            out.insert(out.end(), cluster_boxes[cid].begin(), cluster_boxes[cid].end());
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };

    // extremal pair: the boxes realizing the larger axis spread
    int32_t xlo = H.front(), xhi = H.front(), ylo = H.front(), yhi = H.front();
    for (int32_t b : H) {
        if (bg.cx_of(b) < bg.cx_of(xlo)) xlo = b;
        if (bg.cx_of(b) > bg.cx_of(xhi)) xhi = b;
        if (bg.cy_of(b) < bg.cy_of(ylo)) ylo = b;
        if (bg.cy_of(b) > bg.cy_of(yhi)) yhi = b;
    }
    const bool use_x = (bg.cx_of(xhi) - bg.cx_of(xlo)) >= (bg.cy_of(yhi) - bg.cy_of(ylo));
    const int32_t b_lo = use_x ? xlo : ylo, b_hi = use_x ? xhi : yhi;
    std::vector<int32_t> n1 = neighbors_of(b_lo), n2 = neighbors_of(b_hi), cand;
    std::set_intersection(n1.begin(), n1.end(), n2.begin(), n2.end(), std::back_inserter(cand));

    std::vector<int32_t> out;
    for (int32_t b : cand) {
        if (std::binary_search(H.begin(), H.end(), b)) continue;
        bool all = true;
        for (int32_t h : H)
            if (!bg.adjacent(b, h)) {
                all = false;
                break;
            }
        if (all) out.push_back(b);
    }
    return out;
}

}  // namespace

std::vector<GoodSubgraph> good_subgraphs(const SiteConfig& c, const ClusterSet& red, const BoxGraph& bg,
                                         double delta) {
    if (!(10 * bg.eps() < delta) || !(delta < 1)) throw ParamError("good_subgraphs: requires 10 eps < delta < 1");
    const auto& g = *c.geom;
    const double eps = bg.eps();

    // inverted index: cluster id -> boxes meeting it
    std::vector<std::vector<int32_t>> cluster_boxes(red.n_clusters());
    for (int32_t b = 0; b < bg.box_count(); ++b)
        for (int32_t cid : bg.clusters_of(b)) cluster_boxes[cid].push_back(b);

    // Seeds: K_eps(C) of every cluster that could span delta (complete by
    // construction: its boxes share C), extended by the maximal cliques of
    // the common-neighbor set.
    auto lists = red.all_vertex_lists();
    std::set<std::vector<int32_t>> candidates;
    int64_t budget = 2'000'000;

    for (int32_t cid = 0; cid < red.n_clusters(); ++cid) {
        if (red.diameter(cid) < delta - 3 * eps) continue;
        std::vector<double> xs, ys;
        xs.reserve(lists[cid].size());
        ys.reserve(lists[cid].size());
        for (int32_t v : lists[cid]) {
            xs.push_back(g.px(v));
            ys.push_back(g.py(v));
        }
        std::vector<int32_t> base;
        bool escapes = false;
        for (auto [zx, zy] : k_eps_boxes(xs, ys, eps)) {
            const int32_t b = bg.box_id(zx, zy);
            if (b < 0) {
                escapes = true;
                break;
            }
            base.push_back(b);
        }
        if (escapes || base.empty()) continue;  // not a subgraph of G_eps
        std::sort(base.begin(), base.end());

        const std::vector<int32_t> ext = adjacent_to_all(bg, cluster_boxes, base);
        if (ext.empty()) {
            candidates.insert(base);
            continue;
        }
        std::vector<std::vector<int32_t>> cliques;
        std::vector<int32_t> R;
        bron_kerbosch(bg, R, ext, {}, cliques, budget);
        for (auto& cl : cliques) {
            std::vector<int32_t> cand = base;
            cand.insert(cand.end(), cl.begin(), cl.end());
            std::sort(cand.begin(), cand.end());
            candidates.insert(std::move(cand));
        }
    }

    GoodChecker checker{&c, &bg, delta, std::vector<int32_t>(g.size(), 0), {}};
    std::vector<GoodSubgraph> out;
    for (const auto& cand : candidates) {
        if (!checker.is_good_fast(cand, cluster_boxes)) continue;
        GoodSubgraph gs;
        gs.boxes = cand;
        double minx = 1e18, maxx = -1e18, miny = 1e18, maxy = -1e18;
        for (int32_t b : cand) {
            minx = std::min(minx, bg.cx_of(b));
            maxx = std::max(maxx, bg.cx_of(b));
            miny = std::min(miny, bg.cy_of(b));
            maxy = std::max(maxy, bg.cy_of(b));
        }
        gs.diam_u = std::max(maxx - minx, maxy - miny) + eps;
        out.push_back(std::move(gs));
    }
    std::sort(out.begin(), out.end(),
              [](const GoodSubgraph& a, const GoodSubgraph& b) { return a.boxes.front() < b.boxes.front(); });
    return out;
}

// --- events NC / NA ------------------------------------------------------------------

namespace {

// Incremental union-find over the growing half-plane; per-root integer
// bboxes answer confined-reach queries.
struct SweepUf {
    const LatticeGeometry* g;
    std::vector<int32_t> parent;
    std::vector<uint8_t> added;
    std::vector<int> amin, amax, wmin, wmax;

    explicit SweepUf(const LatticeGeometry& geom)
        : g(&geom),
          parent(geom.size()),
          added(geom.size(), 0),
          amin(geom.size()),
          amax(geom.size()),
          wmin(geom.size()),
          wmax(geom.size()) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    int32_t find(int32_t v) {
        int32_t r = v;
        while (parent[r] != r) r = parent[r];
        while (parent[v] != r) {
            const int32_t nxt = parent[v];
            parent[v] = r;
            v = nxt;
        }
        return r;
    }

    void add(int32_t v, const SiteConfig& cfg) {
        added[v] = 1;
        amin[v] = amax[v] = g->a_of(v);
        wmin[v] = wmax[v] = g->w_of(v);
        const bool red_v = cfg.is_red(v);
        for (const int32_t* u = g->nbr_begin(v); u != g->nbr_end(v); ++u) {
            if (!added[*u] || cfg.is_red(*u) != red_v) continue;
            const int32_t ru = find(*u), rv = find(v);
            if (ru == rv) continue;
            parent[ru] = rv;
            amin[rv] = std::min(amin[rv], amin[ru]);
            amax[rv] = std::max(amax[rv], amax[ru]);
            wmin[rv] = std::min(wmin[rv], wmin[ru]);
            wmax[rv] = std::max(wmax[rv], wmax[ru]);
        }
    }

    bool root_exits(int32_t v, double zx, double zy, double rho) {
        const int32_t r = find(v);
        const double eta = g->eta(), dy = g->row_dy();
        return 0.5 * eta * amax[r] >= zx + rho || 0.5 * eta * amin[r] <= zx - rho || dy * wmax[r] >= zy + rho ||
               dy * wmin[r] <= zy - rho;
    }
};

// Sweep gate: a cheap superset of the half-plane (010) event per (center,
// side). True event => gate true: the exact arms live inside confined
// clusters whose sweep components reach at least as far.
std::vector<std::array<uint8_t, 5>> hp_sweep_flags(const SiteConfig& cfg, double eps, double rho, int zmax) {
    const auto& g = *cfg.geom;
    const int side_len = 2 * zmax + 1;
    std::vector<std::array<uint8_t, 5>> flags(static_cast<size_t>(side_len) * side_len, {0, 0, 0, 0, 0});
    const double slack = g.eta() * (1 + 1e-9);

    std::vector<int32_t> by_x(g.size()), by_y(g.size());
    std::iota(by_x.begin(), by_x.end(), 0);
    std::iota(by_y.begin(), by_y.end(), 0);
    std::sort(by_x.begin(), by_x.end(), [&](int32_t a, int32_t b) { return g.a_of(a) < g.a_of(b); });
    std::sort(by_y.begin(), by_y.end(), [&](int32_t a, int32_t b) { return g.w_of(a) < g.w_of(b); });

    for (int j = 1; j <= 4; ++j) {
        SweepUf uf(g);
        const bool x_sweep = (j == 1 || j == 3);
        const bool ascending = (j == 1 || j == 2);
        const auto& order = x_sweep ? by_x : by_y;
        size_t pos = ascending ? 0 : order.size();

        std::vector<int> cols(side_len);
        std::iota(cols.begin(), cols.end(), -zmax);
        if (!ascending) std::reverse(cols.begin(), cols.end());

        const double cut = (j == 1) ? 0.0 : (j == 2) ? M_PI / 2 : (j == 3) ? M_PI : -M_PI / 2;

        for (const int zc : cols) {
            const double line = eps * zc + (ascending ? 1.0 : -1.0) * (eps / 2 + slack);
            auto within = [&](int32_t v) {
                const double coord = x_sweep ? g.px(v) : g.py(v);
                return ascending ? coord <= line : coord >= line;
            };
            if (ascending)
                while (pos < order.size() && within(order[pos])) uf.add(order[pos++], cfg);
            else
                while (pos > 0 && within(order[pos - 1])) uf.add(order[--pos], cfg);

            for (int zo = -zmax; zo <= zmax; ++zo) {
                const int zx = x_sweep ? zc : zo;
                const int zy = x_sweep ? zo : zc;
                const double cx = eps * zx, cy = eps * zy;

                struct P {
                    double key;
                    int32_t id;
                    uint8_t colour;
                };
                std::vector<P> ports;
                g.for_box(cx - eps / 2, cx + eps / 2, cy - eps / 2, cy + eps / 2, [&](int32_t v) {
                    if (linf(g.px(v), g.py(v), cx, cy) > eps / 2) return;
                    bool ring = false;
                    for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u)
                        if (linf(g.px(*u), g.py(*u), cx, cy) > eps / 2) ring = true;
                    if (!ring) return;
                    bool live = false;
                    for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) {
                        if (linf(g.px(*u), g.py(*u), cx, cy) <= eps / 2) continue;
                        if (cfg.is_red(*u) != cfg.is_red(v) || !uf.added[*u]) continue;
                        if (uf.root_exits(*u, cx, cy, rho)) {
                            live = true;
                            break;
                        }
                    }
                    if (!live) return;
                    double th = std::atan2(g.py(v) - cy, g.px(v) - cx) - cut;
                    while (th < 0) th += 2 * M_PI;
                    while (th >= 2 * M_PI) th -= 2 * M_PI;
                    ports.push_back({th, v, static_cast<uint8_t>(cfg.is_red(v) ? 1 : 0)});
                });
                std::sort(ports.begin(), ports.end(), [](const P& a, const P& b) {
                    if (a.key != b.key) return a.key < b.key;
                    return a.id < b.id;
                });
                int stage = 0;
                for (const P& p : ports) {
                    if (stage == 0 && p.colour == 0)
                        stage = 1;
                    else if (stage == 1 && p.colour == 1)
                        stage = 2;
                    else if (stage == 2 && p.colour == 0) {
                        stage = 3;
                        break;
                    }
                }
                if (stage == 3) flags[static_cast<size_t>(zy + zmax) * side_len + (zx + zmax)][j] = 1;
            }
        }
    }
    return flags;
}

}  // namespace

namespace {

// Lazy exact half-plane (010) flags over (center, side), sweep-gated.
struct HpFlagCache {
    const ArmContext* ctx;
    double eps, rho;
    int zmax, side_len;
    std::vector<std::array<uint8_t, 5>> gate;   // empty = ungated
    std::vector<std::array<int8_t, 5>> memo;    // -1 unknown, else 0/1

    HpFlagCache(const ArmContext& c, double e, double r, int zm) : ctx(&c), eps(e), rho(r), zmax(zm) {
        side_len = 2 * zmax + 1;
        memo.assign(static_cast<size_t>(side_len) * side_len, {-1, -1, -1, -1, -1});
        if (ctx->site && ctx->geom->eta() < eps) gate = hp_sweep_flags(*ctx->site, eps, rho, zmax);
    }

    size_t idx(int zx, int zy) const { return static_cast<size_t>(zy + zmax) * side_len + (zx + zmax); }

    bool flag(int zx, int zy, int j) {
        int8_t& m = memo[idx(zx, zy)][j];
        if (m >= 0) return m != 0;
        bool value = false;
        if (gate.empty() || gate[idx(zx, zy)][j]) {
            ArmQuery q;
            q.zx = eps * zx;
            q.zy = eps * zy;
            q.a = eps / 2;
            q.b = rho;
            q.kappa_hp = ColourSequence::parse("010");
            q.side = j;
            if (arm_pattern_prefilter(*ctx, q)) value = detect_arms(*ctx, q);
        }
        m = value ? 1 : 0;
        return value;
    }
};

}  // namespace

ApproxEvents detect_events(const ArmContext& ctx, double eps, double delta, EventDetail detail) {
    if (!(10 * eps < delta) || !(delta < 1)) throw ParamError("detect_events: requires 10 eps < delta < 1");
    const auto& g = *ctx.geom;
    const int zmax = static_cast<int>(std::ceil(1.0 / eps - 1e-9));
    const double rho = delta / 2 - 3 * eps;
    if (g.k() < eps * zmax + rho + 2 * g.eta())
        throw ParamError("detect_events: region too small for the event annuli");

    HpFlagCache hp(ctx, eps, rho, zmax);
    ApproxEvents ev;
    const bool full = (detail == EventDetail::kFull);

    // NA2 first: boxes within eps of the boundary of Lambda_1.
    ev.na2 = true;
    for (int zx = -zmax; zx <= zmax && (full || ev.na2); ++zx)
        for (int zy = -zmax; zy <= zmax && (full || ev.na2); ++zy) {
            const double d1 = std::max(0.0, 1.0 - (std::abs(eps * zx) + eps / 2));
            const double d2 = std::max(0.0, 1.0 - (std::abs(eps * zy) + eps / 2));
            if (std::min(d1, d2) > eps) continue;
            for (int j = 1; j <= 4; ++j)
                if (hp.flag(zx, zy, j)) {
                    ev.na2 = false;
                    break;
                }
        }

    // NA1: a free red arm on top of a confined triple, anywhere.
    ev.na1 = true;
    for (int zx = -zmax; zx <= zmax && (full || ev.na1); ++zx)
        for (int zy = -zmax; zy <= zmax && (full || ev.na1); ++zy)
            for (int j = 1; j <= 4 && (full || ev.na1); ++j) {
                if (!hp.flag(zx, zy, j)) continue;
                ArmQuery q;
                q.zx = eps * zx;
                q.zy = eps * zy;
                q.a = eps / 2;
                q.b = rho;
                q.kappa = ColourSequence::parse("1");
                q.kappa_hp = ColourSequence::parse("010");
                q.side = j;
                if (arm_pattern_prefilter(ctx, q) && detect_arms(ctx, q)) ev.na1 = false;
            }

    // NC: opposite-side pairs at center distance within (delta -+ 3 eps).
    if (!full && !ev.na()) {
        ev.nc_known = false;
        return ev;
    }
    ev.nc = true;
    std::vector<std::pair<int, int>> flagged;
    for (int zx = -zmax; zx <= zmax && (full || ev.nc); ++zx)
        for (int zy = -zmax; zy <= zmax && (full || ev.nc); ++zy) {
            bool any = false;
            std::array<bool, 5> f{};
            for (int j = 1; j <= 4; ++j) {
                f[j] = hp.flag(zx, zy, j);
                any = any || f[j];
            }
            if (!any) continue;
            for (const auto& [ox, oy] : flagged) {
                for (int dir = 1; dir <= 2; ++dir) {
                    const double d = (dir == 1) ? std::abs(eps * (zx - ox)) : std::abs(eps * (zy - oy));
                    if (!(d > delta - 3 * eps && d < delta + 3 * eps)) continue;
                    if ((f[dir] && hp.flag(ox, oy, dir + 2)) || (f[dir + 2] && hp.flag(ox, oy, dir))) {
                        ev.nc = false;
                        break;
                    }
                }
                if (!ev.nc) break;
            }
            flagged.push_back({zx, zy});
        }
    return ev;
}

CorrespondenceReport verify_correspondence(const SiteConfig& c, const ArmContext& ctx, double eps, double delta) {
    CorrespondenceReport rep;
    rep.events = detect_events(ctx, eps, delta);
    if (!rep.events.e()) {
        rep.skipped = true;
        return rep;
    }

    const BoxGraph bg = build_box_graph(c, ctx.red, eps);
    const Box lambda1 = Box::centered(0, 0, 1.0);
    auto coll = clusters_in_domain(ctx.red, lambda1, delta);
    rep.n_clusters = static_cast<int>(coll.members.size());

    auto lists = ctx.red.all_vertex_lists();
    auto boxes_of_cluster = [&](int32_t cid) {
        std::vector<double> xs, ys;
        for (int32_t v : lists[cid]) {
            xs.push_back(c.geom->px(v));
            ys.push_back(c.geom->py(v));
        }
        return k_eps_boxes(xs, ys, eps);
    };

    auto goods = good_subgraphs(c, ctx.red, bg, delta);
    rep.n_good = static_cast<int>(goods.size());

    // hard invariants on NA / NC
    rep.lemma49_ok = static_cast<double>(goods.size()) <= 32.0 / (eps * eps) + 1e-9;
    {
        std::set<std::pair<int, int>> seen;
        for (int32_t cid : coll.members) {
            if (0.5 * ctx.red.eta() * (ctx.red.rec(cid).amax - ctx.red.rec(cid).amin) < delta) continue;
            auto kb = boxes_of_cluster(cid);
            int minzx = 1 << 30;
            for (auto [zx, zy] : kb) minzx = std::min(minzx, zx);
            for (auto [zx, zy] : kb)
                if (zx == minzx && !seen.insert({zx, zy}).second) rep.leftmost_disjoint = false;
        }
    }
    for (int32_t cid = 0; cid < ctx.red.n_clusters(); ++cid) {
        if (!ctx.red.inside(cid, lambda1)) continue;
        const double d = ctx.red.diameter(cid);
        if (d > delta - 2 * eps && d < delta) rep.diam_gap_ok = false;
    }

    // the bijection, as equality of box-id set families
    std::set<std::vector<int32_t>> good_sets;
    for (const auto& gs : goods) good_sets.insert(gs.boxes);
    std::set<std::vector<int32_t>> keps_sets;
    bool escapes = false;
    for (int32_t cid : coll.members) {
        std::vector<int32_t> ids;
        for (auto [zx, zy] : boxes_of_cluster(cid)) {
            const int32_t b = bg.box_id(zx, zy);
            if (b < 0) {
                escapes = true;
                break;
            }
            ids.push_back(b);
        }
        std::sort(ids.begin(), ids.end());
        keps_sets.insert(std::move(ids));
    }

    rep.passed = !escapes && good_sets == keps_sets && rep.lemma49_ok && rep.diam_gap_ok && rep.leftmost_disjoint;
    if (!rep.passed) {
        std::ostringstream os;
        os << "{\"n_good\":" << good_sets.size() << ",\"n_keps\":" << keps_sets.size()
           << ",\"escapes\":" << (escapes ? 1 : 0) << ",\"lemma49_ok\":" << rep.lemma49_ok
           << ",\"diam_gap_ok\":" << rep.diam_gap_ok << ",\"leftmost_disjoint\":" << rep.leftmost_disjoint << "}";
        rep.counterexample = os.str();
    }
    return rep;
}

bool is_good_subgraph(const SiteConfig& c, const BoxGraph& g, const std::vector<int32_t>& boxes, double delta) {
    if (boxes.empty()) return false;
    GoodChecker checker{&c, &g, delta, std::vector<int32_t>(c.geom->size(), 0), {}};
    return checker.is_good(boxes);
}

std::pair<int, int> refinement_scale_range(double eta, double delta) {
    int n_min = 0;
    while (std::pow(3.0, -n_min) * 10 >= delta) ++n_min;
    int n_max = n_min;
    while (10 * std::pow(3.0, -(n_max + 1)) > eta) ++n_max;
    return {n_min, n_max};
}

std::optional<int> refinement_index(const ArmContext& ctx, double delta) {
    const auto [n_min, n_max] = refinement_scale_range(ctx.geom->eta(), delta);
    int n0 = -1;
    for (int n = n_max; n >= n_min; --n) {
        const ApproxEvents ev = detect_events(ctx, std::pow(3.0, -n), delta);
        if (ev.e())
            n0 = n;
        else
            break;
    }
    if (n0 < 0) return std::nullopt;
    // E holding at every valid scale extends vacuously below n_min: the
    // infimum over n >= 0 is then 0.
    return n0 == n_min ? 0 : n0;
}

}  // namespace perc
