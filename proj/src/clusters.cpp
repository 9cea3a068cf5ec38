#include "perc/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace perc {

namespace {

struct Uf {
    std::vector<int32_t> parent, sz;
    void init(int32_t n) {
        parent.resize(n);
        std::iota(parent.begin(), parent.end(), 0);
        sz.assign(n, 1);
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
    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (sz[a] < sz[b]) std::swap(a, b);
        parent[b] = a;
        sz[a] += sz[b];
    }
};

// Shared finalization: vertex ids ascend in (w, a)-lexicographic order, so
// the first vertex seen per root is the cluster's lexicographic minimum.
template <typename Passable, typename CoordA, typename CoordW>
void collect(Uf& uf, int32_t n, Passable pass, CoordA ca, CoordW cw, std::vector<int32_t>& label,
             std::vector<ClusterRecord>& recs) {
    label.assign(n, -1);
    std::vector<int32_t> cid_of_root(n, -1);
    for (int32_t v = 0; v < n; ++v) {
        if (!pass(v)) continue;
        const int32_t r = uf.find(v);
        int32_t cid = cid_of_root[r];
        if (cid < 0) {
            cid = static_cast<int32_t>(recs.size());
            cid_of_root[r] = cid;
            ClusterRecord rec;
            rec.min_vertex = v;
            rec.amin = rec.amax = ca(v);
            rec.wmin = rec.wmax = cw(v);
            recs.push_back(rec);
        }
        auto& rec = recs[cid];
        ++rec.size;
        rec.amin = std::min(rec.amin, ca(v));
        rec.amax = std::max(rec.amax, ca(v));
        rec.wmin = std::min(rec.wmin, cw(v));
        rec.wmax = std::max(rec.wmax, cw(v));
        label[v] = cid;
    }
}

}  // namespace

ClusterSet find_clusters(const SiteConfig& c, Medium m) {
    const auto& g = *c.geom;
    const int32_t n = g.size();
    const bool want_red = (m == Medium::Red);
    auto pass = [&](int32_t v) { return c.is_red(v) == want_red; };

    Uf uf;
    uf.init(n);
    for (int32_t v = 0; v < n; ++v) {
        if (!pass(v)) continue;
        for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u)
            if (*u < v && pass(*u)) uf.unite(v, *u);
    }

    ClusterSet cs;
    cs.medium_ = m;
    cs.eta_ = g.eta();
    cs.row_dy_ = g.row_dy();
    collect(
        uf, n, pass, [&](int32_t v) { return g.a_of(v); }, [&](int32_t v) { return g.w_of(v); }, cs.label_, cs.recs_);
    return cs;
}

ClusterSet find_clusters(const SiteConfig& c) { return find_clusters(c, Medium::Red); }

ClusterSet find_clusters(const FkConfig& c) {
    const auto& g = *c.geom;
    const int32_t n = g.size();
    Uf uf;
    uf.init(n);
    const int32_t nb = g.bond_count();
    for (int32_t b = 0; b < nb; ++b)
        if (c.bond_open(b) && g.bond_to(b) >= 0) uf.unite(g.bond_from(b), g.bond_to(b));

    ClusterSet cs;
    cs.medium_ = Medium::Red;
    cs.eta_ = g.eta();
    cs.row_dy_ = g.row_dy();
    collect(
        uf, n, [](int32_t) { return true; }, [&](int32_t v) { return g.a_of(v); },
        [&](int32_t v) { return g.w_of(v); }, cs.label_, cs.recs_);
    return cs;
}

ClusterSet find_dual_clusters(const FkConfig& c) {
    const auto& g = *c.geom;
    const DualGeometry d = c.dual();
    const int32_t nd = d.size();
    const int32_t n = g.size();

    Uf uf;
    uf.init(nd);
    for (int32_t di = 0; di < nd; ++di) {
        const int x = d.x_of(di), y = d.y_of(di);
        // East dual edge crosses the north bond of primal (x+1, y).
        const int32_t de = d.id(x + 1, y);
        if (de >= 0) {
            const int32_t pv = g.id(2 * (x + 1), 2 * y);
            if (pv >= 0 && g.bond_to(n + pv) >= 0 && !c.bond_open(n + pv)) uf.unite(di, de);
        }
        // North dual edge crosses the east bond of primal (x, y+1).
        const int32_t dn = d.id(x, y + 1);
        if (dn >= 0) {
            const int32_t pv = g.id(2 * x, 2 * (y + 1));
            if (pv >= 0 && g.bond_to(pv) >= 0 && !c.bond_open(pv)) uf.unite(di, dn);
        }
    }

    ClusterSet cs;
    cs.medium_ = Medium::Blue;
    cs.eta_ = g.eta();
    cs.row_dy_ = 0.5 * g.eta();
    collect(
        uf, nd, [](int32_t) { return true; }, [&](int32_t v) { return 2 * d.x_of(v) + 1; },
        [&](int32_t v) { return 2 * d.y_of(v) + 1; }, cs.label_, cs.recs_);
    return cs;
}

std::vector<std::vector<int32_t>> ClusterSet::all_vertex_lists() const {
    std::vector<std::vector<int32_t>> out(recs_.size());
    for (size_t cid = 0; cid < recs_.size(); ++cid) out[cid].reserve(recs_[cid].size);
    for (int32_t v = 0; v < vertex_count(); ++v)
        if (label_[v] >= 0) out[label_[v]].push_back(v);
    return out;
}

std::vector<int32_t> ClusterSet::vertices_of(int32_t cid) const {
    std::vector<int32_t> out;
    out.reserve(recs_[cid].size);
    for (int32_t v = 0; v < vertex_count(); ++v)
        if (label_[v] == cid) out.push_back(v);
    return out;
}

ClusterCollection clusters_in_domain(const ClusterSet& cs, const Box& domain, double delta) {
    if (delta < 0) throw ParamError("clusters_in_domain: delta must be >= 0");
    ClusterCollection out;
    out.cs = &cs;
    out.domain = domain;
    out.delta = delta;
    for (int32_t cid = 0; cid < cs.n_clusters(); ++cid)
        if (cs.inside(cid, domain) && cs.diameter(cid) >= delta) out.members.push_back(cid);
    std::sort(out.members.begin(), out.members.end(), [&](int32_t a, int32_t b) {
        if (cs.rec(a).size != cs.rec(b).size) return cs.rec(a).size > cs.rec(b).size;
        return cs.rec(a).min_vertex < cs.rec(b).min_vertex;
    });
    return out;
}

namespace {

// Components of the red phase restricted to `domain`, generic over how
// in-domain adjacency is enumerated.
template <typename ForDomainVertices, typename ForDomainEdges>
PieceCollection pieces_impl(const Box& domain, double delta, double eta, double row_dy, int32_t n,
                            ForDomainVertices for_vertices, ForDomainEdges for_edges,
                            const LatticeGeometry& g) {
    if (delta < 0) throw ParamError("pieces_in_domain: delta must be >= 0");
    std::vector<int32_t> verts;
    for_vertices([&](int32_t v) { verts.push_back(v); });

    std::vector<int32_t> local(n, -1);
    for (size_t i = 0; i < verts.size(); ++i) local[verts[i]] = static_cast<int32_t>(i);

    Uf uf;
    uf.init(static_cast<int32_t>(verts.size()));
    for (size_t i = 0; i < verts.size(); ++i)
        for_edges(verts[i], [&](int32_t u) {
            if (local[u] >= 0) uf.unite(static_cast<int32_t>(i), local[u]);
        });

    std::vector<int32_t> piece_of_root(verts.size(), -1);
    PieceCollection pc;
    pc.domain = domain;
    pc.delta = delta;
    for (size_t i = 0; i < verts.size(); ++i) {
        const int32_t r = uf.find(static_cast<int32_t>(i));
        int32_t pid = piece_of_root[r];
        if (pid < 0) {
            pid = static_cast<int32_t>(pc.pieces.size());
            piece_of_root[r] = pid;
            Piece p;
            p.min_vertex = verts[i];  // ascending ids: first seen is minimal
            p.amin = p.amax = g.a_of(verts[i]);
            p.wmin = p.wmax = g.w_of(verts[i]);
            pc.pieces.push_back(std::move(p));
        }
        auto& p = pc.pieces[pid];
        p.vertices.push_back(verts[i]);
        ++p.size;
        p.amin = std::min(p.amin, g.a_of(verts[i]));
        p.amax = std::max(p.amax, g.a_of(verts[i]));
        p.wmin = std::min(p.wmin, g.w_of(verts[i]));
        p.wmax = std::max(p.wmax, g.w_of(verts[i]));
    }
    for (auto& p : pc.pieces)
        p.diameter = std::max(0.5 * eta * (p.amax - p.amin), row_dy * (p.wmax - p.wmin));

    std::erase_if(pc.pieces, [&](const Piece& p) { return p.diameter < delta; });
    std::sort(pc.pieces.begin(), pc.pieces.end(), [](const Piece& a, const Piece& b) {
        if (a.size != b.size) return a.size > b.size;
        return a.min_vertex < b.min_vertex;
    });
    return pc;
}

}  // namespace

PieceCollection pieces_in_domain(const SiteConfig& c, const Box& domain, double delta) {
    const auto& g = *c.geom;
    return pieces_impl(
        domain, delta, g.eta(), g.row_dy(), g.size(),
        [&](auto fn) {
            g.for_box(domain.x0, domain.x1, domain.y0, domain.y1, [&](int32_t v) {
                if (c.is_red(v)) fn(v);
            });
        },
        [&](int32_t v, auto fn) {
            for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u)
                if (c.is_red(*u)) fn(*u);
        },
        g);
}

PieceCollection pieces_in_domain(const FkConfig& c, const Box& domain, double delta) {
    const auto& g = *c.geom;
    const int32_t n = g.size();
    return pieces_impl(
        domain, delta, g.eta(), g.row_dy(), n,
        [&](auto fn) { g.for_box(domain.x0, domain.x1, domain.y0, domain.y1, fn); },
        [&](int32_t v, auto fn) {
            for (const int32_t b : {v, n + v}) {
                const int32_t u = g.bond_to(b);
                if (u >= 0 && c.bond_open(b)) fn(u);
            }
            const int32_t west = g.id(g.a_of(v) - 2, g.w_of(v));
            if (west >= 0 && c.bond_open(west)) fn(west);
            const int32_t south = g.id(g.a_of(v), g.w_of(v) - 2);
            if (south >= 0 && c.bond_open(n + south)) fn(south);
        },
        g);
}

std::vector<Piece> largest_clusters(const SiteConfig& c, const Box& domain, int count) {
    auto pc = pieces_in_domain(c, domain, 0.0);
    if (static_cast<int>(pc.pieces.size()) > count) pc.pieces.resize(count);
    return std::move(pc.pieces);
}

std::vector<Piece> largest_clusters(const FkConfig& c, const Box& domain, int count) {
    auto pc = pieces_in_domain(c, domain, 0.0);
    if (static_cast<int>(pc.pieces.size()) > count) pc.pieces.resize(count);
    return std::move(pc.pieces);
}

double hausdorff_distance(const PointSet& a, const PointSet& b) {
    if (a.size() == 0 || b.size() == 0) throw DomainError("hausdorff_distance: empty point set");
    double h = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        const PointSet& s = pass ? b : a;
        const PointSet& t = pass ? a : b;
        for (size_t i = 0; i < s.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < t.size(); ++j) {
                best = std::min(best, linf(s.xs[i], s.ys[i], t.xs[j], t.ys[j]));
                if (best <= h) break;  // cannot raise the max
            }
            h = std::max(h, best);
        }
    }
    return h;
}

namespace {

// Kuhn augmenting-path matching on the bipartite graph {d(i,j) <= eps}.
bool try_kuhn(int i, double eps, const std::vector<std::vector<double>>& d, std::vector<int>& match_t,
              std::vector<char>& used) {
    const int m = static_cast<int>(d[i].size());
    for (int j = 0; j < m; ++j) {
        if (used[j] || d[i][j] > eps) continue;
        used[j] = 1;
        if (match_t[j] < 0 || try_kuhn(match_t[j], eps, d, match_t, used)) {
            match_t[j] = i;
            return true;
        }
    }
    return false;
}

bool feasible(double eps, const std::vector<std::vector<double>>& d) {
    const int n = static_cast<int>(d.size());
    std::vector<int> match_t(n, -1);
    for (int i = 0; i < n; ++i) {
        std::vector<char> used(n, 0);
        if (!try_kuhn(i, eps, d, match_t, used)) return false;
    }
    return true;
}

}  // namespace

double collection_distance(const std::vector<PointSet>& s, const std::vector<PointSet>& t) {
    if (s.size() != t.size()) return std::numeric_limits<double>::infinity();
    const int n = static_cast<int>(s.size());
    if (n == 0) return 0.0;

    std::vector<std::vector<double>> d(n, std::vector<double>(n));
    std::vector<double> values;
    values.reserve(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            d[i][j] = hausdorff_distance(s[i], t[j]);
            values.push_back(d[i][j]);
        }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    // Smallest pairwise value whose threshold graph has a perfect matching.
    int lo = 0, hi = static_cast<int>(values.size()) - 1;
    if (!feasible(values[hi], d)) return std::numeric_limits<double>::infinity();  // unreachable: complete graph
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (feasible(values[mid], d))
            hi = mid;
        else
            lo = mid + 1;
    }
    return values[lo];
}

std::string pieces_to_json(const PieceCollection& pc, const LatticeGeometry& geom, int64_t vertex_list_limit) {
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < pc.pieces.size(); ++i) {
        const Piece& p = pc.pieces[i];
        nlohmann::json jp = {
            {"id", i},
            {"size", p.size},
            {"diameter", p.diameter},
            {"bbox",
             {{"x0", 0.5 * geom.eta() * p.amin},
              {"x1", 0.5 * geom.eta() * p.amax},
              {"y0", geom.row_dy() * p.wmin},
              {"y1", geom.row_dy() * p.wmax}}},
        };
        if (vertex_list_limit < 0 || p.size <= vertex_list_limit) {
            nlohmann::json verts = nlohmann::json::array();
            for (const int32_t v : p.vertices) verts.push_back({geom.px(v), geom.py(v)});
            jp["vertices"] = std::move(verts);
        }
        arr.push_back(std::move(jp));
    }
    nlohmann::json root = {{"domain", {pc.domain.x0, pc.domain.y0, pc.domain.x1, pc.domain.y1}},
                           {"delta", pc.delta},
                           {"pieces", std::move(arr)}};
    return root.dump(2);
}

}  // namespace perc
