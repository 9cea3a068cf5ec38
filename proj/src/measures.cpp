#include "perc/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "json.hpp"

namespace perc {

namespace {

struct PosKey {
    uint64_t x, y;
    bool operator==(const PosKey& o) const { return x == o.x && y == o.y; }
};
struct PosKeyHash {
    size_t operator()(const PosKey& k) const {
        uint64_t h = k.x * 0x9E3779B97F4A7C15ull;
        h ^= k.y + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        return static_cast<size_t>(h);
    }
};

PosKey key_of(double x, double y) {
    if (x == 0.0) x = 0.0;  // collapse -0
    if (y == 0.0) y = 0.0;
    PosKey k;
    std::memcpy(&k.x, &x, 8);
    std::memcpy(&k.y, &y, 8);
    return k;
}

double checked_weight(double eta, const NormEntry& norm) {
    if (!(norm.pi1_hat > 0.0)) throw ConfigError("counting measure: degenerate normalizer pi1_hat = 0");
    return eta * eta / norm.pi1_hat;
}

}  // namespace

double CountingMeasure::mass_in(const Box& b) const {
    int64_t n = 0;
    for (size_t i = 0; i < xs.size(); ++i) n += b.contains(xs[i], ys[i]);
    return weight * static_cast<double>(n);
}

CountingMeasure counting_measure(const LatticeGeometry& geom, const std::vector<int32_t>& vertices,
                                 const NormEntry& norm) {
    CountingMeasure m;
    m.weight = checked_weight(geom.eta(), norm);
    m.norm = {geom.eta(), norm.pi1_hat, norm.ci_halfwidth};
    m.xs.reserve(vertices.size());
    m.ys.reserve(vertices.size());
    for (int32_t v : vertices) {
        m.xs.push_back(geom.px(v));
        m.ys.push_back(geom.py(v));
    }
    return m;
}

namespace {

// Shared one-arm scan: atoms at vertices of the half-open box whose cluster
// bbox reaches distance b from z.
template <typename Cfg>
CountingMeasure one_arm_impl(const Cfg& c, const ClusterSet& cs, double zx, double zy, double a, double b,
                             const NormEntry& norm) {
    const auto& g = *c.geom;
    if (!(a > 0) || !(a < b)) throw DomainError("one_arm_measure: need 0 < a < b");
    if (zx - b < -g.k() || zx + b > g.k() || zy - b < -g.k() || zy + b > g.k())
        throw DomainError("one_arm_measure: Lambda_b(z) escapes the region");

    CountingMeasure m;
    m.weight = checked_weight(g.eta(), norm);
    m.norm = {g.eta(), norm.pi1_hat, norm.ci_halfwidth};
    g.for_box(zx - a, zx + a, zy - a, zy + a, [&](int32_t v) {
        const double px = g.px(v), py = g.py(v);
        if (px >= zx + a || py >= zy + a) return;  // half-open: upper/right excluded
        const int32_t cid = cs.label_of(v);
        if (cid < 0) return;
        if (cs.exits_box(cid, zx, zy, b)) {
            m.xs.push_back(px);
            m.ys.push_back(py);
        }
    });
    return m;
}

}  // namespace

CountingMeasure one_arm_measure(const SiteConfig& c, const ClusterSet& cs, double zx, double zy, double a, double b,
                                const NormEntry& norm) {
    return one_arm_impl(c, cs, zx, zy, a, b, norm);
}

CountingMeasure one_arm_measure(const FkConfig& c, const ClusterSet& cs, double zx, double zy, double a, double b,
                                const NormEntry& norm) {
    return one_arm_impl(c, cs, zx, zy, a, b, norm);
}

CountingMeasure box_sum_measure(const SiteConfig& c, const ClusterSet& cs, const std::vector<int32_t>& s_vertices,
                                int n, double delta, const NormEntry& norm) {
    const auto& g = *c.geom;
    const double s = std::pow(3.0, -n);
    if (!(10.0 * s < delta)) throw ParamError("box_sum_measure: requires 10 * 3^-n < delta");

    // Tiles z whose tripled box Lambda_{3s/2}(sz) meets S.
    std::unordered_map<int64_t, char> tiles;
    auto tile_key = [](int zx, int zy) { return (static_cast<int64_t>(zx) << 32) ^ (zy & 0xffffffffLL); };
    for (int32_t v : s_vertices) {
        const double px = g.px(v), py = g.py(v);
        const int zx0 = static_cast<int>(std::floor(px / s - 1.5)) - 1;
        const int zy0 = static_cast<int>(std::floor(py / s - 1.5)) - 1;
        for (int zx = zx0; zx <= zx0 + 4; ++zx)
            for (int zy = zy0; zy <= zy0 + 4; ++zy)
                if (std::abs(px - s * zx) <= 1.5 * s && std::abs(py - s * zy) <= 1.5 * s)
                    tiles[tile_key(zx, zy)] = 1;
    }

    CountingMeasure m;
    m.weight = checked_weight(g.eta(), norm);
    m.norm = {g.eta(), norm.pi1_hat, norm.ci_halfwidth};
    const double arm_b = delta / 2 - s;
    for (const auto& [key, unused] : tiles) {
        (void)unused;
        const int zx = static_cast<int>(key >> 32);
        const int zy = static_cast<int>(static_cast<int32_t>(key & 0xffffffffLL));
        const double cx = s * zx, cy = s * zy;
        if (cx - arm_b < -g.k() || cx + arm_b > g.k() || cy - arm_b < -g.k() || cy + arm_b > g.k())
            throw DomainError("box_sum_measure: arm box escapes the region; enlarge k");
        g.for_box(cx - s / 2, cx + s / 2, cy - s / 2, cy + s / 2, [&](int32_t v) {
            const double px = g.px(v), py = g.py(v);
            if (px >= cx + s / 2 || py >= cy + s / 2) return;  // half-open tile
            const int32_t cid = cs.label_of(v);
            if (cid < 0) return;
            if (cs.exits_box(cid, cx, cy, arm_b)) {
                m.xs.push_back(px);
                m.ys.push_back(py);
            }
        });
    }
    return m;
}

CountingMeasure recovered_measure(const std::vector<double>& xs, const std::vector<double>& ys, double psi,
                                  double pi1_2psi, double eta) {
    if (!(psi > 0) || !(psi < 0.5)) throw ParamError("recovered_measure: psi must lie in (0, 1/2)");
    if (psi < eta) throw ParamError("recovered_measure: psi grid must be coarser than eta");
    if (!(pi1_2psi > 0)) throw ConfigError("recovered_measure: degenerate normalizer");

    std::unordered_map<int64_t, char> cells;
    auto cell_key = [](int zx, int zy) { return (static_cast<int64_t>(zx) << 32) ^ (zy & 0xffffffffLL); };
    for (size_t i = 0; i < xs.size(); ++i) {
        const int zx0 = static_cast<int>(std::floor(xs[i] / psi - 0.5)) - 1;
        const int zy0 = static_cast<int>(std::floor(ys[i] / psi - 0.5)) - 1;
        for (int zx = zx0; zx <= zx0 + 3; ++zx)
            for (int zy = zy0; zy <= zy0 + 3; ++zy)
                if (std::abs(xs[i] - psi * zx) <= psi / 2 && std::abs(ys[i] - psi * zy) <= psi / 2)
                    cells[cell_key(zx, zy)] = 1;
    }

    CountingMeasure m;
    m.weight = 4.0 * psi * psi / pi1_2psi;
    m.norm = {2.0 * psi, pi1_2psi, 0.0};
    std::vector<std::pair<int, int>> zs;
    zs.reserve(cells.size());
    for (const auto& [key, unused] : cells) {
        (void)unused;
        zs.push_back({static_cast<int>(key >> 32), static_cast<int>(static_cast<int32_t>(key & 0xffffffffLL))});
    }
    std::sort(zs.begin(), zs.end());
    m.xs.reserve(zs.size());
    m.ys.reserve(zs.size());
    for (auto [zx, zy] : zs) {
        m.xs.push_back(psi * zx);
        m.ys.push_back(psi * zy);
    }
    return m;
}

double tv_distance(const CountingMeasure& m1, const CountingMeasure& m2) {
    std::unordered_map<PosKey, double, PosKeyHash> diff;
    diff.reserve(m1.atom_count() + m2.atom_count());
    for (size_t i = 0; i < m1.xs.size(); ++i) diff[key_of(m1.xs[i], m1.ys[i])] += m1.weight;
    for (size_t i = 0; i < m2.xs.size(); ++i) diff[key_of(m2.xs[i], m2.ys[i])] -= m2.weight;
    double tv = 0;
    for (const auto& [k, d] : diff) {
        (void)k;
        tv += std::abs(d);
    }
    return tv;
}

namespace {

// Dinic max-flow with real capacities, for the binned transport problem.
struct Dinic {
    struct Edge {
        int to;
        double cap;
        int rev;
    };
    std::vector<std::vector<Edge>> adj;
    std::vector<int> level, iter;

    explicit Dinic(int n) : adj(n), level(n), iter(n) {}
    void add_edge(int a, int b, double cap) {
        adj[a].push_back({b, cap, static_cast<int>(adj[b].size())});
        adj[b].push_back({a, 0.0, static_cast<int>(adj[a].size()) - 1});
    }
    bool bfs(int s, int t) {
        std::fill(level.begin(), level.end(), -1);
        std::vector<int> q{s};
        level[s] = 0;
        for (size_t h = 0; h < q.size(); ++h) {
            const int v = q[h];
            for (const auto& e : adj[v])
                if (e.cap > 1e-15 && level[e.to] < 0) {
                    level[e.to] = level[v] + 1;
                    q.push_back(e.to);
                }
        }
        return level[t] >= 0;
    }
    double dfs(int v, int t, double f) {
        if (v == t) return f;
        for (int& i = iter[v]; i < static_cast<int>(adj[v].size()); ++i) {
            Edge& e = adj[v][i];
            if (e.cap > 1e-15 && level[v] < level[e.to]) {
                const double d = dfs(e.to, t, std::min(f, e.cap));
                if (d > 0) {
                    e.cap -= d;
                    adj[e.to][e.rev].cap += d;
                    return d;
                }
            }
        }
        return 0;
    }
    double max_flow(int s, int t) {
        double flow = 0;
        while (bfs(s, t)) {
            std::fill(iter.begin(), iter.end(), 0);
            double f;
            while ((f = dfs(s, t, 1e300)) > 0) flow += f;
        }
        return flow;
    }
};

struct Binned {
    std::vector<int> cx, cy;
    std::vector<double> mass;
    double total = 0;
};

Binned bin_measure(const CountingMeasure& m, double rho) {
    std::unordered_map<int64_t, double> cells;
    for (size_t i = 0; i < m.xs.size(); ++i) {
        const int zx = static_cast<int>(std::floor(m.xs[i] / rho));
        const int zy = static_cast<int>(std::floor(m.ys[i] / rho));
        cells[(static_cast<int64_t>(zx) << 32) ^ (zy & 0xffffffffLL)] += m.weight;
    }
    Binned b;
    for (const auto& [key, mass] : cells) {
        b.cx.push_back(static_cast<int>(key >> 32));
        b.cy.push_back(static_cast<int>(static_cast<int32_t>(key & 0xffffffffLL)));
        b.mass.push_back(mass);
        b.total += mass;
    }
    return b;
}

// Transportable mass when cells at L-inf index distance <= r may be coupled.
double binned_flow(const Binned& a, const Binned& b, int r) {
    const int na = static_cast<int>(a.mass.size()), nb = static_cast<int>(b.mass.size());
    Dinic d(na + nb + 2);
    const int s = na + nb, t = s + 1;
    for (int i = 0; i < na; ++i) d.add_edge(s, i, a.mass[i]);
    for (int j = 0; j < nb; ++j) d.add_edge(na + j, t, b.mass[j]);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j)
            if (std::max(std::abs(a.cx[i] - b.cx[j]), std::abs(a.cy[i] - b.cy[j])) <= r)
                d.add_edge(i, na + j, 1e300);
    return d.max_flow(s, t);
}

}  // namespace

double prokhorov_upper(const CountingMeasure& m1, const CountingMeasure& m2, double rho) {
    if (!(rho > 0)) throw ParamError("prokhorov_upper: rho must be positive");
    if (m1.atom_count() == 0 && m2.atom_count() == 0) return 0.0;
    const Binned a = bin_measure(m1, rho), b = bin_measure(m2, rho);
    const double M = std::max(a.total, b.total);
    if (a.mass.empty() || b.mass.empty()) return M;  // deficit-only bound, exact

    int rmax = 1;
    for (size_t i = 0; i < a.mass.size(); ++i)
        for (size_t j = 0; j < b.mass.size(); ++j)
            rmax = std::max(rmax,
                            std::max(std::abs(a.cx[i] - b.cx[j]), std::abs(a.cy[i] - b.cy[j])));

    // Strassen sufficiency: a sub-coupling moving mass across cells at index
    // distance <= r pairs original points at L-inf distance <= (r+1)*rho
    // (the grid slack), and the uncovered mass M - flow(r) enters the
    // additive term. The bound for the tier is the max of the two; scan
    // tiers for the best.
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r <= rmax; ++r) {
        const double deficit = M - binned_flow(a, b, r);
        best = std::min(best, std::max(static_cast<double>(r + 1) * rho, deficit));
        if (deficit <= 1e-15) break;  // larger r only raises the distance term
    }
    return best;
}

double prokhorov_exact_small(const CountingMeasure& m1, const CountingMeasure& m2) {
    const size_t n1 = m1.atom_count(), n2 = m2.atom_count();
    if (n1 > 12 || n2 > 12) throw ParamError("prokhorov_exact_small: instance too large");
    if (n1 == 0 && n2 == 0) return 0.0;

    std::vector<double> cand{0.0};
    for (size_t i = 0; i < n1; ++i)
        for (size_t j = 0; j < n2; ++j) cand.push_back(linf(m1.xs[i], m1.ys[i], m2.xs[j], m2.ys[j]));
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    // Worst violation max_S mu(S) - nu(S^eps) over subsets of mu's atoms.
    auto violation = [&](const CountingMeasure& mu, const CountingMeasure& nu, double eps) {
        double worst = 0;
        const size_t n = mu.atom_count();
        for (uint32_t mask = 1; mask < (1u << n); ++mask) {
            double mu_s = 0;
            for (size_t i = 0; i < n; ++i)
                if (mask & (1u << i)) mu_s += mu.weight;
            double nu_se = 0;
            for (size_t j = 0; j < nu.atom_count(); ++j) {
                bool in = false;
                for (size_t i = 0; i < n && !in; ++i)
                    if ((mask & (1u << i)) && linf(mu.xs[i], mu.ys[i], nu.xs[j], nu.ys[j]) <= eps) in = true;
                if (in) nu_se += nu.weight;
            }
            worst = std::max(worst, mu_s - nu_se);
        }
        return worst;
    };

    double best = std::numeric_limits<double>::infinity();
    for (size_t t = 0; t < cand.size(); ++t) {
        const double d = cand[t];
        const double v = std::max(violation(m1, m2, d), violation(m2, m1, d));
        // S^eps is constant on [d, next); the smallest feasible eps there:
        const double eps = std::max(d, v);
        const double next = (t + 1 < cand.size()) ? cand[t + 1] : std::numeric_limits<double>::infinity();
        if (eps < next) best = std::min(best, eps);
    }
    return best;
}

void write_measure_csv(const CountingMeasure& m, const std::string& path_csv) {
    std::ofstream f(path_csv, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path_csv);
    f << "x,y,weight\n";
    char buf[96];
    for (size_t i = 0; i < m.xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", m.xs[i], m.ys[i], m.weight);
        f << buf;
    }
    nlohmann::json meta = {{"eta", m.norm.eta}, {"pi1_hat", m.norm.pi1_hat}, {"ci_halfwidth", m.norm.ci}};
    std::ofstream side(path_csv + ".meta.json", std::ios::binary);
    side << meta.dump(2) << "\n";
}

}  // namespace perc
