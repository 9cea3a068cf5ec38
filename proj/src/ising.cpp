#include "perc/ising.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

namespace perc {

double TestFunction::eval(double x, double y) const {
    if (!support.contains(x, y)) return 0.0;
    if (kind == Kind::IndicatorBox) return 1.0;
    auto bump = [](double t) {
        if (std::abs(t) >= 1.0) return 0.0;
        return std::exp(1.0 - 1.0 / (1.0 - t * t));
    };
    const double cx = 0.5 * (support.x0 + support.x1), cy = 0.5 * (support.y0 + support.y1);
    const double rx = 0.5 * support.width(), ry = 0.5 * support.height();
    return bump((x - cx) / rx) * bump((y - cy) / ry);
}

std::string TestFunction::id() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s[%g,%g]x[%g,%g]", kind == Kind::IndicatorBox ? "ind" : "bump", support.x0,
                  support.x1, support.y0, support.y1);
    return buf;
}

namespace {

void check_support(const FkConfig& c, const TestFunction& f) {
    const double k = c.geom->k();
    if (f.support.x0 < -k || f.support.x1 > k || f.support.y0 < -k || f.support.y1 > k)
        throw DomainError("magnetization: test-function support escapes the region");
}

}  // namespace

double magnetization(const FkConfig& c, const TestFunction& f) {
    check_support(c, f);
    const auto& g = *c.geom;
    const double scale = std::pow(g.eta(), 15.0 / 8.0);
    double sum = 0;
    g.for_box(f.support.x0, f.support.x1, f.support.y0, f.support.y1, [&](int32_t v) {
        const double fv = f.eval(g.px(v), g.py(v));
        if (fv != 0.0) sum += c.spin_of(v) * fv;
    });
    return scale * sum;
}

double convention_ratio(double eta, double pi1_hat) {
    return std::pow(eta, 15.0 / 8.0) / (eta * eta / pi1_hat);
}

double cutoff_magnetization(const FkConfig& c, const ClusterSet& cs, const TestFunction& f, double eps,
                            MagNorm norm, const NormEntry* pi1) {
    check_support(c, f);
    if (!(eps > 0)) throw ParamError("cutoff_magnetization: eps must be positive");
    const auto& g = *c.geom;
    double weight;
    if (norm == MagNorm::Eta158) {
        weight = std::pow(g.eta(), 15.0 / 8.0);
    } else {
        if (pi1 == nullptr || !(pi1->pi1_hat > 0))
            throw ConfigError("cutoff_magnetization: pi1 normalizer required for the pi1 convention");
        weight = g.eta() * g.eta() / pi1->pi1_hat;
    }

    // per-cluster sums of f; the cluster sign is its (constant) spin
    std::vector<double> cluster_sum(cs.n_clusters(), 0.0);
    g.for_box(f.support.x0, f.support.x1, f.support.y0, f.support.y1, [&](int32_t v) {
        const double fv = f.eval(g.px(v), g.py(v));
        if (fv == 0.0) return;
        cluster_sum[cs.label_of(v)] += fv;
    });
    // At or below the mesh the cutoff is vacuous (single sites have lattice
    // diameter 0); every cluster is included so the field decomposes exactly.
    const bool cut = eps > g.eta();
    double out = 0;
    for (int32_t cid = 0; cid < cs.n_clusters(); ++cid) {
        if (cluster_sum[cid] == 0.0 || (cut && cs.diameter(cid) < eps)) continue;
        out += c.spin_of(cs.rec(cid).min_vertex) * cluster_sum[cid];
    }
    return weight * out;
}

TwoPointTable two_point(const MeshSpec& spec, const std::vector<double>& r_values, int64_t n_samples,
                        const FkRunParams& fk) {
    if (spec.kind != LatticeKind::SquareFk) throw ConfigError("two_point: spec.kind must be square-fk");
    if (n_samples < 1) throw ParamError("two_point: n_samples must be >= 1");
    auto geom = LatticeGeometry::get(spec.kind, spec.eta, spec.k);
    const int32_t origin = geom->origin();

    std::vector<int32_t> targets;
    for (double r : r_values) {
        const int steps = static_cast<int>(std::llround(r / spec.eta));
        const int32_t v = geom->id(2 * steps, 0);
        if (v < 0) throw DomainError("two_point: r escapes the region");
        targets.push_back(v);
    }

    TwoPointTable out;
    out.rows.resize(r_values.size());
    for (size_t i = 0; i < r_values.size(); ++i) {
        out.rows[i].r = r_values[i];
        out.rows[i].trials = n_samples;
    }

    std::vector<std::unique_ptr<FkChain>> chains;
    for (int s = 0; s < fk.n_streams; ++s)
        chains.push_back(std::make_unique<FkChain>(spec, static_cast<uint32_t>(s), fk.burn_in, fk.gap));
    for (int64_t i = 0; i < n_samples; ++i) {
        const int s = static_cast<int>(i % fk.n_streams);
        const FkConfig c = chains[s]->sample(static_cast<uint64_t>(i / fk.n_streams), spec.sample_index + i);
        const ClusterSet cs = find_clusters(c);
        const int32_t lo = cs.label_of(origin);
        for (size_t t = 0; t < targets.size(); ++t) {
            const bool connected = (r_values[t] == 0.0) || (cs.label_of(targets[t]) == lo);
            out.rows[t].hits += connected;
        }
    }

    std::vector<ProbPoint> pts;
    for (auto& row : out.rows) {
        row.p_hat = static_cast<double>(row.hits) / static_cast<double>(row.trials);
        if (row.r > 0) pts.push_back({row.r, row.hits, row.trials});
    }
    if (pts.size() >= 3) out.fit = loglog_fit(pts, 400, spec.seed ^ 0x2b0);
    return out;
}

MeshStabilityResult mesh_stability_scan(const TestFunction& f, const std::vector<double>& etas, double k, double p,
                                        uint64_t seed, int64_t n_samples, const FkRunParams& fk) {
    MeshStabilityResult out;
    out.etas = etas;
    for (size_t m = 0; m < etas.size(); ++m) {
        MeshSpec s;
        s.kind = LatticeKind::SquareFk;
        s.eta = etas[m];
        s.k = k;
        s.p = p;
        s.seed = seed + 101 * m;  // one sampling family per mesh entry
        std::vector<std::unique_ptr<FkChain>> chains;
        for (int c = 0; c < fk.n_streams; ++c)
            chains.push_back(std::make_unique<FkChain>(s, static_cast<uint32_t>(c), fk.burn_in, fk.gap));
        std::vector<double> phis;
        phis.reserve(n_samples);
        for (int64_t i = 0; i < n_samples; ++i) {
            const int c = static_cast<int>(i % fk.n_streams);
            const FkConfig cfg = chains[c]->sample(static_cast<uint64_t>(i / fk.n_streams), i);
            phis.push_back(magnetization(cfg, f));
        }
        out.variance.push_back(variance_of(phis));
        out.phi.push_back(std::move(phis));
    }
    out.ks.assign(etas.size(), std::vector<double>(etas.size(), 0.0));
    for (size_t i = 0; i < etas.size(); ++i)
        for (size_t j = i + 1; j < etas.size(); ++j)
            out.ks[i][j] = out.ks[j][i] = ks_distance(out.phi[i], out.phi[j]);
    return out;
}

}  // namespace perc
