#include "perc/stats.hpp"

#include <algorithm>
#include <cmath>

#include "perc/rng.hpp"

namespace perc {

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

namespace {

struct Wls {
    double slope = 0, intercept = 0, r2 = 0;
    bool ok = false;
};

Wls wls_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
    Wls out;
    const size_t n = x.size();
    if (n < 2) return out;
    double sw = 0, sx = 0, sy = 0;
    for (size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0) return out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < n; ++i) {
        const double e = y[i] - (out.intercept + out.slope * x[i]);
        ss_res += w[i] * e * e;
        ss_tot += w[i] * (y[i] - my) * (y[i] - my);
    }
    out.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
    out.ok = true;
    return out;
}

int64_t binomial_draw(CounterRng& rng, int64_t n, double p) {
    // Plain inversion by summed Bernoullis; tallies here are small enough.
    const uint64_t thr = bernoulli_threshold(p);
    int64_t h = 0;
    for (int64_t i = 0; i < n; ++i) h += (rng.next_u32() < thr);
    return h;
}

}  // namespace

FitResult loglog_fit(const std::vector<ProbPoint>& points, int n_boot, uint64_t seed) {
    std::vector<double> x, y, w;
    int excluded = 0;
    for (const auto& pt : points) {
        if (pt.trials <= 0) throw ParamError("loglog_fit: point with zero trials");
        if (pt.hits <= 0) {
            ++excluded;  // log(0): excluded with a warning flag in the result
            continue;
        }
        const double p = static_cast<double>(pt.hits) / static_cast<double>(pt.trials);
        x.push_back(std::log(pt.scale));
        y.push_back(std::log(p));
        // delta method: Var(log p_hat) ~ (1-p) / (n p)
        const double var = (1.0 - p) / (static_cast<double>(pt.trials) * p);
        w.push_back(var > 0 ? 1.0 / var : 1e12);
    }
    if (x.size() < 3) throw FitError("loglog_fit: fewer than 3 usable points");

    const Wls base = wls_fit(x, y, w);
    if (!base.ok) throw FitError("loglog_fit: degenerate abscissae");

    std::vector<double> slopes;
    slopes.reserve(n_boot);
    for (int rep = 0; rep < n_boot; ++rep) {
        CounterRng rng(seed, rep, kStreamBootstrap);
        std::vector<double> xb, yb, wb;
        for (const auto& pt : points) {
            if (pt.hits <= 0) continue;
            const double p = static_cast<double>(pt.hits) / static_cast<double>(pt.trials);
            const int64_t h = binomial_draw(rng, pt.trials, p);
            if (h <= 0) continue;
            const double pb = static_cast<double>(h) / static_cast<double>(pt.trials);
            xb.push_back(std::log(pt.scale));
            yb.push_back(std::log(pb));
            const double var = (1.0 - pb) / (static_cast<double>(pt.trials) * pb);
            wb.push_back(var > 0 ? 1.0 / var : 1e12);
        }
        if (xb.size() < 3) continue;
        const Wls fit = wls_fit(xb, yb, wb);
        if (fit.ok) slopes.push_back(fit.slope);
    }

    FitResult out;
    out.slope = base.slope;
    out.intercept = base.intercept;
    out.r2 = base.r2;
    out.n_points = static_cast<int>(x.size());
    out.n_excluded = excluded;
    if (slopes.size() >= 20) {
        std::sort(slopes.begin(), slopes.end());
        const auto quant = [&](double q) {
            const double pos = q * static_cast<double>(slopes.size() - 1);
            const size_t lo = static_cast<size_t>(pos);
            const size_t hi = std::min(lo + 1, slopes.size() - 1);
            return slopes[lo] + (pos - static_cast<double>(lo)) * (slopes[hi] - slopes[lo]);
        };
        out.slope_lo = std::min(quant(0.025), out.slope);
        out.slope_hi = std::max(quant(0.975), out.slope);
    } else {
        out.slope_lo = out.slope_hi = out.slope;
    }
    return out;
}

namespace {

// log-survival points over the upper half of the sample range.
void survival_points(const std::vector<double>& sorted, std::vector<double>& x, std::vector<double>& y) {
    const size_t n = sorted.size();
    const double xmin = sorted.front(), xmax = sorted.back();
    const double cut = xmin + 0.5 * (xmax - xmin);
    for (size_t i = 0; i < n; ++i) {
        const size_t above = n - 1 - i;  // strictly greater count
        if (above == 0) break;
        if (sorted[i] < cut) continue;
        if (i + 1 < n && sorted[i + 1] == sorted[i]) continue;  // last of ties
        x.push_back(sorted[i]);
        y.push_back(std::log(static_cast<double>(above) / static_cast<double>(n)));
    }
}

Wls tail_wls(const std::vector<double>& sorted, double beta) {
    std::vector<double> x, y;
    survival_points(sorted, x, y);
    if (x.size() < 3) return {};
    std::vector<double> xb(x.size()), w(x.size(), 1.0);
    for (size_t i = 0; i < x.size(); ++i) xb[i] = std::pow(std::max(x[i], 0.0), beta);
    return wls_fit(xb, y, w);
}

}  // namespace

TailFit tail_fit(const std::vector<double>& samples, TailFamily family, int n_boot, uint64_t seed) {
    if (samples.size() < 100) throw FitError("tail_fit: need at least 100 samples");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) throw FitError("tail_fit: degenerate (constant) sample");
    if (sorted.front() < 0) throw FitError("tail_fit: negative values not supported");

    double beta = 1.0;
    if (family == TailFamily::Stretched) {
        double best_r2 = -1e300;
        for (double b = 0.2; b <= 2.0001; b += 0.05) {
            const Wls f = tail_wls(sorted, b);
            if (f.ok && f.r2 > best_r2) {
                best_r2 = f.r2;
                beta = b;
            }
        }
    }
    const Wls base = tail_wls(sorted, beta);
    if (!base.ok) throw FitError("tail_fit: too few distinct tail points");

    std::vector<double> decays;
    for (int rep = 0; rep < n_boot; ++rep) {
        CounterRng rng(seed, rep, kStreamBootstrap);
        std::vector<double> boot(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) boot[i] = samples[rng.below(samples.size())];
        std::sort(boot.begin(), boot.end());
        if (boot.front() == boot.back()) continue;
        const Wls f = tail_wls(boot, beta);
        if (f.ok) decays.push_back(-f.slope);
    }

    TailFit out;
    out.fit.slope = base.slope;
    out.fit.intercept = base.intercept;
    out.fit.r2 = base.r2;
    out.fit.n_points = static_cast<int>(samples.size());
    out.beta = beta;
    out.decay = -base.slope;
    if (decays.size() >= 20) {
        std::sort(decays.begin(), decays.end());
        out.fit.slope_lo = -decays[static_cast<size_t>(0.975 * (decays.size() - 1))];
        out.fit.slope_hi = -decays[static_cast<size_t>(0.025 * (decays.size() - 1))];
    } else {
        out.fit.slope_lo = out.fit.slope_hi = base.slope;
    }
    return out;
}

double ks_distance(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw DomainError("ks_distance: empty sample");
    std::vector<double> a = x, b = y;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= t) ++i;
        while (j < b.size() && b[j] <= t) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_critical_value(size_t n, size_t m, double alpha) {
    const double c = (alpha <= 0.011) ? 1.62762 : 1.35810;
    return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

}  // namespace perc
