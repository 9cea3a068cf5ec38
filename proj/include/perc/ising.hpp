#pragma once

// The critical Ising magnetization field on the square lattice via the FK
// representation: full and cutoff fields, two-point decay, mesh stability.

#include <cstdint>
#include <string>
#include <vector>

#include "perc/arms.hpp"
#include "perc/clusters.hpp"
#include "perc/lattice.hpp"
#include "perc/stats.hpp"

namespace perc {

struct TestFunction {
    enum class Kind { IndicatorBox, SmoothBump };
    Kind kind = Kind::IndicatorBox;
    Box support;  // bounded support

    // IndicatorBox: 1 on the closed box. SmoothBump: product of one-dim
    // bumps exp(1 - 1/(1-t^2)) on the box, 0 outside.
    double eval(double x, double y) const;
    double sup_norm() const { return 1.0; }
    std::string id() const;
};

// Normalization convention for cluster measures in the signed sum: the
// field's eta^{15/8}, or the counting-measure eta^2 / pi1_hat. Both are
// exposed; the decomposition identity is exact under a single convention.
enum class MagNorm { Eta158, Pi1 };

// Phi^eta(f) = eta^{15/8} sum_x S_x f(x), spins from the Edwards-Sokal
// coloring carried by the configuration.
double magnetization(const FkConfig& c, const TestFunction& f);

// Sum over FK clusters of diameter >= eps of sign * <mu_C, f>, signs shared
// with magnetization() through the per-cluster spin record.
double cutoff_magnetization(const FkConfig& c, const ClusterSet& cs, const TestFunction& f, double eps,
                            MagNorm norm = MagNorm::Pi1, const NormEntry* pi1 = nullptr);

// Ratio of the two conventions' atom weights, eta^{15/8} / (eta^2/pi1_hat).
double convention_ratio(double eta, double pi1_hat);

struct TwoPointRow {
    double r = 0;
    int64_t hits = 0, trials = 0;
    double p_hat = 0;
};
struct TwoPointTable {
    std::vector<TwoPointRow> rows;
    FitResult fit;  // log <S_0 S_x> on log r
};

// <S_0 S_x> = P(0 <-> x) in the FK representation, estimated at the given
// L-inf radii along the +x axis, with a log-log decay fit.
TwoPointTable two_point(const MeshSpec& spec, const std::vector<double>& r_values, int64_t n_samples,
                        const FkRunParams& fk = {});

struct MeshStabilityResult {
    std::vector<double> etas;
    std::vector<std::vector<double>> phi;  // per-mesh samples of Phi(f)
    std::vector<double> variance;
    std::vector<std::vector<double>> ks;  // pairwise KS distances
};

MeshStabilityResult mesh_stability_scan(const TestFunction& f, const std::vector<double>& etas, double k, double p,
                                        uint64_t seed, int64_t n_samples, const FkRunParams& fk = {});

}  // namespace perc
