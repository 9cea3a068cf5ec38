#pragma once

// Normalized counting measures, one-arm measures, box-sum approximations,
// recovered measures, and measure distances (total variation, Prokhorov
// bounds).

#include <cstdint>
#include <string>
#include <vector>

#include "perc/box.hpp"
#include "perc/clusters.hpp"
#include "perc/lattice.hpp"

namespace perc {

struct Normalizer {
    double eta = 0;       // mesh the normalizer belongs to
    double pi1_hat = 1;   // MC estimate of pi_1
    double ci = 0;        // its Wilson half-width, carried for provenance
};

// Finite point measure with one uniform atom weight. Atom positions are
// exact doubles (lattice or grid points); equality of positions is exact
// bit equality, which the constructions guarantee for shared lattices.
struct CountingMeasure {
    std::vector<double> xs, ys;
    double weight = 0;
    Normalizer norm;

    size_t atom_count() const { return xs.size(); }
    double total_mass() const { return weight * static_cast<double>(xs.size()); }
    double mass_in(const Box& b) const;
    // Sum of f over atoms times weight.
    template <typename F>
    double integrate(F&& f) const {
        double s = 0;
        for (size_t i = 0; i < xs.size(); ++i) s += f(xs[i], ys[i]);
        return weight * s;
    }
};

// Atom weight eta^2 / pi1_hat per vertex of the given cluster.
CountingMeasure counting_measure(const LatticeGeometry& geom, const std::vector<int32_t>& vertices,
                                 const NormEntry& norm);

// Counting measure of the vertices of the half-open box Lambda'_a(z) with a
// red arm to the boundary of Lambda_b(z). Site and FK variants share the
// cluster-set bbox reach test.
CountingMeasure one_arm_measure(const SiteConfig& c, const ClusterSet& cs, double zx, double zy, double a, double b,
                                const NormEntry& norm);
CountingMeasure one_arm_measure(const FkConfig& c, const ClusterSet& cs, double zx, double zy, double a, double b,
                                const NormEntry& norm);

// Sum of one-arm measures over the 3^-n tiling: tiles whose tripled box
// meets S contribute their half-open-box atoms with arms to distance
// delta/2 - 3^-n. Requires 10 * 3^-n < delta.
CountingMeasure box_sum_measure(const SiteConfig& c, const ClusterSet& cs, const std::vector<int32_t>& s_vertices,
                                int n, double delta, const NormEntry& norm);

// One atom of weight 4 psi^2 / pi1(2psi, 1) at each grid center psi*z whose
// psi/2-box meets the point set.
CountingMeasure recovered_measure(const std::vector<double>& xs, const std::vector<double>& ys, double psi,
                                  double pi1_2psi, double eta);

// Exact total variation of the signed difference on the union of atom
// positions.
double tv_distance(const CountingMeasure& m1, const CountingMeasure& m2);

// Upper bound on the Prokhorov distance: bin at resolution rho, solve the
// binned transport feasibility exactly, add the binning slack rho.
double prokhorov_upper(const CountingMeasure& m1, const CountingMeasure& m2, double rho);

// Exact Prokhorov distance for small instances (<= 12 atoms per measure) by
// exhaustive subset search; the test-side oracle for prokhorov_upper.
double prokhorov_exact_small(const CountingMeasure& m1, const CountingMeasure& m2);

// CSV (x,y,weight) plus a JSON sidecar carrying (eta, pi1_hat, ci).
void write_measure_csv(const CountingMeasure& m, const std::string& path_csv);

}  // namespace perc
