#pragma once

// The eps-box graph G_eps, good subgraphs, the regularity events NC / NA / E,
// the cluster <-> good-subgraph correspondence check, and the refinement
// index n_0.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perc/arms.hpp"
#include "perc/clusters.hpp"
#include "perc/lattice.hpp"

namespace perc {

// Vertex set B_eps: boxes Lambda_{eps/2}(eps z) for z in Lambda_{ceil(1/eps)}
// of the integer grid. Boxes are closed; a vertex on a shared boundary
// belongs to every box containing it. Edges: grid neighbors (L-inf distance
// 1 in z) or boxes meeting a common red cluster.
class BoxGraph {
  public:
    BoxGraph() = default;

    double eps() const { return eps_; }
    int zmax() const { return zmax_; }
    int side() const { return 2 * zmax_ + 1; }
    int32_t box_count() const { return static_cast<int32_t>(side()) * side(); }

    int32_t box_id(int zx, int zy) const {
        if (std::abs(zx) > zmax_ || std::abs(zy) > zmax_) return -1;
        return static_cast<int32_t>(zy + zmax_) * side() + (zx + zmax_);
    }
    int zx_of(int32_t b) const { return b % side() - zmax_; }
    int zy_of(int32_t b) const { return b / side() - zmax_; }
    double cx_of(int32_t b) const { return eps_ * zx_of(b); }
    double cy_of(int32_t b) const { return eps_ * zy_of(b); }

    // sorted global red-cluster ids meeting the box
    const std::vector<int32_t>& clusters_of(int32_t b) const { return clusters_[b]; }

    bool grid_adjacent(int32_t b1, int32_t b2) const {
        return b1 != b2 && std::abs(zx_of(b1) - zx_of(b2)) <= 1 && std::abs(zy_of(b1) - zy_of(b2)) <= 1;
    }
    bool red_connected(int32_t b1, int32_t b2) const;
    bool adjacent(int32_t b1, int32_t b2) const { return grid_adjacent(b1, b2) || red_connected(b1, b2); }

    friend BoxGraph build_box_graph(const SiteConfig&, const ClusterSet&, double);

  private:
    double eps_ = 0;
    int zmax_ = 0;
    std::vector<std::vector<int32_t>> clusters_;
};

// Requires eta < eps and Lambda_{1+2 eps} inside the region.
BoxGraph build_box_graph(const SiteConfig& c, const ClusterSet& red, double eps);

// Boxes of the full integer grid meeting the point set (the vertex set of
// K_eps(S); the graph is complete by definition). Returned as sorted
// (zx, zy) pairs, not restricted to B_eps.
std::vector<std::pair<int, int>> k_eps_boxes(const std::vector<double>& xs, const std::vector<double>& ys,
                                             double eps);

struct GoodSubgraph {
    std::vector<int32_t> boxes;  // sorted box ids in the BoxGraph
    double diam_u = 0;           // diameter of U(H)
};

// All maximal complete subgraphs of G_eps satisfying the goodness
// conditions: U(H) inside Lambda_1, diam(U) >= delta, maximality in G_eps,
// and the (010) strip connections between extreme box pairs. Deterministic
// order (lexicographic minimal box). Requires 10 eps < delta < 1.
std::vector<GoodSubgraph> good_subgraphs(const SiteConfig& c, const ClusterSet& red, const BoxGraph& g,
                                         double delta);

// Conditions 1-5 for one explicit box set (used by tests to cross-check the
// enumeration against exhaustive clique search).
bool is_good_subgraph(const SiteConfig& c, const BoxGraph& g, const std::vector<int32_t>& boxes, double delta);

struct ApproxEvents {
    bool nc = false;
    bool na1 = false;
    bool na2 = false;
    bool nc_known = true;  // kNaE leaves nc undecided when NA already failed
    bool na() const { return na1 && na2; }
    bool e() const { return na() && nc; }
};

// kFull decides all three events; kNaE always decides NA (na2 first, then
// na1, each with early exit) and evaluates NC only when NA holds, which is
// what the Monte Carlo scans need.
enum class EventDetail { kFull, kNaE };

// Exact evaluation of NC, NA1, NA2 by scanning the defining arm events over
// all grid centers and sides. Requires 10 eps < delta < 1.
ApproxEvents detect_events(const ArmContext& ctx, double eps, double delta, EventDetail detail = EventDetail::kFull);

struct CorrespondenceReport {
    ApproxEvents events;
    bool skipped = false;  // E failed; correspondence not evaluated
    bool passed = false;
    int n_good = 0;
    int n_clusters = 0;
    // hard invariants, evaluated when their events hold
    bool lemma49_ok = true;        // |good| <= 32 eps^-2 on NA
    bool diam_gap_ok = true;       // no cluster diameter in (delta-2eps, delta) on NC
    bool leftmost_disjoint = true; // L(K_eps(C)) pairwise disjoint on NA
    std::string counterexample;    // JSON fragment on failure
};

// Both directions of the bijection between good subgraphs and K_eps of
// clusters in C_1(delta), on samples where E holds.
CorrespondenceReport verify_correspondence(const SiteConfig& c, const ArmContext& ctx, double eps, double delta);

// Smallest n with E(3^-n', delta) for all n' from n up to the finest scale
// with 10 * 3^-n' > eta; nullopt if none.
std::optional<int> refinement_index(const ArmContext& ctx, double delta);

// Scale range scanned by refinement_index for the context's mesh.
std::pair<int, int> refinement_scale_range(double eta, double delta);

}  // namespace perc
