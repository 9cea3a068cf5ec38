#pragma once

// Cluster identification and set-distance computations: union-find labeling
// with exact integer bounding boxes, domain restrictions ("pieces"), largest
// clusters, Hausdorff and bottleneck collection distances.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "perc/box.hpp"
#include "perc/lattice.hpp"

namespace perc {

// Which site set a ClusterSet labels. Red is the model's open phase
// (red sites / open-bond components); blue is the dual phase (blue sites /
// dual-closed components on the plaquette lattice).
enum class Medium { Red, Blue };

struct ClusterRecord {
    int32_t min_vertex = -1;  // smallest (w, a)-lexicographic vertex id
    int64_t size = 0;
    int amin = 0, amax = 0, wmin = 0, wmax = 0;  // exact integer bbox
};

class ClusterSet {
  public:
    ClusterSet() = default;

    int32_t n_clusters() const { return static_cast<int32_t>(recs_.size()); }
    int32_t label_of(int32_t v) const { return label_[v]; }
    const ClusterRecord& rec(int32_t cid) const { return recs_[cid]; }
    int32_t vertex_count() const { return static_cast<int32_t>(label_.size()); }
    Medium medium() const { return medium_; }

    // Physical coordinates of the integer bbox.
    double bb_x0(int32_t cid) const { return 0.5 * eta_ * recs_[cid].amin; }
    double bb_x1(int32_t cid) const { return 0.5 * eta_ * recs_[cid].amax; }
    double bb_y0(int32_t cid) const { return row_dy_ * recs_[cid].wmin; }
    double bb_y1(int32_t cid) const { return row_dy_ * recs_[cid].wmax; }
    double diameter(int32_t cid) const {
        const auto& r = recs_[cid];
        return std::max(0.5 * eta_ * (r.amax - r.amin), row_dy_ * (r.wmax - r.wmin));
    }

    // Does the cluster own a vertex v with ||v - z||_inf >= b? Exact via the
    // bbox: some coordinate extreme lies at distance >= b from z.
    bool exits_box(int32_t cid, double zx, double zy, double b) const {
        return bb_x1(cid) >= zx + b || bb_x0(cid) <= zx - b || bb_y1(cid) >= zy + b || bb_y0(cid) <= zy - b;
    }
    // Is the cluster contained in the closed box (vertex centers)?
    bool inside(int32_t cid, const Box& d) const {
        return bb_x0(cid) >= d.x0 && bb_x1(cid) <= d.x1 && bb_y0(cid) >= d.y0 && bb_y1(cid) <= d.y1;
    }

    double eta() const { return eta_; }
    double row_dy() const { return row_dy_; }

    // Vertex lists of all clusters, materialized in one O(V) pass.
    std::vector<std::vector<int32_t>> all_vertex_lists() const;
    std::vector<int32_t> vertices_of(int32_t cid) const;

    friend ClusterSet find_clusters(const SiteConfig&);
    friend ClusterSet find_clusters(const SiteConfig&, Medium);
    friend ClusterSet find_clusters(const FkConfig&);
    friend ClusterSet find_dual_clusters(const FkConfig&);

  private:
    Medium medium_ = Medium::Red;
    double eta_ = 1.0, row_dy_ = 1.0;
    std::vector<int32_t> label_;
    std::vector<ClusterRecord> recs_;
};

// Red clusters of a site configuration (blue sites stay unlabeled).
ClusterSet find_clusters(const SiteConfig& c);
// Either phase of a site configuration.
ClusterSet find_clusters(const SiteConfig& c, Medium m);
// Open-bond components of an FK configuration; every site has a label
// (isolated sites are singleton clusters).
ClusterSet find_clusters(const FkConfig& c);
// Dual-closed components on the plaquette lattice; labels are indexed by
// dual vertex id (see FkConfig::dual()).
ClusterSet find_dual_clusters(const FkConfig& c);

struct ClusterCollection {
    const ClusterSet* cs = nullptr;
    Box domain;
    double delta = 0;
    std::vector<int32_t> members;  // cluster ids, decreasing size, ties by min vertex
};

// Clusters wholly inside `domain` with L-inf diameter >= delta.
ClusterCollection clusters_in_domain(const ClusterSet& cs, const Box& domain, double delta);

struct Piece {
    std::vector<int32_t> vertices;
    int64_t size = 0;
    int amin = 0, amax = 0, wmin = 0, wmax = 0;
    int32_t min_vertex = -1;
    double diameter = 0;
};

struct PieceCollection {
    Box domain;
    double delta = 0;
    std::vector<Piece> pieces;  // decreasing size, ties by min vertex
};

// Connected components of (red phase intersected with domain) with diameter
// >= delta: clusters wholly inside plus clipped components of crossing
// clusters.
PieceCollection pieces_in_domain(const SiteConfig& c, const Box& domain, double delta);
PieceCollection pieces_in_domain(const FkConfig& c, const Box& domain, double delta);

// The `count` largest pieces by vertex count (ties by min vertex).
std::vector<Piece> largest_clusters(const SiteConfig& c, const Box& domain, int count);
std::vector<Piece> largest_clusters(const FkConfig& c, const Box& domain, int count);

// Exact Hausdorff distance on the L-infinity metric between finite point
// sets. Throws DomainError on empty input.
struct PointSet {
    std::vector<double> xs, ys;
    size_t size() const { return xs.size(); }
};
double hausdorff_distance(const PointSet& a, const PointSet& b);

// Bottleneck collection distance: min over bijections of the max pairwise
// Hausdorff distance; +infinity when the cardinalities differ.
double collection_distance(const std::vector<PointSet>& s, const std::vector<PointSet>& t);

// JSON export of a piece collection; vertex lists are suppressed for pieces
// larger than `vertex_list_limit` (0 = always suppress, <0 = never).
std::string pieces_to_json(const PieceCollection& pc, const LatticeGeometry& geom, int64_t vertex_list_limit);

}  // namespace perc
