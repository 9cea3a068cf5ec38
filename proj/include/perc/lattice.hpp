#pragma once

// Lattice geometry, mesh specification, configurations and critical
// sampling for the two models: Bernoulli site percolation on the triangular
// lattice and the q=2 random-cluster (FK-Ising) model on the square lattice.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "perc/rng.hpp"

namespace perc {

enum class LatticeKind { TriangularSite, SquareFk };

inline const char* kind_name(LatticeKind k) {
    return k == LatticeKind::TriangularSite ? "triangular-site" : "square-fk";
}

// Self-dual point of the q=2 random-cluster model on Z^2.
inline double fk_critical_p() { return std::sqrt(2.0) / (1.0 + std::sqrt(2.0)); }

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sampling frame: lattice kind, mesh eta, region Lambda_k = [-k,k]^2,
// model parameter p, and the (seed, sample_index) pair that pins every draw.
struct MeshSpec {
    LatticeKind kind = LatticeKind::TriangularSite;
    double eta = 1.0 / 64;
    double k = 1.0;
    double p = 0.5;
    uint64_t seed = 0;
    uint64_t sample_index = 0;

    void validate() const {
        if (!(eta > 0.0)) throw ConfigError("mesh: eta must be positive");
        if (!(eta < k)) throw ConfigError("mesh: eta must be smaller than k");
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("mesh: p must lie in [0,1]");
    }
};

// Vertex enumeration for the region. Vertices carry exact integer
// coordinates (a, w) with
//   px = eta * a / 2,   py = eta * w * row_dy
// where row_dy = sqrt(3)/2 for the triangular lattice (w = y, a = 2x + y)
// and row_dy = 1/2 for the square lattice (w = 2y, a = 2x). All geometric
// predicates reduce to integer comparisons against scaled thresholds.
class LatticeGeometry {
  public:
    LatticeGeometry(LatticeKind kind, double eta, double k);

    LatticeKind kind() const { return kind_; }
    double eta() const { return eta_; }
    double k() const { return k_; }
    int32_t size() const { return n_; }

    int wmin() const { return wmin_; }
    int wmax() const { return wmax_; }
    int wstep() const { return wstep_; }

    // Row w: coordinates a run from row_amin(w) in steps of 2.
    int row_amin(int w) const { return amin_[(w - wmin_) / wstep_]; }
    int row_count(int w) const { return count_[(w - wmin_) / wstep_]; }
    int32_t row_offset(int w) const { return offset_[(w - wmin_) / wstep_]; }

    int32_t id(int a, int w) const {
        if (w < wmin_ || w > wmax_ || (w - wmin_) % wstep_ != 0) return -1;
        const int r = (w - wmin_) / wstep_;
        if (a < amin_[r] || a > amin_[r] + 2 * (count_[r] - 1) || ((a - amin_[r]) & 1)) return -1;
        return offset_[r] + (a - amin_[r]) / 2;
    }

    int a_of(int32_t v) const { return coord_a_[v]; }
    int w_of(int32_t v) const { return coord_w_[v]; }
    double px(int32_t v) const { return eta_ * 0.5 * coord_a_[v]; }
    double py(int32_t v) const { return eta_ * row_dy_ * coord_w_[v]; }
    double row_dy() const { return eta_ * row_dy_; }

    // CSR lattice adjacency (triangular: 6 neighbors; square: 4).
    const int32_t* nbr_begin(int32_t v) const { return nbrs_.data() + nbr_off_[v]; }
    const int32_t* nbr_end(int32_t v) const { return nbrs_.data() + nbr_off_[v + 1]; }

    // Square lattice only: bond b in [0, 2*size): b < size is the east bond
    // of vertex b, otherwise the north bond of vertex b - size. Invalid
    // slots (no neighbor in region) are flagged.
    int32_t bond_count() const { return 2 * n_; }
    bool bond_valid(int32_t b) const { return bond_other_[b] >= 0; }
    int32_t bond_from(int32_t b) const { return b < n_ ? b : b - n_; }
    int32_t bond_to(int32_t b) const { return bond_other_[b]; }

    // Vertex nearest the origin (the origin itself; it is always a vertex).
    int32_t origin() const { return origin_; }

    // Exact L-infinity membership: |px - cx| <= r and |py - cy| <= r.
    bool in_box(int32_t v, double cx, double cy, double r) const {
        return std::abs(px(v) - cx) <= r && std::abs(py(v) - cy) <= r;
    }

    // Iterate vertices with px in [x0,x1], py in [y0,y1] (closed box).
    template <typename Fn>
    void for_box(double x0, double x1, double y0, double y1, Fn&& fn) const {
        const double dy = eta_ * row_dy_;
        int wlo = static_cast<int>(std::ceil(y0 / dy - 1e-12));
        int whi = static_cast<int>(std::floor(y1 / dy + 1e-12));
        if (wlo < wmin_) wlo = wmin_;
        if (whi > wmax_) whi = wmax_;
        if (wstep_ == 2) {
            if (wlo & 1) ++wlo;
            if (whi & 1) --whi;
        }
        for (int w = wlo; w <= whi; w += wstep_) {
            const int r = (w - wmin_) / wstep_;
            if (count_[r] == 0) continue;
            const double inv = 2.0 / eta_;
            int alo = static_cast<int>(std::ceil(x0 * inv - 1e-12));
            int ahi = static_cast<int>(std::floor(x1 * inv + 1e-12));
            const int am = amin_[r], aM = amin_[r] + 2 * (count_[r] - 1);
            if (alo < am) alo = am;
            if (ahi > aM) ahi = aM;
            if (((alo - am) & 1) != 0) ++alo;
            for (int a = alo; a <= ahi; a += 2) fn(offset_[r] + (a - am) / 2);
        }
    }

    // Shared geometry cache (immutable objects, reused across samples).
    static std::shared_ptr<const LatticeGeometry> get(LatticeKind kind, double eta, double k);

  private:
    LatticeKind kind_;
    double eta_, k_, row_dy_;
    int wmin_ = 0, wmax_ = 0, wstep_ = 1;
    int32_t n_ = 0, origin_ = -1;
    std::vector<int> amin_, count_;
    std::vector<int32_t> offset_;
    std::vector<int> coord_a_, coord_w_;
    std::vector<int32_t> nbr_off_, nbrs_;
    std::vector<int32_t> bond_other_;
};

using GeometryPtr = std::shared_ptr<const LatticeGeometry>;

// Plaquette-center dual of the square-lattice patch, used for dual (blue)
// arms in the FK model. Dual vertex (x, y) sits at eta*(x+1/2, y+1/2).
struct DualGeometry {
    int xmin, ymin, nx, ny;
    double eta;

    int32_t size() const { return static_cast<int32_t>(nx) * ny; }
    int32_t id(int x, int y) const {
        if (x < xmin || x >= xmin + nx || y < ymin || y >= ymin + ny) return -1;
        return static_cast<int32_t>(y - ymin) * nx + (x - xmin);
    }
    int x_of(int32_t d) const { return xmin + d % nx; }
    int y_of(int32_t d) const { return ymin + d / nx; }
    double px(int32_t d) const { return eta * (x_of(d) + 0.5); }
    double py(int32_t d) const { return eta * (y_of(d) + 0.5); }
};

struct SiteConfig {
    MeshSpec spec;
    GeometryPtr geom;
    std::vector<uint64_t> red;  // bit per vertex, 1 = red (open)

    bool is_red(int32_t v) const { return (red[v >> 6] >> (v & 63)) & 1; }
    void set_red(int32_t v, bool r) {
        const uint64_t m = uint64_t(1) << (v & 63);
        if (r)
            red[v >> 6] |= m;
        else
            red[v >> 6] &= ~m;
    }
};

struct FkConfig {
    MeshSpec spec;
    GeometryPtr geom;
    std::vector<uint64_t> open;   // bit per bond slot (2*size), 1 = open
    std::vector<uint64_t> spin;   // bit per vertex, 1 = +1
    uint64_t sign_seed = 0;       // key for the Edwards-Sokal cluster signs
    int sweeps_used = 0;

    bool bond_open(int32_t b) const { return (open[b >> 6] >> (b & 63)) & 1; }
    void set_bond(int32_t b, bool o) {
        const uint64_t m = uint64_t(1) << (b & 63);
        if (o)
            open[b >> 6] |= m;
        else
            open[b >> 6] &= ~m;
    }
    int spin_of(int32_t v) const { return ((spin[v >> 6] >> (v & 63)) & 1) ? +1 : -1; }
    void set_spin(int32_t v, int s) {
        const uint64_t m = uint64_t(1) << (v & 63);
        if (s > 0)
            spin[v >> 6] |= m;
        else
            spin[v >> 6] &= ~m;
    }

    DualGeometry dual() const;
};

// --- sampling --------------------------------------------------------------

// Independent Bernoulli(p) colors; bit-exact function of (seed, sample_index).
SiteConfig sample_bernoulli(const MeshSpec& spec);

// Swendsen-Wang chain from a cold start, `sweeps` full updates, then an
// Edwards-Sokal re-coloring keyed by sign_seed (cluster signs depend only on
// the cluster's minimal vertex, not on enumeration order).
FkConfig sample_fk_ising(const MeshSpec& spec, int sweeps, std::optional<uint64_t> sign_seed = std::nullopt);

// Streamed variant for Monte Carlo: logical chain `stream` out of
// `n_streams`, burn_in sweeps once, then `gap` sweeps between samples.
// sample_index selects (stream = i % n_streams, step = i / n_streams).
class FkChain {
  public:
    FkChain(const MeshSpec& spec, uint32_t chain_id, int burn_in, int gap);
    // Advance to the (step+1)-th retained sample of this chain; steps must be
    // requested in increasing order.
    FkConfig sample(uint64_t step, uint64_t sample_index, std::optional<uint64_t> sign_seed = std::nullopt);

  private:
    void sweep();
    MeshSpec spec_;
    GeometryPtr geom_;
    uint32_t chain_id_;
    int burn_in_, gap_;
    uint64_t sweeps_done_ = 0;
    std::vector<uint64_t> spin_;
    std::vector<uint64_t> open_;
    std::vector<int32_t> uf_;  // scratch
};

// --- pi_1 normalization -----------------------------------------------------

struct NormEntry {
    double pi1_hat = 0.0;
    int64_t n_samples = 0;
    double ci_halfwidth = 0.0;
};

// Monte Carlo estimate of P(0 <-> boundary of Lambda_1), the normalizer of
// the counting measures. Requires k >= 1 + eta so the event is decided
// inside the region. For square-fk, `sweeps`/chain parameters control the
// sampler.
NormEntry estimate_pi1_normalization(const MeshSpec& spec, int64_t n_samples, int sweeps = 200, int gap = 10,
                                     int n_streams = 8);

class NormalizationTable {
  public:
    static std::string key_of(LatticeKind kind, double eta);

    void merge(LatticeKind kind, double eta, const NormEntry& e);  // count-weighted pooling
    std::optional<NormEntry> lookup(LatticeKind kind, double eta) const;

    std::string to_json() const;
    static NormalizationTable from_json(const std::string& text);
    void save(const std::string& path) const;
    static NormalizationTable load(const std::string& path);

    const std::map<std::string, NormEntry>& entries() const { return entries_; }

  private:
    std::map<std::string, NormEntry> entries_;
};

// --- binary persistence -----------------------------------------------------

// Bit-packed format: 16-byte header (magic "PERCLAB1", u32 version, u32
// kind), MeshSpec as fixed-width fields, then 1 bit per site (triangular)
// or per bond slot plus 1 bit per spin (square-fk), row-major.
void save_config(const SiteConfig& c, const std::string& path);
void save_config(const FkConfig& c, const std::string& path);
SiteConfig load_site_config(const std::string& path);
FkConfig load_fk_config(const std::string& path);
LatticeKind peek_config_kind(const std::string& path);

// Wilson score interval half-width at 95%.
double wilson_halfwidth(int64_t hits, int64_t trials);

}  // namespace perc
