#pragma once

// Arm events with colour sequences: detection of vertex-disjoint crossings
// of annuli with prescribed cyclic colour order, half-plane variants, and
// Monte Carlo arm probabilities.
//
// Discrete conventions (shared with the test oracles):
//   * A colour-c arm of A(z; a, b) is a c-path whose first vertex (anchor)
//     lies in the closed box Lambda_a(z) and has a lattice neighbor outside,
//     whose remaining vertices stay outside Lambda_a(z), and whose last
//     vertex has L-inf distance >= b from z.
//   * Arms of the same colour are pairwise vertex-disjoint; opposite colours
//     never share vertices (site colours / primal vs dual).
//   * The cyclic (counterclockwise) order of a disjoint family is the ccw
//     angular order of the anchors around z, ties broken by vertex id.
//   * Half-plane arms are confined to H_i(z, a) dilated by one lattice step;
//     their linear order starts at the side's outward axis.
//   * The event with whole-plane part kappa and half-plane part kappa' is
//     the conjunction of the full-annulus event for the concatenation
//     kappa v kappa' and the confined event for kappa' (the paper's displayed
//     product form).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perc/clusters.hpp"
#include "perc/lattice.hpp"

namespace perc {

struct ColourSequence {
    std::vector<uint8_t> bits;  // 1 = red/open, 0 = blue/dual-closed

    ColourSequence() = default;
    ColourSequence(std::initializer_list<int> b) {
        for (int x : b) bits.push_back(static_cast<uint8_t>(x));
    }
    static ColourSequence parse(const std::string& s) {
        ColourSequence c;
        for (char ch : s) {
            if (ch != '0' && ch != '1') throw ParamError("colour sequence must be over {0,1}");
            c.bits.push_back(ch == '1');
        }
        return c;
    }
    size_t size() const { return bits.size(); }
    bool empty() const { return bits.empty(); }
    std::string str() const {
        std::string s;
        for (uint8_t b : bits) s.push_back(b ? '1' : '0');
        return s;
    }
};

struct ArmQuery {
    double zx = 0, zy = 0;
    double a = 0, b = 0;
    ColourSequence kappa;     // whole-plane part
    ColourSequence kappa_hp;  // half-plane part, may be empty
    int side = 0;             // 1=left..4=upper half-plane, 0 = none

    void validate() const {
        if (!(a > 0) || !(a < b)) throw ParamError("arm query: need 0 < a < b");
        if (kappa_hp.empty() != (side == 0)) throw ParamError("arm query: side present iff kappa_hp non-empty");
        if (side < 0 || side > 4) throw ParamError("arm query: side must be 1..4");
        if (kappa.empty() && kappa_hp.empty()) throw ParamError("arm query: empty colour sequence");
    }
};

struct ArmEstimate {
    ArmQuery query;
    int64_t hits = 0;
    int64_t trials = 0;
    double p_hat = 0;
    double ci_halfwidth = 0;
};

// Per-configuration context: global red and blue (dual for FK) cluster sets
// reused by the fast single-arm paths and the detection prefilters.
struct ArmContext {
    const SiteConfig* site = nullptr;
    const FkConfig* fk = nullptr;
    ClusterSet red;
    ClusterSet blue;
    const LatticeGeometry* geom = nullptr;
    DualGeometry dual{};  // valid iff fk != nullptr
};

ArmContext make_arm_context(const SiteConfig& c);
ArmContext make_arm_context(const FkConfig& c);

// Exact detection of the event A^side_{kappa, kappa_hp}(z; a, b).
bool detect_arms(const ArmContext& ctx, const ArmQuery& q);
bool detect_arms(const SiteConfig& c, const ArmQuery& q);
bool detect_arms(const FkConfig& c, const ArmQuery& q);

// Cheap necessary condition: anchors matching the colour pattern whose
// *global* clusters reach distance b (no confinement, no disjointness).
// detect_arms(q) implies arm_pattern_prefilter(q); batch scans gate on it.
bool arm_pattern_prefilter(const ArmContext& ctx, const ArmQuery& q);

// FK chain parameters for Monte Carlo estimates.
struct FkRunParams {
    int burn_in = 200;
    int gap = 10;
    int n_streams = 8;
};

// Monte Carlo estimate with a Wilson 95% interval; trials use consecutive
// sample indices starting at spec.sample_index.
ArmEstimate arm_probability(const MeshSpec& spec, const ArmQuery& q, int64_t n_samples,
                            const FkRunParams& fk = {});

// pi1(a,b) pi1(b,c) / pi1(a,c), all three estimated on the same samples.
double quasi_mult_ratio(const MeshSpec& spec, double a, double b, double c, int64_t n_samples,
                        const FkRunParams& fk = {});

// |V_a|: vertices of Lambda_{a/2} connected to the boundary of Lambda_a.
int64_t count_connected_vertices(const ArmContext& ctx, double a);

// |W_a|: vertices v of Lambda_1 connected to the boundary of Lambda_a(v).
int64_t count_local_arm_vertices(const ArmContext& ctx, double a);

// CSV row block for arm estimates (external interface).
std::string arm_estimates_csv(const std::vector<ArmEstimate>& rows, const MeshSpec& spec);

}  // namespace perc
