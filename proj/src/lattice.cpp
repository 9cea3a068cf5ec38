#include "perc/lattice.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <mutex>

#include "json.hpp"

namespace perc {

namespace {
constexpr double kGeomEps = 1e-9;

int floor_with_slack(double x) { return static_cast<int>(std::floor(x + kGeomEps)); }
}  // namespace

LatticeGeometry::LatticeGeometry(LatticeKind kind, double eta, double k) : kind_(kind), eta_(eta), k_(k) {
    if (!(eta > 0.0) || !(eta < k)) throw ConfigError("geometry: need 0 < eta < k");
    row_dy_ = (kind == LatticeKind::TriangularSite) ? std::sqrt(3.0) / 2.0 : 0.5;

    const double A = 2.0 * k / eta;  // |a| <= A
    const int a_cap = floor_with_slack(A);
    if (kind == LatticeKind::TriangularSite) {
        wstep_ = 1;
        const int Y = floor_with_slack(k / (eta * row_dy_));
        wmin_ = -Y;
        wmax_ = Y;
    } else {
        wstep_ = 2;
        const int Y = floor_with_slack(k / eta);
        wmin_ = -2 * Y;
        wmax_ = 2 * Y;
    }

    const int nrows = (wmax_ - wmin_) / wstep_ + 1;
    amin_.resize(nrows);
    count_.resize(nrows);
    offset_.resize(nrows);
    int32_t acc = 0;
    for (int r = 0; r < nrows; ++r) {
        const int w = wmin_ + r * wstep_;
        const int parity = (kind == LatticeKind::TriangularSite) ? (w & 1) : 0;
        int lo = -a_cap, hi = a_cap;
        if (((lo - parity) & 1) != 0) ++lo;
        if (((hi - parity) & 1) != 0) --hi;
        amin_[r] = lo;
        count_[r] = (hi >= lo) ? (hi - lo) / 2 + 1 : 0;
        offset_[r] = acc;
        acc += count_[r];
    }
    n_ = acc;

    coord_a_.resize(n_);
    coord_w_.resize(n_);
    for (int r = 0; r < nrows; ++r) {
        const int w = wmin_ + r * wstep_;
        for (int i = 0; i < count_[r]; ++i) {
            coord_a_[offset_[r] + i] = amin_[r] + 2 * i;
            coord_w_[offset_[r] + i] = w;
        }
    }
    origin_ = id(0, 0);

    static const int tri_d[6][2] = {{2, 0}, {-2, 0}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};
    static const int sq_d[4][2] = {{2, 0}, {-2, 0}, {0, 2}, {0, -2}};
    const auto* dirs = (kind == LatticeKind::TriangularSite) ? tri_d : sq_d;
    const int ndir = (kind == LatticeKind::TriangularSite) ? 6 : 4;

    nbr_off_.assign(n_ + 1, 0);
    for (int32_t v = 0; v < n_; ++v) {
        int deg = 0;
        for (int d = 0; d < ndir; ++d)
            if (id(coord_a_[v] + dirs[d][0], coord_w_[v] + dirs[d][1]) >= 0) ++deg;
        nbr_off_[v + 1] = nbr_off_[v] + deg;
    }
    nbrs_.resize(nbr_off_[n_]);
    for (int32_t v = 0; v < n_; ++v) {
        int32_t* out = nbrs_.data() + nbr_off_[v];
        for (int d = 0; d < ndir; ++d) {
            const int32_t u = id(coord_a_[v] + dirs[d][0], coord_w_[v] + dirs[d][1]);
            if (u >= 0) *out++ = u;
        }
    }

    if (kind == LatticeKind::SquareFk) {
        bond_other_.assign(2 * static_cast<size_t>(n_), -1);
        for (int32_t v = 0; v < n_; ++v) {
            bond_other_[v] = id(coord_a_[v] + 2, coord_w_[v]);
            bond_other_[n_ + v] = id(coord_a_[v], coord_w_[v] + 2);
        }
    }
}

GeometryPtr LatticeGeometry::get(LatticeKind kind, double eta, double k) {
    static std::mutex mu;
    static std::map<std::tuple<int, double, double>, GeometryPtr> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto key = std::make_tuple(static_cast<int>(kind), eta, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto g = std::make_shared<LatticeGeometry>(kind, eta, k);
    cache[key] = g;
    return g;
}

DualGeometry FkConfig::dual() const {
    const auto& g = *geom;
    // Plaquette (x,y) needs all four corner vertices; the patch is a full
    // rectangle, so plaquettes form the (nx-1) x (ny-1) inner grid.
    const int X = (g.row_count(0) - 1) / 2 * 1;  // a runs -2X..2X step 2
    const int xmax = (g.row_amin(0) + 2 * (g.row_count(0) - 1)) / 2;
    const int xmin = g.row_amin(0) / 2;
    const int ymin = g.wmin() / 2, ymax = g.wmax() / 2;
    (void)X;
    DualGeometry d;
    d.eta = g.eta();
    d.xmin = xmin;
    d.ymin = ymin;
    d.nx = xmax - xmin;  // plaquettes span xmin .. xmax-1
    d.ny = ymax - ymin;
    return d;
}

// --- Bernoulli sampling ------------------------------------------------------

SiteConfig sample_bernoulli(const MeshSpec& spec) {
    spec.validate();
    if (spec.kind != LatticeKind::TriangularSite)
        throw ConfigError("sample_bernoulli: spec.kind must be triangular-site");
    SiteConfig c;
    c.spec = spec;
    c.geom = LatticeGeometry::get(spec.kind, spec.eta, spec.k);
    const int32_t n = c.geom->size();
    c.red.assign((n + 63) / 64, 0);

    if (spec.p <= 0.0) return c;
    if (spec.p >= 1.0) {
        std::fill(c.red.begin(), c.red.end(), ~uint64_t(0));
        const int tail = n & 63;
        if (tail) c.red.back() = (uint64_t(1) << tail) - 1;
        return c;
    }
    if (spec.p == 0.5) {
        // One Philox block = 128 fair bits = 128 sites.
        for (size_t wi = 0; wi < c.red.size(); wi += 2) {
            const auto b = philox_block(spec.seed, spec.sample_index, kStreamSiteColor, wi / 2);
            c.red[wi] = static_cast<uint64_t>(b[0]) | (static_cast<uint64_t>(b[1]) << 32);
            if (wi + 1 < c.red.size()) c.red[wi + 1] = static_cast<uint64_t>(b[2]) | (static_cast<uint64_t>(b[3]) << 32);
        }
        const int tail = n & 63;
        if (tail) c.red.back() &= (uint64_t(1) << tail) - 1;
        return c;
    }

    const uint64_t thr = bernoulli_threshold(spec.p);
    for (int32_t v0 = 0; v0 < n; v0 += 4) {
        const auto b = philox_block(spec.seed, spec.sample_index, kStreamSiteColor, v0 / 4);
        const int lim = std::min<int32_t>(4, n - v0);
        for (int l = 0; l < lim; ++l)
            if (b[l] < thr) c.red[(v0 + l) >> 6] |= uint64_t(1) << ((v0 + l) & 63);
    }
    return c;
}

// --- Swendsen-Wang -----------------------------------------------------------

namespace {

inline int32_t uf_find(std::vector<int32_t>& uf, int32_t v) {
    int32_t r = v;
    while (uf[r] != r) r = uf[r];
    while (uf[v] != r) {
        const int32_t nxt = uf[v];
        uf[v] = r;
        v = nxt;
    }
    return r;
}

inline bool bit_get(const std::vector<uint64_t>& bits, int32_t i) { return (bits[i >> 6] >> (i & 63)) & 1; }
inline void bit_set(std::vector<uint64_t>& bits, int32_t i, bool x) {
    const uint64_t m = uint64_t(1) << (i & 63);
    if (x)
        bits[i >> 6] |= m;
    else
        bits[i >> 6] &= ~m;
}

}  // namespace

FkChain::FkChain(const MeshSpec& spec, uint32_t chain_id, int burn_in, int gap)
    : spec_(spec), chain_id_(chain_id), burn_in_(burn_in), gap_(gap) {
    spec_.validate();
    if (spec.kind != LatticeKind::SquareFk) throw ConfigError("FkChain: spec.kind must be square-fk");
    geom_ = LatticeGeometry::get(spec.kind, spec.eta, spec.k);
    const int32_t n = geom_->size();
    spin_.assign((n + 63) / 64, 0);
    open_.assign((2 * static_cast<size_t>(n) + 63) / 64, 0);
    uf_.resize(n);
    for (int32_t v = 0; v < n; ++v) bit_set(spin_, v, item_u32(spec_.seed, chain_id_, kStreamSwInit, v) & 1);
}

void FkChain::sweep() {
    const auto& g = *geom_;
    const int32_t n = g.size();
    const int32_t nb = g.bond_count();
    const uint64_t thr = bernoulli_threshold(spec_.p);
    const uint64_t base = sweeps_done_ * static_cast<uint64_t>(nb);

    // Bond pass: open each equal-spin bond with probability p. One Philox
    // block covers four consecutive bond slots.
    for (int32_t b0 = 0; b0 < nb; b0 += 4) {
        const auto blk = philox_block(spec_.seed, chain_id_, kStreamSwBond, (base + b0) / 4);
        const int lim = std::min<int32_t>(4, nb - b0);
        for (int l = 0; l < lim; ++l) {
            const int32_t b = b0 + l;
            const int32_t u = g.bond_from(b), v = g.bond_to(b);
            const bool open = v >= 0 && bit_get(spin_, u) == bit_get(spin_, v) && blk[l] < thr;
            bit_set(open_, b, open);
        }
    }

    // Cluster pass: union over open bonds, then a fresh fair spin per
    // cluster keyed by its minimal vertex (ascending scan sees roots first).
    for (int32_t v = 0; v < n; ++v) uf_[v] = v;
    for (int32_t b = 0; b < nb; ++b) {
        if (!bit_get(open_, b)) continue;
        const int32_t ru = uf_find(uf_, g.bond_from(b)), rv = uf_find(uf_, g.bond_to(b));
        if (ru != rv) uf_[std::max(ru, rv)] = std::min(ru, rv);  // min-rooted
    }
    const uint64_t sbase = sweeps_done_ * static_cast<uint64_t>(n);
    for (int32_t v = 0; v < n; ++v) {
        const int32_t r = uf_find(uf_, v);
        if (r == v)
            bit_set(spin_, v, item_u32(spec_.seed, chain_id_, kStreamSwSpin, sbase + v) & 1);
        else
            bit_set(spin_, v, bit_get(spin_, r));
    }
    ++sweeps_done_;
}

FkConfig FkChain::sample(uint64_t step, uint64_t sample_index, std::optional<uint64_t> sign_seed) {
    const int64_t target = burn_in_ + static_cast<int64_t>(step) * gap_;
    while (static_cast<int64_t>(sweeps_done_) < std::max<int64_t>(target, burn_in_)) sweep();

    FkConfig c;
    c.spec = spec_;
    c.spec.sample_index = sample_index;
    c.geom = geom_;
    c.sign_seed = sign_seed.value_or(spec_.seed ^ 0x5349474eull);  // "SIGN"
    c.sweeps_used = static_cast<int>(sweeps_done_);

    const auto& g = *geom_;
    const int32_t n = g.size();
    const int32_t nb = g.bond_count();
    c.open.assign((2 * static_cast<size_t>(n) + 63) / 64, 0);
    c.spin.assign((n + 63) / 64, 0);

    // Emission bond draw (independent stream so the chain itself is not
    // perturbed), then Edwards-Sokal re-coloring keyed by sign_seed and the
    // cluster's minimal vertex.
    const uint64_t thr = bernoulli_threshold(spec_.p);
    const uint64_t base = sample_index * static_cast<uint64_t>(nb);
    for (int32_t b0 = 0; b0 < nb; b0 += 4) {
        const auto blk = philox_block(spec_.seed, chain_id_, kStreamSwEmit, (base + b0) / 4);
        const int lim = std::min<int32_t>(4, nb - b0);
        for (int l = 0; l < lim; ++l) {
            const int32_t b = b0 + l;
            const int32_t u = g.bond_from(b), v = g.bond_to(b);
            if (v >= 0 && bit_get(spin_, u) == bit_get(spin_, v) && blk[l] < thr) bit_set(c.open, b, true);
        }
    }
    for (int32_t v = 0; v < n; ++v) uf_[v] = v;
    for (int32_t b = 0; b < nb; ++b) {
        if (!bit_get(c.open, b)) continue;
        const int32_t ru = uf_find(uf_, g.bond_from(b)), rv = uf_find(uf_, g.bond_to(b));
        if (ru != rv) uf_[std::max(ru, rv)] = std::min(ru, rv);
    }
    for (int32_t v = 0; v < n; ++v) {
        const int32_t r = uf_find(uf_, v);
        bit_set(c.spin, v, item_u32(c.sign_seed, sample_index, kStreamClusterSign, r) & 1);
    }
    return c;
}

FkConfig sample_fk_ising(const MeshSpec& spec, int sweeps, std::optional<uint64_t> sign_seed) {
    if (sweeps <= 0) throw ParamError("sample_fk_ising: sweeps must be positive");
    if (spec.sample_index > 0xffffffffull) throw ParamError("sample_fk_ising: sample_index exceeds 2^32");
    FkChain chain(spec, static_cast<uint32_t>(spec.sample_index), sweeps, 1);
    return chain.sample(0, spec.sample_index, sign_seed);
}

// --- pi_1 --------------------------------------------------------------------

namespace {

// BFS reach test: does the red/open cluster of `start` leave Lambda_r(0)?
bool origin_reaches(const SiteConfig& c, double r, std::vector<int32_t>& stack, std::vector<uint8_t>& seen) {
    const auto& g = *c.geom;
    const int32_t o = g.origin();
    if (!c.is_red(o)) return false;
    stack.clear();
    std::fill(seen.begin(), seen.end(), 0);
    stack.push_back(o);
    seen[o] = 1;
    while (!stack.empty()) {
        const int32_t v = stack.back();
        stack.pop_back();
        if (std::abs(g.px(v)) >= r || std::abs(g.py(v)) >= r) return true;
        for (const int32_t* u = g.nbr_begin(v); u != g.nbr_end(v); ++u) {
            if (!seen[*u] && c.is_red(*u)) {
                seen[*u] = 1;
                stack.push_back(*u);
            }
        }
    }
    return false;
}

bool origin_reaches_fk(const FkConfig& c, double r, std::vector<int32_t>& stack, std::vector<uint8_t>& seen) {
    const auto& g = *c.geom;
    const int32_t n = g.size();
    const int32_t o = g.origin();
    stack.clear();
    std::fill(seen.begin(), seen.end(), 0);
    stack.push_back(o);
    seen[o] = 1;
    while (!stack.empty()) {
        const int32_t v = stack.back();
        stack.pop_back();
        if (std::abs(g.px(v)) >= r || std::abs(g.py(v)) >= r) return true;
        // east/north bonds of v, then west/south via the neighbors' slots
        for (const int32_t b : {v, n + v}) {
            const int32_t u = g.bond_to(b);
            if (u >= 0 && c.bond_open(b) && !seen[u]) {
                seen[u] = 1;
                stack.push_back(u);
            }
        }
        const int32_t west = g.id(g.a_of(v) - 2, g.w_of(v));
        if (west >= 0 && c.bond_open(west) && !seen[west]) {
            seen[west] = 1;
            stack.push_back(west);
        }
        const int32_t south = g.id(g.a_of(v), g.w_of(v) - 2);
        if (south >= 0 && c.bond_open(n + south) && !seen[south]) {
            seen[south] = 1;
            stack.push_back(south);
        }
    }
    return false;
}

}  // namespace

double wilson_halfwidth(int64_t hits, int64_t trials) {
    if (trials <= 0) return 0.0;
    const double z = 1.959963984540054;
    const double n = static_cast<double>(trials);
    const double ph = static_cast<double>(hits) / n;
    const double z2 = z * z;
    return (z / (1.0 + z2 / n)) * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n));
}

NormEntry estimate_pi1_normalization(const MeshSpec& spec, int64_t n_samples, int sweeps, int gap, int n_streams) {
    spec.validate();
    if (n_samples <= 0) throw ParamError("estimate_pi1_normalization: n_samples must be positive");
    if (!(spec.k >= 1.0 + spec.eta)) throw ConfigError("estimate_pi1_normalization: region must contain Lambda_1");

    auto geom = LatticeGeometry::get(spec.kind, spec.eta, spec.k);
    std::vector<int32_t> stack;
    std::vector<uint8_t> seen(geom->size(), 0);
    int64_t hits = 0;

    if (spec.kind == LatticeKind::TriangularSite) {
        MeshSpec s = spec;
        for (int64_t i = 0; i < n_samples; ++i) {
            s.sample_index = spec.sample_index + i;
            const SiteConfig c = sample_bernoulli(s);
            if (origin_reaches(c, 1.0, stack, seen)) ++hits;
        }
    } else {
        std::vector<std::unique_ptr<FkChain>> chains;
        for (int s = 0; s < n_streams; ++s)
            chains.push_back(std::make_unique<FkChain>(spec, static_cast<uint32_t>(s), sweeps, gap));
        for (int64_t i = 0; i < n_samples; ++i) {
            const int s = static_cast<int>(i % n_streams);
            const FkConfig c = chains[s]->sample(i / n_streams, spec.sample_index + i);
            if (origin_reaches_fk(c, 1.0, stack, seen)) ++hits;
        }
    }

    NormEntry e;
    e.n_samples = n_samples;
    e.pi1_hat = static_cast<double>(hits) / static_cast<double>(n_samples);
    e.ci_halfwidth = wilson_halfwidth(hits, n_samples);
    return e;
}

// --- normalization table ------------------------------------------------------

std::string NormalizationTable::key_of(LatticeKind kind, double eta) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s:%.17g", kind_name(kind), eta);
    return buf;
}

void NormalizationTable::merge(LatticeKind kind, double eta, const NormEntry& e) {
    auto& cur = entries_[key_of(kind, eta)];
    const double total = static_cast<double>(cur.n_samples + e.n_samples);
    if (total <= 0) return;
    const int64_t hits_cur = static_cast<int64_t>(std::llround(cur.pi1_hat * static_cast<double>(cur.n_samples)));
    const int64_t hits_new = static_cast<int64_t>(std::llround(e.pi1_hat * static_cast<double>(e.n_samples)));
    cur.n_samples += e.n_samples;
    cur.pi1_hat = static_cast<double>(hits_cur + hits_new) / total;
    cur.ci_halfwidth = wilson_halfwidth(hits_cur + hits_new, cur.n_samples);
}

std::optional<NormEntry> NormalizationTable::lookup(LatticeKind kind, double eta) const {
    auto it = entries_.find(key_of(kind, eta));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string NormalizationTable::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, e] : entries_)
        j[key] = {{"pi1_hat", e.pi1_hat}, {"n_samples", e.n_samples}, {"ci_halfwidth", e.ci_halfwidth}};
    return j.dump(2);
}

NormalizationTable NormalizationTable::from_json(const std::string& text) {
    NormalizationTable t;
    const auto j = nlohmann::json::parse(text);
    for (auto it = j.begin(); it != j.end(); ++it) {
        NormEntry e;
        e.pi1_hat = it.value()["pi1_hat"].get<double>();
        e.n_samples = it.value()["n_samples"].get<int64_t>();
        e.ci_halfwidth = it.value()["ci_halfwidth"].get<double>();
        t.entries_[it.key()] = e;
    }
    return t;
}

void NormalizationTable::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << to_json() << "\n";
}

NormalizationTable NormalizationTable::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

// --- binary persistence -------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'E', 'R', 'C', 'L', 'A', 'B', '1'};
constexpr uint32_t kVersion = 1;

void write_header(std::ofstream& f, const MeshSpec& s) {
    f.write(kMagic, 8);
    const uint32_t ver = kVersion, kind = static_cast<uint32_t>(s.kind);
    f.write(reinterpret_cast<const char*>(&ver), 4);
    f.write(reinterpret_cast<const char*>(&kind), 4);
    f.write(reinterpret_cast<const char*>(&s.eta), 8);
    f.write(reinterpret_cast<const char*>(&s.k), 8);
    f.write(reinterpret_cast<const char*>(&s.p), 8);
    f.write(reinterpret_cast<const char*>(&s.seed), 8);
    f.write(reinterpret_cast<const char*>(&s.sample_index), 8);
}

MeshSpec read_header(std::ifstream& f) {
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad config file magic");
    uint32_t ver = 0, kind = 0;
    f.read(reinterpret_cast<char*>(&ver), 4);
    f.read(reinterpret_cast<char*>(&kind), 4);
    if (ver != kVersion) throw std::runtime_error("unsupported config version");
    MeshSpec s;
    s.kind = static_cast<LatticeKind>(kind);
    f.read(reinterpret_cast<char*>(&s.eta), 8);
    f.read(reinterpret_cast<char*>(&s.k), 8);
    f.read(reinterpret_cast<char*>(&s.p), 8);
    f.read(reinterpret_cast<char*>(&s.seed), 8);
    f.read(reinterpret_cast<char*>(&s.sample_index), 8);
    if (!f) throw std::runtime_error("truncated config header");
    return s;
}

void write_bits(std::ofstream& f, const std::vector<uint64_t>& bits, int64_t nbits) {
    const int64_t nbytes = (nbits + 7) / 8;
    f.write(reinterpret_cast<const char*>(bits.data()), nbytes);
}

void read_bits(std::ifstream& f, std::vector<uint64_t>& bits, int64_t nbits) {
    bits.assign((nbits + 63) / 64, 0);
    const int64_t nbytes = (nbits + 7) / 8;
    f.read(reinterpret_cast<char*>(bits.data()), nbytes);
    if (!f) throw std::runtime_error("truncated config payload");
}

}  // namespace

void save_config(const SiteConfig& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_header(f, c.spec);
    write_bits(f, c.red, c.geom->size());
}

void save_config(const FkConfig& c, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    write_header(f, c.spec);
    f.write(reinterpret_cast<const char*>(&c.sign_seed), 8);
    const int32_t sw = c.sweeps_used;
    f.write(reinterpret_cast<const char*>(&sw), 4);
    write_bits(f, c.open, c.geom->bond_count());
    write_bits(f, c.spin, c.geom->size());
}

SiteConfig load_site_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    SiteConfig c;
    c.spec = read_header(f);
    if (c.spec.kind != LatticeKind::TriangularSite) throw std::runtime_error("config kind mismatch");
    c.geom = LatticeGeometry::get(c.spec.kind, c.spec.eta, c.spec.k);
    read_bits(f, c.red, c.geom->size());
    return c;
}

FkConfig load_fk_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    FkConfig c;
    c.spec = read_header(f);
    if (c.spec.kind != LatticeKind::SquareFk) throw std::runtime_error("config kind mismatch");
    c.geom = LatticeGeometry::get(c.spec.kind, c.spec.eta, c.spec.k);
    f.read(reinterpret_cast<char*>(&c.sign_seed), 8);
    int32_t sw = 0;
    f.read(reinterpret_cast<char*>(&sw), 4);
    c.sweeps_used = sw;
    read_bits(f, c.open, c.geom->bond_count());
    read_bits(f, c.spin, c.geom->size());
    return c;
}

LatticeKind peek_config_kind(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    return read_header(f).kind;
}

}  // namespace perc
