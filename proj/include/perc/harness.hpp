#pragma once

// Experiment orchestration: validated configs (TOML file mirrored by CLI
// flags), a deterministic parallel Monte Carlo driver, result persistence
// with manifests, and the experiment implementations behind the CLI.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "perc/lattice.hpp"

namespace perc {

struct ExperimentConfig {
    std::string experiment;  // sample | pi1-table | arms | approx-verify | measures | largest | ising | exponents
    LatticeKind kind = LatticeKind::TriangularSite;
    double eta = 1.0 / 64;
    double k = 1.5;
    double p = 0.5;
    uint64_t seed = 1;
    uint64_t sign_seed = 0;  // ising only; 0 = derive from seed

    std::vector<double> a_list, b_list, eps_list, psi_list, eta_list, r_list;
    double delta = 0.5;
    std::string kappa = "1", kappa_hp;
    int side = 0;

    int64_t n_samples = 1000;
    int workers = 2;
    int n_streams = 8;  // logical partition; outputs never depend on workers
    int sweeps = 200;   // fk burn-in
    int gap = 10;       // fk decorrelation gap
    int count = 2;      // largest clusters kept
    std::string out_dir = "out";

    MeshSpec mesh() const;
    // all violated constraints, empty when valid
    std::vector<std::string> validate() const;
    std::string canonical() const;  // canonical key=value dump (manifest body)
    std::string hash() const;       // stable hash of canonical()

    static ExperimentConfig from_toml_file(const std::string& path);
    static ExperimentConfig from_toml_text(const std::string& text);
    // CLI override: same keys as the TOML file
    void set_key(const std::string& key, const std::string& value);
};

struct RunResult {
    int exit_code = 0;  // 0 ok, 1 validation, 2 runtime, 3 acceptance assertion
    std::string run_dir;
    std::vector<std::string> outputs;  // file names inside run_dir
    std::string message;
};

RunResult run(const ExperimentConfig& cfg);

// Populate/refresh the normalization table for every mesh in eta_list and
// persist it (also used internally by measure experiments).
NormalizationTable pi1_table(const ExperimentConfig& cfg);

// Deterministic stream-parallel driver: evaluates fn(stream) for stream =
// 0..n_streams-1 on a fixed-size worker pool and returns results in stream
// order. fn must depend only on its argument.
void run_streams(int n_streams, int workers, const std::function<void(int)>& fn);

// Sample index partition: stream of index i is i % n_streams; the j-th
// index of a stream is stream + j * n_streams (j = its chain step).
inline int64_t stream_sample(int stream, int64_t step, int n_streams) {
    return static_cast<int64_t>(step) * n_streams + stream;
}

}  // namespace perc
