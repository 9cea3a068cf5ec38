#include "doctest.h"
#include "perc/harness.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

using namespace perc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

ExperimentConfig small_arms(const std::string& out) {
    ExperimentConfig cfg;
    cfg.experiment = "arms";
    cfg.kind = LatticeKind::TriangularSite;
    cfg.eta = 1.0 / 16;
    cfg.k = 1.0;
    cfg.p = 0.5;
    cfg.seed = 11;
    cfg.a_list = {0.125};
    cfg.b_list = {0.25, 0.375, 0.5};
    cfg.kappa = "1";
    cfg.n_samples = 200;
    cfg.n_streams = 4;
    cfg.workers = 2;
    cfg.out_dir = out;
    return cfg;
}

}  // namespace

TEST_CASE("validation enumerates every violation") {
    ExperimentConfig cfg;
    cfg.experiment = "arms";
    cfg.n_samples = 0;
    cfg.eta = 2.0;
    cfg.k = 1.0;
    cfg.a_list = {};
    cfg.b_list = {};
    auto violations = cfg.validate();
    CHECK(violations.size() >= 3);  // n_samples, eta<k, empty lists

    auto res = run(cfg);
    CHECK(res.exit_code == 1);
    CHECK_FALSE(res.message.empty());
}

TEST_CASE("toml parsing and cli-style overrides") {
    const std::string toml = R"(
# comment
experiment = "arms"
kind = "triangular-site"
eta = 0.0625
k = 1.0
seed = 5
a_list = [0.125]
b_list = [0.25, 0.5]
n_samples = 50

[mesh]
p = 0.5
)";
    auto cfg = ExperimentConfig::from_toml_text(toml);
    CHECK(cfg.experiment == "arms");
    CHECK(cfg.eta == 0.0625);
    CHECK(cfg.p == 0.5);
    CHECK(cfg.b_list.size() == 2);
    cfg.set_key("n_samples", "75");
    CHECK(cfg.n_samples == 75);
    CHECK_THROWS_AS(cfg.set_key("bogus", "1"), ParamError);
}

TEST_CASE("identical configs give byte-identical csv bodies; manifests track outputs") {
    const auto dir = fs::temp_directory_path() / "perc_det_test";
    fs::remove_all(dir);
    auto cfg = small_arms(dir.string());

    auto r1 = run(cfg);
    REQUIRE(r1.exit_code == 0);
    const std::string csv1 = slurp(fs::path(r1.run_dir) / "arm_estimates.csv");

    auto r2 = run(cfg);
    REQUIRE(r2.exit_code == 0);
    CHECK(r1.run_dir == r2.run_dir);  // same config hash, same run dir
    const std::string csv2 = slurp(fs::path(r2.run_dir) / "arm_estimates.csv");
    CHECK(csv1 == csv2);

    const auto manifest = nlohmann::json::parse(slurp(fs::path(r1.run_dir) / "manifest.json"));
    CHECK(manifest["complete"].get<bool>());
    for (const auto& out : r2.outputs) {
        bool found = false;
        for (const auto& m : manifest["outputs"]) found = found || m.get<std::string>() == out;
        CHECK(found);
        CHECK(fs::exists(fs::path(r1.run_dir) / out));
    }
    fs::remove_all(dir);
}

TEST_CASE("schedule independence: workers=1 equals workers=8") {
    const auto dir1 = fs::temp_directory_path() / "perc_w1";
    const auto dir8 = fs::temp_directory_path() / "perc_w8";
    fs::remove_all(dir1);
    fs::remove_all(dir8);

    auto cfg1 = small_arms(dir1.string());
    cfg1.workers = 1;
    auto cfg8 = small_arms(dir8.string());
    cfg8.workers = 8;

    auto r1 = run(cfg1);
    auto r8 = run(cfg8);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r8.exit_code == 0);
    CHECK(slurp(fs::path(r1.run_dir) / "arm_estimates.csv") == slurp(fs::path(r8.run_dir) / "arm_estimates.csv"));
    CHECK(slurp(fs::path(r1.run_dir) / "arm_fit.json") == slurp(fs::path(r8.run_dir) / "arm_fit.json"));
    fs::remove_all(dir1);
    fs::remove_all(dir8);
}

TEST_CASE("pi1-table: degenerate parameters and reproducibility") {
    const auto dir = fs::temp_directory_path() / "perc_pi1";
    fs::remove_all(dir);
    ExperimentConfig cfg;
    cfg.experiment = "pi1-table";
    cfg.kind = LatticeKind::TriangularSite;
    cfg.eta = 0.125;
    cfg.k = 1.25;
    cfg.eta_list = {0.125};
    cfg.n_samples = 100;
    cfg.out_dir = dir.string();

    cfg.p = 1.0;
    auto table1 = pi1_table(cfg);
    CHECK(table1.lookup(cfg.kind, 0.125)->pi1_hat == 1.0);

    cfg.p = 0.0;
    auto res = run(cfg);
    REQUIRE(res.exit_code == 0);
    const auto flags = nlohmann::json::parse(slurp(fs::path(res.run_dir) / "pi1_flags.json"));
    CHECK(flags["triangular-site:0.125"].get<std::string>() == "degenerate");

    cfg.p = 0.5;
    auto ta = pi1_table(cfg);
    auto tb = pi1_table(cfg);
    CHECK(ta.lookup(cfg.kind, 0.125)->pi1_hat == tb.lookup(cfg.kind, 0.125)->pi1_hat);
    fs::remove_all(dir);
}

TEST_CASE("sample experiment writes loadable configurations") {
    const auto dir = fs::temp_directory_path() / "perc_sample";
    fs::remove_all(dir);
    ExperimentConfig cfg;
    cfg.experiment = "sample";
    cfg.kind = LatticeKind::TriangularSite;
    cfg.eta = 0.125;
    cfg.k = 1.0;
    cfg.p = 0.5;
    cfg.seed = 3;
    cfg.n_samples = 3;
    cfg.out_dir = dir.string();
    auto res = run(cfg);
    REQUIRE(res.exit_code == 0);
    CHECK(res.outputs.size() == 3);
    auto c = load_site_config((fs::path(res.run_dir) / res.outputs[0]).string());
    CHECK(c.spec.seed == 3);
    fs::remove_all(dir);
}
