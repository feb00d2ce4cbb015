#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gsurvey/cli.hpp"
#include "gsurvey/records.hpp"
#include "gsurvey/results_io.hpp"
#include "gsurvey/svg.hpp"

using namespace gsurvey;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "gsurvey");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gsurvey_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every file in `a` exists in `b` with identical bytes, and vice versa.
void check_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto other = b / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++files;
  }
  CHECK(files == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator())));
  CHECK(files > 0);
}

const std::string kData = GSURVEY_DATA_DIR;

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"simulate", "--no-such-flag"}).code == 1);
  CHECK(run({"test", "--in", "/definitely/missing.jsonl"}).code == 1);
  CHECK(run({"simulate", "--pvalue-correction", "holm"}).code == 1);
  CHECK(run({"simulate", "--alpha", "2"}).code == 1);
  const auto dir = fresh_dir("usage");
  CHECK(run({"test", "--in", kData + "/synthetic_survey.jsonl", "--method", "t-test"}).code == 1);
  CHECK(run({"validity", "--beta1", "0.3", "--out-dir", dir.string()}).code == 1);
  const auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("split-null") != std::string::npos);
}

TEST_CASE("data errors exit with 2") {
  const auto dir = fresh_dir("data_errors");
  const auto bad = dir / "bad.jsonl";
  std::ofstream(bad) << "{\"message\":\"A\",\"persona_id\":\"p\",\"perturbation_id\":\"s\",\"replicate\":0,"
                        "\"response\":7}\n";
  const auto r = run({"test", "--in", bad.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.jsonl:1") != std::string::npos);

  const auto cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"params": {"rho": 3}})";
  const auto c = run({"simulate", "--config", cfg.string(), "--out-dir", dir.string()});
  CHECK(c.code == 2);
  CHECK(c.err.find("params.rho") != std::string::npos);
  CHECK(!fs::exists(dir / "responses.jsonl"));
}

TEST_CASE("simulate then test is reproducible") {
  const auto dir = fresh_dir("simulate");
  const auto file = (dir / "sim.jsonl").string();
  REQUIRE(run({"simulate", "--seed", "11", "--beta1", "0", "--out", file}).code == 0);
  const auto dataset = read_responses(file);
  CHECK(dataset.records.size() == 2 * 20 * 10 * 5);
  CHECK(dataset.messages() == std::vector<std::string>{"A", "B"});

  const auto first = run({"test", "--in", file, "--method", "permutation", "--seed", "5"});
  const auto second = run({"test", "--in", file, "--method", "permutation", "--seed", "5"});
  REQUIRE(first.code == 0);
  CHECK(first.out == second.out);
  CHECK(first.out.rfind("method,statistic,p_value,alpha,reject,n_permutations", 0) == 0);

  REQUIRE(run({"simulate", "--seed", "11", "--beta1", "0", "--out", (dir / "again.jsonl").string()}).code == 0);
  CHECK(slurp(file) == slurp(dir / "again.jsonl"));

  REQUIRE(run({"simulate", "--seed", "11", "--beta1", "0", "--format", "csv", "--out",
               (dir / "sim.csv").string()}).code == 0);
  CHECK(read_responses(dir / "sim.csv") == dataset);

  const auto out = dir / "tests.csv";
  const auto all = run({"test", "--in", file, "--method", "sign", "--method", "wilcoxon", "--method",
                        "permutation-exact", "--out", out.string()});
  REQUIRE(all.code == 0);
  CHECK(test_results_from_table(read_table(out), "t").size() == 3);
}

TEST_CASE("estimate") {
  const auto dir = fresh_dir("estimate");
  SUBCASE("degenerate sample exits with 3") {
    const auto r = run({"estimate", "--in", kData + "/degenerate_all_yes.jsonl", "--out-dir", dir.string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("degenerate") != std::string::npos);
    CHECK(r.out.find("degenerate: true") != std::string::npos);
  }
  SUBCASE("synthetic sample") {
    const std::vector<std::string> args{"estimate", "--in", kData + "/synthetic_survey.jsonl",
                                        "--bootstrap", "40", "--effect-size", "--seed", "3"};
    auto a = args;
    a.insert(a.end(), {"--out-dir", (dir / "one").string(), "--threads", "1"});
    auto b = args;
    b.insert(b.end(), {"--out-dir", (dir / "two").string(), "--threads", "3"});
    const auto ra = run(a);
    const auto rb = run(b);
    REQUIRE(ra.code == 0);
    CHECK(ra.out.find("rho:") != std::string::npos);
    check_same_tree(dir / "one", dir / "two");
    const auto rows = estimates_from_table(read_table(dir / "one" / "estimates.csv"), "e");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "control");
    CHECK(rows[1].beta1_hat.has_value());
    CHECK(rows[0].bootstrap->n_resamples == 40);
  }
  SUBCASE("pooled null split") {
    const auto r = run({"estimate", "--in", kData + "/synthetic_survey.jsonl", "--pooled", "--bootstrap",
                        "0", "--out-dir", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("label: control+treatment") != std::string::npos);
    CHECK(r.out.find("n_perturbations: 20") != std::string::npos);
  }
}

TEST_CASE("split-null") {
  const auto dir = fresh_dir("split");
  REQUIRE(run({"split-null", "--m-total", "50", "--out-dir", dir.string()}).code == 0);
  std::vector<int> seen(50, 0);
  for (const char* name : {"split_a.txt", "split_b.txt"}) {
    std::ifstream in(dir / name);
    int count = 0, index = 0;
    while (in >> index) {
      ++count;
      ++seen.at(static_cast<std::size_t>(index));
    }
    CHECK(count == 25);
  }
  for (int s : seen) CHECK(s == 1);

  REQUIRE(run({"split-null", "--in", kData + "/synthetic_survey.jsonl", "--message", "control", "--out-dir",
               dir.string()}).code == 0);
  auto halves = read_responses(dir / "split_a.jsonl");
  const auto second = read_responses(dir / "split_b.jsonl");
  halves.records.insert(halves.records.end(), second.records.begin(), second.records.end());
  const auto pair = to_paired(halves, "control_A", "control_B");
  CHECK(pair.n_perturbations() == 5);
  CHECK(pair.n_personas() == 20);
  CHECK(run({"split-null", "--in", kData + "/synthetic_survey.jsonl", "--out-dir", dir.string()}).code == 1);
}

TEST_CASE("harness subcommands write identical files on repeat runs") {
  const auto base = fresh_dir("harness");
  auto twice = [&](const std::string& name, std::vector<std::string> args) {
    auto a = args;
    a.insert(a.end(), {"--out-dir", (base / (name + "1")).string(), "--threads", "1"});
    auto b = args;
    b.insert(b.end(), {"--out-dir", (base / (name + "2")).string(), "--threads", "4"});
    const auto ra = run(a);
    const auto rb = run(b);
    INFO(ra.err);
    REQUIRE(ra.code == 0);
    CHECK(ra.out.substr(0, ra.out.find("wrote")) == rb.out.substr(0, rb.out.find("wrote")));
    check_same_tree(base / (name + "1"), base / (name + "2"));
  };
  twice("validity", {"validity", "--n-sims", "60", "--permutations", "200", "--seed", "4"});
  twice("power", {"power", "--beta1", "0.8", "--n-sims", "40", "--permutations", "200", "--n-grid", "5,10"});
  twice("budget", {"budget", "--n-sims", "10", "--permutations", "100", "--budgets", "300,600",
                   "--strategies", "1:10:1,1:1:10", "--rho", "0.1", "--gamma", "1"});
  twice("subsample", {"validity", "--in", kData + "/synthetic_survey.jsonl", "--n-personas", "10",
                      "--n-perturbations", "4", "--n-replicates", "3", "--n-sims", "20", "--permutations",
                      "100"});

  CHECK(fs::exists(base / "validity1" / "validity_ecdf.svg"));
  const auto series = parse_svg_series(slurp(base / "validity1" / "validity_ecdf.svg"));
  CHECK(series.size() == 3);
  const auto profile = profile_from_tables(read_table(base / "validity1" / "validity_profile.csv"),
                                           read_table(base / "validity1" / "validity_pvalues.csv"), "v");
  CHECK(profile.n_sims == 60);
  const auto sweep = sweep_from_table(read_table(base / "budget1" / "sweep.csv"), "s");
  CHECK(sweep.size() == 4);
  CHECK(fs::exists(base / "budget1" / "sweep_rho0.1_gamma1.svg"));
  CHECK(fs::exists(base / "power1" / "power_curve.svg"));
  CHECK(fs::exists(base / "subsample1" / "validity_control_profile.csv"));
  CHECK(fs::exists(base / "subsample1" / "validity_median_ecdf.svg"));
}

TEST_CASE("output directory from the environment") {
  const auto dir = fresh_dir("env");
  ::setenv("GSURVEY_OUTPUT_DIR", dir.string().c_str(), 1);
  const auto r = run({"split-null", "--m-total", "6", "--prefix", "x_"});
  ::unsetenv("GSURVEY_OUTPUT_DIR");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "x_split_a.txt"));
}

TEST_CASE("config file drives a run") {
  const auto dir = fresh_dir("config");
  const auto cfg = dir / "run.json";
  std::ofstream(cfg) << R"({"design": {"n_personas": 4, "n_perturbations": 3, "n_replicates": 2},
                          "seed": 9, "output": {"directory": ")"
                     << (dir / "out").string() << R"(", "prefix": "c_"}})";
  REQUIRE(run({"simulate", "--config", cfg.string()}).code == 0);
  const auto data = read_responses(dir / "out" / "c_responses.jsonl");
  CHECK(data.records.size() == 2 * 4 * 3 * 2);
  // Flags override the file.
  REQUIRE(run({"simulate", "--config", cfg.string(), "--n-personas", "2", "--prefix", "d_"}).code == 0);
  CHECK(read_responses(dir / "out" / "d_responses.jsonl").records.size() == 2 * 2 * 3 * 2);
}
