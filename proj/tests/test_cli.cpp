#include <doctest.h>

#include <cmath>
#include <unistd.h>

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "rapc/envs.hpp"
#include "rapc/mdp_io.hpp"
#include "test_support.hpp"

using namespace rapc;

namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rapc");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("rapc_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string trailer;

  std::string at(std::size_t row, const std::string& column) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == column) return rows.at(row).at(i);
    FAIL("no column " << column);
    return {};
  }
  double num(std::size_t row, const std::string& column) const { return std::stod(at(row, column)); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      csv.trailer = line;
      continue;
    }
    if (csv.header.empty()) csv.header = split(line);
    else csv.rows.push_back(split(line));
  }
  return csv;
}

}  // namespace

TEST_CASE("gen-env") {
  TempDir dir;
  SUBCASE("chain") {
    const Result r = run_cli({"gen-env", "chain", "--length", "3", "--gamma", "0.99"});
    REQUIRE(r.code == 0);
    CHECK(load_mdp(r.out).n_states == 3);
  }
  SUBCASE("grid from dimensions") {
    const Result r = run_cli({"gen-env", "grid", "--w", "5", "--h", "5", "--slip", "0.1", "--target", "4,4", "--hole",
                              "4,2", "--start", "4,0", "--out", dir.file("g.json")});
    REQUIRE(r.code == 0);
    const FiniteMdp mdp = load_mdp(read_file(dir.file("g.json")));
    CHECK(mdp.n_states == 25);
    CHECK(mdp.is_target(24));
    CHECK(mdp.is_failure(22));
    CHECK(mdp.start_distribution()[20] == 1.0);
  }
  SUBCASE("grid preset and layout") {
    const Result a = run_cli({"gen-env", "grid", "--preset", "cliff5"});
    REQUIRE(a.code == 0);
    CHECK(a.out == dump_mdp(make_gridworld(cliff5_spec())));
    const Result b = run_cli({"gen-env", "grid", "--layout", "S.G", "--slip", "0.2"});
    REQUIRE(b.code == 0);
    CHECK(load_mdp(b.out).n_states == 3);
  }
  SUBCASE("random twice is byte-identical") {
    const auto args = std::vector<std::string>{"gen-env", "random", "--seed", "7", "--states", "8", "--actions", "3"};
    const Result a = run_cli(args);
    const Result b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
  }
  SUBCASE("invalid parameters exit 1") {
    CHECK(run_cli({"gen-env", "chain", "--length", "1"}).code == 1);
    CHECK(run_cli({"gen-env", "grid", "--preset", "cliff5", "--slip", "1.5"}).code == 1);
    CHECK(run_cli({"gen-env", "random", "--states", "2", "--targets", "1", "--failures", "1"}).code == 1);
  }
}

TEST_CASE("oracle") {
  TempDir dir;
  write_file(dir.file("chain.json"), dump_mdp(make_chain(3, 0.99)));
  SUBCASE("chain closed form") {
    const Result r = run_cli({"oracle", "--mdp", dir.file("chain.json")});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.header == std::vector<std::string>{"state", "p_ra", "v_gamma", "phi", "v_cost", "occupancy", "defined_flag"});
    CHECK(csv.num(0, "p_ra") == doctest::Approx(1.0));
    CHECK(csv.num(0, "v_gamma") == doctest::Approx(0.9801));
    CHECK(csv.num(0, "phi") == doctest::Approx(0.9801));
    CHECK(csv.num(0, "v_cost") == doctest::Approx(1.99));
    CHECK(csv.trailer.find("# config_hash=") == 0);
    CHECK(csv.trailer.find("version=0.1.0") != std::string::npos);
  }
  SUBCASE("non-stochastic policy row is a validation error") {
    write_file(dir.file("bad.json"), "{\"n_states\": 3, \"n_actions\": 1, \"probs\": [[1.0], [0.5], [1.0]]}");
    const Result r = run_cli({"oracle", "--mdp", dir.file("chain.json"), "--policy", dir.file("bad.json")});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
  }
  SUBCASE("missing file") { CHECK(run_cli({"oracle", "--mdp", dir.file("nope.json")}).code == 1); }
}

TEST_CASE("certify") {
  TempDir dir;
  write_file(dir.file("chain.json"), dump_mdp(make_chain(3, 0.99)));
  write_file(dir.file("one.json"), dump_mdp(rapc::test::one_step_mdp()));
  SUBCASE("chain, p = 0.5: s0 feasible") {
    const Result r = run_cli({"certify", "--mdp", dir.file("chain.json"), "--p", "0.5"});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.header ==
          std::vector<std::string>{"state", "v_gh", "bound", "phi_used", "p_hat_raw", "p_hat_clipped", "feasible"});
    CHECK(csv.at(0, "feasible") == "1");
  }
  SUBCASE("one-step instance") {
    const Result r = run_cli({"certify", "--mdp", dir.file("one.json"), "--p", "0.5"});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.num(0, "bound") == doctest::Approx(0.792));
    CHECK(csv.num(0, "p_hat_raw") == doctest::Approx(0.8));
  }
  SUBCASE("random sweep margins are nonnegative") {
    const Result r = run_cli({"certify", "--sweep", "15", "--seed", "3"});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.rows.size() > 15);
    for (std::size_t i = 0; i < csv.rows.size(); ++i) CHECK(csv.num(i, "margin") >= -1e-8);
  }
  SUBCASE("p outside (0, 1)") { CHECK(run_cli({"certify", "--mdp", dir.file("chain.json"), "--p", "1"}).code == 1); }
}

TEST_CASE("train") {
  TempDir dir;
  write_file(dir.file("fl.json"), dump_mdp(make_gridworld(frozenlake4_spec())));
  SUBCASE("tabular run is deterministic and writes the policy") {
    const std::vector<std::string> args{"train", "--mode", "tabular", "--mdp", dir.file("fl.json"), "--p", "0.5",
                                        "--seed", "1", "--episodes", "200", "--policy-out", dir.file("pi.json")};
    const Result a = run_cli(args);
    const Result b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const Csv csv = parse_csv(a.out);
    CHECK(csv.header.front() == "iter");
    CHECK(csv.rows.size() == 2);
    CHECK(load_policy(read_file(dir.file("pi.json"))).n_states() == 16);
  }
  SUBCASE("onpolicy with the clipped/GAE flags") {
    write_file(dir.file("op.json"), "{\"rollout_length\": 64, \"minibatch_size\": 32, \"checkpoint_every\": 2}");
    const Result r = run_cli({"train", "--mode", "onpolicy", "--mdp", dir.file("fl.json"), "--config",
                              dir.file("op.json"), "--lambda", "0.95", "--clip", "0.2", "--episodes", "4"});
    REQUIRE(r.code == 0);
    CHECK(parse_csv(r.out).rows.size() == 2);
  }
  SUBCASE("seed range merges per-seed reports") {
    const Result r = run_cli({"train", "--mdp", dir.file("fl.json"), "--seeds", "3..4", "--episodes", "100", "--out",
                              dir.file("r.csv")});
    REQUIRE(r.code == 0);
    const Csv merged = parse_csv(read_file(dir.file("r.csv")));
    CHECK(merged.header.front() == "seed");
    CHECK(merged.rows.size() == 2);
    CHECK(merged.at(0, "seed") == "3");
    CHECK(merged.at(1, "seed") == "4");
    CHECK(fs::exists(dir.file("r.seed3.csv")));
    CHECK(fs::exists(dir.file("r.seed4.csv")));
  }
  SUBCASE("bad configs exit 1") {
    CHECK(run_cli({"train", "--mdp", dir.file("fl.json"), "--p", "1.5"}).code == 1);
    write_file(dir.file("bad.json"), "{\"epsiodes\": 3}");
    CHECK(run_cli({"train", "--mdp", dir.file("fl.json"), "--config", dir.file("bad.json")}).code == 1);
    CHECK(run_cli({"train", "--mdp", dir.file("fl.json"), "--lambda", "0.9"}).code == 1);
  }
}

TEST_CASE("ablate") {
  TempDir dir;
  SUBCASE("deterministic chain closed forms") {
    write_file(dir.file("chain.json"), dump_mdp(make_chain(4, 0.9)));
    const Result r = run_cli({"ablate", "--mdp", dir.file("chain.json")});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.header == std::vector<std::string>{"state", "p_true", "est_no_phi", "est_with_phi", "phi_defined"});
    for (std::size_t s = 0; s < 3; ++s) {
      const double hit = std::pow(0.9, static_cast<double>(3 - s));
      CHECK(csv.num(s, "est_with_phi") == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(1.0 - csv.num(s, "est_no_phi") == doctest::Approx(1.0 - hit).epsilon(1e-9));
    }
    const std::size_t last = csv.rows.size() - 1;
    CHECK(csv.at(last, "state") == "mae");
    CHECK(std::abs(csv.num(last, "est_with_phi")) <= 1e-9);
    CHECK(csv.at(last, "phi_defined") == "3");
  }
  SUBCASE("zero success leaves est_with_phi undefined") {
    FiniteMdp mdp = rapc::test::one_step_mdp();
    mdp.transition[1] = 0.0;
    mdp.transition[2] = 1.0;
    write_file(dir.file("doomed.json"), dump_mdp(mdp));
    const Csv csv = parse_csv(run_cli({"ablate", "--mdp", dir.file("doomed.json")}).out);
    CHECK(csv.at(0, "est_with_phi").empty());
    CHECK(csv.at(0, "phi_defined") == "0");
  }
  SUBCASE("consumes oracle output unchanged") {
    write_file(dir.file("fl.json"), dump_mdp(make_gridworld(frozenlake4_spec())));
    REQUIRE(run_cli({"oracle", "--mdp", dir.file("fl.json"), "--out", dir.file("o.csv")}).code == 0);
    const Result with_file = run_cli({"ablate", "--mdp", dir.file("fl.json"), "--oracle", dir.file("o.csv")});
    const Result direct = run_cli({"ablate", "--mdp", dir.file("fl.json")});
    REQUIRE(with_file.code == 0);
    const Csv a = parse_csv(with_file.out);
    const Csv b = parse_csv(direct.out);
    CHECK(a.rows == b.rows);
  }
}

TEST_CASE("top-level usage") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  const Result help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("gen-env") != std::string::npos);
}
