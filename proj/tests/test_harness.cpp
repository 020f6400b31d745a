#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swlab/harness.hpp"

using namespace swlab;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.status = parse_and_dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "swlab_harness_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("format_number round-trips") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
  }

  TEST_CASE("table serialisations") {
    Table t("swlab.test.v1", {"a", "b", "c"});
    t.add_row({std::int64_t{1}, 2.5, std::string("x")});
    t.add_row({std::monostate{}, 0.0, std::string("y,z")});
    const std::string csv = t.to_csv();
    CHECK(csv.rfind("# schema=swlab.test.v1\na,b,c\n", 0) == 0);
    std::istringstream lines(t.to_jsonl());
    std::string line;
    std::getline(lines, line);
    const auto header = nlohmann::json::parse(line);
    CHECK(header.dump().find("swlab.test.v1") != std::string::npos);
    int rows = 0;
    while (std::getline(lines, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 2);
    CHECK_THROWS(t.add_row({std::int64_t{1}}));
  }

  TEST_CASE("analyze reports the drift constants") {
    const Run r = run({"analyze", "--q", "2", "--beta", "4"});
    REQUIRE(r.status == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["a"].get<double>() == doctest::Approx(0.97875201203863).epsilon(1e-10));
    CHECK(j["cutoff_c"].get<double>() == doctest::Approx(0.7983736912030466).epsilon(1e-10));
    CHECK(j.contains("theta_at_a"));
    CHECK(j.contains("f_prime_at_a"));
    CHECK(j["m"].size() == 2);
    CHECK(r.err.find("swlab.manifest.v1") != std::string::npos);
  }

  TEST_CASE("exit statuses") {
    CHECK(run({"analyze", "--q", "2", "--beta", "1"}).status == kExitValidation);
    CHECK(run({"analyze", "--q", "2", "--beta", "4", "--bogus"}).status == kExitUsage);
    CHECK(run({"no-such-command"}).status == kExitUsage);
    CHECK(run({"oracle", "--n", "4", "--q", "2", "--beta", "2", "--check", "stationarity"}).status == kExitOk);
    CHECK(run({"oracle", "--n", "9", "--q", "2", "--beta", "2", "--check", "stationarity"}).status ==
          kExitValidation);
    CHECK(run({"tvprofile", "--q", "2", "--beta", "4", "--n", "100", "--replicas", "10"}).status == kExitValidation);
    CHECK(run({"analyze", "--q", "2", "--beta", "4", "--out", "/nonexistent_dir/x.json"}).status == kExitIo);
  }

  TEST_CASE("config files") {
    const fs::path cfg = scratch("cfg.json");
    std::ofstream(cfg) << R"({"q": 3, "beta": 5})";
    const Run from_file = run({"analyze", "--config", cfg.string()});
    REQUIRE(from_file.status == kExitOk);
    CHECK(nlohmann::json::parse(from_file.out)["q"] == 3);

    // The command line wins over the file.
    const Run cli_wins = run({"analyze", "--config", cfg.string(), "--beta", "6"});
    REQUIRE(cli_wins.status == kExitOk);
    CHECK(nlohmann::json::parse(cli_wins.out)["beta"].get<double>() == 6.0);

    const fs::path bad = scratch("bad.json");
    std::ofstream(bad) << R"({"q": 3, "beta": 5, "colour": 1})";
    CHECK(run({"analyze", "--config", bad.string()}).status == kExitUsage);
    CHECK(run({"analyze", "--config", scratch("missing.json").string()}).status == kExitIo);
  }

  TEST_CASE("outputs and manifests on disk") {
    const fs::path out = scratch("sim.csv");
    fs::remove(out);
    fs::remove(out.string() + ".manifest.json");
    const std::vector<std::string> args{"simulate", "--q", "3", "--beta", "5", "--n", "2000", "--steps", "10",
                                        "--replicas", "4", "--seed", "5", "--out", out.string(), "--format", "csv"};
    auto with = [](std::vector<std::string> a, std::vector<std::string> extra) {
      a.insert(a.end(), extra.begin(), extra.end());
      return a;
    };
    REQUIRE(run(with(args, {"--jobs", "1"})).status == kExitOk);
    const std::string first = slurp(out);
    CHECK(first.rfind("# schema=swlab.simulate.v1", 0) == 0);
    const auto manifest = nlohmann::json::parse(slurp(out.string() + ".manifest.json"));
    CHECK(manifest["config"]["seed"] == 5);
    CHECK(manifest["command"] == "simulate");
    CHECK(manifest.contains("streams"));

    REQUIRE(run(with(args, {"--jobs", "3"})).status == kExitOk);
    CHECK(slurp(out) == first);

  }

  TEST_CASE("simulate writes JSONL records with a counts array by default") {
    const Run r = run({"simulate", "--q", "3", "--beta", "5", "--n", "12", "--steps", "2", "--replicas", "2",
                       "--start", "counts:6,4,2"});
    REQUIRE(r.status == kExitOk);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(nlohmann::json::parse(line)["schema"] == "swlab.simulate.v1");
    std::getline(lines, line);
    const auto first = nlohmann::json::parse(line);
    CHECK(first["replica"] == 0);
    CHECK(first["t"] == 0);
    CHECK(first["counts"] == nlohmann::json::array({6, 4, 2}));
    int records = 1;
    while (std::getline(lines, line)) records += !line.empty();
    CHECK(records == 2 * 3);
    CHECK(run({"simulate", "--q", "3", "--beta", "5", "--n", "12", "--start", "counts:6,4,1"}).status ==
          kExitValidation);
    CHECK(run({"simulate", "--q", "3", "--beta", "5", "--n", "12", "--start", "counts:6,x,6"}).status ==
          kExitValidation);
    CHECK(run({"simulate", "--q", "3", "--beta", "5", "--n", "12", "--start", "wild"}).status == kExitUsage);
  }

  TEST_CASE("percolation-check columns") {
    const Run r = run({"percolation-check", "--lambda", "0.5", "--n", "500", "--replicas", "5"});
    REQUIRE(r.status == kExitOk);
    CHECK(r.out.find("lambda,n,replicas,mean_R,var_R,isolated_mean,l1_mean") != std::string::npos);
  }

  TEST_CASE("couple output is reproducible") {
    const std::vector<std::string> args{"couple", "--q", "2", "--beta", "4", "--n", "5000", "--replicas", "6",
                                        "--seed", "3"};
    const Run a = run(args);
    REQUIRE(a.status == kExitOk);
    auto jobs3 = args;
    jobs3.insert(jobs3.end(), {"--jobs", "3"});
    const Run b = run(jobs3);
    REQUIRE(b.status == kExitOk);
    CHECK(a.out == b.out);
    CHECK(a.out.rfind("# schema=swlab.couple.v1", 0) == 0);
  }
}
