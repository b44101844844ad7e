// Copyright 2026 The iqmon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>

#include "iqmon/cli.hpp"

using namespace iqmon;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "iqmon_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "exp.cfg";
  std::ofstream(p) << text;
  return p;
}

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "iqmon");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return detail::read_file(p); }

const char* minimal = "agents = 1\nintervals = 1\nbuffer = 4\ngrid = 0.5\nstream = fixed(1,2,3,4)\n";

}  // namespace

TEST_CASE("simulate: minimal config reports median 2.5", "[cli][simulate]") {
  const fs::path dir = scratch("minimal");
  const Run r = run({"simulate", "--config", write_config(dir, minimal).string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == exit_ok);
  const DrillReport report = DrillReport::from_json(nlohmann::json::parse(slurp(dir / "o" / "drill.json")));
  REQUIRE(report.views.size() == 1);
  CHECK(report.views[0].values == std::vector<double>{2.5});
  CHECK(report.views[0].count == 4);
  CHECK_THAT(slurp(dir / "o" / "drill.csv"), ContainsSubstring("all,4,1,4,0.5,2.5"));
  const auto log = slurp(dir / "o" / "records.bin");
  const auto recs =
      decode_record_log(std::span(reinterpret_cast<const std::uint8_t*>(log.data()), log.size()));
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].summary.values()[0] == 2.5);
}

TEST_CASE("simulate: outputs are byte-identical across runs", "[cli][simulate]") {
  const fs::path dir = scratch("determinism");
  const fs::path cfg = write_config(dir, "agents = 4\nintervals = 20\nbuffer = 50\nstream = lognormal(0,1)\n"
                                         "labels = region=east\nagent.4.labels = region=west\nseed = 3\n");
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"records.bin", "drill.csv", "drill.json"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  const DrillReport report = DrillReport::from_json(nlohmann::json::parse(slurp(dir / "a" / "drill.json")));
  REQUIRE(report.views.size() == 3);  // all, region=east, region=west
  CHECK(report.views[1].count + report.views[2].count == report.views[0].count);
  CHECK(nlohmann::json::parse(slurp(dir / "a" / "drill.json")) == report.to_json());

  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "4"}).code == 0);
  CHECK(slurp(dir / "a" / "records.bin") != slurp(dir / "c" / "records.bin"));
}

TEST_CASE("IQMON_SEED overrides the config seed", "[cli][simulate]") {
  const fs::path dir = scratch("envseed");
  const fs::path cfg = write_config(dir, "intervals = 3\nbuffer = 10\nstream = normal(0,1)\nseed = 1\n");
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "cfg").string()}).code == 0);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "flag").string(), "--seed", "2"}).code == 0);
  ::setenv("IQMON_SEED", "2", 1);
  const Run env = run({"simulate", "--config", cfg.string(), "--out", (dir / "env").string()});
  ::unsetenv("IQMON_SEED");
  REQUIRE(env.code == 0);
  CHECK(slurp(dir / "env" / "records.bin") == slurp(dir / "flag" / "records.bin"));
  CHECK(slurp(dir / "env" / "records.bin") != slurp(dir / "cfg" / "records.bin"));
}

TEST_CASE("config errors exit 2 with a diagnostic", "[cli]") {
  const fs::path dir = scratch("errors");
  Run r = run({"simulate", "--config", write_config(dir, "intervals = 1\nbuffer = 4\n").string()});
  CHECK(r.code == exit_config);
  CHECK_THAT(r.err, ContainsSubstring("stream"));

  r = run({"simulate", "--config", write_config(dir, minimal).string(), "--mode", "fancy"});
  CHECK(r.code == exit_config);
  r = run({"simulate", "--config", (dir / "nope.cfg").string()});
  CHECK(r.code == exit_config);
  r = run({"simulate"});
  CHECK(r.code == exit_config);
  r = run({"frobnicate"});
  CHECK(r.code == exit_config);
  r = run({"simulate", "--config", write_config(dir, minimal).string(), "--w", "2"});
  CHECK(r.code == exit_config);
}

TEST_CASE("eval: exact-oracle self-test scores zero", "[cli][eval]") {
  const fs::path dir = scratch("selftest");
  const fs::path cfg = write_config(dir, "intervals = 1\nbuffer = 5000\nstream = normal(0,1)\nseed = 8\n");
  const Run r = run({"eval", "--config", cfg.string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == exit_ok);
  const AccuracyReport rep = AccuracyReport::from_json(nlohmann::json::parse(slurp(dir / "o" / "accuracy.json")));
  CHECK(rep.eps_max < 1e-12);
  CHECK(AccuracyReport::from_csv(slurp(dir / "o" / "accuracy.csv")).entries == rep.entries);
  CHECK_THAT(r.out, ContainsSubstring("eps_max"));
  CHECK_THAT(r.out, ContainsSubstring("logit_max"));
}

TEST_CASE("eval: 100k normal stream in 100-point buffers", "[cli][eval]") {
  const fs::path dir = scratch("normal100k");
  const fs::path cfg = write_config(dir, "intervals = 1000\nbuffer = 100\nstream = normal(0,1)\nseed = 1\n");
  const Run r = run({"eval", "--config", cfg.string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == exit_ok);
  const AccuracyReport rep = AccuracyReport::from_json(nlohmann::json::parse(slurp(dir / "o" / "accuracy.json")));
  CHECK(rep.eps_max <= 0.02);
  CHECK_THAT(slurp(dir / "o" / "triggers.csv"), ContainsSubstring("agent,epoch,statistic,p_value,fired"));
}

TEST_CASE("eval: EWMA beats nominal after a shift", "[cli][eval]") {
  const fs::path dir = scratch("shift");
  const fs::path cfg = write_config(
      dir, "intervals = 100\nbuffer = 100\nstream = normal(0,1)\nshift = 50:normal(10,1)\nseed = 2\n");
  const Run r = run({"eval", "--config", cfg.string(), "--out", (dir / "o").string(), "--mode", "ewma", "--w", "0.1"});
  REQUIRE(r.code == exit_ok);
  auto median_error = [&](const char* file) {
    const auto rep = AccuracyReport::from_json(nlohmann::json::parse(slurp(dir / "o" / file)));
    for (const auto& e : rep.entries) {
      if (e.p == 0.5) return e.rank_error;
    }
    FAIL("no median row");
    return 1.0;
  };
  CHECK(median_error("accuracy_post_shift.json") < median_error("baseline_accuracy_post_shift.json"));
}

TEST_CASE("eval refuses streams over the oracle cap", "[cli][eval]") {
  const fs::path dir = scratch("cap");
  const fs::path cfg =
      write_config(dir, "agents = 10\nintervals = 100\nbuffer = 100\nstream = normal(0,1)\noracle_cap = 50000\n");
  const Run r = run({"eval", "--config", cfg.string(), "--out", (dir / "o").string()});
  CHECK(r.code == exit_config);
  CHECK_THAT(r.err, ContainsSubstring("oracle_cap"));
}

TEST_CASE("bench: one row per ladder size", "[cli][bench]") {
  const fs::path dir = scratch("bench");
  const fs::path cfg = write_config(dir, "buffer = 100\nbench_sizes = 20000,40000,80000\n");
  const Run r = run({"bench", "--config", cfg.string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == exit_ok);
  std::istringstream csv(slurp(dir / "o" / "bench.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);

  ExperimentConfig c = ExperimentConfig::parse("buffer = 100\nbench_sizes = 5000,10000\n");
  const auto table = run_bench(c, 1);
  REQUIRE(table.size() == 2);
  CHECK(table[0].ratio == 0.0);
  CHECK(table[1].ratio > 0.0);
  CHECK(table[1].seconds > 0.0);
}
