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

// The iqmon command line: simulate, eval and bench subcommands plus the
// report files they write. Exit codes: 0 success, 2 config error, 3 runtime
// error.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iqmon/collector.hpp"
#include "iqmon/config.hpp"
#include "iqmon/eval.hpp"

namespace iqmon {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_runtime = 3;

// ---------------------------------------------------------------------------
// Drill report

struct DrillReportView {
  std::string slice;
  std::uint64_t count = 0;
  double min = 0.0;
  double max = 0.0;
  std::vector<std::uint64_t> agents;
  std::vector<double> levels;
  std::vector<double> values;

  bool operator==(const DrillReportView&) const = default;
};

struct DrillReport {
  std::vector<DrillReportView> views;
  IngestStats ingest;

  static DrillReportView view_of(const std::string& slice, const PooledView& v) {
    std::set<std::uint64_t> ids(v.member_agents.begin(), v.member_agents.end());
    const auto levels = v.pooled.grid().levels();
    const auto values = v.pooled.values();
    return {slice,
            v.pooled.count(),
            v.pooled.min(),
            v.pooled.max(),
            {ids.begin(), ids.end()},
            {levels.begin(), levels.end()},
            {values.begin(), values.end()}};
  }

  std::string to_csv() const {
    std::string out = "slice,count,min,max,p,value\n";
    for (const DrillReportView& v : views) {
      for (std::size_t j = 0; j < v.levels.size(); ++j) {
        out += v.slice + "," + std::to_string(v.count) + "," + detail::format_double(v.min) + "," +
               detail::format_double(v.max) + "," + detail::format_double(v.levels[j]) + "," +
               detail::format_double(v.values[j]) + "\n";
      }
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json views_json = nlohmann::json::array();
    for (const DrillReportView& v : views) {
      nlohmann::json q = nlohmann::json::array();
      for (std::size_t j = 0; j < v.levels.size(); ++j) q.push_back({{"p", v.levels[j]}, {"value", v.values[j]}});
      views_json.push_back({{"slice", v.slice},
                            {"count", v.count},
                            {"min", v.min},
                            {"max", v.max},
                            {"agents", v.agents},
                            {"quantiles", q}});
    }
    return {{"views", views_json},
            {"ingest",
             {{"accepted", ingest.accepted}, {"duplicates", ingest.duplicates}, {"errors", ingest.errors}}}};
  }

  static DrillReport from_json(const nlohmann::json& j) {
    DrillReport r;
    for (const auto& v : j.at("views")) {
      DrillReportView view;
      view.slice = v.at("slice").get<std::string>();
      view.count = v.at("count").get<std::uint64_t>();
      view.min = v.at("min").get<double>();
      view.max = v.at("max").get<double>();
      view.agents = v.at("agents").get<std::vector<std::uint64_t>>();
      for (const auto& q : v.at("quantiles")) {
        view.levels.push_back(q.at("p").get<double>());
        view.values.push_back(q.at("value").get<double>());
      }
      r.views.push_back(std::move(view));
    }
    const auto& ing = j.at("ingest");
    r.ingest = {ing.at("accepted").get<std::uint64_t>(), ing.at("duplicates").get<std::uint64_t>(),
                ing.at("errors").get<std::uint64_t>()};
    return r;
  }
};

/// The all-agents view followed by one view per distinct label value.
inline DrillReport build_drill_report(const Server& server, const EstimatorSpec& estimator) {
  DrillReport report;
  report.ingest = server.stats();
  report.views.push_back(DrillReport::view_of("all", server.drill({{}, estimator, {}, {}})));
  std::set<std::pair<std::string, std::string>> slices;
  for (std::uint64_t id : server.agents()) {
    for (const auto& kv : server.labels_of(id)) slices.insert(kv);
  }
  for (const auto& [key, value] : slices) {
    report.views.push_back(DrillReport::view_of(key + "=" + value, server.drill({{{key, value}}, estimator, {}, {}})));
  }
  return report;
}

// ---------------------------------------------------------------------------
// File helpers

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::config, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline std::filesystem::path prepare_out(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.out);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string mode_name(EstimatorSpec::Kind k) {
  switch (k) {
    case EstimatorSpec::Kind::nominal: return "nominal";
    case EstimatorSpec::Kind::ewma: return "ewma";
    case EstimatorSpec::Kind::window: return "window";
  }
  return "?";
}

inline void print_quantiles(std::ostream& out, const DrillReportView& v) {
  out << "slice " << v.slice << " count " << v.count << "\n";
  for (std::size_t j = 0; j < v.levels.size(); ++j) {
    out << "  p=" << v.levels[j] << "  " << std::setprecision(10) << v.values[j] << std::setprecision(6) << "\n";
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

/// Runs the simulation; writes records.bin, drill.csv and drill.json.
inline int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out) {
  const SimulationResult result = run_simulation(cfg.simulation(false));
  const DrillReport report = build_drill_report(result.server, cfg.estimator);
  const auto dir = detail::prepare_out(cfg);
  detail::write_file(dir / "records.bin", result.log);
  detail::write_file(dir / "drill.csv", report.to_csv());
  detail::write_file(dir / "drill.json", report.to_json().dump(2) + "\n");
  out << "records " << result.server.record_count() << " (" << result.log.size() << " bytes)\n";
  detail::print_quantiles(out, report.views.front());
  return exit_ok;
}

struct EvalOutcome {
  AccuracyReport all;
  std::optional<AccuracyReport> post_shift;
  std::vector<TriggerEvent> triggers;
};

namespace detail {

inline EvalOutcome evaluate(const ExperimentConfig& cfg) {
  const SimulationSpec spec = cfg.simulation(true);
  const SimulationResult result = run_simulation(spec);
  const PooledView view = result.server.drill({{}, cfg.estimator, {}, {}});

  std::vector<double> reference;
  std::vector<double> post;
  bool shifted = false;
  for (const AgentSpec& a : spec.agents) {
    const std::vector<double>& data = result.retained.at(a.agent_id);
    reference.insert(reference.end(), data.begin(), data.end());
    if (a.stream.shift) {
      shifted = true;
      const std::size_t from = std::min<std::size_t>(data.size(), a.stream.shift->interval * spec.buffer);
      post.insert(post.end(), data.begin() + static_cast<std::ptrdiff_t>(from), data.end());
    }
  }
  std::sort(reference.begin(), reference.end());
  std::sort(post.begin(), post.end());

  EvalOutcome outcome{rank_error_report(view.pooled, reference), std::nullopt, result.triggers};
  if (shifted && !post.empty()) outcome.post_shift = rank_error_report(view.pooled, post);
  return outcome;
}

inline void write_accuracy(const std::filesystem::path& dir, const std::string& stem, const AccuracyReport& r) {
  write_file(dir / (stem + ".csv"), r.to_csv());
  write_file(dir / (stem + ".json"), r.to_json().dump(2) + "\n");
}

}  // namespace detail

/// Scores the configured estimator against the exact retained stream. Writes
/// accuracy.{csv,json}, accuracy_post_shift.* when a shift is configured,
/// baseline_* (nominal estimator, same streams) when the mode is not nominal,
/// and triggers.csv.
inline int cmd_eval(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.require({"stream", "buffer", "intervals"});
  const std::uint64_t total = cfg.total_observations();
  if (total > cfg.oracle_cap) {
    throw Error(Errc::config, "oracle retention of " + std::to_string(total) + " observations exceeds oracle_cap " +
                                  std::to_string(cfg.oracle_cap));
  }
  const auto dir = detail::prepare_out(cfg);
  const EvalOutcome main = detail::evaluate(cfg);
  const std::string mode = detail::mode_name(cfg.estimator.kind);
  detail::write_accuracy(dir, "accuracy", main.all);
  out << std::setprecision(10);
  out << mode << " eps_max " << main.all.eps_max << " logit_max " << main.all.logit_max << "\n";
  if (main.post_shift) {
    detail::write_accuracy(dir, "accuracy_post_shift", *main.post_shift);
    out << mode << " post_shift eps_max " << main.post_shift->eps_max << " logit_max "
        << main.post_shift->logit_max << "\n";
  }

  if (cfg.estimator.kind != EstimatorSpec::Kind::nominal) {
    ExperimentConfig base = cfg;
    base.estimator = EstimatorSpec::nominal();
    const EvalOutcome baseline = detail::evaluate(base);
    detail::write_accuracy(dir, "baseline_accuracy", baseline.all);
    out << "nominal eps_max " << baseline.all.eps_max << " logit_max " << baseline.all.logit_max << "\n";
    if (baseline.post_shift) {
      detail::write_accuracy(dir, "baseline_accuracy_post_shift", *baseline.post_shift);
      out << "nominal post_shift eps_max " << baseline.post_shift->eps_max << " logit_max "
          << baseline.post_shift->logit_max << "\n";
    }
  }

  std::string csv = "agent,epoch,statistic,p_value,fired\n";
  std::size_t fired = 0;
  for (const TriggerEvent& e : main.triggers) {
    csv += std::to_string(e.agent_id) + "," + std::to_string(e.epoch) + "," + detail::format_double(e.result.statistic) +
           "," + detail::format_double(e.result.p_value) + "," + (e.result.fired ? "1" : "0") + "\n";
    fired += e.result.fired ? 1 : 0;
  }
  detail::write_file(dir / "triggers.csv", csv);
  out << "triggers fired " << fired << " of " << main.triggers.size() << " at alpha " << cfg.alpha << "\n";
  return exit_ok;
}

struct BenchRow {
  std::uint64_t size;
  double seconds;
  double ns_per_element;
  double ratio;  // seconds relative to the previous row; 0 for the first
};

/// Times the nominal sketch over each stream length (best of `repeats`).
inline std::vector<BenchRow> run_bench(const ExperimentConfig& cfg, int repeats = 3) {
  if (!cfg.buffer) throw Error(Errc::config, "missing required key buffer");
  const Distribution dist = cfg.stream.value_or(Distribution::normal(0.0, 1.0));
  std::vector<BenchRow> rows;
  for (std::uint64_t size : cfg.bench_sizes) {
    Rng rng(cfg.seed, size);
    std::vector<double> data(size);
    for (std::uint64_t i = 0; i < size; ++i) data[i] = dist.sample(rng, i);
    double best = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const auto start = std::chrono::steady_clock::now();
      Sketch sketch(cfg.grid, *cfg.buffer);
      sketch.add_all(data);
      sketch.flush();
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      if (sketch.summary().count() != size) throw std::logic_error("bench lost observations");
      best = r == 0 ? took.count() : std::min(best, took.count());
    }
    const double ratio = rows.empty() ? 0.0 : best / rows.back().seconds;
    rows.push_back({size, best, 1e9 * best / static_cast<double>(size), ratio});
  }
  return rows;
}

inline int cmd_bench(const ExperimentConfig& cfg, std::ostream& out) {
  const std::vector<BenchRow> rows = run_bench(cfg);
  std::string csv = "size,seconds,ns_per_element,ratio\n";
  out << std::setw(12) << "size" << std::setw(14) << "seconds" << std::setw(16) << "ns/element" << std::setw(10)
      << "ratio" << "\n";
  for (const BenchRow& r : rows) {
    csv += std::to_string(r.size) + "," + detail::format_double(r.seconds) + "," +
           detail::format_double(r.ns_per_element) + "," + detail::format_double(r.ratio) + "\n";
    out << std::setw(12) << r.size << std::setw(14) << std::fixed << std::setprecision(6) << r.seconds
        << std::setw(16) << std::setprecision(1) << r.ns_per_element << std::setw(10) << std::setprecision(3)
        << r.ratio << "\n"
        << std::defaultfloat;
  }
  detail::write_file(detail::prepare_out(cfg) / "bench.csv", csv);
  return exit_ok;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"iqmon: incremental quantile monitoring experiments"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<double> w;
    std::optional<std::uint64_t> k;
    std::optional<std::string> grid;
    std::optional<std::uint64_t> buffer;
    std::optional<double> alpha;
  } flags;

  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment config file")->required();
    sub->add_option("--seed", flags.seed, "experiment seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--mode", flags.mode, "estimator: nominal | ewma | window");
    sub->add_option("--w", flags.w, "EWMA weight in (0,1]");
    sub->add_option("--k", flags.k, "window size in blocks");
    sub->add_option("--grid", flags.grid, "probability levels p1,p2,...");
    sub->add_option("--buffer", flags.buffer, "buffer capacity N");
    sub->add_option("--alpha", flags.alpha, "change-trigger significance level");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "run agents and the collector, write records and drill report");
  CLI::App* eval = app.add_subcommand("eval", "score estimates against the exact retained stream");
  CLI::App* bench = app.add_subcommand("bench", "time the sketch over a ladder of stream lengths");
  for (CLI::App* sub : {simulate, eval, bench}) add_flags(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    ExperimentConfig cfg = ExperimentConfig::parse(detail::read_file(flags.config));
    if (const char* env = std::getenv("IQMON_SEED"); env && *env) cfg.set("seed", env);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.set("out", *flags.out);
    if (flags.mode) cfg.set("mode", *flags.mode);
    if (flags.w) cfg.set("w", detail::format_double(*flags.w));
    if (flags.k) cfg.set("k", std::to_string(*flags.k));
    if (flags.grid) cfg.set("grid", *flags.grid);
    if (flags.buffer) cfg.set("buffer", std::to_string(*flags.buffer));
    if (flags.alpha) cfg.set("alpha", detail::format_double(*flags.alpha));

    if (simulate->parsed()) return cmd_simulate(cfg, out);
    if (eval->parsed()) return cmd_eval(cfg, out);
    return cmd_bench(cfg, out);
  } catch (const Error& e) {
    err << "iqmon: " << e.what() << "\n";
    return e.code() == Errc::config ? exit_config : exit_runtime;
  } catch (const std::exception& e) {
    err << "iqmon: " << e.what() << "\n";
    return exit_runtime;
  }
}

}  // namespace iqmon
