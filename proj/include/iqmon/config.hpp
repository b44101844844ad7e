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

// Experiment configuration: a plain-text key/value file.
//
//   # comment
//   key = value
//
// Keys (required ones marked *):
//
//   stream*        base stream for every agent, e.g. normal(0,1)
//   buffer*        buffer capacity N
//   intervals*     intervals to simulate (simulate, eval)
//   shift          interval:dist, e.g. 50:normal(10,1)
//   agents         number of agents, ids 1..agents (default 1)
//   grid           comma-separated probability levels (default 9-level grid)
//   server_grid    grid used when pooling at the server (default: grid)
//   mode           nominal | ewma | window (default nominal)
//   w              EWMA weight (default 0.1)
//   k              window size in blocks (default 10)
//   agent_mode     cumulative | reset (default cumulative)
//   labels         labels for every agent, e.g. region=east;app=web
//   alpha          change-trigger significance level (default 0.05)
//   seed           experiment seed (default 0)
//   out            output directory (default out)
//   bench_sizes    comma-separated stream lengths for bench
//   oracle_cap     largest stream eval will retain (default 10000000)
//   agent.<id>.stream / agent.<id>.shift / agent.<id>.labels
//                  per-agent overrides

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iqmon/collector.hpp"
#include "iqmon/stream.hpp"
#include "iqmon/text.hpp"

namespace iqmon {

namespace detail {

inline std::uint64_t parse_u64(const std::string& s, std::string_view key) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (!s.empty() && s.front() == '-') throw std::invalid_argument(s);
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw Error(Errc::config, "bad integer '" + s + "' for " + std::string(key));
  }
  return v;
}

inline std::vector<double> parse_double_list(const std::string& s, std::string_view key) {
  std::vector<double> out;
  for (const std::string& part : split_top_level(strip(s))) out.push_back(parse_double(part, key));
  return out;
}

inline ProbabilityGrid parse_grid(const std::string& s, std::string_view key) {
  try {
    return ProbabilityGrid(parse_double_list(s, key));
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    throw Error(Errc::config, std::string(key) + ": " + e.what());
  }
}

inline Labels parse_labels(const std::string& s, std::string_view key) {
  Labels out;
  std::string item;
  std::istringstream in(strip(s));
  while (std::getline(in, item, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(Errc::config, "bad label '" + item + "' for " + std::string(key));
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

inline EstimatorSpec::Kind parse_mode(const std::string& s) {
  if (s == "nominal") return EstimatorSpec::Kind::nominal;
  if (s == "ewma") return EstimatorSpec::Kind::ewma;
  if (s == "window") return EstimatorSpec::Kind::window;
  throw Error(Errc::config, "mode must be nominal, ewma or window, got '" + s + "'");
}

}  // namespace detail

struct AgentOverride {
  std::optional<Distribution> stream;
  std::optional<StreamSpec::Shift> shift;
  std::optional<Labels> labels;
};

struct ExperimentConfig {
  std::optional<Distribution> stream;
  std::optional<StreamSpec::Shift> shift;
  std::optional<std::size_t> buffer;
  std::optional<std::uint64_t> intervals;
  std::uint64_t agents = 1;
  ProbabilityGrid grid = ProbabilityGrid::default_grid();
  std::optional<ProbabilityGrid> server_grid;
  EstimatorSpec estimator;
  AgentMode agent_mode = AgentMode::cumulative;
  Labels labels;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::vector<std::uint64_t> bench_sizes{100000, 200000, 400000};
  std::uint64_t oracle_cap = 10'000'000;
  std::map<std::uint64_t, AgentOverride> overrides;

  static ExperimentConfig parse(std::string_view text) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (detail::strip(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(Errc::config, "line " + std::to_string(lineno) + ": expected key = value");
      }
      const std::string key = detail::strip(line.substr(0, eq));
      const std::string value = detail::strip(line.substr(eq + 1));
      if (!seen.insert(key).second) throw Error(Errc::config, "duplicate key " + key);
      cfg.set(key, value);
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    if (key == "stream") {
      stream = parse_distribution(value);
    } else if (key == "shift") {
      shift = parse_shift(value);
    } else if (key == "buffer") {
      buffer = detail::parse_u64(value, key);
      if (*buffer == 0) throw Error(Errc::config, "buffer must be positive");
    } else if (key == "intervals") {
      intervals = detail::parse_u64(value, key);
      if (*intervals == 0) throw Error(Errc::config, "intervals must be positive");
    } else if (key == "agents") {
      agents = detail::parse_u64(value, key);
      if (agents == 0) throw Error(Errc::config, "agents must be positive");
    } else if (key == "grid") {
      grid = detail::parse_grid(value, key);
    } else if (key == "server_grid") {
      server_grid = detail::parse_grid(value, key);
    } else if (key == "mode") {
      estimator.kind = detail::parse_mode(value);
    } else if (key == "w") {
      estimator.weight = detail::parse_double(value, key);
      if (!(estimator.weight > 0.0 && estimator.weight <= 1.0)) throw Error(Errc::config, "w must lie in (0,1]");
    } else if (key == "k") {
      estimator.window = detail::parse_u64(value, key);
      if (estimator.window == 0) throw Error(Errc::config, "k must be positive");
    } else if (key == "agent_mode") {
      if (value == "cumulative") {
        agent_mode = AgentMode::cumulative;
      } else if (value == "reset") {
        agent_mode = AgentMode::reset;
      } else {
        throw Error(Errc::config, "agent_mode must be cumulative or reset");
      }
    } else if (key == "labels") {
      labels = detail::parse_labels(value, key);
    } else if (key == "alpha") {
      alpha = detail::parse_double(value, key);
      if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::config, "alpha must lie in (0,1)");
    } else if (key == "seed") {
      seed = detail::parse_u64(value, key);
    } else if (key == "out") {
      if (value.empty()) throw Error(Errc::config, "out must not be empty");
      out = value;
    } else if (key == "bench_sizes") {
      bench_sizes.clear();
      for (const std::string& part : detail::split_top_level(detail::strip(value))) {
        bench_sizes.push_back(detail::parse_u64(part, key));
        if (bench_sizes.back() == 0) throw Error(Errc::config, "bench sizes must be positive");
      }
    } else if (key == "oracle_cap") {
      oracle_cap = detail::parse_u64(value, key);
    } else if (key.starts_with("agent.")) {
      set_override(key, value);
    } else {
      throw Error(Errc::config, "unknown key " + key);
    }
  }

  /// Throws a config error naming the first missing key.
  void require(std::initializer_list<std::string_view> keys) const {
    for (std::string_view key : keys) {
      const bool present = (key == "stream" && stream) || (key == "buffer" && buffer) ||
                           (key == "intervals" && intervals);
      if (!present) throw Error(Errc::config, "missing required key " + std::string(key));
    }
  }

  std::uint64_t total_observations() const {
    require({"buffer", "intervals"});
    return agents * *intervals * *buffer;
  }

  SimulationSpec simulation(bool retain) const {
    require({"stream", "buffer", "intervals"});
    SimulationSpec spec;
    spec.buffer = *buffer;
    spec.intervals = *intervals;
    spec.seed = seed;
    spec.agent_grid = grid;
    spec.server_grid = server_grid.value_or(grid);
    spec.retain = retain;
    spec.alpha = alpha;
    for (const auto& [id, o] : overrides) {
      if (id == 0 || id > agents) {
        throw Error(Errc::config, "override for agent " + std::to_string(id) + " but agents = " + std::to_string(agents));
      }
    }
    for (std::uint64_t id = 1; id <= agents; ++id) {
      AgentSpec a;
      a.agent_id = id;
      a.labels = labels;
      a.stream = StreamSpec{*stream, shift};
      a.mode = agent_mode;
      a.estimator = estimator;
      if (auto it = overrides.find(id); it != overrides.end()) {
        if (it->second.stream) a.stream.base = *it->second.stream;
        if (it->second.shift) a.stream.shift = it->second.shift;
        if (it->second.labels) a.labels = *it->second.labels;
      }
      spec.agents.push_back(std::move(a));
    }
    return spec;
  }

 private:
  void set_override(const std::string& key, const std::string& value) {
    const std::string rest = key.substr(6);
    const auto dot = rest.find('.');
    if (dot == std::string::npos) throw Error(Errc::config, "unknown key " + key);
    const std::uint64_t id = detail::parse_u64(rest.substr(0, dot), key);
    const std::string field = rest.substr(dot + 1);
    AgentOverride& o = overrides[id];
    if (field == "stream") {
      o.stream = parse_distribution(value);
    } else if (field == "shift") {
      o.shift = parse_shift(value);
    } else if (field == "labels") {
      o.labels = detail::parse_labels(value, key);
    } else {
      throw Error(Errc::config, "unknown key " + key);
    }
  }
};

}  // namespace iqmon
