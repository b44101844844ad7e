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

// Simulated deployment: agents sketch their own streams and emit one record
// per interval; the server stores records and pools them per slice on demand.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqmon/core.hpp"
#include "iqmon/eval.hpp"
#include "iqmon/stream.hpp"
#include "iqmon/variants.hpp"
#include "iqmon/wire.hpp"

namespace iqmon {

using Labels = std::map<std::string, std::string>;

/// Equality filter over agent labels; an empty filter matches every agent.
using SliceFilter = Labels;

inline bool matches(const SliceFilter& filter, const Labels& labels) {
  for (const auto& [key, value] : filter) {
    auto it = labels.find(key);
    if (it == labels.end() || it->second != value) return false;
  }
  return true;
}

enum class AgentMode { cumulative, reset };

struct EstimatorSpec {
  enum class Kind { nominal, ewma, window };

  Kind kind = Kind::nominal;
  double weight = EwmaConfig::default_weight;
  std::size_t window = BlockWindow::default_size;

  static EstimatorSpec nominal() { return {}; }
  static EstimatorSpec ewma(double w) { return {Kind::ewma, w, BlockWindow::default_size}; }
  static EstimatorSpec windowed(std::size_t k) { return {Kind::window, EwmaConfig::default_weight, k}; }

  bool operator==(const EstimatorSpec&) const = default;
};

struct AgentSpec {
  std::uint64_t agent_id = 0;
  Labels labels;
  StreamSpec stream;
  AgentMode mode = AgentMode::cumulative;
  EstimatorSpec estimator;
};

// ---------------------------------------------------------------------------
// Pooling

/// Count-weighted pool of populated summaries, read at `grid`. Members may
/// carry different grids.
inline QuantileSummary merge_summaries(std::span<const QuantileSummary> members,
                                       const ProbabilityGrid& grid) {
  if (members.empty()) throw Error(Errc::no_data, "nothing to merge");
  std::uint64_t count = 0;
  std::uint64_t epoch = 0;
  double lo = members.front().min();
  double hi = members.front().max();
  for (const QuantileSummary& s : members) {
    if (s.empty()) throw Error(Errc::no_data, "empty member summary");
    count += s.count();
    epoch = std::max(epoch, s.epoch());
    lo = std::min(lo, s.min());
    hi = std::max(hi, s.max());
  }
  return summary_from_cdf(pooled_cdf(members), grid, count, lo, hi, epoch);
}

// ---------------------------------------------------------------------------
// Agent

/// One simulated agent: a stream generator feeding its chosen estimator.
class Agent {
 public:
  Agent(AgentSpec spec, const ProbabilityGrid& grid, std::size_t buffer, std::uint64_t seed)
      : spec_(std::move(spec)),
        generator_(spec_.stream, seed, spec_.agent_id),
        grid_(grid),
        buffer_(buffer),
        summary_(grid),
        window_(grid, spec_.estimator.kind == EstimatorSpec::Kind::window ? spec_.estimator.window : 1),
        ewma_(spec_.estimator.kind == EstimatorSpec::Kind::ewma ? spec_.estimator.weight
                                                                : EwmaConfig::default_weight) {
    if (buffer == 0) throw Error(Errc::config, "buffer must be positive");
  }

  /// Draws one buffer-load, folds it in and returns the interval's record.
  /// `retained`, when given, receives the raw observations.
  /// `trigger`, when given, tests the new block against the summary it is
  /// about to be folded into (skipped on the first interval).
  std::vector<std::uint8_t> step(std::uint64_t interval, std::vector<double>* retained = nullptr,
                                 const TriggerConfig* trigger = nullptr) {
    std::vector<double> block = generator_.block(buffer_, interval);
    if (retained) retained->insert(retained->end(), block.begin(), block.end());
    std::sort(block.begin(), block.end());
    last_trigger_.reset();
    if (trigger && !summary_.empty()) last_trigger_ = ks_trigger(summary_, block, *trigger);

    const std::uint64_t epoch = interval + 1;
    if (spec_.mode == AgentMode::reset) {
      summary_ = first_flush(grid_, block, epoch);
    } else {
      switch (spec_.estimator.kind) {
        case EstimatorSpec::Kind::nominal: summary_ = iq_update(summary_, block); break;
        case EstimatorSpec::Kind::ewma: summary_ = ewma_update(summary_, block, ewma_); break;
        case EstimatorSpec::Kind::window:
          window_.push(block);
          summary_ = window_.estimate();
          break;
      }
      summary_ = summary_.with_epoch(epoch);
    }
    const std::uint8_t flags = spec_.mode == AgentMode::reset ? record_flags::reset_mode : 0;
    return encode_record(summary_, spec_.agent_id, flags);
  }

  const AgentSpec& spec() const noexcept { return spec_; }
  const QuantileSummary& summary() const noexcept { return summary_; }
  const std::optional<TriggerResult>& last_trigger() const noexcept { return last_trigger_; }

 private:
  AgentSpec spec_;
  StreamGenerator generator_;
  ProbabilityGrid grid_;
  std::size_t buffer_;
  QuantileSummary summary_;
  BlockWindow window_;
  EwmaConfig ewma_;
  std::optional<TriggerResult> last_trigger_;
};

// ---------------------------------------------------------------------------
// Server

struct DrillQuery {
  SliceFilter filter{};
  /// How reset-mode agents' per-interval records are combined: pooled over
  /// the epoch range, EWMA over it, or pooled over its last K epochs.
  /// Cumulative agents always contribute their latest record in range.
  EstimatorSpec estimator{};
  std::optional<std::uint64_t> epoch_from{};
  std::optional<std::uint64_t> epoch_to{};
};

struct PooledView {
  SliceFilter filter;
  std::vector<std::uint64_t> member_agents;
  std::vector<QuantileSummary> members;
  QuantileSummary pooled;
};

struct IngestStats {
  std::uint64_t accepted = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t errors = 0;
};

/// Record store with per-slice drill-down. Single writer; drill() is a pure
/// read and may run concurrently with other drills.
class Server {
 public:
  explicit Server(ProbabilityGrid grid) : grid_(std::move(grid)) {}

  void register_agent(std::uint64_t agent_id, Labels labels) { labels_[agent_id] = std::move(labels); }

  enum class IngestResult { stored, replaced, rejected };

  /// Never throws on bad input; failures are tallied in stats().
  IngestResult ingest(std::span<const std::uint8_t> bytes) {
    try {
      DecodedRecord rec = decode_record(bytes);
      const auto key = std::make_pair(rec.agent_id, rec.summary.epoch());
      const bool existed = records_.contains(key);
      records_.insert_or_assign(key, Stored{std::move(rec.summary), rec.flags});
      ++stats_.accepted;
      if (existed) {
        ++stats_.duplicates;
        return IngestResult::replaced;
      }
      return IngestResult::stored;
    } catch (const Error&) {
      ++stats_.errors;
      return IngestResult::rejected;
    }
  }

  PooledView drill(const DrillQuery& query) const {
    const std::uint64_t from = query.epoch_from.value_or(0);
    const std::uint64_t to = query.epoch_to.value_or(UINT64_MAX);

    // Matching records per agent, in epoch order.
    std::map<std::uint64_t, std::vector<const Stored*>> per_agent;
    for (const auto& [key, stored] : records_) {
      const auto [agent, epoch] = key;
      if (epoch < from || epoch > to) continue;
      if (!matches(query.filter, labels_of(agent))) continue;
      per_agent[agent].push_back(&stored);
    }
    if (per_agent.empty()) throw Error(Errc::no_data_in_slice);

    PooledView view{query.filter, {}, {}, QuantileSummary(grid_)};
    for (const auto& [agent, stored] : per_agent) {
      const bool reset = (stored.back()->flags & record_flags::reset_mode) != 0;
      std::vector<QuantileSummary> contrib;
      if (!reset) {
        contrib.push_back(stored.back()->summary);
      } else {
        contrib = combine_intervals(stored, query.estimator);
      }
      for (QuantileSummary& s : contrib) {
        view.member_agents.push_back(agent);
        view.members.push_back(std::move(s));
      }
    }
    view.pooled = merge_summaries(view.members, grid_);
    return view;
  }

  std::vector<std::uint64_t> agents() const {
    std::set<std::uint64_t> ids;
    for (const auto& [key, stored] : records_) ids.insert(key.first);
    return {ids.begin(), ids.end()};
  }

  const Labels& labels_of(std::uint64_t agent) const {
    static const Labels none;
    auto it = labels_.find(agent);
    return it == labels_.end() ? none : it->second;
  }

  std::size_t record_count() const noexcept { return records_.size(); }
  const IngestStats& stats() const noexcept { return stats_; }
  const ProbabilityGrid& grid() const noexcept { return grid_; }

 private:
  struct Stored {
    QuantileSummary summary;
    std::uint8_t flags;
  };

  std::vector<QuantileSummary> combine_intervals(const std::vector<const Stored*>& stored,
                                                 const EstimatorSpec& estimator) const {
    std::vector<QuantileSummary> out;
    switch (estimator.kind) {
      case EstimatorSpec::Kind::nominal:
        for (const Stored* s : stored) out.push_back(s->summary);
        break;
      case EstimatorSpec::Kind::window: {
        const std::size_t keep = std::min(stored.size(), estimator.window);
        for (std::size_t i = stored.size() - keep; i < stored.size(); ++i) out.push_back(stored[i]->summary);
        break;
      }
      case EstimatorSpec::Kind::ewma: {
        const EwmaConfig cfg(estimator.weight);
        ApproxCdf smoothed = summary_to_cdf(stored.front()->summary);
        std::uint64_t count = stored.front()->summary.count();
        double lo = stored.front()->summary.min();
        double hi = stored.front()->summary.max();
        for (std::size_t i = 1; i < stored.size(); ++i) {
          const QuantileSummary& s = stored[i]->summary;
          const ApproxCdf parts[] = {smoothed, summary_to_cdf(s)};
          const double weights[] = {1.0 - cfg.weight(), cfg.weight()};
          smoothed = mix_cdfs(parts, weights);
          count += s.count();
          lo = std::min(lo, s.min());
          hi = std::max(hi, s.max());
        }
        out.push_back(summary_from_cdf(smoothed, grid_, count, lo, hi, stored.back()->summary.epoch()));
        break;
      }
    }
    return out;
  }

  ProbabilityGrid grid_;
  std::map<std::uint64_t, Labels> labels_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, Stored> records_;
  IngestStats stats_;
};

// ---------------------------------------------------------------------------
// Simulation

struct SimulationSpec {
  std::vector<AgentSpec> agents;
  std::size_t buffer = 100;
  std::uint64_t intervals = 1;
  std::uint64_t seed = 0;
  ProbabilityGrid agent_grid = ProbabilityGrid::default_grid();
  ProbabilityGrid server_grid = ProbabilityGrid::default_grid();
  /// Keep every raw observation (for exact-oracle evaluation).
  bool retain = false;
  /// Run the change trigger on every block at this significance level.
  std::optional<double> alpha;
};

struct TriggerEvent {
  std::uint64_t agent_id;
  std::uint64_t epoch;
  TriggerResult result;
};

struct SimulationResult {
  Server server;
  /// Concatenated records, interval-major, agents in spec order.
  std::vector<std::uint8_t> log;
  /// Raw observations per agent, in generation order, when retained.
  std::map<std::uint64_t, std::vector<double>> retained;
  std::vector<TriggerEvent> triggers;
};

inline void validate(const SimulationSpec& spec) {
  if (spec.agents.empty()) throw Error(Errc::config, "no agents");
  if (spec.buffer == 0) throw Error(Errc::config, "buffer must be positive");
  if (spec.intervals == 0) throw Error(Errc::config, "intervals must be positive");
  std::set<std::uint64_t> ids;
  for (const AgentSpec& a : spec.agents) {
    if (!ids.insert(a.agent_id).second) {
      throw Error(Errc::config, "duplicate agent id " + std::to_string(a.agent_id));
    }
    if (a.estimator.kind == EstimatorSpec::Kind::ewma &&
        !(a.estimator.weight > 0.0 && a.estimator.weight <= 1.0)) {
      throw Error(Errc::config, "EWMA weight must lie in (0,1]");
    }
    if (a.estimator.kind == EstimatorSpec::Kind::window && a.estimator.window == 0) {
      throw Error(Errc::config, "window size must be positive");
    }
  }
  if (spec.alpha && !(*spec.alpha > 0.0 && *spec.alpha < 1.0)) {
    throw Error(Errc::config, "alpha must lie in (0,1)");
  }
}

inline SimulationResult run_simulation(const SimulationSpec& spec) {
  validate(spec);
  const std::optional<TriggerConfig> trigger =
      spec.alpha ? std::optional<TriggerConfig>(TriggerConfig(*spec.alpha)) : std::nullopt;
  SimulationResult result{Server(spec.server_grid), {}, {}, {}};
  std::vector<Agent> agents;
  agents.reserve(spec.agents.size());
  for (const AgentSpec& a : spec.agents) {
    agents.emplace_back(a, spec.agent_grid, spec.buffer, spec.seed);
    result.server.register_agent(a.agent_id, a.labels);
    if (spec.retain) result.retained[a.agent_id].reserve(spec.buffer * spec.intervals);
  }
  result.log.reserve(agents.size() * spec.intervals * record_size(spec.agent_grid.size()));
  for (std::uint64_t t = 0; t < spec.intervals; ++t) {
    for (Agent& agent : agents) {
      std::vector<double>* keep = spec.retain ? &result.retained[agent.spec().agent_id] : nullptr;
      const std::vector<std::uint8_t> record = agent.step(t, keep, trigger ? &*trigger : nullptr);
      if (agent.last_trigger()) result.triggers.push_back({agent.spec().agent_id, t + 1, *agent.last_trigger()});
      result.server.ingest(record);
      result.log.insert(result.log.end(), record.begin(), record.end());
    }
  }
  return result;
}

}  // namespace iqmon
