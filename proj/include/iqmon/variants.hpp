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

// Smoothed estimators that forget old data: an EWMA of CDFs, which costs the
// same per flush as the nominal update, and a moving window of per-block
// summaries pooled on demand.

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "iqmon/core.hpp"

namespace iqmon {

class EwmaConfig {
 public:
  static constexpr double default_weight = 0.1;

  explicit EwmaConfig(double weight = default_weight) : weight_(weight) {
    if (!(weight > 0.0 && weight <= 1.0)) {
      throw Error(Errc::invalid_argument, "EWMA weight must lie in (0,1], got " + std::to_string(weight));
    }
  }

  double weight() const noexcept { return weight_; }

 private:
  double weight_;
};

/// F_comb = (1 - w) F_prev + w F_buf for a populated prior.
inline ApproxCdf ewma_combined_cdf(const QuantileSummary& s, std::span<const double> sorted,
                                   const EwmaConfig& cfg) {
  const ApproxCdf parts[] = {summary_to_cdf(s), empirical_cdf(sorted)};
  const double weights[] = {1.0 - cfg.weight(), cfg.weight()};
  return mix_cdfs(parts, weights);
}

/// EWMA-of-CDF update. The count keeps the true number of observations for
/// reporting; only w enters the mixture.
inline QuantileSummary ewma_update(const QuantileSummary& s, std::span<const double> sorted,
                                   const EwmaConfig& cfg) {
  detail::require_sorted_buffer(sorted);
  if (s.empty()) return first_flush(s.grid(), sorted, s.epoch() + 1);
  const double lo = std::min(s.min(), sorted.front());
  const double hi = std::max(s.max(), sorted.back());
  return summary_from_cdf(ewma_combined_cdf(s, sorted, cfg), s.grid(), s.count() + sorted.size(), lo,
                          hi, s.epoch() + 1);
}

/// Disjoint blocks, each summarised on its own; only the newest K are kept.
class BlockWindow {
 public:
  static constexpr std::size_t default_size = 10;

  explicit BlockWindow(ProbabilityGrid grid, std::size_t window_size = default_size)
      : grid_(std::move(grid)), window_size_(window_size) {
    if (window_size == 0) throw Error(Errc::invalid_argument, "window size must be positive");
  }

  void push(std::span<const double> sorted) {
    detail::require_sorted_buffer(sorted);
    ++pushed_;
    blocks_.push_back(first_flush(grid_, sorted, pushed_));
    if (blocks_.size() > window_size_) blocks_.pop_front();
  }

  /// Count-weighted pool of the retained blocks, read at the window's grid.
  QuantileSummary estimate() const {
    if (blocks_.empty()) throw Error(Errc::no_data);
    const std::vector<QuantileSummary> members(blocks_.begin(), blocks_.end());
    std::uint64_t count = 0;
    double lo = members.front().min();
    double hi = members.front().max();
    for (const QuantileSummary& b : members) {
      count += b.count();
      lo = std::min(lo, b.min());
      hi = std::max(hi, b.max());
    }
    return summary_from_cdf(pooled_cdf(members), grid_, count, lo, hi, pushed_);
  }

  const ProbabilityGrid& grid() const noexcept { return grid_; }
  std::size_t window_size() const noexcept { return window_size_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }
  const std::deque<QuantileSummary>& blocks() const noexcept { return blocks_; }
  std::uint64_t blocks_pushed() const noexcept { return pushed_; }

 private:
  ProbabilityGrid grid_;
  std::size_t window_size_;
  std::deque<QuantileSummary> blocks_;
  std::uint64_t pushed_ = 0;
};

}  // namespace iqmon
