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

// Incremental quantile estimation.
//
// A summary holds M quantile estimates on a fixed probability grid together
// with the count, min and max of everything absorbed so far. New data arrive
// in fixed-capacity buffers; each full buffer is sorted and folded into the
// summary by mixing the summary's piecewise-linear CDF with the buffer's
// empirical CDF and reading the mixture back at the grid. State between
// flushes is O(M), the buffer is O(N), and one flush costs O(N log N + M), so
// a stream of T observations costs O(T log N): linear in T for fixed N.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqmon/error.hpp"

namespace iqmon {

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(Errc::non_finite, what);
}

inline void require_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(Errc::invalid_argument, "probability must lie in (0,1), got " + std::to_string(p));
  }
}

/// Throws unless `d` is a nonempty, finite, ascending sequence.
inline void require_sorted_buffer(std::span<const double> d) {
  if (d.empty()) throw Error(Errc::no_data, "empty buffer");
  for (double v : d) require_finite(v, "buffer");
  if (!std::is_sorted(d.begin(), d.end())) throw Error(Errc::unsorted);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ProbabilityGrid

/// Strictly increasing probability levels, each in (0,1).
class ProbabilityGrid {
 public:
  explicit ProbabilityGrid(std::vector<double> levels) : levels_(std::move(levels)) {
    if (levels_.empty()) throw Error(Errc::invalid_argument, "grid needs at least one level");
    for (std::size_t j = 0; j < levels_.size(); ++j) {
      detail::require_probability(levels_[j]);
      if (j > 0 && !(levels_[j - 1] < levels_[j])) {
        throw Error(Errc::invalid_argument, "grid levels must be strictly increasing");
      }
    }
  }

  /// Tail-weighted default, M = 9.
  static ProbabilityGrid default_grid() {
    return ProbabilityGrid({0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99});
  }

  std::span<const double> levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  double operator[](std::size_t j) const noexcept { return levels_[j]; }

  bool operator==(const ProbabilityGrid&) const = default;

 private:
  std::vector<double> levels_;
};

// ---------------------------------------------------------------------------
// QuantileSummary

/// An agent's whole state between buffer flushes. A summary with count 0 is
/// "empty": its values are unset and every query on it fails with "no data".
class QuantileSummary {
 public:
  explicit QuantileSummary(ProbabilityGrid grid) : grid_(std::move(grid)) {}

  QuantileSummary(ProbabilityGrid grid, std::vector<double> values, std::uint64_t count,
                  double min, double max, std::uint64_t epoch)
      : grid_(std::move(grid)),
        values_(std::move(values)),
        count_(count),
        min_(min),
        max_(max),
        epoch_(epoch) {
    validate();
  }

  const ProbabilityGrid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::uint64_t count() const noexcept { return count_; }
  double min() const noexcept { return min_; }
  double max() const noexcept { return max_; }
  std::uint64_t epoch() const noexcept { return epoch_; }
  bool empty() const noexcept { return count_ == 0; }

  QuantileSummary with_epoch(std::uint64_t epoch) const {
    QuantileSummary out = *this;
    out.epoch_ = epoch;
    return out;
  }

  bool operator==(const QuantileSummary&) const = default;

 private:
  void validate() const {
    if (count_ == 0) throw Error(Errc::invalid_argument, "populated summary needs count > 0");
    if (values_.size() != grid_.size()) {
      throw Error(Errc::invalid_argument, "values size does not match grid");
    }
    detail::require_finite(min_, "min");
    detail::require_finite(max_, "max");
    for (double v : values_) detail::require_finite(v, "quantile value");
    if (!std::is_sorted(values_.begin(), values_.end())) {
      throw Error(Errc::invalid_argument, "quantile values must be nondecreasing");
    }
    if (!(min_ <= values_.front() && values_.back() <= max_)) {
      throw Error(Errc::invalid_argument, "quantile values must lie within [min, max]");
    }
  }

  ProbabilityGrid grid_;
  std::vector<double> values_;
  std::uint64_t count_ = 0;
  double min_ = 0.0;
  double max_ = 0.0;
  std::uint64_t epoch_ = 0;
};

// ---------------------------------------------------------------------------
// DataBuffer

/// Fixed-capacity staging area for raw observations.
class DataBuffer {
 public:
  explicit DataBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(Errc::invalid_argument, "buffer capacity must be positive");
    items_.reserve(capacity);
  }

  /// Returns true when the buffer has become full.
  bool push(double x) {
    detail::require_finite(x, "observation");
    if (full()) throw Error(Errc::invalid_argument, "buffer is full");
    items_.push_back(x);
    return full();
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  bool full() const noexcept { return items_.size() == capacity_; }
  std::span<const double> items() const noexcept { return items_; }

  /// Sorts the contents, hands them over and leaves the buffer empty.
  std::vector<double> take_sorted() {
    std::vector<double> out;
    out.reserve(capacity_);
    out.swap(items_);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<double> items_;
};

// ---------------------------------------------------------------------------
// ApproxCdf

/// One breakpoint of a piecewise-linear CDF. `lo` is the left limit at `x` and
/// `hi` the value at `x`; lo < hi marks a jump (tied observations, or a
/// quantile estimate sitting on the min/max).
struct CdfAnchor {
  double x;
  double lo;
  double hi;

  bool operator==(const CdfAnchor&) const = default;
};

/// Piecewise-linear CDF: linear between consecutive anchors, 0 below the first
/// and 1 from the last onwards.
class ApproxCdf {
 public:
  explicit ApproxCdf(std::vector<CdfAnchor> anchors) : anchors_(std::move(anchors)) { validate(); }

  /// Builds from (x, F) points, merging points that share an x into one anchor
  /// spanning their F-range.
  static ApproxCdf from_points(std::span<const std::pair<double, double>> points) {
    std::vector<CdfAnchor> anchors;
    anchors.reserve(points.size());
    for (const auto& [x, f] : points) {
      if (!anchors.empty() && anchors.back().x == x) {
        anchors.back().lo = std::min(anchors.back().lo, f);
        anchors.back().hi = std::max(anchors.back().hi, f);
      } else {
        anchors.push_back({x, f, f});
      }
    }
    return ApproxCdf(std::move(anchors));
  }

  std::span<const CdfAnchor> anchors() const noexcept { return anchors_; }
  double lower() const noexcept { return anchors_.front().x; }
  double upper() const noexcept { return anchors_.back().x; }

  /// F(x), right-continuous at jumps.
  double operator()(double x) const {
    auto it = std::upper_bound(anchors_.begin(), anchors_.end(), x,
                               [](double v, const CdfAnchor& a) { return v < a.x; });
    if (it == anchors_.begin()) return 0.0;
    const CdfAnchor& left = *(it - 1);
    if (left.x == x || it == anchors_.end()) return left.hi;
    return interpolate(left, *it, x);
  }

  /// lim F(t) as t approaches x from below.
  double left_limit(double x) const {
    auto it = std::lower_bound(anchors_.begin(), anchors_.end(), x,
                               [](const CdfAnchor& a, double v) { return a.x < v; });
    if (it == anchors_.end()) return 1.0;
    if (it->x == x) return it->lo;
    if (it == anchors_.begin()) return 0.0;
    return interpolate(*(it - 1), *it, x);
  }

  static double interpolate(const CdfAnchor& a, const CdfAnchor& b, double x) noexcept {
    return a.hi + (b.lo - a.hi) * ((x - a.x) / (b.x - a.x));
  }

 private:
  void validate() const {
    if (anchors_.empty()) throw Error(Errc::invalid_argument, "cdf needs at least one anchor");
    double prev_x = -std::numeric_limits<double>::infinity();
    double prev_f = 0.0;
    for (const CdfAnchor& a : anchors_) {
      detail::require_finite(a.x, "cdf anchor");
      if (!(a.x > prev_x)) throw Error(Errc::invalid_argument, "cdf anchors must be strictly increasing in x");
      if (!(prev_f <= a.lo && a.lo <= a.hi && a.hi <= 1.0)) {
        throw Error(Errc::invalid_argument, "cdf values must be nondecreasing within [0,1]");
      }
      prev_x = a.x;
      prev_f = a.hi;
    }
    if (anchors_.front().lo != 0.0 || anchors_.back().hi != 1.0) {
      throw Error(Errc::invalid_argument, "cdf must start at 0 and end at 1");
    }
  }

  std::vector<CdfAnchor> anchors_;
};

namespace detail {

/// The CDF's graph with jumps drawn as vertical segments, as a polyline that is
/// nondecreasing in both coordinates. Inverting it at p finds the set of x
/// where the graph passes level p; that set is an interval [a, b] and the
/// answer is its midpoint, so flats resolve to their centre.
class InversePolyline {
 public:
  explicit InversePolyline(const ApproxCdf& f) {
    const auto anchors = f.anchors();
    xs_.reserve(2 * anchors.size());
    levels_.reserve(2 * anchors.size());
    for (const CdfAnchor& a : anchors) {
      xs_.push_back(a.x);
      levels_.push_back(a.lo);
      if (a.hi > a.lo) {
        xs_.push_back(a.x);
        levels_.push_back(a.hi);
      }
    }
  }

  double operator()(double p) const {
    // First point at or above p; it exists because the last level is 1.
    const std::size_t k =
        static_cast<std::size_t>(std::lower_bound(levels_.begin(), levels_.end(), p) - levels_.begin());
    const double a = (k == 0 || levels_[k] == p) ? xs_[k] : crossing(k - 1, k, p);
    // Last point at or below p; it exists because the first level is 0.
    const std::size_t m =
        static_cast<std::size_t>(std::upper_bound(levels_.begin(), levels_.end(), p) - levels_.begin()) - 1;
    const double b = (levels_[m] == p || m + 1 == levels_.size()) ? xs_[m] : crossing(m, m + 1, p);
    return std::midpoint(a, b);
  }

 private:
  double crossing(std::size_t i, std::size_t j, double p) const {
    if (xs_[i] == xs_[j]) return xs_[i];
    return xs_[i] + (xs_[j] - xs_[i]) * ((p - levels_[i]) / (levels_[j] - levels_[i]));
  }

  std::vector<double> xs_;
  std::vector<double> levels_;
};

/// Reads `f` back at every grid level, clamped to [lo, hi] and forced
/// nondecreasing.
inline std::vector<double> invert_at_grid(const ApproxCdf& f, const ProbabilityGrid& grid, double lo,
                                          double hi) {
  const InversePolyline inverse(f);
  std::vector<double> values;
  values.reserve(grid.size());
  for (double p : grid.levels()) {
    double v = std::clamp(inverse(p), lo, hi);
    if (!values.empty()) v = std::max(v, values.back());
    values.push_back(v);
  }
  return values;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CDF construction, mixing and inversion

/// Piecewise-linear CDF through (min,0), (values[j], p_j), (max,1).
inline ApproxCdf summary_to_cdf(const QuantileSummary& s) {
  if (s.empty()) throw Error(Errc::no_data);
  std::vector<std::pair<double, double>> points;
  points.reserve(s.grid().size() + 2);
  points.emplace_back(s.min(), 0.0);
  for (std::size_t j = 0; j < s.grid().size(); ++j) points.emplace_back(s.values()[j], s.grid()[j]);
  points.emplace_back(s.max(), 1.0);
  return ApproxCdf::from_points(points);
}

/// Hazen empirical CDF of sorted data: anchors at (d_i, (i - 0.5)/N), closed
/// off one ulp outside the extremes.
inline ApproxCdf empirical_cdf(std::span<const double> sorted) {
  detail::require_sorted_buffer(sorted);
  const double n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> points;
  points.reserve(sorted.size() + 2);
  points.emplace_back(std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity()), 0.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    points.emplace_back(sorted[i], (static_cast<double>(i) + 0.5) / n);
  }
  points.emplace_back(std::nextafter(sorted.back(), std::numeric_limits<double>::infinity()), 1.0);
  return ApproxCdf::from_points(points);
}

/// Smallest x with F(x) >= p; the midpoint when F is flat at level p.
inline double invert_cdf(const ApproxCdf& f, double p) {
  detail::require_probability(p);
  return detail::InversePolyline(f)(p);
}

/// Weighted mixture sum_i w_i F_i / sum_i w_i. The result's anchors are the
/// union of the inputs' anchors, which is exact for piecewise-linear inputs.
inline ApproxCdf mix_cdfs(std::span<const ApproxCdf> cdfs, std::span<const double> weights) {
  if (cdfs.empty() || cdfs.size() != weights.size()) {
    throw Error(Errc::invalid_argument, "mixture needs one weight per cdf");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::invalid_argument, "mixture weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(Errc::invalid_argument, "mixture weights sum to zero");

  std::vector<double> xs;
  for (const ApproxCdf& f : cdfs) {
    for (const CdfAnchor& a : f.anchors()) xs.push_back(a.x);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  std::vector<CdfAnchor> out(xs.size(), CdfAnchor{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < xs.size(); ++i) out[i].x = xs[i];

  // One forward sweep per component: cursor is the first anchor with x >= xs[i].
  for (std::size_t c = 0; c < cdfs.size(); ++c) {
    const double w = weights[c];
    if (w == 0.0) continue;
    const auto anchors = cdfs[c].anchors();
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i];
      while (cursor < anchors.size() && anchors[cursor].x < x) ++cursor;
      double lo = 1.0;
      double hi = 1.0;
      if (cursor < anchors.size()) {
        if (anchors[cursor].x == x) {
          lo = anchors[cursor].lo;
          hi = anchors[cursor].hi;
        } else if (cursor == 0) {
          lo = hi = 0.0;
        } else {
          lo = hi = ApproxCdf::interpolate(anchors[cursor - 1], anchors[cursor], x);
        }
      }
      out[i].lo += w * lo;
      out[i].hi += w * hi;
    }
  }

  double running = 0.0;
  for (CdfAnchor& a : out) {
    a.lo = std::clamp(a.lo / total, running, 1.0);
    a.hi = std::clamp(a.hi / total, a.lo, 1.0);
    running = a.hi;
  }
  out.front().lo = 0.0;
  out.back().hi = 1.0;
  return ApproxCdf(std::move(out));
}

/// Count-weighted pooled CDF of populated summaries.
inline ApproxCdf pooled_cdf(std::span<const QuantileSummary> members) {
  if (members.empty()) throw Error(Errc::no_data);
  std::vector<ApproxCdf> cdfs;
  std::vector<double> weights;
  cdfs.reserve(members.size());
  weights.reserve(members.size());
  for (const QuantileSummary& s : members) {
    cdfs.push_back(summary_to_cdf(s));
    weights.push_back(static_cast<double>(s.count()));
  }
  return mix_cdfs(cdfs, weights);
}

// ---------------------------------------------------------------------------
// Updates

/// Summary of one sorted buffer on its own: the Hazen sample quantiles.
inline QuantileSummary first_flush(const ProbabilityGrid& grid, std::span<const double> sorted,
                                   std::uint64_t epoch = 1) {
  const ApproxCdf f = empirical_cdf(sorted);
  return QuantileSummary(grid, detail::invert_at_grid(f, grid, sorted.front(), sorted.back()),
                         sorted.size(), sorted.front(), sorted.back(), epoch);
}

/// F_comb = (n F_prev + N F_buf) / (n + N) for a populated prior.
inline ApproxCdf nominal_combined_cdf(const QuantileSummary& s, std::span<const double> sorted) {
  const ApproxCdf parts[] = {summary_to_cdf(s), empirical_cdf(sorted)};
  const double weights[] = {static_cast<double>(s.count()), static_cast<double>(sorted.size())};
  return mix_cdfs(parts, weights);
}

/// Folds a sorted buffer into the summary. A partial final buffer is fine; it
/// is weighted by its actual length.
inline QuantileSummary iq_update(const QuantileSummary& s, std::span<const double> sorted) {
  detail::require_sorted_buffer(sorted);
  if (s.empty()) return first_flush(s.grid(), sorted, s.epoch() + 1);
  const double lo = std::min(s.min(), sorted.front());
  const double hi = std::max(s.max(), sorted.back());
  const ApproxCdf combined = nominal_combined_cdf(s, sorted);
  return QuantileSummary(s.grid(), detail::invert_at_grid(combined, s.grid(), lo, hi),
                         s.count() + sorted.size(), lo, hi, s.epoch() + 1);
}

/// Re-reads a CDF at a grid, giving a summary with the supplied bookkeeping.
inline QuantileSummary summary_from_cdf(const ApproxCdf& f, const ProbabilityGrid& grid,
                                        std::uint64_t count, double min, double max,
                                        std::uint64_t epoch) {
  return QuantileSummary(grid, detail::invert_at_grid(f, grid, min, max), count, min, max, epoch);
}

// ---------------------------------------------------------------------------
// Queries

inline double query_quantile(const QuantileSummary& s, double p) {
  if (s.empty()) throw Error(Errc::no_data);
  return invert_cdf(summary_to_cdf(s), p);
}

inline double query_cdf(const QuantileSummary& s, double x) {
  if (s.empty()) throw Error(Errc::no_data);
  return std::clamp(summary_to_cdf(s)(x), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Sketch

/// Summary plus its staging buffer: the nominal agent-side estimator.
class Sketch {
 public:
  Sketch(ProbabilityGrid grid, std::size_t buffer_capacity)
      : summary_(std::move(grid)), buffer_(buffer_capacity) {}

  void add(double x) {
    if (buffer_.push(x)) flush();
  }

  template <typename Range>
  void add_all(const Range& xs) {
    for (double x : xs) add(x);
  }

  /// Folds whatever is buffered (possibly a partial load) into the summary.
  void flush() {
    if (buffer_.empty()) return;
    const std::vector<double> sorted = buffer_.take_sorted();
    summary_ = iq_update(summary_, sorted);
  }

  const QuantileSummary& summary() const noexcept { return summary_; }
  const DataBuffer& buffer() const noexcept { return buffer_; }

 private:
  QuantileSummary summary_;
  DataBuffer buffer_;
};

}  // namespace iqmon
