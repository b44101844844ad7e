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

// Accuracy against an exact retained stream, and the change trigger.
//
// Rank error: an estimate x aimed at level p sits at realized rank
// q = F_ref(x), with F_ref the Hazen empirical CDF of the reference. The
// estimate lies between the exact (p - eps) and (p + eps) sample quantiles
// exactly when |p - q| <= eps. The logit error |logit p - logit q| measures
// the same discrepancy on a scale that magnifies the tails; q is clamped to
// [1/(2T), 1 - 1/(2T)] so the logit stays finite.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqmon/core.hpp"
#include "iqmon/text.hpp"

namespace iqmon {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double logit_error(double p, double q) { return std::abs(logit(p) - logit(q)); }

/// Hazen rank of x within a sorted reference, clamped to [1/(2T), 1 - 1/(2T)].
/// At tied reference values the midpoint of the jump is used.
inline double realized_rank(double x, std::span<const double> reference) {
  if (reference.empty()) throw Error(Errc::no_data, "empty reference");
  detail::require_finite(x, "estimate");
  const double t = static_cast<double>(reference.size());
  const auto below = static_cast<std::size_t>(std::lower_bound(reference.begin(), reference.end(), x) - reference.begin());
  const auto upto = static_cast<std::size_t>(std::upper_bound(reference.begin(), reference.end(), x) - reference.begin());
  double q;
  if (upto > below) {
    // x equals reference[below .. upto-1]: the jump spans (below+0.5)/T to (upto-0.5)/T.
    q = static_cast<double>(below + upto) / (2.0 * t);
  } else if (below == 0) {
    q = 0.0;
  } else if (below == reference.size()) {
    q = 1.0;
  } else {
    const double x0 = reference[below - 1];
    const double x1 = reference[below];
    const double f0 = (static_cast<double>(below) - 0.5) / t;
    q = f0 + ((x - x0) / (x1 - x0)) / t;
  }
  return std::clamp(q, 0.5 / t, 1.0 - 0.5 / t);
}

struct AccuracyEntry {
  double p;
  double estimate;
  double q;
  double rank_error;
  double logit_error;

  bool operator==(const AccuracyEntry&) const = default;
};

struct AccuracyReport {
  std::vector<AccuracyEntry> entries;
  double eps_max = 0.0;
  double logit_max = 0.0;

  static AccuracyReport from_entries(std::vector<AccuracyEntry> entries) {
    AccuracyReport r;
    r.entries = std::move(entries);
    for (const AccuracyEntry& e : r.entries) {
      r.eps_max = std::max(r.eps_max, e.rank_error);
      r.logit_max = std::max(r.logit_max, e.logit_error);
    }
    return r;
  }

  std::string to_csv() const {
    std::string out = "p,estimate,q,rank_error,logit_error\n";
    for (const AccuracyEntry& e : entries) {
      out += detail::format_double(e.p) + "," + detail::format_double(e.estimate) + "," +
             detail::format_double(e.q) + "," + detail::format_double(e.rank_error) + "," +
             detail::format_double(e.logit_error) + "\n";
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const AccuracyEntry& e : entries) {
      rows.push_back({{"p", e.p},
                      {"estimate", e.estimate},
                      {"q", e.q},
                      {"rank_error", e.rank_error},
                      {"logit_error", e.logit_error}});
    }
    return {{"entries", rows}, {"eps_max", eps_max}, {"logit_max", logit_max}};
  }

  static AccuracyReport from_json(const nlohmann::json& j) {
    std::vector<AccuracyEntry> entries;
    for (const auto& row : j.at("entries")) {
      entries.push_back({row.at("p").get<double>(), row.at("estimate").get<double>(), row.at("q").get<double>(),
                         row.at("rank_error").get<double>(), row.at("logit_error").get<double>()});
    }
    return from_entries(std::move(entries));
  }

  static AccuracyReport from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "p,estimate,q,rank_error,logit_error") {
      throw Error(Errc::invalid_argument, "not an accuracy report");
    }
    std::vector<AccuracyEntry> entries;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto cells = detail::split_top_level(line);
      if (cells.size() != 5) throw Error(Errc::invalid_argument, "accuracy row needs 5 columns");
      double v[5];
      for (int i = 0; i < 5; ++i) v[i] = detail::parse_double(cells[static_cast<std::size_t>(i)], "accuracy report");
      entries.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
    return from_entries(std::move(entries));
  }
};

/// Scores every grid estimate of `s` against the sorted reference stream.
inline AccuracyReport rank_error_report(const QuantileSummary& s, std::span<const double> reference) {
  if (s.empty()) throw Error(Errc::no_data);
  if (reference.empty()) throw Error(Errc::no_data, "empty reference");
  if (!std::is_sorted(reference.begin(), reference.end())) throw Error(Errc::unsorted, "reference");
  std::vector<AccuracyEntry> entries;
  for (std::size_t j = 0; j < s.grid().size(); ++j) {
    const double p = s.grid()[j];
    const double x = s.values()[j];
    const double q = realized_rank(x, reference);
    entries.push_back({p, x, q, std::abs(p - q), logit_error(p, q)});
  }
  return AccuracyReport::from_entries(std::move(entries));
}

// ---------------------------------------------------------------------------
// Change trigger

class TriggerConfig {
 public:
  explicit TriggerConfig(double alpha = 0.05) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::invalid_argument, "alpha must lie in (0,1)");
  }
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
};

struct TriggerResult {
  double statistic;
  double p_value;
  bool fired;
};

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2).
/// That alternating series is slow near zero, so below lambda = 1.18 the
/// equivalent theta-function form of the CDF is summed instead.
inline double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double tiny = 1e-10;
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < tiny) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1) ? term : -term;
    if (term < tiny) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// sup |F_a - F_b| over two piecewise-linear CDFs. The difference is linear
/// between the union of breakpoints, so checking both one-sided limits at
/// every breakpoint is exact.
inline double ks_distance(const ApproxCdf& a, const ApproxCdf& b) {
  double d = 0.0;
  auto probe = [&](double x) {
    d = std::max(d, std::abs(a(x) - b(x)));
    d = std::max(d, std::abs(a.left_limit(x) - b.left_limit(x)));
  };
  for (const CdfAnchor& anchor : a.anchors()) probe(anchor.x);
  for (const CdfAnchor& anchor : b.anchors()) probe(anchor.x);
  return d;
}

/// Two-sample Kolmogorov-Smirnov test of the newest buffer against the
/// running summary, treating the summary as n points.
inline TriggerResult ks_trigger(const QuantileSummary& s, std::span<const double> sorted,
                                const TriggerConfig& cfg) {
  if (s.empty()) throw Error(Errc::no_data);
  detail::require_sorted_buffer(sorted);
  const double stat = ks_distance(summary_to_cdf(s), empirical_cdf(sorted));
  const double n = static_cast<double>(s.count());
  const double m = static_cast<double>(sorted.size());
  const double ne = n * m / (n + m);
  const double root = std::sqrt(ne);
  const double lambda = (root + 0.12 + 0.11 / root) * stat;
  const double p_value = kolmogorov_survival(lambda);
  return {stat, p_value, p_value < cfg.alpha()};
}

}  // namespace iqmon
