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

// Reproducible synthetic streams for the simulator.
//
// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
// standard. Agent seeds are derived from (experiment seed, agent id) through
// std::seed_seq, which is also fully specified. Variates are produced here
// rather than by <random> distributions, whose algorithms are left to the
// standard library implementation:
//
//   uniform01  = (bits >> 11) * 2^-53
//   normal     = Marsaglia polar method, both variates of a pair are used
//   lognormal  = exp(normal)
//
// Stream spec grammar (whitespace ignored):
//
//   dist    := normal(mu,sigma) | uniform(a,b) | lognormal(mu,sigma)
//            | mixture(weight,dist,dist) | fixed(v1,v2,...)
//   shift   := interval:dist        (dist replaces the base from that interval on)

#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "iqmon/error.hpp"
#include "iqmon/text.hpp"

namespace iqmon {

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t bits() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    return u * factor;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct Distribution {
  enum class Kind { normal, uniform, lognormal, mixture, fixed };

  Kind kind = Kind::normal;
  /// normal/lognormal: mu, sigma. uniform: a, b. mixture: weight of the first
  /// component. fixed: the values, cycled.
  std::vector<double> params{0.0, 1.0};
  std::vector<Distribution> components;

  static Distribution normal(double mu, double sigma) { return {Kind::normal, {mu, sigma}, {}}; }

  double sample(Rng& rng, std::uint64_t position) const {
    switch (kind) {
      case Kind::normal: return params[0] + params[1] * rng.normal();
      case Kind::uniform: return params[0] + (params[1] - params[0]) * rng.uniform01();
      case Kind::lognormal: return std::exp(params[0] + params[1] * rng.normal());
      case Kind::mixture:
        return rng.uniform01() < params[0] ? components[0].sample(rng, position)
                                           : components[1].sample(rng, position);
      case Kind::fixed: return params[position % params.size()];
    }
    return 0.0;
  }

  std::string to_string() const;
  bool operator==(const Distribution&) const = default;
};

struct StreamSpec {
  struct Shift {
    std::uint64_t interval;  // zero-based interval at which `after` takes over
    Distribution after;
    bool operator==(const Shift&) const = default;
  };

  Distribution base;
  std::optional<Shift> shift;

  const Distribution& at(std::uint64_t interval) const {
    return shift && interval >= shift->interval ? shift->after : base;
  }

  bool operator==(const StreamSpec&) const = default;
};

inline Distribution parse_distribution(std::string_view text) {
  const std::string s = detail::strip(text);
  const auto open = s.find('(');
  if (open == std::string::npos || s.empty() || s.back() != ')') {
    throw Error(Errc::config, "bad distribution '" + s + "'");
  }
  const std::string name = s.substr(0, open);
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  const auto args = detail::split_top_level(inner);

  auto numbers = [&](std::size_t expected) {
    if (expected != 0 && args.size() != expected) {
      throw Error(Errc::config, name + " takes " + std::to_string(expected) + " arguments");
    }
    std::vector<double> out;
    for (const auto& a : args) out.push_back(detail::parse_double(a, name));
    return out;
  };

  Distribution d;
  if (name == "normal" || name == "lognormal") {
    d.kind = name == "normal" ? Distribution::Kind::normal : Distribution::Kind::lognormal;
    d.params = numbers(2);
    if (!(d.params[1] > 0.0)) throw Error(Errc::config, name + " sigma must be positive");
  } else if (name == "uniform") {
    d.kind = Distribution::Kind::uniform;
    d.params = numbers(2);
    if (!(d.params[0] < d.params[1])) throw Error(Errc::config, "uniform needs a < b");
  } else if (name == "fixed") {
    d.kind = Distribution::Kind::fixed;
    if (inner.empty()) throw Error(Errc::config, "fixed needs at least one value");
    d.params = numbers(0);
  } else if (name == "mixture") {
    if (args.size() != 3) throw Error(Errc::config, "mixture takes (weight, dist, dist)");
    d.kind = Distribution::Kind::mixture;
    d.params = {detail::parse_double(args[0], name)};
    if (!(d.params[0] >= 0.0 && d.params[0] <= 1.0)) {
      throw Error(Errc::config, "mixture weight must lie in [0,1]");
    }
    d.components = {parse_distribution(args[1]), parse_distribution(args[2])};
  } else {
    throw Error(Errc::config, "unknown distribution '" + name + "'");
  }
  return d;
}

inline std::string Distribution::to_string() const {
  std::string out;
  auto list = [&](std::size_t from) {
    for (std::size_t i = from; i < params.size(); ++i) {
      if (i > from) out += ",";
      out += detail::format_double(params[i]);
    }
  };
  switch (kind) {
    case Kind::normal: out = "normal("; list(0); break;
    case Kind::uniform: out = "uniform("; list(0); break;
    case Kind::lognormal: out = "lognormal("; list(0); break;
    case Kind::fixed: out = "fixed("; list(0); break;
    case Kind::mixture:
      out = "mixture(" + detail::format_double(params[0]) + "," + components[0].to_string() + "," +
            components[1].to_string();
      break;
  }
  return out + ")";
}

inline StreamSpec::Shift parse_shift(std::string_view text) {
  const std::string s = detail::strip(text);
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(Errc::config, "shift must look like interval:dist");
  const std::string head = s.substr(0, colon);
  std::uint64_t interval = 0;
  try {
    std::size_t used = 0;
    interval = std::stoull(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw Error(Errc::config, "bad shift interval '" + head + "'");
  }
  return {interval, parse_distribution(s.substr(colon + 1))};
}

/// Draws blocks from a StreamSpec. `position` counts every observation drawn,
/// which is what `fixed` streams cycle on.
class StreamGenerator {
 public:
  StreamGenerator(StreamSpec spec, std::uint64_t seed, std::uint64_t stream_id)
      : spec_(std::move(spec)), rng_(seed, stream_id) {}

  std::vector<double> block(std::size_t n, std::uint64_t interval) {
    const Distribution& d = spec_.at(interval);
    std::vector<double> out(n);
    for (double& x : out) x = d.sample(rng_, position_++);
    return out;
  }

  const StreamSpec& spec() const noexcept { return spec_; }

 private:
  StreamSpec spec_;
  Rng rng_;
  std::uint64_t position_ = 0;
};

}  // namespace iqmon
