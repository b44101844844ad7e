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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "iqmon/variants.hpp"
#include "oracles.hpp"

using namespace iqmon;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> block(std::mt19937_64& rng, std::size_t n, double mu = 0.0) {
  return oracle::sorted_copy(oracle::normal_draws(rng, n, mu));
}

}  // namespace

TEST_CASE("EWMA weight must lie in (0,1]", "[variants][ewma]") {
  CHECK_THROWS_AS(EwmaConfig(0.0), Error);
  CHECK_THROWS_AS(EwmaConfig(-0.1), Error);
  CHECK_THROWS_AS(EwmaConfig(1.5), Error);
  CHECK(EwmaConfig(1.0).weight() == 1.0);
  CHECK(EwmaConfig().weight() == 0.1);
}

TEST_CASE("ewma_update with w = 1 forgets the prior", "[variants][ewma]") {
  std::mt19937_64 rng(1);
  const ProbabilityGrid grid = ProbabilityGrid::default_grid();
  const QuantileSummary prior = first_flush(grid, block(rng, 500, 3.0));
  const std::vector<double> d = block(rng, 100);
  const QuantileSummary s = ewma_update(prior, d, EwmaConfig(1.0));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK_THAT(s.values()[j], WithinAbs(oracle::hazen_quantile(d, grid[j]), 1e-12));
  }
  CHECK(s.count() == 600);
  CHECK(s.min() == std::min(prior.min(), d.front()));
}

TEST_CASE("ewma_update on an empty prior is the first flush", "[variants][ewma]") {
  const std::vector<double> d{1, 2, 3, 4};
  const QuantileSummary s = ewma_update(QuantileSummary(ProbabilityGrid({0.5})), d, EwmaConfig(0.3));
  CHECK(s.values()[0] == 2.5);
}

TEST_CASE("ewma median matches a brute-force inverse of the mixture", "[variants][ewma][oracle]") {
  std::mt19937_64 rng(8);
  const ProbabilityGrid grid = ProbabilityGrid::default_grid();
  QuantileSummary prior(grid);
  for (int i = 0; i < 20; ++i) prior = iq_update(prior, block(rng, 100));
  const std::vector<double> d = block(rng, 100, 10.0);
  const QuantileSummary s = ewma_update(prior, d, EwmaConfig(0.5));

  // Independent evaluation of the two piecewise-linear CDFs.
  auto prior_cdf = [&](double x) {
    std::vector<double> xs{prior.min()}, fs{0.0};
    for (std::size_t j = 0; j < grid.size(); ++j) {
      xs.push_back(prior.values()[j]);
      fs.push_back(grid[j]);
    }
    xs.push_back(prior.max());
    fs.push_back(1.0);
    if (x < xs.front()) return 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      if (x < xs[i + 1]) return fs[i] + (fs[i + 1] - fs[i]) * (x - xs[i]) / (xs[i + 1] - xs[i]);
    }
    return 1.0;
  };
  auto buffer_cdf = [&](double x) {
    if (x < d.front()) return 0.0;
    if (x >= d.back()) return 1.0;
    return oracle::hazen_rank(d, x);
  };
  auto mixture = [&](double x) { return 0.5 * prior_cdf(x) + 0.5 * buffer_cdf(x); };
  const double want = oracle::brute_inverse(mixture, prior.min() - 1, d.back() + 1, 0.5);
  CHECK_THAT(query_quantile(s, 0.5), WithinAbs(want, 1e-6));
}

TEST_CASE("ewma and nominal updates touch the same number of anchors", "[variants][ewma]") {
  std::mt19937_64 rng(4);
  QuantileSummary s(ProbabilityGrid::default_grid());
  s = iq_update(s, block(rng, 100));
  for (int round = 0; round < 20; ++round) {
    const std::vector<double> d = block(rng, 100, round * 0.1);
    const auto nominal = nominal_combined_cdf(s, d).anchors().size();
    const auto ewma = ewma_combined_cdf(s, d, EwmaConfig(0.2)).anchors().size();
    CHECK(nominal == ewma);
    CHECK(nominal <= s.grid().size() + 2 + d.size() + 2);
    s = iq_update(s, d);
  }
}

TEST_CASE("EWMA forgets a level shift faster than cumulative IQ", "[variants][ewma]") {
  const double w = 0.1;
  const int post_blocks = static_cast<int>(std::ceil(2 / w));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    QuantileSummary nominal(ProbabilityGrid::default_grid()), ewma(ProbabilityGrid::default_grid());
    for (int i = 0; i < 30; ++i) {
      const auto d = block(rng, 100);
      nominal = iq_update(nominal, d);
      ewma = ewma_update(ewma, d, EwmaConfig(w));
    }
    for (int i = 0; i < post_blocks; ++i) {
      const auto d = block(rng, 100, 5.0);
      nominal = iq_update(nominal, d);
      ewma = ewma_update(ewma, d, EwmaConfig(w));
      REQUIRE(std::is_sorted(ewma.values().begin(), ewma.values().end()));
      REQUIRE(ewma.min() <= ewma.values().front());
      REQUIRE(ewma.values().back() <= ewma.max());
    }
    CHECK(std::abs(query_quantile(ewma, 0.5) - 5.0) < std::abs(query_quantile(nominal, 0.5) - 5.0));
  }
}

TEST_CASE("block window keeps the newest K blocks", "[variants][window]") {
  const ProbabilityGrid grid({0.25, 0.5, 0.75});
  SECTION("one block") {
    BlockWindow w(grid, 4);
    const std::vector<double> d{1, 2, 3, 4, 5};
    w.push(d);
    CHECK(w.size() == 1);
    CHECK(w.estimate().values()[1] == 3.0);
    CHECK(w.estimate() == first_flush(grid, d, 1));
  }
  SECTION("eviction order") {
    BlockWindow w(grid, 3);
    for (int b = 1; b <= 5; ++b) w.push(std::vector<double>{double(b), double(b) + 0.5});
    REQUIRE(w.size() == 3);
    CHECK(w.blocks()[0].min() == 3.0);
    CHECK(w.blocks()[1].min() == 4.0);
    CHECK(w.blocks()[2].min() == 5.0);
    for (const QuantileSummary& b : w.blocks()) CHECK(b.count() == 2);
  }
  SECTION("errors") {
    BlockWindow w(grid, 3);
    CHECK_THROWS_WITH(w.estimate(), ContainsSubstring("no data"));
    CHECK_THROWS_AS(w.push(std::vector<double>{2, 1}), Error);
    CHECK_THROWS_AS(w.push(std::vector<double>{}), Error);
    CHECK_THROWS_AS(BlockWindow(grid, 0), Error);
  }
}

TEST_CASE("window estimate pooling identities", "[variants][window]") {
  std::mt19937_64 rng(9);
  const ProbabilityGrid grid = ProbabilityGrid::default_grid();
  SECTION("K = 1 is the last block") {
    BlockWindow w(grid, 1);
    w.push(block(rng, 100));
    const auto last = block(rng, 100);
    w.push(last);
    const QuantileSummary est = w.estimate();
    const QuantileSummary alone = first_flush(grid, last);
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK(est.values()[j] == alone.values()[j]);
  }
  SECTION("identical blocks") {
    BlockWindow w(grid, 5);
    const auto d = block(rng, 100);
    for (int i = 0; i < 5; ++i) w.push(d);
    const QuantileSummary est = w.estimate();
    const QuantileSummary one = first_flush(grid, d);
    for (std::size_t j = 0; j < grid.size(); ++j) CHECK_THAT(est.values()[j], WithinAbs(one.values()[j], 1e-12));
    CHECK(est.count() == 500);
  }
}

TEST_CASE("window estimate depends only on the last K blocks", "[variants][window][oracle]") {
  std::mt19937_64 rng(12);
  const ProbabilityGrid grid = ProbabilityGrid::default_grid();
  const std::size_t k = 6;
  BlockWindow full(grid, k), fresh(grid, k);
  for (int i = 0; i < 30; ++i) full.push(block(rng, 100));
  for (std::size_t i = 0; i < k; ++i) {
    const auto d = block(rng, 100, 5.0);
    full.push(d);
    fresh.push(d);
  }
  const QuantileSummary a = full.estimate(), b = fresh.estimate();
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK_THAT(a.values()[j], WithinAbs(b.values()[j], 1e-12));
  CHECK(a.count() == b.count());
  CHECK(a.min() == b.min());
}
