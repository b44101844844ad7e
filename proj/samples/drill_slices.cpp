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

// Six agents in two regions; one region degrades halfway through. Drilling
// into the slices shows which region moved the overall tail.

#include <iostream>

#include "iqmon/collector.hpp"

int main() {
  using namespace iqmon;
  SimulationSpec spec;
  spec.buffer = 200;
  spec.intervals = 40;
  spec.seed = 7;
  for (std::uint64_t id = 1; id <= 6; ++id) {
    AgentSpec a;
    a.agent_id = id;
    a.labels = {{"region", id <= 3 ? "east" : "west"}};
    a.stream.base = parse_distribution("lognormal(3,0.4)");
    if (id > 3) a.stream.shift = parse_shift("20:lognormal(3.5,0.6)");
    spec.agents.push_back(a);
  }
  const SimulationResult result = run_simulation(spec);

  for (const SliceFilter& filter : {SliceFilter{}, SliceFilter{{"region", "east"}}, SliceFilter{{"region", "west"}}}) {
    const PooledView view = result.server.drill({filter, {}, {}, {}});
    const std::string name = filter.empty() ? "all" : filter.begin()->second;
    std::cout << name << ": n=" << view.pooled.count() << " p50=" << query_quantile(view.pooled, 0.5)
              << " p95=" << query_quantile(view.pooled, 0.95) << " p99=" << query_quantile(view.pooled, 0.99) << "\n";
  }
}
