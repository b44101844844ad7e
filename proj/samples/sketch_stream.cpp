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

// Sketches a stream read from stdin (one number per line) and prints the
// tail-weighted quantile estimates.
//
//   seq 1 100000 | ./sketch_stream 100

#include <cstdlib>
#include <iostream>

#include "iqmon/core.hpp"

int main(int argc, char** argv) {
  const std::size_t buffer = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 100;
  iqmon::Sketch sketch(iqmon::ProbabilityGrid::default_grid(), buffer);
  double x;
  while (std::cin >> x) sketch.add(x);
  sketch.flush();

  const iqmon::QuantileSummary& s = sketch.summary();
  if (s.empty()) {
    std::cerr << "no data\n";
    return 1;
  }
  std::cout << "n=" << s.count() << " min=" << s.min() << " max=" << s.max() << "\n";
  for (std::size_t j = 0; j < s.grid().size(); ++j) {
    std::cout << "p=" << s.grid()[j] << "\t" << s.values()[j] << "\n";
  }
}
