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

#pragma once

#include <stdexcept>
#include <string>

namespace iqmon {

enum class Errc {
  invalid_argument,
  no_data,
  unsorted,
  non_finite,
  not_a_record,
  unsupported_version,
  bad_length,
  corrupt_record,
  no_data_in_slice,
  config,
};

/// Every failure raised by the library carries one of the codes above. The
/// message always starts with the canonical text for the code, so callers
/// that only look at what() still see "no data", "corrupt record", etc.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail = {})
      : std::runtime_error(compose(code, detail)), code_(code) {}

  Errc code() const noexcept { return code_; }

  static const char* canonical(Errc code) noexcept {
    switch (code) {
      case Errc::invalid_argument: return "invalid argument";
      case Errc::no_data: return "no data";
      case Errc::unsorted: return "buffer not sorted";
      case Errc::non_finite: return "non-finite value";
      case Errc::not_a_record: return "not a summary record";
      case Errc::unsupported_version: return "unsupported version";
      case Errc::bad_length: return "truncated/overlong";
      case Errc::corrupt_record: return "corrupt record";
      case Errc::no_data_in_slice: return "no data in slice";
      case Errc::config: return "config error";
    }
    return "error";
  }

 private:
  static std::string compose(Errc code, const std::string& detail) {
    std::string msg = canonical(code);
    if (!detail.empty()) msg += ": " + detail;
    return msg;
  }

  Errc code_;
};

}  // namespace iqmon
