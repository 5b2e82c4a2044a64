// Copyright 2026 The mossq Authors.
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

#include "mossq/error.hpp"

namespace mossq {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_shape: return "invalid_shape";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::invalid_value: return "invalid_value";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::overflow: return "overflow";
    case Errc::bad_magic: return "bad_magic";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::truncated: return "truncated";
    case Errc::unsupported_dtype: return "unsupported_dtype";
    case Errc::io: return "io";
    case Errc::undefined_model: return "undefined_model";
    case Errc::diverged: return "diverged";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace mossq
