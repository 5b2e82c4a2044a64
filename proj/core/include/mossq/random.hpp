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

#pragma once

#include <array>
#include <cstdint>

namespace mossq {

/// SplitMix64, used only to expand a user seed into xoshiro state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman & Vigna). Every random number in the toolkit
/// comes from this generator so that outputs are identical across platforms
/// for a fixed seed. Normal and Laplace variates are produced by explicit
/// transforms below, never by <random> distributions, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;

  /// Laplace(0, b) with b = 1/sqrt(2), i.e. unit variance.
  double laplace() noexcept;

  /// Derives an independent stream for sub-task `index` (e.g. one trial).
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mossq
