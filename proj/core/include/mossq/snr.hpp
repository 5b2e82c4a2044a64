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

// Quantization signal-to-noise ratio: measured (10 log10 of signal power over
// dequantization error power) and the uniform-noise closed forms for the
// three schemes.
//
// The closed forms use sigma_X^2 = mean(x^2), the signal power the measured
// SNR uses; this equals the variance for the zero-mean tensors the model
// assumes.

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "mossq/quantize.hpp"
#include "mossq/tensor.hpp"

namespace mossq {

/// Returned when the dequantization error is exactly zero.
inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

/// 10 log10(sum x^2 / sum (dq - x)^2), accumulated in double.
double snr_empirical(const Tensor& x, const Tensor& dq);

/// Closed-form model:
///   per-tensor  10 log10(12 sigma^2 D^2 / max|X|^2)
///   per-group   10 log10(12 N sigma^2 D^2 / sum_g max|X_g|^2)
///   two-level   10 log10(12 N_g sigma^2 / sum_g (s_g ss_g)^2)
/// where D = delta_max and, for two-level, s_g is the level-1 scale covering
/// micro-block g and ss_g its decoded E8M0 scale. With a single level-1 span
/// this is 12 N_g sigma^2 D^2 / (max|X|^2 sum_g ss_g^2).
double snr_model(const Tensor& x, Scheme scheme, Fp8Format format, const SchemeParams& params = {});

struct SnrReport {
  Scheme scheme = Scheme::per_tensor;
  double empirical_db = 0.0;
  double model_db = 0.0;
  double signal_power = 0.0;  // mean(x^2)
  double noise_power = 0.0;   // mean((dq - x)^2)
  std::size_t n_groups = 0;   // scale groups (1, N or N_g)
};

SnrReport snr_report(const Tensor& x, Scheme scheme, Fp8Format format, const SchemeParams& params = {});

struct Theorem1Config {
  std::size_t trials = 1000;
  std::size_t size = 4096;
  Distribution dist = Gaussian{};
  Fp8Format format = Fp8Format::e4m3;
  std::uint64_t seed = 0;
  SchemeParams params;
};

struct Theorem1Trial {
  std::uint64_t seed = 0;
  std::array<SnrReport, 3> reports;  // tensor, group, two-level
  bool degenerate = false;           // all three reconstructions exact
  bool ordered = false;              // two-level > group > tensor, strictly
};

struct Theorem1Summary {
  std::vector<Theorem1Trial> trials;
  std::array<double, 3> mean_empirical_db{};  // over trials with all SNRs finite
  double mean_gap_group_over_tensor = 0.0;
  double mean_gap_two_level_over_group = 0.0;
  double ordered_fraction = 0.0;              // over non-degenerate trials
  std::size_t degenerate_trials = 0;
  std::size_t finite_trials = 0;
};

/// Quantizes `trials` synthetic tensors of `size` elements with all three
/// schemes and tabulates the measured SNR ordering.
Theorem1Summary theorem1_harness(const Theorem1Config& config);

/// Same statistics over caller-supplied tensors.
Theorem1Summary theorem1_summarize(const std::vector<Tensor>& tensors, Fp8Format format,
                                   const SchemeParams& params = {});

}  // namespace mossq
