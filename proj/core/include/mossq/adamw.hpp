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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mossq/tensor.hpp"

namespace mossq {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
  /// true: AdamW (decay applied to the weights, outside the moments);
  /// false: Adam with L2 folded into the gradient.
  bool decoupled_decay = true;
};

/// Moments are kept in binary64 so the bound checks below are not limited by
/// float32 rounding of m and v.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double eta = 1e-3;
  AdamWConfig config;

  static OptimizerState zeros(std::size_t n, double eta, const AdamWConfig& config = {});
};

/// One AdamW step, in place:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   m_hat = m / (1 - b1^t),  v_hat = v / (1 - b2^t)
///   W <- W - eta (m_hat / (sqrt(v_hat) + eps) + lambda W)
/// If `delta` is non-empty it receives the effective update
/// eta * m_hat / (sqrt(v_hat) + eps), without the decay term.
/// Rejects shape mismatches and non-finite gradients before touching state.
void adamw_step_inplace(std::span<float> w, std::span<const float> g, OptimizerState& state,
                        std::span<double> delta = {});
void adamw_step_inplace(std::span<double> w, std::span<const float> g, OptimizerState& state,
                        std::span<double> delta = {});

struct AdamWStep {
  Tensor weights;
  OptimizerState state;
  std::vector<double> delta;
};

AdamWStep adamw_step(const Tensor& w, const Tensor& g, const OptimizerState& state);

/// max(1, (1 - b1^t) / sqrt(1 - b2^t)), the per-step bound on |delta_t| / eta.
double update_bound_factor(double beta1, double beta2, std::uint64_t t);

/// Relative allowance for binary64 rounding when comparing an update against
/// its bound. Several orders of magnitude below any real violation.
inline constexpr double kBoundRoundingSlack = 1e-12;

struct BoundCheckParams {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-30;
  double eta = 1e-3;
};

struct BoundReport {
  std::size_t steps = 0;
  std::size_t elements = 0;
  std::size_t violations = 0;       // element-steps with |delta| > eta * factor
  double max_ratio = 0.0;           // max |delta| / eta
  double max_ratio_over_bound = 0.0;
  std::vector<double> element_max_ratio;  // per element, max over steps of |delta| / eta
  std::vector<double> element_max_ratio_over_bound;
  std::vector<std::size_t> element_violations;
  std::size_t first_violation_step = 0;   // 1-based, 0 if none
  std::size_t first_violation_element = 0;
};

/// Runs Adam (no decay) over the gradient sequence and checks every element
/// and step against update_bound_factor. Each element is an independent
/// scalar sequence.
BoundReport theorem2_check(const std::vector<Tensor>& gradients, const BoundCheckParams& params = {});

/// `steps` tensors of `sequences` i.i.d. standard-normal elements.
std::vector<Tensor> gaussian_gradient_sequences(std::size_t sequences, std::size_t steps, std::uint64_t seed);

/// Sparse-spike family: element e is zero except at step e + 1 (1-based),
/// where it holds a spike of alternating sign and magnitude 10^(e mod 7 - 3).
/// One element per step position, so `steps` elements in total.
std::vector<Tensor> sparse_spike_sequences(std::size_t steps);

struct DecayTrajectoryConfig {
  std::size_t size = 1024;
  std::size_t steps = 2000;
  double eta = 1e-3;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double init_std = 0.02;
  bool constant_gradient = false;  // g = +1 everywhere instead of N(0, 1)
  std::uint64_t seed = 0;
};

struct DecayBoundReport {
  std::size_t steps = 0;
  std::size_t violations = 0;  // steps with max|W_t| > max|W_0| + eta t
  double max_abs_w0 = 0.0;
  /// max over t of (max|W_t| - max|W_0|) / (eta t); 1 means the bound is attained.
  double tightness = 0.0;
  std::vector<double> max_abs;  // max|W_t| for t = 0..steps
};

/// Simulates an AdamW trajectory in binary64 weights and checks
/// max|W_t| <= max|W_0| + eta t at every step. Requires lambda in [0, 1/eta).
DecayBoundReport decay_bound_check(const DecayTrajectoryConfig& config);

}  // namespace mossq
