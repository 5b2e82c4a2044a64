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

// Automatic per-tensor weight scaling. Under Adam-style updates each weight
// moves by at most about eta per step, so max|W_t| <= max|W_0| + sum eta_k and
// the scale can be predicted as s_t = s_last + sum_k eta_k / delta_max
// without reading the weights. A re-scale every `interval` steps does one
// max-reduction and snaps the prediction back to the just-in-time value.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mossq/fp8.hpp"
#include "mossq/quantize.hpp"
#include "mossq/tensor.hpp"

namespace mossq {

inline constexpr std::size_t kDefaultRescaleInterval = 500;

struct LrSchedule {
  enum class Kind : std::uint8_t { constant, cosine };

  Kind kind = Kind::constant;
  double peak = 1e-3;
  std::size_t warmup = 0;        // linear ramp over the first `warmup` steps
  std::size_t total_steps = 1;   // cosine horizon, warmup included
  double floor_fraction = 0.1;   // cosine ends at floor_fraction * peak

  /// Learning rate used for 0-based optimizer step `step`.
  double at(std::size_t step) const noexcept;
};

LrSchedule::Kind parse_lr_kind(std::string_view name);

/// Fixed-size, trivially copyable state; advancing it never touches weights.
class ScaleSchedule {
 public:
  ScaleSchedule(double s0, Fp8Format format, std::size_t interval = kDefaultRescaleInterval, LrSchedule lr = {});

  /// s0 = max|w0| / delta_max (one max-reduction at initialization).
  static ScaleSchedule from_weights(std::span<const float> w0, Fp8Format format,
                                    std::size_t interval = kDefaultRescaleInterval, LrSchedule lr = {});

  /// Current predicted scale s_last + (sum of eta since last re-scale) / delta_max.
  double scale() const noexcept;
  double initial_scale() const noexcept { return s0_; }
  double scale_at_last_rescale() const noexcept { return base_; }
  double eta_sum_since_rescale() const noexcept { return eta_sum_; }
  std::uint64_t step() const noexcept { return t_; }
  std::uint64_t last_rescale_step() const noexcept { return last_rescale_; }
  std::size_t interval() const noexcept { return interval_; }
  Fp8Format format() const noexcept { return format_; }
  const LrSchedule& lr() const noexcept { return lr_; }

  bool rescale_due() const noexcept { return t_ - last_rescale_ >= interval_; }

  /// s_{t+1} = s_t + eta / delta_max.
  void advance(double eta);
  /// Advances with the learning rate the stored schedule gives for this step.
  void advance() { advance(lr_.at(t_)); }

  /// Replaces the prediction with a measured scale at the current step.
  void reset(double measured_scale);

 private:
  double s0_;
  double base_;
  double eta_sum_ = 0.0;
  std::uint64_t t_ = 0;
  std::uint64_t last_rescale_ = 0;
  std::size_t interval_;
  Fp8Format format_;
  LrSchedule lr_;
};

/// Pure form of ScaleSchedule::advance; takes no weight data by construction.
ScaleSchedule auto_scale_advance(ScaleSchedule schedule, double eta);

/// max|w| / delta_max, or 1.0 for an all-zero tensor.
double jit_scale(std::span<const float> w, Fp8Format format);
inline double jit_scale(const Tensor& w, Fp8Format format) { return jit_scale(w.data(), format); }

struct RescaleResult {
  PerTensorQuant codes;
  ScaleSchedule schedule;
};

/// Interval re-scale: requires step - last_rescale_step >= interval. Performs
/// the max-reduction, resets the schedule to the just-in-time scale and
/// re-encodes the weights with it.
RescaleResult rescale_interval(const Tensor& w, const ScaleSchedule& schedule);

/// Synthetic AdamW trajectory: weights ~ N(0, init_std^2); gradients are a
/// fixed per-element drift ~ N(0, drift_std^2) plus N(0, 1) noise each step.
struct TrajectorySpec {
  std::size_t size = 4096;
  std::size_t steps = 2000;
  LrSchedule lr{LrSchedule::Kind::cosine, 1e-3, 100, 2000, 0.1};
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double init_std = 0.02;
  double drift_std = 0.5;
  std::uint64_t seed = 0;
  Fp8Format format = Fp8Format::e4m3;
};

struct WeightTrajectory {
  std::vector<double> max_abs;  // max|W_t| for t = 0..steps
  std::vector<double> eta;      // eta used by step t -> t+1
};

WeightTrajectory simulate_trajectory(const TrajectorySpec& spec);

struct ScaleTrace {
  std::vector<double> s_auto;  // t = 0..steps, after any re-scale at t
  std::vector<double> s_jit;
  std::vector<std::uint64_t> rescale_steps;
  std::size_t dominance_violations = 0;  // steps with s_auto < s_jit
  std::size_t exactness_violations = 0;  // re-scale steps where s_auto != s_jit
};

ScaleTrace trace_schedule(const WeightTrajectory& trajectory, std::size_t interval, Fp8Format format);

struct IntervalRow {
  std::size_t interval = 0;
  std::size_t rescale_count = 0;  // max-reductions after initialization
  double mean_overshoot = 0.0;    // mean over t of s_auto / s_jit
  double max_overshoot = 0.0;
  double min_headroom = 0.0;      // min over t of 1 - s_jit / s_auto
  std::size_t dominance_violations = 0;
};

std::vector<IntervalRow> interval_sweep(const std::vector<std::size_t>& intervals, const TrajectorySpec& spec);
std::vector<IntervalRow> interval_sweep(const std::vector<std::size_t>& intervals, const WeightTrajectory& trajectory,
                                        Fp8Format format);

}  // namespace mossq
