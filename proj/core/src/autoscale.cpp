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

#include "mossq/autoscale.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mossq/adamw.hpp"
#include "mossq/error.hpp"
#include "mossq/random.hpp"

namespace mossq {

double LrSchedule::at(std::size_t step) const noexcept {
  if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (kind == Kind::constant) return peak;
  const double span = total_steps > warmup ? static_cast<double>(total_steps - warmup) : 1.0;
  const double progress = std::clamp(static_cast<double>(step - warmup) / span, 0.0, 1.0);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return peak * (floor_fraction + (1.0 - floor_fraction) * cosine);
}

LrSchedule::Kind parse_lr_kind(std::string_view name) {
  if (name == "const" || name == "constant") return LrSchedule::Kind::constant;
  if (name == "cosine") return LrSchedule::Kind::cosine;
  fail(Errc::invalid_argument, "unknown learning-rate schedule '" + std::string(name) + "'");
}

ScaleSchedule::ScaleSchedule(double s0, Fp8Format format, std::size_t interval, LrSchedule lr)
    : s0_(s0), base_(s0), interval_(interval), format_(format), lr_(lr) {
  if (!(s0 > 0.0) || !std::isfinite(s0)) fail(Errc::invalid_argument, "initial scale must be finite and positive");
  if (interval < 1) fail(Errc::invalid_argument, "re-scale interval must be at least 1");
}

ScaleSchedule ScaleSchedule::from_weights(std::span<const float> w0, Fp8Format format, std::size_t interval,
                                          LrSchedule lr) {
  return ScaleSchedule(jit_scale(w0, format), format, interval, lr);
}

double ScaleSchedule::scale() const noexcept { return base_ + eta_sum_ / delta_max(format_); }

void ScaleSchedule::advance(double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) fail(Errc::invalid_argument, "learning rate must be finite and >= 0");
  eta_sum_ += eta;
  ++t_;
}

void ScaleSchedule::reset(double measured_scale) {
  if (!(measured_scale > 0.0) || !std::isfinite(measured_scale)) fail(Errc::invalid_argument, "scale must be positive");
  base_ = measured_scale;
  eta_sum_ = 0.0;
  last_rescale_ = t_;
}

ScaleSchedule auto_scale_advance(ScaleSchedule schedule, double eta) {
  schedule.advance(eta);
  return schedule;
}

double jit_scale(std::span<const float> w, Fp8Format format) {
  require_finite(w);
  const double m = max_abs(w);
  return m > 0.0 ? m / delta_max(format) : 1.0;
}

RescaleResult rescale_interval(const Tensor& w, const ScaleSchedule& schedule) {
  if (!schedule.rescale_due()) {
    fail(Errc::invalid_argument, "re-scale requested at step " + std::to_string(schedule.step()) +
                                     " before the interval elapsed");
  }
  ScaleSchedule next = schedule;
  next.reset(jit_scale(w, schedule.format()));
  auto codes = quantize_per_tensor_with_scale(w, schedule.format(), static_cast<float>(next.scale()));
  return {std::move(codes), next};
}

WeightTrajectory simulate_trajectory(const TrajectorySpec& spec) {
  const std::size_t n = spec.size;
  Tensor w = tensor_randn({n}, spec.seed);
  for (float& v : w.data()) v = static_cast<float>(spec.init_std * v);
  const Tensor drift = tensor_randn({n}, Rng::derive_seed(spec.seed, 1));
  Rng noise(Rng::derive_seed(spec.seed, 2));

  AdamWConfig cfg{spec.beta1, spec.beta2, spec.eps, spec.weight_decay, true};
  OptimizerState state = OptimizerState::zeros(n, spec.lr.at(0), cfg);
  Tensor g({n});

  WeightTrajectory out;
  out.max_abs.reserve(spec.steps + 1);
  out.eta.reserve(spec.steps);
  out.max_abs.push_back(max_abs(w.data()));
  for (std::size_t t = 0; t < spec.steps; ++t) {
    state.eta = spec.lr.at(t);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<float>(spec.drift_std * drift[i] + noise.normal());
    adamw_step_inplace(w.data(), g.data(), state);
    out.eta.push_back(state.eta);
    out.max_abs.push_back(max_abs(w.data()));
  }
  return out;
}

ScaleTrace trace_schedule(const WeightTrajectory& trajectory, std::size_t interval, Fp8Format format) {
  const double dmax = delta_max(format);
  auto jit = [&](std::size_t t) { return trajectory.max_abs[t] > 0.0 ? trajectory.max_abs[t] / dmax : 1.0; };

  ScaleTrace trace;
  ScaleSchedule schedule(jit(0), format, interval);
  trace.s_auto.push_back(schedule.scale());
  trace.s_jit.push_back(jit(0));
  for (std::size_t t = 1; t < trajectory.max_abs.size(); ++t) {
    schedule.advance(trajectory.eta[t - 1]);
    if (schedule.rescale_due()) {
      schedule.reset(jit(t));
      trace.rescale_steps.push_back(t);
      if (schedule.scale() != jit(t)) ++trace.exactness_violations;
    }
    trace.s_auto.push_back(schedule.scale());
    trace.s_jit.push_back(jit(t));
    if (trace.s_auto.back() < trace.s_jit.back()) ++trace.dominance_violations;
  }
  return trace;
}

std::vector<IntervalRow> interval_sweep(const std::vector<std::size_t>& intervals, const WeightTrajectory& trajectory,
                                        Fp8Format format) {
  if (intervals.empty()) fail(Errc::invalid_argument, "no intervals given");
  std::vector<IntervalRow> rows;
  for (std::size_t interval : intervals) {
    const ScaleTrace trace = trace_schedule(trajectory, interval, format);
    IntervalRow row;
    row.interval = interval;
    row.rescale_count = trace.rescale_steps.size();
    row.dominance_violations = trace.dominance_violations;
    row.min_headroom = 1.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < trace.s_auto.size(); ++t) {
      const double ratio = trace.s_auto[t] / trace.s_jit[t];
      sum += ratio;
      row.max_overshoot = std::max(row.max_overshoot, ratio);
      row.min_headroom = std::min(row.min_headroom, 1.0 - trace.s_jit[t] / trace.s_auto[t]);
    }
    row.mean_overshoot = sum / static_cast<double>(trace.s_auto.size());
    rows.push_back(row);
  }
  return rows;
}

std::vector<IntervalRow> interval_sweep(const std::vector<std::size_t>& intervals, const TrajectorySpec& spec) {
  return interval_sweep(intervals, simulate_trajectory(spec), spec.format);
}

}  // namespace mossq
