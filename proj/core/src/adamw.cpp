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

#include "mossq/adamw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mossq/error.hpp"
#include "mossq/random.hpp"

namespace mossq {

namespace {

template <typename W>
void step_impl(std::span<W> w, std::span<const float> g, OptimizerState& s, std::span<double> delta) {
  const std::size_t n = w.size();
  if (g.size() != n || s.m.size() != n || s.v.size() != n) fail(Errc::shape_mismatch, "weights, gradient and moments differ in size");
  if (!delta.empty() && delta.size() != n) fail(Errc::shape_mismatch, "delta buffer has wrong size");
  require_finite(g);

  const AdamWConfig& c = s.config;
  const std::uint64_t t = ++s.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w[i];
    const double gi = c.decoupled_decay ? double{g[i]} : double{g[i]} + c.weight_decay * wi;
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * gi;
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * gi * gi;
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    const double d = s.eta * m_hat / (std::sqrt(v_hat) + c.eps);
    if (!delta.empty()) delta[i] = d;
    const double decay = c.decoupled_decay ? s.eta * c.weight_decay * wi : 0.0;
    w[i] = static_cast<W>(wi - d - decay);
  }
}

}  // namespace

OptimizerState OptimizerState::zeros(std::size_t n, double eta, const AdamWConfig& config) {
  return OptimizerState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0, eta, config};
}

void adamw_step_inplace(std::span<float> w, std::span<const float> g, OptimizerState& state, std::span<double> delta) {
  step_impl(w, g, state, delta);
}

void adamw_step_inplace(std::span<double> w, std::span<const float> g, OptimizerState& state, std::span<double> delta) {
  step_impl(w, g, state, delta);
}

AdamWStep adamw_step(const Tensor& w, const Tensor& g, const OptimizerState& state) {
  if (w.shape() != g.shape()) fail(Errc::shape_mismatch, "weight and gradient shapes differ");
  AdamWStep out{w, state, std::vector<double>(w.size())};
  adamw_step_inplace(out.weights.data(), g.data(), out.state, out.delta);
  return out;
}

double update_bound_factor(double beta1, double beta2, std::uint64_t t) {
  const double td = static_cast<double>(t);
  return std::max(1.0, (1.0 - std::pow(beta1, td)) / std::sqrt(1.0 - std::pow(beta2, td)));
}

BoundReport theorem2_check(const std::vector<Tensor>& gradients, const BoundCheckParams& params) {
  if (gradients.empty()) fail(Errc::invalid_argument, "gradient sequence is empty");
  const std::size_t n = gradients.front().size();
  AdamWConfig cfg{params.beta1, params.beta2, params.eps, 0.0, true};
  OptimizerState state = OptimizerState::zeros(n, params.eta, cfg);
  std::vector<double> w(n, 0.0);
  std::vector<double> delta(n);

  BoundReport r;
  r.elements = n;
  r.element_max_ratio.assign(n, 0.0);
  r.element_max_ratio_over_bound.assign(n, 0.0);
  r.element_violations.assign(n, 0);
  for (const Tensor& g : gradients) {
    if (g.size() != n) fail(Errc::shape_mismatch, "gradient sizes vary across steps");
    adamw_step_inplace(std::span<double>(w), g.data(), state, delta);
    const double factor = update_bound_factor(params.beta1, params.beta2, state.t);
    for (std::size_t i = 0; i < n; ++i) {
      const double ratio = std::fabs(delta[i]) / params.eta;
      r.element_max_ratio[i] = std::max(r.element_max_ratio[i], ratio);
      r.max_ratio = std::max(r.max_ratio, ratio);
      r.element_max_ratio_over_bound[i] = std::max(r.element_max_ratio_over_bound[i], ratio / factor);
      r.max_ratio_over_bound = std::max(r.max_ratio_over_bound, ratio / factor);
      if (ratio > factor * (1.0 + kBoundRoundingSlack)) {
        if (r.violations == 0) {
          r.first_violation_step = state.t;
          r.first_violation_element = i;
        }
        ++r.violations;
        ++r.element_violations[i];
      }
    }
  }
  r.steps = gradients.size();
  return r;
}

std::vector<Tensor> gaussian_gradient_sequences(std::size_t sequences, std::size_t steps, std::uint64_t seed) {
  std::vector<Tensor> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) out.push_back(tensor_randn({sequences}, Rng::derive_seed(seed, t)));
  return out;
}

std::vector<Tensor> sparse_spike_sequences(std::size_t steps) {
  std::vector<Tensor> out(steps, Tensor({steps}));
  for (std::size_t e = 0; e < steps; ++e) {
    const double magnitude = std::pow(10.0, static_cast<double>(e % 7) - 3.0);
    out[e][e] = static_cast<float>(e % 2 == 0 ? magnitude : -magnitude);
  }
  return out;
}

DecayBoundReport decay_bound_check(const DecayTrajectoryConfig& config) {
  if (!(config.weight_decay >= 0.0) || config.weight_decay * config.eta >= 1.0) {
    fail(Errc::invalid_argument, "weight decay must lie in [0, 1/eta)");
  }
  const std::size_t n = config.size;
  const Tensor w0 = tensor_randn({n}, config.seed);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = config.init_std * w0[i];

  AdamWConfig cfg{config.beta1, config.beta2, config.eps, config.weight_decay, true};
  OptimizerState state = OptimizerState::zeros(n, config.eta, cfg);
  Rng rng(Rng::derive_seed(config.seed, 1));
  Tensor g({n});

  auto max_abs_w = [&] {
    double m = 0.0;
    for (double v : w) m = std::max(m, std::fabs(v));
    return m;
  };

  DecayBoundReport r;
  r.max_abs_w0 = max_abs_w();
  r.max_abs.push_back(r.max_abs_w0);
  for (std::size_t t = 1; t <= config.steps; ++t) {
    for (float& gi : g.data()) gi = config.constant_gradient ? 1.0f : static_cast<float>(rng.normal());
    adamw_step_inplace(std::span<double>(w), g.data(), state);
    const double current = max_abs_w();
    r.max_abs.push_back(current);
    const double allowance = config.eta * static_cast<double>(t);
    const double bound = r.max_abs_w0 + allowance;
    r.tightness = std::max(r.tightness, (current - r.max_abs_w0) / allowance);
    if (current > bound * (1.0 + kBoundRoundingSlack)) ++r.violations;
  }
  r.steps = config.steps;
  return r;
}

}  // namespace mossq
