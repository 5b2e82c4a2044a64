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

// Two-layer MLP regression used to compare FP8 training against an FP32
// reference. The quantized forward runs both GEMMs through the epilogue
// kernel: activations two-level, weights per-tensor at the scale predicted
// by a ScaleSchedule. Backward, master weights and AdamW stay in FP32.
//
// Loss is logged on a fixed evaluation set with the FP32 master weights so
// the quantized and reference curves are directly comparable.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mossq/autoscale.hpp"
#include "mossq/fp8.hpp"

namespace mossq {

struct TrainConfig {
  std::size_t input_dim = 32;  // multiple of 32 (first GEMM's K)
  std::size_t hidden_dim = 64;  // multiple of 32 (second GEMM's K)
  std::size_t output_dim = 8;
  std::size_t steps = 2000;
  std::size_t batch = 64;
  double peak_lr = 2e-4;
  std::size_t warmup = 100;
  double min_lr_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;
  bool quantize = true;
  std::size_t rescale_interval = kDefaultRescaleInterval;
  std::uint64_t seed = 0;
  Fp8Format format = Fp8Format::e4m3;
  std::size_t eval_size = 256;
  double label_noise = 0.01;

  void validate() const;
  LrSchedule lr_schedule() const;
};

struct WeightScaleTrace {
  std::string name;
  std::vector<double> s_auto;  // index t = after t optimizer steps
  std::vector<double> s_jit;
  std::vector<double> max_abs;  // max|W_t|
  std::vector<std::uint8_t> violated;  // 1 where s_auto < s_jit
  std::size_t dominance_violations = 0;  // steps with s_auto < s_jit
  std::size_t rescales = 0;
  std::size_t clipped_elements = 0;  // summed over all quantized forwards
};

struct TrainLog {
  TrainConfig config;
  std::vector<double> eval_loss;   // index t = after t steps, t = 0..steps
  std::vector<double> train_loss;  // batch loss of step t+1 in the run's forward mode
  std::vector<double> lr;
  std::vector<WeightScaleTrace> weights;

  double smoothed_final_loss(std::size_t window = 50) const;
  std::size_t dominance_violations() const;
  std::size_t clipped_elements() const;
};

/// Throws Error(Errc::diverged) if the loss leaves [0, 1e6] or turns non-finite.
TrainLog train(const TrainConfig& config);

/// |quant - reference| / reference of the smoothed final losses.
/// Per-step max|W| of one traced weight with the learning rates that moved it,
/// for replaying other re-scale intervals offline.
WeightTrajectory weight_trajectory(const TrainLog& log, std::size_t weight_index);

double relative_loss_gap(const TrainLog& quant, const TrainLog& reference, std::size_t window = 50);

}  // namespace mossq
