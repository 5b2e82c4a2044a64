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

#include "mossq/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mossq/adamw.hpp"
#include "mossq/error.hpp"
#include "mossq/qgemm.hpp"
#include "mossq/quantize.hpp"
#include "mossq/random.hpp"
#include "mossq/tensor.hpp"

namespace mossq {

namespace {

constexpr double kDivergenceLoss = 1e6;

struct Batch {
  Tensor x;  // [n, input_dim]
  Tensor y;  // [n, output_dim]
};

struct Teacher {
  std::vector<float> a;  // [output_dim, input_dim]

  Batch sample(std::size_t n, const TrainConfig& c, Rng& rng) const {
    Batch b{Tensor({n, c.input_dim}), Tensor({n, c.output_dim})};
    auto x = b.x.data();
    auto y = b.y.data();
    for (auto& v : x) v = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < c.output_dim; ++o) {
        double acc = 0.0;
        for (std::size_t k = 0; k < c.input_dim; ++k) acc += double{a[o * c.input_dim + k]} * x[i * c.input_dim + k];
        y[i * c.output_dim + o] = static_cast<float>(acc + c.label_noise * rng.normal());
      }
    }
    return b;
  }
};

struct Params {
  Tensor w1, b1, w2, b2;
};

// Four interleaved double partial sums; fixed order, so still deterministic.
double dot(const float* a, const float* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    for (std::size_t l = 0; l < 4; ++l) acc[l] += double{a[k + l]} * b[k + l];
  }
  for (; k < n; ++k) acc[0] += double{a[k]} * b[k];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

// out[i][j] = sum_k x[i][k] w[j][k] + bias[j]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  const std::size_t n = x.rows(), k = x.cols(), m = w.rows();
  Tensor out({n, m});
  auto o = out.data();
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  auto bd = bias.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) o[i * m + j] = static_cast<float>(dot(xd + i * k, wd + j * k, k) + bd[j]);
  }
  return out;
}

Tensor linear_fp8(const Tensor& x, const PerTensorQuant& w, const Tensor& bias, Fp8Format format) {
  const MxGemmOperands ops(quantize_two_level(x, format), w);
  Tensor out = gemm_mx_epilogue(ops).output.to_tensor();
  const std::size_t m = out.cols();
  auto o = out.data();
  auto bd = bias.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i % m];
  return out;
}

void relu_inplace(Tensor& t) {
  for (auto& v : t.data()) v = std::max(v, 0.0f);
}

double mse(const Tensor& pred, const Tensor& target) {
  double s = 0.0;
  auto p = pred.data();
  auto t = target.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = double{p[i]} - t[i];
    s += d * d;
  }
  return s / static_cast<double>(p.size());
}

double eval_loss(const Params& p, const Batch& eval) {
  Tensor h = linear(eval.x, p.w1, p.b1);
  relu_inplace(h);
  return mse(linear(h, p.w2, p.b2), eval.y);
}

void check_loss(double loss, std::size_t step) {
  if (!std::isfinite(loss) || loss > kDivergenceLoss) {
    fail(Errc::diverged, "loss " + std::to_string(loss) + " at step " + std::to_string(step));
  }
}

Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor w({rows, cols});
  const double std = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& v : w.data()) v = static_cast<float>(std * rng.normal());
  return w;
}

}  // namespace

void TrainConfig::validate() const {
  if (input_dim == 0 || input_dim % kMicroBlock != 0) fail(Errc::invalid_argument, "input_dim must be a positive multiple of 32");
  if (hidden_dim == 0 || hidden_dim % kMicroBlock != 0) fail(Errc::invalid_argument, "hidden_dim must be a positive multiple of 32");
  if (output_dim == 0 || batch == 0 || steps == 0 || eval_size == 0) fail(Errc::invalid_argument, "sizes must be positive");
  if (rescale_interval == 0) fail(Errc::invalid_argument, "rescale_interval must be positive");
  if (!(peak_lr > 0.0) || !(weight_decay >= 0.0) || weight_decay * peak_lr >= 1.0) {
    fail(Errc::invalid_argument, "need peak_lr > 0 and 0 <= weight_decay * peak_lr < 1");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail(Errc::invalid_argument, "betas must be in [0, 1)");
}

LrSchedule TrainConfig::lr_schedule() const {
  return LrSchedule{LrSchedule::Kind::cosine, peak_lr, warmup, steps, min_lr_fraction};
}

double TrainLog::smoothed_final_loss(std::size_t window) const {
  if (eval_loss.empty()) fail(Errc::invalid_argument, "empty log");
  const std::size_t w = std::clamp<std::size_t>(window, 1, eval_loss.size());
  return std::accumulate(eval_loss.end() - static_cast<std::ptrdiff_t>(w), eval_loss.end(), 0.0) / static_cast<double>(w);
}

std::size_t TrainLog::dominance_violations() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.dominance_violations;
  return n;
}

std::size_t TrainLog::clipped_elements() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.clipped_elements;
  return n;
}

TrainLog train(const TrainConfig& c) {
  c.validate();
  TrainLog log;
  log.config = c;

  Rng init_rng(Rng::derive_seed(c.seed, 0));
  Teacher teacher;
  teacher.a.resize(c.output_dim * c.input_dim);
  const double a_std = 1.0 / std::sqrt(static_cast<double>(c.input_dim));
  for (auto& v : teacher.a) v = static_cast<float>(a_std * init_rng.normal());
  Params p{init_weight(c.hidden_dim, c.input_dim, init_rng), Tensor({c.hidden_dim}),
           init_weight(c.output_dim, c.hidden_dim, init_rng), Tensor({c.output_dim})};

  Rng eval_rng(Rng::derive_seed(c.seed, 1));
  const Batch eval = teacher.sample(c.eval_size, c, eval_rng);
  Rng data_rng(Rng::derive_seed(c.seed, 2));

  const LrSchedule lr = c.lr_schedule();
  AdamWConfig wcfg{c.beta1, c.beta2, c.eps, c.weight_decay, true};
  AdamWConfig bcfg = wcfg;
  bcfg.weight_decay = 0.0;
  OptimizerState s_w1 = OptimizerState::zeros(p.w1.size(), c.peak_lr, wcfg);
  OptimizerState s_b1 = OptimizerState::zeros(p.b1.size(), c.peak_lr, bcfg);
  OptimizerState s_w2 = OptimizerState::zeros(p.w2.size(), c.peak_lr, wcfg);
  OptimizerState s_b2 = OptimizerState::zeros(p.b2.size(), c.peak_lr, bcfg);

  ScaleSchedule sched[2] = {ScaleSchedule::from_weights(p.w1.data(), c.format, c.rescale_interval, lr),
                            ScaleSchedule::from_weights(p.w2.data(), c.format, c.rescale_interval, lr)};
  const Tensor* weights[2] = {&p.w1, &p.w2};
  log.weights = {WeightScaleTrace{"w1", {}, {}, {}, {}, 0, 0, 0}, WeightScaleTrace{"w2", {}, {}, {}, {}, 0, 0, 0}};
  auto record_scales = [&] {
    for (int i = 0; i < 2; ++i) {
      auto& tr = log.weights[i];
      const double s_auto = sched[i].scale();
      const double s_jit = jit_scale(*weights[i], c.format);
      tr.s_auto.push_back(s_auto);
      tr.s_jit.push_back(s_jit);
      tr.max_abs.push_back(max_abs(weights[i]->data()));
      const bool bad = s_auto < s_jit;
      tr.violated.push_back(bad ? 1 : 0);
      if (bad) ++tr.dominance_violations;
    }
  };

  log.eval_loss.push_back(eval_loss(p, eval));
  check_loss(log.eval_loss.back(), 0);
  record_scales();

  const std::size_t nb = c.batch;
  for (std::size_t step = 0; step < c.steps; ++step) {
    const double eta = lr.at(step);
    const Batch batch = teacher.sample(nb, c, data_rng);

    Tensor z1, out;
    if (c.quantize) {
      const PerTensorQuant q1 = quantize_per_tensor_with_scale(p.w1, c.format, static_cast<float>(sched[0].scale()));
      const PerTensorQuant q2 = quantize_per_tensor_with_scale(p.w2, c.format, static_cast<float>(sched[1].scale()));
      log.weights[0].clipped_elements += q1.clipped;
      log.weights[1].clipped_elements += q2.clipped;
      z1 = linear_fp8(batch.x, q1, p.b1, c.format);
      Tensor h = z1;
      relu_inplace(h);
      out = linear_fp8(h, q2, p.b2, c.format);
    } else {
      z1 = linear(batch.x, p.w1, p.b1);
      Tensor h = z1;
      relu_inplace(h);
      out = linear(h, p.w2, p.b2);
    }
    log.train_loss.push_back(mse(out, batch.y));
    check_loss(log.train_loss.back(), step + 1);

    // Backward in FP32 with full-precision activations and master weights.
    const std::size_t hd = c.hidden_dim, od = c.output_dim, id = c.input_dim;
    const double norm = 2.0 / static_cast<double>(nb * od);
    std::vector<float> dy(nb * od);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dy[i] = static_cast<float>(norm * (double{out.data()[i]} - batch.y.data()[i]));
    }
    auto zd = z1.data();
    auto w2d = p.w2.data();
    auto xd = batch.x.data();
    // Batch-outer accumulation in double, rounded to float once per entry.
    std::vector<double> a_w2(od * hd, 0.0), a_b2(od, 0.0), a_w1(hd * id, 0.0), a_b1(hd, 0.0);
    std::vector<double> dh(hd);
    for (std::size_t i = 0; i < nb; ++i) {
      const float* z = zd.data() + i * hd;
      const float* x = xd.data() + i * id;
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t o = 0; o < od; ++o) {
        const double d = dy[i * od + o];
        a_b2[o] += d;
        double* gw = a_w2.data() + o * hd;
        const float* wrow = w2d.data() + o * hd;
        for (std::size_t j = 0; j < hd; ++j) {
          gw[j] += d * std::max(z[j], 0.0f);
          dh[j] += d * wrow[j];
        }
      }
      for (std::size_t j = 0; j < hd; ++j) {
        if (z[j] <= 0.0f) continue;
        const double d = static_cast<float>(dh[j]);
        a_b1[j] += d;
        double* gw = a_w1.data() + j * id;
        for (std::size_t k = 0; k < id; ++k) gw[k] += d * x[k];
      }
    }
    auto to_float = [](const std::vector<double>& v) {
      std::vector<float> f(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
      return f;
    };
    const std::vector<float> g_w2 = to_float(a_w2), g_b2 = to_float(a_b2), g_w1 = to_float(a_w1), g_b1 = to_float(a_b1);

    for (OptimizerState* s : {&s_w1, &s_b1, &s_w2, &s_b2}) s->eta = eta;
    adamw_step_inplace(p.w1.data(), g_w1, s_w1);
    adamw_step_inplace(p.b1.data(), g_b1, s_b1);
    adamw_step_inplace(p.w2.data(), g_w2, s_w2);
    adamw_step_inplace(p.b2.data(), g_b2, s_b2);
    log.lr.push_back(eta);

    for (int i = 0; i < 2; ++i) {
      sched[i].advance(eta);
      if (sched[i].rescale_due()) {
        sched[i].reset(jit_scale(*weights[i], c.format));
        ++log.weights[i].rescales;
      }
    }
    log.eval_loss.push_back(eval_loss(p, eval));
    check_loss(log.eval_loss.back(), step + 1);
    record_scales();
  }
  return log;
}

WeightTrajectory weight_trajectory(const TrainLog& log, std::size_t weight_index) {
  if (weight_index >= log.weights.size()) fail(Errc::invalid_argument, "no traced weight at that index");
  return WeightTrajectory{log.weights[weight_index].max_abs, log.lr};
}

double relative_loss_gap(const TrainLog& quant, const TrainLog& reference, std::size_t window) {
  const double r = reference.smoothed_final_loss(window);
  if (!(r > 0.0)) fail(Errc::invalid_argument, "reference loss must be positive");
  return std::abs(quant.smoothed_final_loss(window) - r) / r;
}

}  // namespace mossq
