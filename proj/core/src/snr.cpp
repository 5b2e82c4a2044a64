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

#include "mossq/snr.hpp"

#include <cmath>

#include "mossq/error.hpp"
#include "mossq/parallel.hpp"
#include "mossq/random.hpp"

namespace mossq {

namespace {

double mean_square(std::span<const float> x) {
  double acc = 0.0;
  for (float v : x) acc += double{v} * double{v};
  return acc / static_cast<double>(x.size());
}

double db(double ratio) { return 10.0 * std::log10(ratio); }

Theorem1Trial run_trial(const Tensor& x, Fp8Format format, const SchemeParams& params) {
  Theorem1Trial trial;
  constexpr std::array schemes{Scheme::per_tensor, Scheme::per_group, Scheme::two_level};
  for (std::size_t i = 0; i < schemes.size(); ++i) trial.reports[i] = snr_report(x, schemes[i], format, params);
  const double t = trial.reports[0].empirical_db;
  const double g = trial.reports[1].empirical_db;
  const double m = trial.reports[2].empirical_db;
  trial.degenerate = std::isinf(t) && std::isinf(g) && std::isinf(m);
  trial.ordered = !trial.degenerate && m > g && g > t;
  return trial;
}

}  // namespace

double snr_empirical(const Tensor& x, const Tensor& dq) {
  if (x.shape() != dq.shape()) fail(Errc::shape_mismatch, "signal and reconstruction shapes differ");
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double e = double{dq[i]} - xi;
    signal += xi * xi;
    noise += e * e;
  }
  if (signal == 0.0) fail(Errc::invalid_argument, "signal is identically zero");
  if (noise == 0.0) return kInfiniteSnr;
  return db(signal / noise);
}

double snr_model(const Tensor& x, Scheme scheme, Fp8Format format, const SchemeParams& params) {
  checked_numel(x.shape());
  require_finite(x.data());
  const double sigma2 = mean_square(x.data());
  if (sigma2 == 0.0) fail(Errc::undefined_model, "SNR model is undefined for an all-zero tensor");
  const double dmax = delta_max(format);

  switch (scheme) {
    case Scheme::per_tensor: {
      const double mx = max_abs(x.data());
      return db(12.0 * sigma2 * dmax * dmax / (mx * mx));
    }
    case Scheme::per_group: {
      if (params.group_size < 1) fail(Errc::invalid_argument, "group_size must be at least 1");
      const std::size_t cols = x.cols();
      double sum_max2 = 0.0;
      std::size_t groups = 0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t begin = 0; begin < cols; begin += params.group_size) {
          const double mg = max_abs(x.row(r).subspan(begin, std::min(params.group_size, cols - begin)));
          sum_max2 += mg * mg;
          ++groups;
        }
      }
      return db(12.0 * static_cast<double>(groups) * sigma2 * dmax * dmax / sum_max2);
    }
    case Scheme::two_level: {
      const TwoLevelQuant q = quantize_two_level(x, format, params.two_level);
      const std::size_t bpr = q.blocks_per_row();
      double sum = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t b = 0; b < bpr; ++b) {
          const double eff = double{q.global_scales[q.span_index(r, b)]} * e8m0_decode(q.micro_scales[r * bpr + b]);
          sum += eff * eff;
        }
      }
      return db(12.0 * static_cast<double>(q.micro_scales.size()) * sigma2 / sum);
    }
  }
  fail(Errc::invalid_argument, "unknown scheme");
}

SnrReport snr_report(const Tensor& x, Scheme scheme, Fp8Format format, const SchemeParams& params) {
  const QuantizedTensor q = quantize(x, scheme, format, params);
  const Tensor dq = dequantize(q);
  SnrReport r;
  r.scheme = scheme;
  r.empirical_db = snr_empirical(x, dq);
  r.model_db = snr_model(x, scheme, format, params);
  r.signal_power = mean_square(x.data());
  double noise = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = double{dq[i]} - double{x[i]};
    noise += e * e;
  }
  r.noise_power = noise / static_cast<double>(x.size());
  r.n_groups = std::visit(
      [](const auto& v) -> std::size_t {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, PerTensorQuant>) return 1;
        else if constexpr (std::is_same_v<V, PerGroupQuant>) return v.scales.size();
        else return v.micro_scales.size();
      },
      q);
  return r;
}

Theorem1Summary theorem1_summarize(const std::vector<Tensor>& tensors, Fp8Format format, const SchemeParams& params) {
  Theorem1Summary s;
  s.trials.resize(tensors.size());
  parallel_for(tensors.size(), [&](std::size_t i) { s.trials[i] = run_trial(tensors[i], format, params); });

  std::size_t non_degenerate = 0;
  std::size_t ordered = 0;
  for (const auto& t : s.trials) {
    if (t.degenerate) {
      ++s.degenerate_trials;
      continue;
    }
    ++non_degenerate;
    ordered += t.ordered ? 1 : 0;
    const double a = t.reports[0].empirical_db;
    const double b = t.reports[1].empirical_db;
    const double c = t.reports[2].empirical_db;
    if (std::isfinite(a) && std::isfinite(b) && std::isfinite(c)) {
      ++s.finite_trials;
      s.mean_empirical_db[0] += a;
      s.mean_empirical_db[1] += b;
      s.mean_empirical_db[2] += c;
    }
  }
  if (s.finite_trials > 0) {
    for (double& m : s.mean_empirical_db) m /= static_cast<double>(s.finite_trials);
    s.mean_gap_group_over_tensor = s.mean_empirical_db[1] - s.mean_empirical_db[0];
    s.mean_gap_two_level_over_group = s.mean_empirical_db[2] - s.mean_empirical_db[1];
  }
  s.ordered_fraction = non_degenerate > 0 ? static_cast<double>(ordered) / static_cast<double>(non_degenerate) : 0.0;
  return s;
}

Theorem1Summary theorem1_harness(const Theorem1Config& config) {
  if (config.trials < 1) fail(Errc::invalid_argument, "need at least one trial");
  std::vector<Tensor> tensors(config.trials);
  parallel_for(config.trials, [&](std::size_t i) {
    tensors[i] = tensor_randn({config.size}, Rng::derive_seed(config.seed, i), config.dist);
  });
  auto summary = theorem1_summarize(tensors, config.format, config.params);
  for (std::size_t i = 0; i < summary.trials.size(); ++i) summary.trials[i].seed = Rng::derive_seed(config.seed, i);
  return summary;
}

}  // namespace mossq
