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

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "mossq/autoscale.hpp"
#include "mossq/fp8.hpp"
#include "mossq/qgemm.hpp"
#include "mossq/quantize.hpp"
#include "mossq/random.hpp"

using namespace mossq;

static void BM_Fp8Encode(benchmark::State& state) {
  const Tensor x = tensor_randn({4096}, 1);
  for (auto _ : state) {
    std::uint32_t sum = 0;
    for (float v : x.data()) sum += fp8_encode(v * 100.0f, Fp8Format::e4m3).bits;
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * 4096);
}
BENCHMARK(BM_Fp8Encode);

static void BM_Fp8Decode(benchmark::State& state) {
  for (auto _ : state) {
    float sum = 0.0f;
    for (int c = 0; c < 256; ++c) {
      const float v = fp8_decode(static_cast<std::uint8_t>(c), Fp8Format::e4m3);
      if (v == v) sum += v;
    }
    benchmark::DoNotOptimize(sum);
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Fp8Decode);

static void BM_QuantizePerTensor(benchmark::State& state) {
  const Tensor x = tensor_randn({64, static_cast<std::size_t>(state.range(0))}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_per_tensor(x, Fp8Format::e4m3));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_QuantizePerTensor)->Arg(1024)->Arg(4096);

static void BM_QuantizePerGroup(benchmark::State& state) {
  const Tensor x = tensor_randn({64, static_cast<std::size_t>(state.range(0))}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_per_group(x, Fp8Format::e4m3));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_QuantizePerGroup)->Arg(1024)->Arg(4096);

static void BM_QuantizeTwoLevel(benchmark::State& state) {
  const Tensor x = tensor_randn({64, static_cast<std::size_t>(state.range(0))}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_two_level(x, Fp8Format::e4m3));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_QuantizeTwoLevel)->Arg(1024)->Arg(4096);

static void BM_GemmMxEpilogue(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const MxGemmOperands ops(quantize_two_level(tensor_randn({n, n}, 3), Fp8Format::e4m3),
                           quantize_per_tensor(tensor_randn({n, n}, 4), Fp8Format::e4m3));
  for (auto _ : state) benchmark::DoNotOptimize(gemm_mx_epilogue(ops));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_GemmMxEpilogue)->Arg(64)->Arg(128);

static void BM_GemmPerGroupMainloop(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const PerGroupQuant a = quantize_per_group(tensor_randn({n, n}, 3), Fp8Format::e4m3);
  const PerGroupQuant b = quantize_per_group(tensor_randn({n, n}, 4), Fp8Format::e4m3);
  for (auto _ : state) benchmark::DoNotOptimize(gemm_pergroup_mainloop(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_GemmPerGroupMainloop)->Arg(128)->Arg(256);

// O(1) prediction against an O(n) max-reduction over the weights.
static void BM_AutoScaleAdvance(benchmark::State& state) {
  ScaleSchedule s(0.01, Fp8Format::e4m3, 1u << 30);
  for (auto _ : state) {
    s = auto_scale_advance(s, 1e-4);
    benchmark::DoNotOptimize(s.scale());
  }
}
BENCHMARK(BM_AutoScaleAdvance);

static void BM_JitScale(benchmark::State& state) {
  const Tensor w = tensor_randn({static_cast<std::size_t>(state.range(0))}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(jit_scale(w, Fp8Format::e4m3));
  state.SetItemsProcessed(state.iterations() * w.size());
}
BENCHMARK(BM_JitScale)->Arg(1 << 12)->Arg(1 << 20);

BENCHMARK_MAIN();
