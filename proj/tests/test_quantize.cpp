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

#include <doctest.h>

#include <cmath>
#include <vector>

#include "mossq/error.hpp"
#include "mossq/quantize.hpp"
#include "mossq/random.hpp"
#include "oracles.hpp"

using namespace mossq;

namespace {

constexpr Fp8Format kFormats[] = {Fp8Format::e4m3, Fp8Format::e5m2};

Errc error_code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mossq::Error");
  return Errc::io;
}

Tensor with_values(Shape shape, std::initializer_list<std::pair<std::size_t, float>> values) {
  Tensor t(std::move(shape));
  for (const auto& [i, v] : values) t[i] = v;
  return t;
}

}  // namespace

TEST_CASE("per-tensor examples") {
  const Tensor x({3}, {-448.0f, 224.0f, 0.0f});
  const PerTensorQuant q = quantize_per_tensor(x, Fp8Format::e4m3);
  CHECK(q.scale == 1.0f);
  CHECK(bitwise_equal(dequantize(q), x));

  const Tensor z({4});
  const PerTensorQuant qz = quantize_per_tensor(z, Fp8Format::e4m3);
  CHECK(qz.scale == 1.0f);
  CHECK(qz.codes == std::vector<std::uint8_t>(4, 0));
  CHECK(bitwise_equal(dequantize(qz), z));

  const Tensor y({2}, {896.0f, -448.0f});
  const PerTensorQuant qy = quantize_per_tensor(y, Fp8Format::e4m3);
  CHECK(qy.scale == 2.0f);
  CHECK(bitwise_equal(dequantize(qy), y));
}

TEST_CASE("per-tensor error is within half a scaled code step") {
  for (Fp8Format f : kFormats) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Tensor x = tensor_randn({8, 64}, seed, seed % 2 ? Distribution{Laplace{}} : Distribution{Gaussian{}});
      const PerTensorQuant q = quantize_per_tensor(x, f);
      CHECK(q.scale == max_abs(x.data()) / delta_max(f));
      CHECK(q.clipped == 0);
      const Tensor dq = dequantize(q);
      const std::vector<double> exact = dequantize_f64(q);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double xs = double{x[j]} / q.scale;
        REQUIRE(std::fabs(exact[j] - x[j]) <= 0.5 * q.scale * fp8_spacing(xs, f) * (1 + 1e-6));
        REQUIRE(std::fabs(double{fp8_decode(q.codes[j], f)}) <= delta_max(f));
        REQUIRE(dq[j] == static_cast<float>(exact[j]));
      }
    }
  }
}

TEST_CASE("per-group examples") {
  Tensor x({256});
  x[0] = 448.0f;
  x[128] = 1.75f;
  const PerGroupQuant q = quantize_per_group(x, Fp8Format::e4m3, 128);
  REQUIRE(q.scales.size() == 2);
  CHECK(q.scales[0] == 1.0f);
  CHECK(q.scales[1] == 0.00390625f);
  CHECK(bitwise_equal(dequantize(q), x));

  const Tensor z = with_values({2, 128}, {{5, 3.0f}});
  const PerGroupQuant qz = quantize_per_group(z, Fp8Format::e4m3, 128);
  CHECK(qz.scales[1] == 1.0f);
  for (std::size_t i = 128; i < 256; ++i) CHECK(qz.codes[i] == 0);

  CHECK(error_code_of([&] { quantize_per_group(x, Fp8Format::e4m3, 0); }) == Errc::invalid_argument);
}

TEST_CASE("group size at least the row length reduces to per-tensor") {
  for (std::size_t gs : {512u, 1000u}) {
    const Tensor x = tensor_randn({512}, 3);
    const PerGroupQuant g = quantize_per_group(x, Fp8Format::e4m3, gs);
    const PerTensorQuant t = quantize_per_tensor(x, Fp8Format::e4m3);
    REQUIRE(g.scales.size() == 1);
    CHECK(g.scales[0] == t.scale);
    CHECK(g.codes == t.codes);
  }
}

TEST_CASE("ragged last group is scaled over its own elements") {
  const Tensor x = tensor_randn({3, 200}, 4);
  const PerGroupQuant q = quantize_per_group(x, Fp8Format::e4m3, 128);
  REQUIRE(q.groups_per_row() == 2);
  REQUIRE(q.scales.size() == 6);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto tail = x.row(r).subspan(128, 72);
    CHECK(q.scales[r * 2 + 1] == max_abs(tail) / 448.0f);
  }
}

TEST_CASE("two-level hand example") {
  Tensor x({64});
  x[3] = 448.0f;
  x[40] = -0.875f;
  const TwoLevelQuant q = quantize_two_level(x, Fp8Format::e4m3);
  REQUIRE(q.global_scales.size() == 1);
  CHECK(q.global_scales[0] == 1.0f);
  REQUIRE(q.micro_scales.size() == 2);
  CHECK(q.micro_scales[0].bits == 127);
  CHECK(q.micro_scales[1].bits == 118);
  CHECK(q.micro_scales[1].value() == std::ldexp(1.0f, -9));
  CHECK(bitwise_equal(dequantize(q), x));
}

TEST_CASE("equal block maxima degenerate to per-tensor") {
  Tensor x = tensor_randn({4, 128}, 5);
  for (std::size_t b = 0; b < x.size() / 32; ++b) x[b * 32 + (b % 32)] = 9.0f;
  const TwoLevelQuant q = quantize_two_level(x, Fp8Format::e4m3);
  for (const E8m0Code& ss : q.micro_scales) CHECK(ss.bits == 127);
  const PerTensorQuant t = quantize_per_tensor(x, Fp8Format::e4m3);
  CHECK(q.codes == t.codes);
  CHECK(q.global_scales[0] == t.scale);
}

TEST_CASE("nearest rounding picks the log-nearest exponent and may saturate") {
  Tensor x({64});
  x[0] = 448.0f;
  x[32] = 0.7f * 448.0f;
  const TwoLevelQuant ceil = quantize_two_level(x, Fp8Format::e4m3, {ScaleRounding::ceil_pow2, 0});
  const TwoLevelQuant near = quantize_two_level(x, Fp8Format::e4m3, {ScaleRounding::nearest_log2, 0});
  const double ratio = double{x[32]} / 448.0 / ceil.global_scales[0];
  const int e = oracle::e8m0_nearest_exponent(ratio);
  CHECK(e == -1);
  CHECK(int{near.micro_scales[1].bits} - kE8m0Bias == e);
  CHECK(ceil.micro_scales[1].value() == 1.0f);
  CHECK(ceil.clipped == 0);
  CHECK(near.clipped == 1);
  CHECK(dequantize(near)[32] == 224.0f);
}

TEST_CASE("two-level invariants on random tensors") {
  const Distribution dists[] = {Gaussian{}, Laplace{}, OutlierInjected{0.01, 50.0}};
  for (Fp8Format f : kFormats) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const Tensor x = tensor_randn({4, 256}, seed, dists[seed % 3]);
      const TwoLevelQuant q = quantize_two_level(x, f);
      CHECK(q.clipped == 0);
      CHECK(q.global_scales[0] == max_abs(x.data()) / delta_max(f));
      for (const E8m0Code& ss : q.micro_scales) {
        REQUIRE(ss.value() > 0.0f);
        REQUIRE(ss.value() <= 1.0f);
      }
      // s is the max over blocks of s_i.
      float largest = 0.0f;
      for (std::size_t b = 0; b < q.micro_scales.size(); ++b) {
        largest = std::max(largest, max_abs(x.data().subspan(b * 32, 32)) / delta_max(f));
      }
      CHECK(largest == q.global_scales[0]);
      const Tensor dq = dequantize(q);
      const std::vector<double> exact = dequantize_f64(q);
      for (std::size_t j = 0; j < x.size(); ++j) REQUIRE(dq[j] == static_cast<float>(exact[j]));
    }
  }
}

TEST_CASE("two-level block error after normalisation is below 2^-mantissa") {
  const Tensor x = tensor_randn({100, 3200}, 6);
  const TwoLevelQuant q = quantize_two_level(x, Fp8Format::e4m3);
  const std::vector<double> dq = dequantize_f64(q);
  double worst = 0.0;
  for (std::size_t b = 0; b < x.size() / 32; ++b) {
    double block_max = 0.0, err = 0.0;
    for (std::size_t j = b * 32; j < (b + 1) * 32; ++j) {
      block_max = std::max(block_max, std::fabs(double{x[j]}));
      err = std::max(err, std::fabs(dq[j] - x[j]));
    }
    worst = std::max(worst, err / block_max);
  }
  CHECK(worst <= 0.125);
}

TEST_CASE("per-row level-1 span") {
  const Tensor x = tensor_randn({3, 128}, 7);
  const TwoLevelQuant q = quantize_two_level(x, Fp8Format::e4m3, {ScaleRounding::ceil_pow2, 128});
  REQUIRE(q.global_scales.size() == 3);
  CHECK(q.global_scale_count() == 3);
  for (std::size_t r = 0; r < 3; ++r) CHECK(q.global_scales[r] == max_abs(x.row(r)) / 448.0f);

  const TwoLevelQuant q64 = quantize_two_level(x, Fp8Format::e4m3, {ScaleRounding::ceil_pow2, 64});
  CHECK(q64.global_scales.size() == 6);
  CHECK(q64.span_index(1, 2) == 3);
}

TEST_CASE("two-level shape errors") {
  const Tensor odd = tensor_randn({2, 48}, 8);
  CHECK(error_code_of([&] { quantize_two_level(odd, Fp8Format::e4m3); }) == Errc::invalid_argument);
  const Tensor x = tensor_randn({2, 128}, 8);
  CHECK(error_code_of([&] { quantize_two_level(x, Fp8Format::e4m3, {ScaleRounding::ceil_pow2, 48}); }) ==
        Errc::invalid_argument);
  CHECK(error_code_of([&] { quantize_two_level(x, Fp8Format::e4m3, {ScaleRounding::ceil_pow2, 96}); }) ==
        Errc::invalid_argument);
}

TEST_CASE("zero blocks and zero tensors") {
  Tensor x({2, 64});
  x[70] = 2.0f;
  const TwoLevelQuant q = quantize_two_level(x, Fp8Format::e4m3);
  CHECK(q.micro_scales[0].bits == 127);
  CHECK(bitwise_equal(dequantize(q), x));

  const TwoLevelQuant qz = quantize_two_level(Tensor({1, 32}), Fp8Format::e4m3);
  CHECK(qz.global_scales[0] == 1.0f);
  CHECK(qz.codes == std::vector<std::uint8_t>(32, 0));
}

TEST_CASE("dequantize of zero codes is zero for any scales") {
  PerGroupQuant q{{2, 8}, Fp8Format::e4m3, 4, std::vector<std::uint8_t>(16, 0), {3.0f, 0.5f, 7.0f, 1e-3f}, 0};
  const Tensor y = dequantize(q);
  for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("non-finite input is rejected by every scheme") {
  Tensor x = tensor_randn({32}, 9);
  x[4] = std::nanf("");
  for (Scheme s : {Scheme::per_tensor, Scheme::per_group, Scheme::two_level}) {
    CHECK(error_code_of([&] { quantize(x, s, Fp8Format::e4m3); }) == Errc::invalid_value);
  }
}

TEST_CASE("scheme names and dispatch") {
  CHECK(parse_scheme("tensor") == Scheme::per_tensor);
  CHECK(parse_scheme("group") == Scheme::per_group);
  CHECK(parse_scheme("mx2") == Scheme::two_level);
  CHECK(to_string(Scheme::two_level) == "mx2");
  CHECK(error_code_of([] { parse_scheme("mx4"); }) == Errc::invalid_argument);
  const Tensor x = tensor_randn({64}, 10);
  CHECK(std::holds_alternative<TwoLevelQuant>(quantize(x, Scheme::two_level, Fp8Format::e5m2)));
  CHECK(bitwise_equal(dequantize(quantize(x, Scheme::per_group, Fp8Format::e4m3)),
                      dequantize(quantize_per_group(x, Fp8Format::e4m3))));
}

TEST_CASE("predicted scale with headroom leaves codes unclipped") {
  const Tensor x = tensor_randn({256}, 11);
  const PerTensorQuant q = quantize_per_tensor_with_scale(x, Fp8Format::e4m3, 1.5f * per_tensor_scale(x, Fp8Format::e4m3));
  CHECK(q.clipped == 0);
  const PerTensorQuant tight = quantize_per_tensor_with_scale(x, Fp8Format::e4m3, 0.5f * per_tensor_scale(x, Fp8Format::e4m3));
  CHECK(tight.clipped > 0);
  CHECK(error_code_of([&] { quantize_per_tensor_with_scale(x, Fp8Format::e4m3, 0.0f); }) == Errc::invalid_argument);
}
