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

#include "mossq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "mossq/error.hpp"
#include "mossq/random.hpp"

namespace mossq {

std::size_t checked_numel(const Shape& shape) {
  if (shape.empty()) fail(Errc::invalid_shape, "shape must have at least one dimension");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) fail(Errc::invalid_shape, "zero-sized dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0f) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = checked_numel(shape_);
  if (n != data_.size()) {
    fail(Errc::shape_mismatch,
         "data length " + std::to_string(data_.size()) + " does not match shape product " + std::to_string(n));
  }
}

float max_abs(std::span<const float> values) noexcept {
  float m = 0.0f;
  for (float v : values) m = std::max(m, std::fabs(v));
  return m;
}

void require_finite(std::span<const float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) fail(Errc::invalid_value, "non-finite element at index " + std::to_string(i));
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

Tensor tensor_randn(const Shape& shape, std::uint64_t seed, const Distribution& dist) {
  Tensor t(shape);
  Rng rng(seed);
  auto out = t.data();
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, Gaussian>) {
          for (float& v : out) v = static_cast<float>(rng.normal());
        } else if constexpr (std::is_same_v<D, Laplace>) {
          for (float& v : out) v = static_cast<float>(rng.laplace());
        } else {
          if (!(d.rate >= 0.0 && d.rate <= 1.0)) fail(Errc::invalid_argument, "outlier rate must lie in [0, 1]");
          for (float& v : out) {
            const double base = rng.normal();
            const double pick = rng.uniform();
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            v = static_cast<float>(pick < d.rate ? sign * d.magnitude : base);
          }
        }
      },
      dist);
  return t;
}

}  // namespace mossq
