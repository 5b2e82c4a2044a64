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

#include "mossq/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mossq/error.hpp"

namespace mossq {

namespace {

constexpr std::size_t kHeaderFixed = 8 + 1 + 1 + 4;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename U>
U get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[offset + i]) << (8 * i);
  return value;
}

std::vector<std::uint8_t> header(DType dtype, const Shape& shape) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kTensorFileMagic), std::end(kTensorFileMagic));
  out.push_back(kTensorFileVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_le<std::uint64_t>(out, d);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

}  // namespace

std::size_t element_width(DType dtype) noexcept { return dtype == DType::f32 ? 4 : 1; }

std::vector<std::uint8_t> encode_tensor_file(const Tensor& t) {
  checked_numel(t.shape());
  auto out = header(DType::f32, t.shape());
  out.reserve(out.size() + 4 * t.size());
  for (float v : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

std::vector<std::uint8_t> encode_tensor_file(const CodeArray& c) {
  if (c.dtype == DType::f32) fail(Errc::unsupported_dtype, "code arrays cannot carry f32");
  if (checked_numel(c.shape) != c.codes.size()) fail(Errc::shape_mismatch, "code count does not match shape");
  auto out = header(c.dtype, c.shape);
  out.insert(out.end(), c.codes.begin(), c.codes.end());
  return out;
}

TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kTensorFileMagic, 8) != 0) fail(Errc::bad_magic, "not a MOSSTNSR file");
  if (bytes.size() < kHeaderFixed) fail(Errc::truncated, "header shorter than fixed fields");
  if (bytes[8] != kTensorFileVersion) fail(Errc::version_mismatch, "unsupported version " + std::to_string(bytes[8]));
  if (bytes[9] > static_cast<std::uint8_t>(DType::e8m0)) {
    fail(Errc::unsupported_dtype, "unknown dtype tag " + std::to_string(bytes[9]));
  }
  const auto dtype = static_cast<DType>(bytes[9]);
  const auto ndim = get_le<std::uint32_t>(bytes, 10);
  if (bytes.size() < kHeaderFixed + 8ull * ndim) fail(Errc::truncated, "header shorter than its dims");

  Shape shape(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = get_le<std::uint64_t>(bytes, kHeaderFixed + 8ull * i);
  const std::size_t offset = kHeaderFixed + 8ull * ndim;
  const std::size_t available = bytes.size() - offset;
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) fail(Errc::invalid_shape, "zero-sized dimension");
    if (d > available || n > available / d) fail(Errc::truncated, "payload shorter than shape requires");
    n *= d;
  }
  if (shape.empty()) fail(Errc::invalid_shape, "shape must have at least one dimension");
  const std::size_t payload = n * element_width(dtype);
  if (bytes.size() - offset < payload) fail(Errc::truncated, "payload shorter than shape requires");
  if (bytes.size() - offset > payload) fail(Errc::truncated, "trailing bytes after payload");

  if (dtype == DType::f32) {
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset + 4 * i));
    return Tensor(std::move(shape), std::move(data));
  }
  CodeArray c{dtype, std::move(shape), {}};
  c.codes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return c;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_bytes(path, encode_tensor_file(t)); }

void write_codes(const std::filesystem::path& path, const CodeArray& c) { write_bytes(path, encode_tensor_file(c)); }

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor_file(bytes);
}

Tensor read_tensor(const std::filesystem::path& path) {
  auto file = read_tensor_file(path);
  if (auto* t = std::get_if<Tensor>(&file)) return std::move(*t);
  fail(Errc::unsupported_dtype, path.string() + " holds codes, expected f32");
}

}  // namespace mossq
