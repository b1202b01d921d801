// Copyright 2026 The specfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "specfuse/cube_io.hpp"

#include <limits>

namespace specfuse {

namespace {

constexpr char kCubeMagic[] = "HSRC";
constexpr char kSrfMagic[] = "HSRF";

void check_header(io::ByteReader &in, const char *magic) {
  if (in.remaining() < 4 || in.str(4, "magic") != std::string(magic, 4)) {
    throw ParseError("bad magic", 0);
  }
  const std::uint64_t at = in.offset();
  const std::uint8_t version = in.u8("header");
  if (version != kCubeFormatVersion) {
    throw ParseError("unsupported version " + std::to_string(version) + " (expected " +
                         std::to_string(kCubeFormatVersion) + ")",
                     at);
  }
}

std::uint32_t checked_u32(Index v, const char *what) {
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max()) {
    throw ContractError(std::string(what) + " does not fit the file header");
  }
  return static_cast<std::uint32_t>(v);
}

void require_payload(const io::ByteReader &in, std::uint64_t count) {
  if (count > in.remaining() / 4) {
    throw ParseError("truncated payload: header declares " + std::to_string(count) +
                         " values but only " + std::to_string(in.remaining() / 4) + " follow",
                     in.offset() + in.remaining());
  }
}

void require_end(const io::ByteReader &in) {
  if (in.remaining() != 0) {
    throw ParseError(std::to_string(in.remaining()) + " trailing bytes after payload", in.offset());
  }
}

}  // namespace

io::Bytes encode_cube(const HyperCube<double> &cube) {
  io::ByteWriter out;
  out.raw(std::string(kCubeMagic, 4));
  out.u8(kCubeFormatVersion);
  out.u32(checked_u32(cube.width, "width"));
  out.u32(checked_u32(cube.height, "height"));
  out.u32(checked_u32(cube.bands(), "bands"));
  // RowMajor planes: memory order is already band-sequential.
  const double *p = cube.planes.data();
  for (Index i = 0; i < cube.planes.size(); ++i) out.f32(static_cast<float>(p[i]));
  return out.take();
}

HyperCube<double> decode_cube(std::span<const std::uint8_t> bytes) {
  io::ByteReader in(bytes);
  check_header(in, kCubeMagic);
  const std::uint32_t w = in.u32("header");
  const std::uint32_t h = in.u32("header");
  const std::uint32_t b = in.u32("header");
  const std::uint64_t count = std::uint64_t(w) * h * b;
  require_payload(in, count);
  HyperCube<double> cube(w, h, b);
  double *p = cube.planes.data();
  for (std::uint64_t i = 0; i < count; ++i) p[i] = in.f32("payload");
  require_end(in);
  return cube;
}

void store_cube(const HyperCube<double> &cube, const std::filesystem::path &path) {
  io::write_file(path, encode_cube(cube));
}

HyperCube<double> load_cube(const std::filesystem::path &path) {
  return decode_cube(io::read_file(path));
}

io::Bytes encode_srf(const SpectralResponse<double> &srf) {
  io::ByteWriter out;
  out.raw(std::string(kSrfMagic, 4));
  out.u8(kCubeFormatVersion);
  out.u32(checked_u32(srf.hsi_bands(), "hsi bands"));
  out.u32(checked_u32(srf.msi_bands(), "msi bands"));
  const auto &m = srf.matrix();
  for (Index i = 0; i < m.size(); ++i) out.f32(static_cast<float>(m.data()[i]));
  return out.take();
}

SpectralResponse<double> decode_srf(std::span<const std::uint8_t> bytes) {
  io::ByteReader in(bytes);
  check_header(in, kSrfMagic);
  const std::uint32_t big = in.u32("header");
  const std::uint32_t small = in.u32("header");
  const std::uint64_t count = std::uint64_t(big) * small;
  require_payload(in, count);
  Tensor<double> m(big, small);
  for (std::uint64_t i = 0; i < count; ++i) m.data()[i] = in.f32("payload");
  require_end(in);
  return SpectralResponse<double>(std::move(m));
}

void store_srf(const SpectralResponse<double> &srf, const std::filesystem::path &path) {
  io::write_file(path, encode_srf(srf));
}

SpectralResponse<double> load_srf(const std::filesystem::path &path) {
  return decode_srf(io::read_file(path));
}

HyperCube<double> quantize_f32(const HyperCube<double> &cube) {
  HyperCube<double> out = cube;
  out.planes = cube.planes.cast<float>().cast<double>();
  return out;
}

}  // namespace specfuse
