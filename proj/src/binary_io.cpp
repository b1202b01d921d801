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

#include "specfuse/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "specfuse/errors.hpp"

namespace specfuse::io {

namespace {

template <typename T>
void put_le(Bytes &buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void ByteReader::require(std::uint64_t n, const char *what) const {
  if (remaining() < n) {
    throw ParseError(std::string("truncated ") + what + ": need " + std::to_string(n) +
                         " bytes, file has " + std::to_string(remaining()),
                     pos_);
  }
}

std::uint8_t ByteReader::u8(const char *what) {
  require(1, what);
  return bytes_[pos_++];
}

std::uint16_t ByteReader::u16(const char *what) {
  require(2, what);
  std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32(const char *what) {
  require(4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
  pos_ += 4;
  return v;
}

float ByteReader::f32(const char *what) { return std::bit_cast<float>(u32(what)); }

double ByteReader::f64(const char *what) {
  require(8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
  pos_ += 8;
  return std::bit_cast<double>(v);
}

std::string ByteReader::str(std::size_t n, const char *what) {
  require(n, what);
  std::string s(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

Bytes read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace specfuse::io
