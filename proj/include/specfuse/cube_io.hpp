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

#pragma once

// "HSRC" cube files and "HSRF" spectral-response files.
//
// Layout, little-endian:
//   magic[4] | u8 version = 1 | u32 width | u32 height | u32 bands | f32 data...
// Cube data is band-sequential and row-major within each band. SRF files
// carry magic "HSRF", then u32 L, u32 l and L x l row-major f32 values.

#include <filesystem>

#include "specfuse/binary_io.hpp"
#include "specfuse/hsicube.hpp"

namespace specfuse {

inline constexpr std::uint8_t kCubeFormatVersion = 1;

io::Bytes encode_cube(const HyperCube<double> &cube);
HyperCube<double> decode_cube(std::span<const std::uint8_t> bytes);

void store_cube(const HyperCube<double> &cube, const std::filesystem::path &path);
HyperCube<double> load_cube(const std::filesystem::path &path);

io::Bytes encode_srf(const SpectralResponse<double> &srf);
SpectralResponse<double> decode_srf(std::span<const std::uint8_t> bytes);

void store_srf(const SpectralResponse<double> &srf, const std::filesystem::path &path);
SpectralResponse<double> load_srf(const std::filesystem::path &path);

/// Rounds every value through binary32, the precision files are stored at.
HyperCube<double> quantize_f32(const HyperCube<double> &cube);

}  // namespace specfuse
