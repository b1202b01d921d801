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

// "MDNW" parameter checkpoints, little-endian:
//   magic[4] | u8 version = 1 | u32 tensor count |
//   per tensor: u16 name length | name | u32 rows | u32 cols | f64 values (row-major)

#include <filesystem>
#include <string>
#include <vector>

#include "specfuse/binary_io.hpp"
#include "specfuse/mdnnet.hpp"

namespace specfuse::mdn {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor2 value;

  bool operator==(const NamedTensor &o) const {
    return name == o.name && value.rows() == o.value.rows() && value.cols() == o.value.cols() &&
           value == o.value;
  }
};

io::Bytes encode_checkpoint(const std::vector<NamedTensor> &tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<NamedTensor> named_tensors(const ModelParams &params);
/// Rebuilds a model from its named tensors; missing or misshapen entries throw.
ModelParams model_from_tensors(const std::vector<NamedTensor> &tensors);

void save_model(const ModelParams &params, const std::filesystem::path &path);
ModelParams load_model(const std::filesystem::path &path);

}  // namespace specfuse::mdn
