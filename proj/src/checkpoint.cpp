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

#include "specfuse/checkpoint.hpp"

#include <limits>
#include <map>

namespace specfuse::mdn {

io::Bytes encode_checkpoint(const std::vector<NamedTensor> &tensors) {
  io::ByteWriter out;
  out.raw(std::string("MDNW"));
  out.u8(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor &t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw ContractError("checkpoint tensor name too long: " + t.name.substr(0, 32) + "...");
    }
    out.u16(static_cast<std::uint16_t>(t.name.size()));
    out.raw(t.name);
    out.u32(static_cast<std::uint32_t>(t.value.rows()));
    out.u32(static_cast<std::uint32_t>(t.value.cols()));
    for (Index i = 0; i < t.value.size(); ++i) out.f64(t.value.data()[i]);
  }
  return out.take();
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader in(bytes);
  if (in.remaining() < 4 || in.str(4, "magic") != "MDNW") throw ParseError("bad magic", 0);
  const std::uint64_t at = in.offset();
  const std::uint8_t version = in.u8("header");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported version " + std::to_string(version), at);
  }
  const std::uint32_t count = in.u32("header");
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const std::uint16_t len = in.u16("tensor header");
    t.name = in.str(len, "tensor name");
    const std::uint32_t rows = in.u32("tensor header");
    const std::uint32_t cols = in.u32("tensor header");
    const std::uint64_t n = std::uint64_t(rows) * cols;
    if (n > in.remaining() / 8) {
      throw ParseError("truncated payload for tensor '" + t.name + "'", in.offset() + in.remaining());
    }
    t.value.resize(rows, cols);
    for (std::uint64_t i = 0; i < n; ++i) t.value.data()[i] = in.f64("tensor payload");
    out.push_back(std::move(t));
  }
  if (in.remaining() != 0) {
    throw ParseError(std::to_string(in.remaining()) + " trailing bytes", in.offset());
  }
  return out;
}

std::vector<NamedTensor> named_tensors(const ModelParams &params) {
  std::vector<NamedTensor> out;
  for_each_tensor(params, [&](const std::string &name, Block, const Tensor2 &t) {
    out.push_back(NamedTensor{name, t});
  });
  return out;
}

ModelParams model_from_tensors(const std::vector<NamedTensor> &tensors) {
  std::map<std::string, const Tensor2 *> by_name;
  for (const NamedTensor &t : tensors) {
    if (!by_name.emplace(t.name, &t.value).second) {
      throw ContractError("checkpoint repeats tensor '" + t.name + "'");
    }
  }
  auto take = [&](const std::string &name) -> Tensor2 {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("checkpoint is missing tensor '" + name + "'");
    Tensor2 v = *it->second;
    by_name.erase(it);
    return v;
  };
  auto layer = [&](const std::string &prefix) {
    DenseLayerT<Tensor2> l;
    l.weight = take(prefix + ".weight");
    l.bias = take(prefix + ".bias");
    return l;
  };
  ModelParams m;
  for (int i = 0; by_name.count("encoder.u." + std::to_string(i) + ".weight"); ++i) {
    m.encoder.u_branch.push_back(layer("encoder.u." + std::to_string(i)));
  }
  m.encoder.u_head = layer("encoder.u_head");
  for (int i = 0; by_name.count("encoder.beta." + std::to_string(i) + ".weight"); ++i) {
    m.encoder.beta_branch.push_back(layer("encoder.beta." + std::to_string(i)));
  }
  m.encoder.beta_head = layer("encoder.beta_head");
  m.decoder.w1 = take("decoder.w1");
  m.decoder.w2 = take("decoder.w2");
  m.mi.hidden = layer("mi.hidden");
  m.mi.output = layer("mi.output");
  if (!by_name.empty()) {
    throw ContractError("checkpoint has unexpected tensor '" + by_name.begin()->first + "'");
  }
  infer_architecture(m);
  return m;
}

void save_model(const ModelParams &params, const std::filesystem::path &path) {
  io::write_file(path, encode_checkpoint(named_tensors(params)));
}

ModelParams load_model(const std::filesystem::path &path) {
  return model_from_tensors(decode_checkpoint(io::read_file(path)));
}

}  // namespace specfuse::mdn
