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

// Flat `key = value` run configuration shared by every command.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "specfuse/errors.hpp"
#include "specfuse/hsicube.hpp"
#include "specfuse/trainer.hpp"

namespace specfuse::cli {

/// Malformed configuration text or flag value. `line()` is 0 for flags.
class ConfigError : public ContractError {
 public:
  ConfigError(const std::string &what, int line) : ContractError(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

struct RunConfig {
  train::TrainConfig train;
  bool seed_set = false;

  // scene
  Index width = 64;
  Index height = 64;
  Index bands = 31;
  Index endmembers = 4;
  Index blur_radius = 4;
  double contrast = 3.0;
  double min_angle_deg = 5.0;

  // degradation
  Index sr = 32;
  double rotate_deg = 0.0;
  double crop_frac = 0.0;
  Interpolation interpolation = Interpolation::kBilinear;
  Index msi_bands = 3;
  std::string srf_path;  // empty: Gaussian response for `bands` -> `msi_bands`

  // files; empty values resolve to fixed names under out_dir
  std::string out_dir = ".";
  std::string truth;
  std::string abundances;
  std::string lr_hsi;
  std::string hr_msi;
  std::string fused;
  std::string checkpoint;
  std::string trace;

  bool diff_images = false;
  /// Crop fraction for each rotation-sweep angle, 5 to 30 degrees.
  std::vector<double> sweep_crops{0.15, 0.26, 0.34, 0.40, 0.44, 0.48};
  double gradcheck_step = 1e-5;

  bool operator==(const RunConfig &) const;

  std::filesystem::path truth_path() const;
  std::filesystem::path abundances_path() const;
  std::filesystem::path lr_hsi_path() const;
  std::filesystem::path hr_msi_path() const;
  std::filesystem::path srf_file() const;
  std::filesystem::path fused_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path trace_path() const;
  std::filesystem::path output(const std::string &name) const;

  /// Checks cross-field ranges; throws ConfigError.
  void validate() const;
};

/// Every accepted key, in dump order.
const std::vector<std::string> &config_keys();

/// Sets one key from text; throws ConfigError naming the key (and `line` when > 0).
void set_value(RunConfig &config, std::string_view key, std::string_view value, int line = 0);
std::string get_value(const RunConfig &config, std::string_view key);

/// Applies `key = value` lines on top of `config`. Blank lines and lines
/// starting with `#` are ignored.
void parse_config(RunConfig &config, std::string_view text);
RunConfig parse_config(std::string_view text);
void load_config_file(RunConfig &config, const std::filesystem::path &path);

/// Every key with its current value; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig &config);

/// Uses SPECFUSE_SEED when no seed was given explicitly.
void apply_seed_fallback(RunConfig &config);

}  // namespace specfuse::cli
