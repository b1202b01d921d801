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

// The `specfuse` verbs. Each returns a process exit code.

#include <iosfwd>
#include <string>
#include <vector>

#include "cli/run_config.hpp"
#include "specfuse/hsicube.hpp"
#include "specfuse/qmetrics.hpp"
#include "specfuse/trainer.hpp"

namespace specfuse::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitInputError = 2,
  kExitNumericalAbort = 3,
};

struct DegradedPair {
  HyperCube<double> lr_hsi;
  HyperCube<double> hr_msi;
  SpectralResponse<double> srf;
};

/// The configured response: the file at srf-path, or a Gaussian one for
/// `hsi_bands` -> msi-bands.
SpectralResponse<double> resolve_srf(const RunConfig &config, Index hsi_bands);

/// Block-averaged (and, if configured, rotated and cropped) LR HSI plus the
/// SRF-projected HR MSI.
DegradedPair degrade(const HyperCube<double> &truth, const RunConfig &config);

struct FusionRun {
  train::TrainResult result;
  HyperCube<double> fused;
};

FusionRun run_fusion(const DegradedPair &pair, const train::TrainConfig &config);

int cmd_synth(const RunConfig &config, std::ostream &out);
int cmd_degrade(const RunConfig &config, std::ostream &out);
int cmd_fuse(const RunConfig &config, std::ostream &out);
int cmd_eval(const RunConfig &config, std::ostream &out);
/// `corrupt_gradient` perturbs the analytic gradient before comparison.
int cmd_gradcheck(const RunConfig &config, bool corrupt_gradient, std::ostream &out);

enum class SweepKind { kLambda, kRotation };
inline const std::vector<double> kSweepLambdas{0.0, 1e-6, 1e-5, 1e-4};
inline const std::vector<double> kSweepAngles{5, 10, 15, 20, 25, 30};

int cmd_sweep(const RunConfig &config, SweepKind kind, std::ostream &out);

/// Full command line without the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace specfuse::cli
