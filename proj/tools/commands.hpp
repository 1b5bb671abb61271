// Copyright 2026 The WCF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pipeline stages behind the `wcf` command. Every stage reads and writes
// under one output directory:
//
//   <out>/prepared/{interactions.tsv, genome.csv, stats.json}
//   <out>/splits/<ratio>/fold<f>.json
//   <out>/runs/<ratio>/<algorithm>/fold<f>/{predictions.tsv, run.json, model/}
//   <out>/reports/{user_records.tsv, summary.tsv, comparison.tsv, summary.json}
//
// <ratio> is written as 3to1, 1to1 or 1to3.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wcf/dataio.hpp"
#include "wcf/wfilter.hpp"

namespace wcf::cli {

/// Environment variable that overrides the default output directory.
inline constexpr const char* kOutputDirEnv = "WCF_OUTPUT_DIR";

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kSolverFailure = 3,
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::filesystem::path interactions;
  std::filesystem::path genome;
  std::filesystem::path item_map;
  std::string format = "tab";
  double threshold = 4.0;

  double gamma = 0.05;
  int latent_dim = 30;
  std::string ratio = "3:1";
  int folds = 0;  // 0 = every fold of the ratio
  std::uint64_t seed = 1;
  int scope = 20;

  double tol = 1e-5;
  int max_outer = 50;
  double inner_tol = 1e-7;
  int inner_max_iter = 500;

  std::string algorithm = "wcf";  // wf | wcf | both
  std::filesystem::path out;

  /// Throws UsageError on out-of-range values.
  void validate() const;
  /// --out, else $WCF_OUTPUT_DIR, else ./wcf_out.
  std::filesystem::path output_dir() const;
};

struct PrepareResult {
  DatasetStats stats;
  std::size_t malformed_lines = 0;
  std::size_t genome_missing_entries = 0;
};

PrepareResult cmd_prepare(const ExperimentConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_split(const ExperimentConfig& config,
                                             std::ostream& log);
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_evaluate(const ExperimentConfig& config, std::ostream& log);

/// "3:1" -> "3to1".
std::string ratio_tag(const std::string& ratio);

/// Per-user rankings for one fold, in the predictions.tsv layout
/// "user rank item score".
std::map<UserId, RankedList> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::map<UserId, RankedList>& predictions,
                       const std::filesystem::path& path);

/// WF rankings for every user with training interactions in the split.
std::map<UserId, RankedList> predict_wf(const ColdStartSplit& split,
                                        const GenomeTable& genome,
                                        double gamma);

}  // namespace wcf::cli
