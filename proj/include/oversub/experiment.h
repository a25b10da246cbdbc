// Copyright 2026 The oversub Authors.
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

#ifndef OVERSUB_EXPERIMENT_H_
#define OVERSUB_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oversub/config.h"
#include "oversub/scheduler.h"
#include "oversub/simulate.h"
#include "oversub/synth.h"
#include "oversub/trace.h"

namespace oversub {

/// Version of every JSON document written by the tool.
inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Environment variable that replaces any configured output directory.
inline constexpr const char* kOutputDirEnv = "OVERSUB_OUTPUT_DIR";

/// Either a generator preset (with overrides) or trace files on disk.
struct TraceSource {
  std::optional<std::string> preset;
  std::optional<TracePaths> paths;
  std::optional<int> days;
  std::optional<int> num_vms;
  std::optional<int> servers;

  GenConfig generator() const;
};

struct ExperimentConfig {
  std::optional<std::uint64_t> seed;  // mandatory; optional only to detect absence
  std::filesystem::path output_dir = "out";
  TraceSource trace;
  double train_fraction = 0.5;  // leading share of trace days used for training
  int min_group_size = 5;
  std::vector<Policy> policies = {Policy::none(), Policy::single(), Policy::coach(),
                                  Policy::aggressive()};
  std::vector<MitigationTier> tiers = {MitigationTier::kMigrate};
  std::vector<Trigger> triggers = {Trigger::kReactive};
  SimConfig sim;
  bool characterize = true;
  bool write_trace = true;

  /// Throws ConfigError, including for trace files that do not exist.
  void validate() const;
  /// Effective settings without the output directory; hashed into the
  /// manifest.
  nlohmann::json to_json() const;
  /// Reads every section; unknown keys are errors. Relative trace paths
  /// resolve against base_dir.
  static ExperimentConfig from_document(const ConfigDocument& doc,
                                        const std::filesystem::path& base_dir = {});
  /// Parses a file, resolving paths against its directory, and applies the
  /// environment override.
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Applies OVERSUB_OUTPUT_DIR when set.
  void apply_env();
};

/// Training/scheduling split of a trace: [begin, split) trains, arrivals at
/// or after `split` are scheduled.
struct TraceSplit {
  std::int64_t begin = 0;
  std::int64_t split = 0;
  std::int64_t end = 0;
};
TraceSplit split_trace(const TraceSet& trace, double train_fraction);

/// Group models per window length needed by the policies.
class PredictorSet {
 public:
  PredictorSet(const TraceSet& trace, const TraceSplit& split, int min_group_size,
               const std::vector<Policy>& policies);
  /// nullptr for the none policy.
  const UtilizationPredictor* for_policy(const Policy& p) const;
  const std::map<int, GroupModel>& models() const { return models_; }

 private:
  std::map<int, GroupModel> models_;
  std::map<int, GroupPredictor> predictors_;
};

nlohmann::json characterization_json(const TraceSet& trace, const Assignment& assignment,
                                     const TraceSplit& split);
nlohmann::json placement_json(const PlacementLog& log);
nlohmann::json allocation_error_json(const std::array<AllocationErrorStats, kNumResources>& err);
nlohmann::json simulation_json(const SimReport& report);

struct PolicyResult {
  PlacementLog log;
  std::array<AllocationErrorStats, kNumResources> allocation_error;
  std::vector<SimReport> simulations;
};

/// Summary document keyed by policy. Refuses results from different traces.
nlohmann::json emit_report(const std::vector<PolicyResult>& results, const TraceSet& trace,
                           const TraceSplit& split, const ExperimentConfig& config);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes manifest.json listing every file with its content hash.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& files,
                    const ExperimentConfig& config, bool complete,
                    const std::string& failed_stage = "");

/// Problems found when re-hashing a manifest's files; empty when intact.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

/// Writes `text` under `dir` and records the relative path.
class OutputWriter {
 public:
  explicit OutputWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& rel) const { return dir_ / rel; }
  void write(const std::string& rel, const std::string& text);
  void write_json(const std::string& rel, const nlohmann::json& doc);
  /// Records a file written by other means.
  void record(const std::string& rel) { files_.push_back(rel); }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

struct ExperimentOutcome {
  std::filesystem::path output_dir;
  std::vector<std::string> files;
  nlohmann::json summary;
};

/// generate/parse -> characterize -> predict -> schedule -> simulate ->
/// report. Errors carry the stage name and keep their type; a manifest
/// marked incomplete is left behind once the output directory exists.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

}  // namespace oversub

#endif  // OVERSUB_EXPERIMENT_H_
