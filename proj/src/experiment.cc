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

#include "oversub/experiment.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "oversub/characterize.h"
#include "oversub/errors.h"
#include "oversub/hash.h"
#include "oversub/predict.h"

namespace oversub {

namespace fs = std::filesystem;
using nlohmann::json;

GenConfig TraceSource::generator() const {
  GenConfig g = GenConfig::preset(preset.value_or("quickstart"));
  if (days) g.days = *days;
  if (num_vms) g.num_vms = *num_vms;
  if (servers) g.fleet.servers = *servers;
  return g;
}

// ---- Configuration ----------------------------------------------------------

namespace {

json resources_json(const ResourceVector& v) {
  json j = json::object();
  for (Resource r : kAllResources) j[std::string(resource_name(r))] = v(index(r));
  return j;
}

std::string policy_section(const Policy& p) { return "policy." + std::string(p.name()); }

template <typename T>
void read_into(T& dst, const std::optional<T>& v) {
  if (v) dst = *v;
}

void read_int(int& dst, const ConfigDocument& doc, const char* section, const char* key) {
  if (auto v = doc.get_int(section, key)) dst = static_cast<int>(*v);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!seed) throw ConfigError("seed is required");
  if (trace.preset.has_value() == trace.paths.has_value()) {
    throw ConfigError("trace needs exactly one of a preset or vms/util/servers paths");
  }
  if (trace.preset) {
    const auto names = GenConfig::preset_names();
    if (std::find(names.begin(), names.end(), *trace.preset) == names.end()) {
      throw ConfigError("unknown trace preset '" + *trace.preset + "'");
    }
    trace.generator().validate();
  }
  if (trace.paths) {
    if (trace.days || trace.num_vms || trace.servers) {
      throw ConfigError("days/num_vms/servers only apply to a generated trace");
    }
    for (const fs::path& p : {trace.paths->vms, trace.paths->util, trace.paths->servers}) {
      if (!fs::is_regular_file(p)) throw ConfigError("trace file not found: " + p.string());
    }
  }
  if (!(train_fraction >= 0 && train_fraction < 1)) {
    throw ConfigError("train_fraction must be in [0,1)");
  }
  if (min_group_size < 1) throw ConfigError("min_group_size must be >= 1");
  if (policies.empty()) throw ConfigError("no policies configured");
  std::set<std::string_view> seen;
  for (const Policy& p : policies) {
    if (!seen.insert(p.name()).second) throw ConfigError("policy listed twice: " + std::string(p.name()));
    check_window_hours(p.window_hours);
    if (p.oversubscribes() && (p.percentile < 50 || p.percentile > kMaxPercentile)) {
      throw ConfigError("percentile of " + std::string(p.name()) + " must be in [50,99]");
    }
  }
  if (tiers.empty() || triggers.empty()) throw ConfigError("simulate needs a tier and a trigger");
  sim.contention.validate();
  sim.mitigation.validate();
  if (!(sim.backing_ratio > 0 && sim.backing_ratio <= 1)) {
    throw ConfigError("backing_ratio must be in (0,1]");
  }
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  if (fs::exists(output_dir) && !fs::is_directory(output_dir)) {
    throw ConfigError("output_dir is not a directory: " + output_dir.string());
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  json t;
  if (trace.preset) {
    t["preset"] = *trace.preset;
    const GenConfig g = trace.generator();
    t["days"] = g.days;
    t["num_vms"] = g.num_vms;
    t["servers"] = g.fleet.servers;
  }
  if (trace.paths) {
    t["vms"] = trace.paths->vms.string();
    t["util"] = trace.paths->util.string();
    t["servers_file"] = trace.paths->servers.string();
  }
  t["write"] = write_trace;
  j["trace"] = t;
  j["predict"] = {{"train_fraction", train_fraction}, {"min_group_size", min_group_size}};
  json pols = json::array();
  for (const Policy& p : policies) {
    pols.push_back({{"name", p.name()}, {"percentile", p.percentile}, {"window_hours", p.window_hours}});
  }
  j["policies"] = pols;
  json tiers_j = json::array(), triggers_j = json::array();
  for (MitigationTier t2 : tiers) tiers_j.push_back(tier_name(t2));
  for (Trigger t2 : triggers) triggers_j.push_back(trigger_name(t2));
  const MitigationConfig& m = sim.mitigation;
  const ContentionConfig& c = sim.contention;
  j["simulate"] = {{"tiers", tiers_j},
                   {"triggers", triggers_j},
                   {"backing_ratio", sim.backing_ratio},
                   {"record_timeline", sim.record_timeline},
                   {"cold_fraction", m.cold_fraction},
                   {"trim_gbps", m.trim_gbps},
                   {"extend_gbps", m.extend_gbps},
                   {"migrate_gbps", m.migrate_gbps},
                   {"migrate_setup_s", m.migrate_setup_s},
                   {"residency_steps", m.residency_steps},
                   {"migrate_includes_extend", m.migrate_includes_extend},
                   {"slowdown_penalty", m.slowdown_penalty},
                   {"ewma_alpha", m.ewma_alpha}};
  j["contention"] = {{"cpu_violation_fraction", c.cpu_violation_fraction},
                     {"cpu_wait_pct", c.cpu_wait_pct},
                     {"cpu_util_pct", c.cpu_util_pct},
                     {"monitor_period_s", c.monitor_period_s}};
  j["granularity"] = resources_json(sim.granularity.unit);
  j["characterize"] = characterize;
  return j;
}

ExperimentConfig ExperimentConfig::from_document(const ConfigDocument& doc,
                                                 const fs::path& base_dir) {
  ExperimentConfig c;
  if (auto v = doc.get_int("", "seed")) {
    if (*v < 0) throw ConfigError("seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = doc.get_string("", "output_dir")) c.output_dir = *v;

  c.trace.preset = doc.get_string("trace", "preset");
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  const auto vms = doc.get_string("trace", "vms");
  const auto util = doc.get_string("trace", "util");
  const auto servers = doc.get_string("trace", "servers_file");
  if (vms || util || servers) {
    if (!vms || !util || !servers) {
      throw ConfigError("trace needs all of vms, util and servers_file");
    }
    c.trace.paths = TracePaths{resolve(*vms), resolve(*util), resolve(*servers)};
  }
  if (auto v = doc.get_string("trace", "dir")) {
    if (c.trace.paths) throw ConfigError("trace.dir conflicts with explicit trace files");
    c.trace.paths = TracePaths::in_dir(resolve(*v));
  }
  if (auto v = doc.get_int("trace", "days")) c.trace.days = static_cast<int>(*v);
  if (auto v = doc.get_int("trace", "num_vms")) c.trace.num_vms = static_cast<int>(*v);
  if (auto v = doc.get_int("trace", "servers")) c.trace.servers = static_cast<int>(*v);
  read_into(c.write_trace, doc.get_bool("trace", "write"));

  read_into(c.train_fraction, doc.get_double("predict", "train_fraction"));
  read_int(c.min_group_size, doc, "predict", "min_group_size");

  if (auto names = doc.get_strings("schedule", "policies")) {
    c.policies.clear();
    for (const std::string& n : *names) {
      auto p = parse_policy(n);
      if (!p) throw ConfigError("unknown policy '" + n + "'");
      c.policies.push_back(*p);
    }
  }
  for (Policy& p : c.policies) {
    const std::string s = policy_section(p);
    read_int(p.window_hours, doc, s.c_str(), "window_hours");
    if (p.oversubscribes()) read_int(p.percentile, doc, s.c_str(), "percentile");
  }
  read_into(c.sim.backing_ratio, doc.get_double("schedule", "backing_ratio"));

  if (auto names = doc.get_strings("simulate", "tiers")) {
    c.tiers.clear();
    for (const std::string& n : *names) {
      auto t = parse_tier(n);
      if (!t) throw ConfigError("unknown mitigation tier '" + n + "'");
      c.tiers.push_back(*t);
    }
  }
  if (auto names = doc.get_strings("simulate", "triggers")) {
    c.triggers.clear();
    for (const std::string& n : *names) {
      auto t = parse_trigger(n);
      if (!t) throw ConfigError("unknown trigger '" + n + "'");
      c.triggers.push_back(*t);
    }
  }
  MitigationConfig& m = c.sim.mitigation;
  read_into(c.sim.record_timeline, doc.get_bool("simulate", "record_timeline"));
  read_into(m.cold_fraction, doc.get_double("simulate", "cold_fraction"));
  read_into(m.trim_gbps, doc.get_double("simulate", "trim_gbps"));
  read_into(m.extend_gbps, doc.get_double("simulate", "extend_gbps"));
  read_into(m.migrate_gbps, doc.get_double("simulate", "migrate_gbps"));
  read_into(m.migrate_setup_s, doc.get_double("simulate", "migrate_setup_s"));
  read_int(m.residency_steps, doc, "simulate", "residency_steps");
  read_into(m.migrate_includes_extend, doc.get_bool("simulate", "migrate_includes_extend"));
  read_into(m.slowdown_penalty, doc.get_double("simulate", "slowdown_penalty"));
  read_into(m.ewma_alpha, doc.get_double("simulate", "ewma_alpha"));

  ContentionConfig& ct = c.sim.contention;
  read_into(ct.cpu_violation_fraction, doc.get_double("contention", "cpu_violation_fraction"));
  read_into(ct.cpu_wait_pct, doc.get_double("contention", "cpu_wait_pct"));
  read_into(ct.cpu_util_pct, doc.get_double("contention", "cpu_util_pct"));
  read_int(ct.monitor_period_s, doc, "contention", "monitor_period_s");

  read_into(c.characterize, doc.get_bool("characterize", "enabled"));

  const auto unused = doc.unused_keys();
  if (!unused.empty()) {
    std::string msg = doc.source() + ": unknown key";
    if (unused.size() > 1) msg += "s";
    for (const std::string& k : unused) msg += " " + k;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  ExperimentConfig c = from_document(ConfigDocument::load(path), path.parent_path());
  c.apply_env();
  return c;
}

void ExperimentConfig::apply_env() {
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) output_dir = dir;
}

// ---- Split and predictors ---------------------------------------------------

TraceSplit split_trace(const TraceSet& trace, double train_fraction) {
  TraceSplit s;
  if (trace.empty()) return s;
  s.begin = day_of(trace.begin_time()) * kSecondsPerDay;
  s.end = trace.end_time();
  const std::int64_t days = (s.end - s.begin + kSecondsPerDay - 1) / kSecondsPerDay;
  const auto train_days = static_cast<std::int64_t>(train_fraction * static_cast<double>(days));
  s.split = s.begin + train_days * kSecondsPerDay;
  return s;
}

PredictorSet::PredictorSet(const TraceSet& trace, const TraceSplit& split, int min_group_size,
                           const std::vector<Policy>& policies) {
  for (const Policy& p : policies) {
    if (!p.oversubscribes() || models_.count(p.window_hours) || trace.empty()) continue;
    models_.emplace(p.window_hours, train_group_model(trace, p.window_hours, min_group_size,
                                                      {split.begin, split.split}));
  }
  for (const auto& [wh, model] : models_) predictors_.emplace(wh, GroupPredictor(model));
}

const UtilizationPredictor* PredictorSet::for_policy(const Policy& p) const {
  if (!p.oversubscribes()) return nullptr;
  auto it = predictors_.find(p.window_hours);
  return it == predictors_.end() ? nullptr : &it->second;
}

// ---- Report sections ----------------------------------------------------------

namespace {

json distribution_json(const DistributionSummary& d) {
  return {{"count", d.count}, {"min", d.min},       {"p25", d.p25}, {"median", d.median},
          {"p75", d.p75},     {"max", d.max},       {"mean", d.mean}};
}

// Most common requested shape; ties go to the smallest config name.
ResourceVector modal_shape(const TraceSet& trace) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> count;  // config -> (n, first vm)
  for (std::size_t v = 0; v < trace.vms().size(); ++v) {
    auto [it, fresh] = count.try_emplace(trace.vms()[v].vm_config, 0, v);
    ++it->second.first;
  }
  std::size_t best_n = 0, best_vm = 0;
  for (const auto& [config, nv] : count) {
    if (nv.first > best_n) {
      best_n = nv.first;
      best_vm = nv.second;
    }
  }
  return trace.vms()[best_vm].requested;
}

json hours_json(const std::vector<ResourceHoursRow>& rows) {
  json out = json::array();
  for (const ResourceHoursRow& r : rows) {
    out.push_back({{"threshold", r.threshold},
                   {"pct_core_hours", r.pct_core_hours},
                   {"pct_gb_hours", r.pct_gb_hours},
                   {"pct_vms_cores", r.pct_vms_cores},
                   {"pct_vms_gb", r.pct_vms_gb}});
  }
  return out;
}

constexpr int kCharacterizeWindowHours = 4;
constexpr std::int64_t kStrandingStep = 6 * kSecondsPerHour;
constexpr std::array<int, 7> kSavingsWindows = {1, 2, 4, 6, 8, 12, 24};
constexpr std::array<Resource, 2> kCharacterized = {Resource::kCpu, Resource::kMem};

}  // namespace

json characterization_json(const TraceSet& trace, const Assignment& assignment,
                           const TraceSplit& split) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["vms"] = trace.vms().size();
  if (trace.empty()) return j;

  const auto hours = [&](HoursDimension dim) {
    const auto thresholds = default_hours_thresholds(dim);
    return hours_json(resource_hours(trace.vms(), dim, thresholds));
  };
  j["resource_hours"] = {{"by_duration", hours(HoursDimension::kDuration)},
                         {"by_size", hours(HoursDimension::kSize)}};

  std::vector<std::int64_t> stamps;
  for (std::int64_t t = split.split; t < split.end; t += kStrandingStep) {
    if (t >= trace.begin_time()) stamps.push_back(t);
  }
  const ResourceVector shape = modal_shape(trace);
  json stranding;
  stranding["fill_shape"] = resources_json(shape);
  stranding["timestamps"] = stamps.size();
  if (!stamps.empty() && !trace.servers().empty()) {
    for (OversubMode mode : {OversubMode::kNone, OversubMode::kCpuOnly, OversubMode::kCpuMem}) {
      const StrandingReport rep = compute_stranding(trace, assignment, shape, mode, stamps);
      json clusters = json::array();
      ResourceVector mean = ResourceVector::Zero();
      for (const StrandingSample& s : rep.samples) mean += s.stranded_pct;
      if (!rep.samples.empty()) mean /= static_cast<double>(rep.samples.size());
      for (const ClusterStranding& c : rep.clusters) {
        clusters.push_back({{"cluster_id", c.cluster_id},
                            {"samples", c.samples},
                            {"mean_stranded_pct", resources_json(c.mean_stranded_pct)},
                            {"bottleneck_share_pct", resources_json(c.bottleneck_share_pct)},
                            {"no_bottleneck_share_pct", c.no_bottleneck_share_pct}});
      }
      stranding[std::string(oversub_mode_name(mode))] = {
          {"samples", rep.samples.size()},
          {"mean_stranded_pct", resources_json(mean)},
          {"clusters", clusters}};
    }
  }
  j["stranding"] = stranding;

  json peaks, dod, savings;
  for (Resource r : kCharacterized) {
    const std::string rn(resource_name(r));
    std::vector<PeakValleyResult> pv;
    std::vector<double> window_diff, peak_diff, valley_diff;
    pv.reserve(trace.vms().size());
    for (std::size_t v = 0; v < trace.vms().size(); ++v) {
      const UtilizationSeries& s = trace.series(v, r);
      pv.push_back(detect_peaks_valleys(s, kCharacterizeWindowHours));
      for (const DayPairDiff& d : day_over_day_consistency(s, kCharacterizeWindowHours)) {
        window_diff.insert(window_diff.end(), d.window_diff.begin(), d.window_diff.end());
        peak_diff.push_back(d.peak_diff);
        valley_diff.push_back(d.valley_diff);
      }
    }
    const PeakValleySummary ps = summarize_peaks(pv, kCharacterizeWindowHours);
    peaks[rn] = {{"window_hours", kCharacterizeWindowHours},
                 {"vm_days", ps.vm_days},
                 {"peak_pct", ps.peak_pct},
                 {"valley_pct", ps.valley_pct},
                 {"none_pct", ps.none_pct}};
    dod[rn] = {{"window_hours", kCharacterizeWindowHours},
               {"window_diff", distribution_json(summarize(std::move(window_diff)))},
               {"peak_diff", distribution_json(summarize(std::move(peak_diff)))},
               {"valley_diff", distribution_json(summarize(std::move(valley_diff)))}};

    json per_len = json::array();
    for (int wh : kSavingsWindows) {
      std::vector<double> means;
      for (std::size_t v = 0; v < trace.vms().size(); ++v) {
        const SavingsResult sr = window_savings(trace.series(v, r), wh);
        if (!sr.windows.empty()) means.push_back(sr.mean_saving);
      }
      per_len.push_back({{"window_hours", wh},
                         {"vm_mean_saving", distribution_json(summarize(std::move(means)))}});
    }
    savings[rn] = per_len;
  }
  j["peaks"] = peaks;
  j["day_over_day"] = dod;
  j["window_savings"] = savings;
  return j;
}

json placement_json(const PlacementLog& log) {
  const PlacementSummary& s = log.summary;
  return {{"arrivals", s.arrivals},
          {"hosted", s.hosted},
          {"rejected", s.rejected},
          {"predicted", s.predicted},
          {"servers_touched", s.servers_touched},
          {"peak_nonempty_servers", s.peak_nonempty_servers},
          {"hosted_core_hours", s.hosted_core_hours},
          {"hosted_gb_hours", s.hosted_gb_hours}};
}

json allocation_error_json(const std::array<AllocationErrorStats, kNumResources>& err) {
  json j;
  for (Resource r : kAllResources) {
    const AllocationErrorStats& e = err[index(r)];
    j[std::string(resource_name(r))] = {{"instances", e.instances},
                                        {"under_events", e.under_events},
                                        {"under_rate_pct", e.under_rate_pct()},
                                        {"mean_over_pct", e.mean_over_pct}};
  }
  return j;
}

json simulation_json(const SimReport& report) {
  json mitigations;
  for (MitigationKind k :
       {MitigationKind::kTrim, MitigationKind::kExtend, MitigationKind::kEvict, MitigationKind::kMigrate}) {
    std::vector<double> latency;
    std::size_t blocked = 0;
    for (const MitigationEvent& e : report.events) {
      if (e.kind != k) continue;
      if (e.blocked) {
        ++blocked;
      } else {
        latency.push_back(e.completion - e.time);
      }
    }
    mitigations[std::string(mitigation_kind_name(k))] = {
        {"count", latency.size()},
        {"blocked", blocked},
        {"latency_s", distribution_json(summarize(std::move(latency)))}};
  }
  std::map<std::string, std::size_t> causes;
  std::vector<double> mem_durations;
  for (const Episode& e : report.episodes) {
    ++causes[std::string(episode_end_name(e.cause))];
    if (e.resource == Resource::kMem) mem_durations.push_back(e.duration());
  }
  return {{"tier", tier_name(report.tier)},
          {"trigger", trigger_name(report.trigger)},
          {"server_seconds", report.server_seconds},
          {"cpu_violation_seconds", report.cpu_violation_seconds},
          {"mem_violation_seconds", report.mem_violation_seconds},
          {"cpu_violation_share_pct", report.cpu_violation_share_pct()},
          {"mem_violation_share_pct", report.mem_violation_share_pct()},
          {"cpu_monitor_triggers", report.cpu_monitor_triggers},
          {"redirected", report.redirected},
          {"displaced", report.displaced},
          {"episodes", report.episodes.size()},
          {"episode_end", causes},
          {"mem_episode_s", distribution_json(summarize(std::move(mem_durations)))},
          {"worst_slowdown", distribution_json(summarize(report.worst_slowdown))},
          {"mitigations", mitigations}};
}

json emit_report(const std::vector<PolicyResult>& results, const TraceSet& trace,
                 const TraceSplit& split, const ExperimentConfig& config) {
  for (const PolicyResult& r : results) {
    if (r.log.trace_fingerprint != trace.fingerprint()) {
      throw DataError("placement log for " + std::string(r.log.policy.name()) +
                      " comes from a different trace");
    }
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["seed"] = config.seed ? json(*config.seed) : json(nullptr);
  j["trace"] = {{"fingerprint", trace.fingerprint()},
                {"vms", trace.vms().size()},
                {"servers", trace.servers().size()},
                {"begin_unix", split.begin},
                {"split_unix", split.split},
                {"end_unix", split.end}};

  const PolicyResult* baseline = nullptr;
  for (const PolicyResult& r : results) {
    if (!r.log.policy.oversubscribes()) baseline = &r;
  }
  json policies = json::object();
  for (const PolicyResult& r : results) {
    json p;
    p["percentile"] = r.log.policy.percentile;
    p["window_hours"] = r.log.policy.window_hours;
    p["placement"] = placement_json(r.log);
    if (baseline) {
      const CapacityGain g = capacity_gain(baseline->log, r.log);
      p["capacity_gain_vs_none"] = {{"core_hours_pct", g.core_hours_pct},
                                    {"gb_hours_pct", g.gb_hours_pct},
                                    {"vm_count_pct", g.vm_count_pct}};
    } else {
      p["capacity_gain_vs_none"] = nullptr;
    }
    p["allocation_error"] = allocation_error_json(r.allocation_error);
    json sims = json::array();
    for (const SimReport& s : r.simulations) sims.push_back(simulation_json(s));
    p["simulations"] = sims;
    policies[std::string(r.log.policy.name())] = p;
  }
  j["policies"] = policies;
  return j;
}

// ---- Outputs and manifest ---------------------------------------------------------

void OutputWriter::write(const std::string& rel, const std::string& text) {
  const fs::path p = dir_ / rel;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw DataError("cannot write " + p.string());
  files_.push_back(rel);
}

void OutputWriter::write_json(const std::string& rel, const json& doc) {
  write(rel, doc.dump(2) + "\n");
}

namespace {
constexpr const char* kManifestName = "manifest.json";
}

void write_manifest(const fs::path& dir, const std::vector<std::string>& files,
                    const ExperimentConfig& config, bool complete, const std::string& failed_stage) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["seed"] = config.seed ? json(*config.seed) : json(nullptr);
  const json effective = config.to_json();
  j["config"] = effective;
  j["config_sha256"] = sha256_hex(effective.dump());
  j["complete"] = complete;
  j["failed_stage"] = failed_stage.empty() ? json(nullptr) : json(failed_stage);
  json list = json::array();
  for (const std::string& rel : files) {
    const fs::path p = dir / rel;
    list.push_back({{"path", rel}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
  }
  j["files"] = list;
  std::ofstream out(dir / kManifestName, std::ios::binary);
  out << j.dump(2) << '\n';
  out.close();
  if (!out) throw DataError("cannot write the manifest in " + dir.string());
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw DataError("no manifest at " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::vector<std::string> problems;
  if (!j.value("complete", false)) {
    problems.push_back("run incomplete, failed at stage " +
                       j.value("failed_stage", json("unknown")).dump());
  }
  for (const json& f : j.at("files")) {
    const std::string rel = f.at("path");
    const fs::path p = dir / rel;
    if (!fs::is_regular_file(p)) {
      problems.push_back(rel + ": missing");
      continue;
    }
    if (fs::file_size(p) != f.at("bytes").get<std::uintmax_t>()) {
      problems.push_back(rel + ": size changed");
    } else if (sha256_file(p) != f.at("sha256").get<std::string>()) {
      problems.push_back(rel + ": content hash differs");
    }
  }
  return problems;
}

// ---- Pipeline -----------------------------------------------------------------

namespace {

std::string simulation_stem(const Policy& p, MitigationTier t, Trigger g) {
  return "simulation/" + std::string(p.name()) + "_" + std::string(tier_name(t)) + "_" +
         std::string(trigger_name(g));
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<Policy> policies = config.policies;
  if (std::none_of(policies.begin(), policies.end(), [](const Policy& p) { return !p.oversubscribes(); })) {
    policies.insert(policies.begin(), Policy::none());  // baseline for the gains
  }

  OutputWriter out(config.output_dir);
  std::string stage = "setup";
  bool dir_ready = false;
  auto fail = [&](const std::string& what) {
    if (dir_ready) {
      try {
        write_manifest(out.dir(), out.files(), config, false, stage);
      } catch (const std::exception&) {
        // The original error matters more than a lost manifest.
      }
    }
    return "stage " + stage + ": " + what;
  };

  try {
    fs::create_directories(out.dir());
    dir_ready = true;

    stage = config.trace.preset ? "generate" : "parse";
    const TraceSet trace = config.trace.preset
                               ? generate_synthetic_trace(config.trace.generator(), *config.seed)
                               : parse_trace(*config.trace.paths);
    if (config.write_trace) {
      const TracePaths tp = TracePaths::in_dir(out.path("trace"));
      fs::create_directories(out.path("trace"));
      write_trace(trace, tp);
      for (const char* f : {"trace/vms.csv", "trace/util.csv", "trace/servers.csv"}) out.record(f);
    }
    const TraceSplit split = split_trace(trace, config.train_fraction);

    stage = "predict";
    const PredictorSet predictors(trace, split, config.min_group_size, policies);

    stage = "schedule";
    ScheduleOptions opt;
    opt.granularity = config.sim.granularity;
    opt.backing_ratio = config.sim.backing_ratio;
    opt.begin = split.split;
    std::vector<PolicyResult> results;
    for (const Policy& p : policies) {
      PolicyResult r;
      if (trace.empty()) {
        r.log.policy = p;
        r.log.trace_fingerprint = trace.fingerprint();
      } else {
        r.log = schedule(trace, predictors.for_policy(p), p, opt);
      }
      out.write("placements/" + std::string(p.name()) + ".csv",
                render([&](std::ostream& s) { write_placement_log(r.log, trace, s); }));
      r.allocation_error = allocation_error(r.log, trace, config.sim.granularity);
      results.push_back(std::move(r));
    }

    if (config.characterize) {
      stage = "characterize";
      const Assignment baseline = results.front().log.assignment(trace.vms().size());
      out.write_json("characterization.json", characterization_json(trace, baseline, split));
    }

    stage = "simulate";
    for (PolicyResult& r : results) {
      for (MitigationTier tier : config.tiers) {
        for (Trigger trigger : config.triggers) {
          SimConfig sc = config.sim;
          sc.mitigation.tier = tier;
          sc.mitigation.trigger = trigger;
          sc.seed = *config.seed;
          SimReport rep = trace.empty() ? SimReport{} : run_simulation(r.log, trace, sc);
          rep.tier = tier;
          rep.trigger = trigger;
          rep.seed = sc.seed;
          const std::string stem = simulation_stem(r.log.policy, tier, trigger);
          out.write(stem + "_events.csv", render([&](std::ostream& s) { write_events(rep, trace, s); }));
          out.write(stem + "_episodes.csv",
                    render([&](std::ostream& s) { write_episodes(rep, trace, s); }));
          if (sc.record_timeline) {
            out.write(stem + "_timeline.csv",
                      render([&](std::ostream& s) { write_timeline(rep, trace, s); }));
          }
          rep.timeline.clear();
          r.simulations.push_back(std::move(rep));
        }
      }
    }

    stage = "report";
    json summary = emit_report(results, trace, split, config);
    out.write_json("summary.json", summary);
    write_manifest(out.dir(), out.files(), config, true);
    return {out.dir(), out.files(), std::move(summary)};
  } catch (const ConfigError& e) {
    throw ConfigError(fail(e.what()));
  } catch (const DataError& e) {
    throw DataError(fail(e.what()));
  } catch (const InvariantError& e) {
    throw InvariantError(fail(e.what()));
  } catch (const fs::filesystem_error& e) {
    throw DataError(fail(e.what()));
  }
}

}  // namespace oversub
