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

// oversub: trace generation, characterization, prediction, placement,
// contention simulation and full experiments from one binary.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "oversub/errors.h"
#include "oversub/experiment.h"

namespace fs = std::filesystem;
using namespace oversub;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kInternal = 4 };

struct TraceArgs {
  std::string dir;
  double train_fraction = 0.5;
};

void add_trace_args(CLI::App* cmd, TraceArgs& t) {
  cmd->add_option("--trace", t.dir, "Directory with vms.csv, util.csv, servers.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--train-fraction", t.train_fraction,
                  "Leading share of trace days used for training")
      ->check(CLI::Range(0.0, 0.999999));
}

TraceSet load_trace(const TraceArgs& t) { return parse_trace(TracePaths::in_dir(t.dir)); }

// Writes to a file, or stdout for "-" or empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw DataError("cannot write " + path);
}

Policy resolve_policy(const std::string& name, std::optional<int> percentile,
                      std::optional<int> window_hours) {
  auto p = parse_policy(name);
  if (!p) throw ConfigError("unknown policy '" + name + "'");
  if (percentile) p->percentile = *percentile;
  if (window_hours) p->window_hours = *window_hours;
  check_window_hours(p->window_hours);
  if (p->oversubscribes() && (p->percentile < 50 || p->percentile > kMaxPercentile)) {
    throw ConfigError("percentile must be in [50,99]");
  }
  return *p;
}

PlacementLog read_log(const std::string& path, const TraceSet& trace) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open placements " + path);
  return read_placement_log(in, trace, path);
}

int report_error(const char* kind, const std::exception& e, int code) {
  std::cerr << "oversub: " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-window oversubscription toolkit", "oversub"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  // generate
  std::string preset = "quickstart", gen_out;
  std::uint64_t gen_seed = 0;
  std::optional<int> gen_days, gen_vms, gen_servers;
  auto* gen = app.add_subcommand("generate", "Write a synthetic trace");
  gen->add_option("--preset", preset, "Bundled generator preset")
      ->check(CLI::IsMember(GenConfig::preset_names()));
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--days", gen_days);
  gen->add_option("--num-vms", gen_vms);
  gen->add_option("--servers", gen_servers);

  // characterize
  TraceArgs ch_trace;
  std::string ch_out;
  auto* ch = app.add_subcommand("characterize", "Trace statistics as JSON");
  add_trace_args(ch, ch_trace);
  ch->add_option("--out", ch_out, "Output file (default stdout)");

  // predict
  TraceArgs pr_trace;
  int pr_percentile = 95, pr_window = 4, pr_min_group = 5;
  std::string pr_out;
  auto* pr = app.add_subcommand("predict", "Per-VM window profiles for the scheduled VMs");
  add_trace_args(pr, pr_trace);
  pr->add_option("--percentile", pr_percentile)->check(CLI::Range(50, kMaxPercentile));
  pr->add_option("--window-hours", pr_window);
  pr->add_option("--min-group-size", pr_min_group)->check(CLI::PositiveNumber);
  pr->add_option("--out", pr_out, "Output CSV (default stdout)");

  // schedule
  TraceArgs sc_trace;
  std::string sc_policy = "coach", sc_out;
  std::optional<int> sc_percentile, sc_window;
  int sc_min_group = 5;
  double sc_backing = 1.0;
  auto* sc = app.add_subcommand("schedule", "Place VMs under one policy");
  add_trace_args(sc, sc_trace);
  sc->add_option("--policy", sc_policy, "none, single, coach or aggr");
  sc->add_option("--percentile", sc_percentile);
  sc->add_option("--window-hours", sc_window);
  sc->add_option("--min-group-size", sc_min_group)->check(CLI::PositiveNumber);
  sc->add_option("--backing-ratio", sc_backing);
  sc->add_option("--out", sc_out, "Placement CSV")->required();

  // simulate
  TraceArgs si_trace;
  std::string si_placements, si_out, si_tier = "migrate", si_trigger = "reactive";
  double si_cold = MitigationConfig{}.cold_fraction, si_backing = 1.0;
  std::uint64_t si_seed = 0;
  bool si_timeline = false;
  auto* si = app.add_subcommand("simulate", "Replay placements against actual utilization");
  add_trace_args(si, si_trace);
  si->add_option("--placements", si_placements, "Placement CSV from schedule")
      ->required()
      ->check(CLI::ExistingFile);
  si->add_option("--mitigation", si_tier, "none, trim, extend or migrate");
  si->add_option("--trigger", si_trigger, "reactive or proactive");
  si->add_option("--cold-fraction", si_cold);
  si->add_option("--backing-ratio", si_backing);
  si->add_option("--seed", si_seed);
  si->add_flag("--timeline", si_timeline, "Also write the per-step timeline");
  si->add_option("--out", si_out, "Output directory")->required();

  // run
  std::string run_config;
  std::optional<std::string> run_output;
  auto* run = app.add_subcommand("run", "Full experiment from a config file");
  run->add_option("--config", run_config)->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", run_output, "Overrides the configured directory");

  // verify
  std::string verify_dir;
  auto* ver = app.add_subcommand("verify", "Re-hash the files listed in a run manifest");
  ver->add_option("dir", verify_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*gen) {
      TraceSource src;
      src.preset = preset;
      src.days = gen_days;
      src.num_vms = gen_vms;
      src.servers = gen_servers;
      const GenConfig cfg = src.generator();
      cfg.validate();
      const TraceSet trace = generate_synthetic_trace(cfg, gen_seed);
      fs::create_directories(gen_out);
      write_trace(trace, TracePaths::in_dir(gen_out));
      std::cout << "wrote " << trace.vms().size() << " VMs and " << trace.servers().size()
                << " servers to " << gen_out << '\n';
    } else if (*ch) {
      const TraceSet trace = load_trace(ch_trace);
      const TraceSplit split = split_trace(trace, ch_trace.train_fraction);
      ScheduleOptions opt;
      opt.begin = split.split;
      const PlacementLog none = trace.empty() ? PlacementLog{} : schedule(trace, nullptr, Policy::none(), opt);
      emit(ch_out, characterization_json(trace, none.assignment(trace.vms().size()), split).dump(2) + "\n");
    } else if (*pr) {
      check_window_hours(pr_window);
      const TraceSet trace = load_trace(pr_trace);
      const TraceSplit split = split_trace(trace, pr_trace.train_fraction);
      const GroupModel model =
          train_group_model(trace, pr_window, pr_min_group, {split.begin, split.split});
      std::ostringstream out;
      out << "vm_id,group_level,resource,window,p_x,p_max\n";
      for (const VMRecord& vm : trace.vms()) {
        if (vm.start < split.split) continue;
        const auto found = model.lookup(vm);
        const auto profile = predict_profile(model, vm, pr_percentile);
        if (!profile) {
          out << vm.vm_id << ",none,,,,\n";
          continue;
        }
        for (Resource r : kAllResources) {
          for (int w = 0; w < profile->windows(); ++w) {
            out << vm.vm_id << ',' << group_level_name(found->first) << ',' << resource_name(r)
                << ',' << w << ',' << profile->p_x(index(r), w) << ','
                << profile->p_max(index(r), w) << '\n';
          }
        }
      }
      emit(pr_out, out.str());
    } else if (*sc) {
      const Policy policy = resolve_policy(sc_policy, sc_percentile, sc_window);
      const TraceSet trace = load_trace(sc_trace);
      const TraceSplit split = split_trace(trace, sc_trace.train_fraction);
      const PredictorSet predictors(trace, split, sc_min_group, {policy});
      ScheduleOptions opt;
      opt.begin = split.split;
      opt.backing_ratio = sc_backing;
      const PlacementLog log = schedule(trace, predictors.for_policy(policy), policy, opt);
      std::ostringstream csv;
      write_placement_log(log, trace, csv);
      emit(sc_out, csv.str());
      nlohmann::json j = placement_json(log);
      j["schema_version"] = kSchemaVersion;
      j["policy"] = policy.name();
      std::cout << j.dump(2) << '\n';
    } else if (*si) {
      SimConfig cfg;
      const auto tier = parse_tier(si_tier);
      const auto trigger = parse_trigger(si_trigger);
      if (!tier) throw ConfigError("unknown mitigation '" + si_tier + "'");
      if (!trigger) throw ConfigError("unknown trigger '" + si_trigger + "'");
      cfg.mitigation.tier = *tier;
      cfg.mitigation.trigger = *trigger;
      cfg.mitigation.cold_fraction = si_cold;
      cfg.backing_ratio = si_backing;
      cfg.seed = si_seed;
      cfg.record_timeline = si_timeline;
      cfg.mitigation.validate();
      const TraceSet trace = load_trace(si_trace);
      const PlacementLog log = read_log(si_placements, trace);
      const SimReport rep = run_simulation(log, trace, cfg);
      OutputWriter out(si_out);
      std::ostringstream events, episodes;
      write_events(rep, trace, events);
      write_episodes(rep, trace, episodes);
      out.write("events.csv", events.str());
      out.write("episodes.csv", episodes.str());
      if (si_timeline) {
        std::ostringstream timeline;
        write_timeline(rep, trace, timeline);
        out.write("timeline.csv", timeline.str());
      }
      nlohmann::json j = simulation_json(rep);
      j["schema_version"] = kSchemaVersion;
      j["policy"] = log.policy.name();
      out.write_json("simulation.json", j);
      std::cout << j.dump(2) << '\n';
    } else if (*run) {
      ExperimentConfig cfg = ExperimentConfig::load(run_config);
      if (run_output) cfg.output_dir = *run_output;
      const ExperimentOutcome r = run_experiment(cfg);
      std::cout << "wrote " << r.files.size() << " files and manifest.json to "
                << r.output_dir.string() << '\n';
    } else if (*ver) {
      const auto problems = verify_manifest(verify_dir);
      for (const std::string& p : problems) std::cerr << p << '\n';
      if (!problems.empty()) return kData;
      std::cout << "ok\n";
    }
  } catch (const ConfigError& e) {
    return report_error("config error", e, kConfig);
  } catch (const DataError& e) {
    return report_error("data error", e, kData);
  } catch (const InvariantError& e) {
    return report_error("invariant violated", e, kInternal);
  } catch (const std::exception& e) {
    return report_error("internal error", e, kInternal);
  }
  return kOk;
}
