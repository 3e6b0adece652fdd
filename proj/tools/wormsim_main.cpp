// wormsim: scenario files in, CSV tables and plot scripts out.
//
//   wormsim ode   --scenario s.json --out dir [--step 1 --stride 1]
//   wormsim sim   --scenario s.json --runs 1000 --seed 1 --out dir
//   wormsim trace stats --trace assoc.csv --out dir [--window 86400]
//   wormsim trace sim   --trace assoc.csv --scenario s.json --out dir
//   wormsim sweep --spec sweep.json --out dir
//
// Exit codes: 0 success, 1 user error, 2 internal error.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "wormsim/csv.hpp"
#include "wormsim/metrics.hpp"
#include "wormsim/ode.hpp"
#include "wormsim/scenario.hpp"
#include "wormsim/sim.hpp"
#include "wormsim/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  double horizon = -1.0;  // < 0: keep the scenario's value
};

wormsim::Scenario load_with_overrides(const CommonArgs& args) {
  wormsim::Scenario scn = wormsim::load_scenario(args.scenario_path);
  if (args.horizon >= 0.0) scn.horizon = args.horizon;
  const auto violations = wormsim::validate_scenario(scn);
  if (!violations.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& v : violations)
      msg += "\n  " + v.code + ": " + v.message;
    throw wormsim::Error("InvalidScenario", msg);
  }
  return scn;
}

void write_metrics_csv(const wormsim::Metrics& m, const wormsim::Scenario& scn,
                       const std::string& path) {
  wormsim::csv::Writer w(path);
  w.row(wormsim::metrics_csv_header());
  w.row(wormsim::metrics_csv_row(m, scn));
}

int cmd_ode(const CommonArgs& args, const wormsim::OdeSettings& settings) {
  const auto scn = load_with_overrides(args);
  const auto traj = wormsim::integrate(scn, settings);
  const auto metrics = wormsim::trajectory_metrics(traj, scn, settings);
  fs::create_directories(args.out_dir);
  wormsim::write_trajectory_csv(traj, args.out_dir + "/trajectory.csv");
  write_metrics_csv(metrics, scn, args.out_dir + "/metrics.csv");
  std::cout << "wrote " << args.out_dir << "/trajectory.csv ("
            << traj.samples.size() << " samples) and metrics.csv\n";
  return 0;
}

int cmd_sim(const CommonArgs& args, std::size_t runs, std::uint64_t seed,
            const std::string& events_path) {
  const auto scn = load_with_overrides(args);
  const auto results = wormsim::monte_carlo_runs(scn, runs, seed);
  const auto summary = wormsim::summarize(results);
  fs::create_directories(args.out_dir);
  wormsim::write_run_metrics_csv(results, scn, args.out_dir + "/runs.csv");
  wormsim::write_summary_csv(summary, args.out_dir + "/summary.csv");
  if (!events_path.empty()) {
    const auto [log, rm] = wormsim::simulate_run(scn, seed);
    wormsim::write_event_log_csv(log, events_path);
  }
  std::cout << "wrote " << args.out_dir << "/runs.csv (" << runs
            << " runs) and summary.csv\n";
  return 0;
}

std::vector<wormsim::EncounterEvent> load_encounters(
    const std::string& trace_path, const std::string& encounters_path,
    const std::string& out_dir, bool write_rejects) {
  if (!encounters_path.empty())
    return wormsim::read_encounters_csv(encounters_path);
  const auto report = wormsim::parse_associations_file(trace_path);
  if (write_rejects && !report.rejects.empty()) {
    wormsim::csv::Writer w(out_dir + "/trace_rejects.csv");
    w.row({"line", "reason"});
    for (const auto& r : report.rejects)
      w.row({std::to_string(r.line), r.reason});
  }
  return wormsim::derive_encounters(report.records);
}

int cmd_trace_stats(const std::string& trace_path,
                    const std::string& encounters_path,
                    const std::string& out_dir, double window) {
  fs::create_directories(out_dir);
  const auto encs =
      load_encounters(trace_path, encounters_path, out_dir, true);
  const auto stats = wormsim::trace_stats(encs, window);
  wormsim::write_trace_stats_csv(stats, out_dir);
  wormsim::write_encounters_csv(encs, out_dir + "/encounters.csv");
  std::cout << "wrote trace stats for " << stats.per_node.size()
            << " nodes, " << encs.size() << " encounters, "
            << stats.batches.size() << " batches to " << out_dir << "\n";
  return 0;
}

int cmd_trace_sim(const CommonArgs& args, const std::string& trace_path,
                  const std::string& encounters_path, std::size_t runs,
                  std::uint64_t seed, double window,
                  const std::string& events_path) {
  wormsim::Scenario scn = wormsim::load_scenario(args.scenario_path);
  if (args.horizon >= 0.0) scn.horizon = args.horizon;
  fs::create_directories(args.out_dir);
  const auto encs =
      load_encounters(trace_path, encounters_path, args.out_dir, true);
  if (scn.total_nodes() == 0.0 && !encs.empty()) {
    // Scenario left the population to the trace: fill group sizes from the
    // batch clusters so relative metrics have a denominator.
    const auto stats = wormsim::trace_stats(encs, window);
    for (std::size_t k = 0; k < stats.groups.sizes.size(); ++k) {
      const std::size_t g = std::min(k, scn.groups.size() - 1);
      scn.groups[g].n_nodes +=
          static_cast<std::int64_t>(stats.groups.sizes[k]);
    }
  }
  wormsim::ReplayOptions opts;
  opts.batch_window = window;
  std::vector<wormsim::RunMetrics> results(runs);
  for (std::size_t k = 0; k < runs; ++k) {
    auto [log, rm] = wormsim::replay_sim(encs, scn, seed + k, opts);
    results[k] = rm;
    if (k == 0 && !events_path.empty())
      wormsim::write_event_log_csv(log, events_path);
  }
  wormsim::write_run_metrics_csv(results, scn, args.out_dir + "/replay_runs.csv");
  wormsim::write_summary_csv(wormsim::summarize(results),
                             args.out_dir + "/replay_summary.csv");
  std::cout << "wrote " << args.out_dir << "/replay_runs.csv (" << runs
            << " replays) and replay_summary.csv\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepSpec {
  std::string scenario_path;
  std::string param;
  std::vector<double> values;
  std::string engine = "sim";  // ode | sim | trace
  std::size_t runs = 100;
  std::uint64_t seed = 1;
  std::string trace_path;
  double window = 86400.0;  // replay batch-cluster window
  double step = 1.0;
  std::size_t stride = 1;
  std::size_t workers = 0;
};

SweepSpec load_sweep_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wormsim::Error("FileNotFound", "cannot open sweep spec: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw wormsim::Error("ParseError", e.what());
  }
  static const std::set<std::string> keys = {
      "scenario", "param", "values", "engine", "runs",  "seed",
      "trace",    "window", "step",  "stride", "workers"};
  for (auto it = root.begin(); it != root.end(); ++it)
    if (!keys.count(it.key()))
      throw wormsim::Error("UnknownKey", "unknown sweep key '" + it.key() + "'");

  SweepSpec spec;
  spec.scenario_path = root.at("scenario").get<std::string>();
  spec.param = root.at("param").get<std::string>();
  for (const auto& v : root.at("values")) spec.values.push_back(v.get<double>());
  if (spec.values.empty()) throw wormsim::Error("BadValue", "empty value list");
  spec.engine = root.value("engine", std::string("sim"));
  spec.runs = root.value("runs", std::size_t{100});
  spec.seed = root.value("seed", std::uint64_t{1});
  spec.trace_path = root.value("trace", std::string{});
  spec.window = root.value("window", 86400.0);
  spec.step = root.value("step", 1.0);
  spec.stride = root.value("stride", std::size_t{1});
  spec.workers = root.value("workers", std::size_t{0});

  static const std::set<std::string> params = {
      "y", "beta", "n", "c", "i", "p", "d", "group_size", "beta11", "beta12"};
  if (!params.count(spec.param))
    throw wormsim::Error("BadValue", "unknown sweep parameter '" + spec.param + "'");
  if (spec.engine != "ode" && spec.engine != "sim" && spec.engine != "trace")
    throw wormsim::Error("BadValue", "engine must be ode, sim or trace");
  if (spec.engine == "trace" && spec.trace_path.empty())
    throw wormsim::Error("BadValue", "engine=trace needs a 'trace' file");
  return spec;
}

void apply_sweep_param(wormsim::Scenario& scn, const std::string& param,
                       double value) {
  using wormsim::Error;
  if (param == "y") {
    const double prey = scn.total_initial_prey();
    if (prey <= 0.0) throw Error("BadValue", "y sweep needs initial prey");
    std::size_t target = 0;
    for (std::size_t n = 0; n < scn.initial_predator.size(); ++n)
      if (scn.initial_predator[n] > scn.initial_predator[target]) target = n;
    scn.initial_predator.resize(scn.group_count(), 0.0);
    for (auto& v : scn.initial_predator) v = 0.0;
    scn.initial_predator[target] = std::round(value * prey);
  } else if (param == "beta") {
    for (auto& gr : scn.groups) gr.intra_rate = value;
    for (std::size_t a = 0; a < scn.inter_rates.size(); ++a)
      for (std::size_t b = 0; b < scn.inter_rates[a].size(); ++b)
        if (a != b) scn.inter_rates[a][b] = value;
  } else if (param == "beta11") {
    scn.groups.at(0).intra_rate = value;
  } else if (param == "beta12") {
    if (scn.group_count() < 2 || scn.inter_rates.size() < 2)
      throw Error("BadValue", "beta12 sweep needs two groups");
    scn.inter_rates[0][1] = scn.inter_rates[1][0] = value;
  } else if (param == "n") {
    if (scn.group_count() != 1)
      throw Error("BadValue", "n sweep expects a single group");
    scn.groups[0].n_nodes = std::llround(value);
  } else if (param == "c") {
    scn.cooperation = value;
  } else if (param == "i") {
    scn.immunization = value;
  } else if (param == "p") {
    scn.on_prob = value;
  } else if (param == "d") {
    scn.delay = value;
  } else if (param == "group_size") {
    if (scn.group_count() != 2)
      throw Error("BadValue", "group_size sweep expects two groups");
    const auto total = scn.groups[0].n_nodes + scn.groups[1].n_nodes;
    scn.groups[0].n_nodes = std::llround(value);
    scn.groups[1].n_nodes = total - scn.groups[0].n_nodes;
  }
}

wormsim::SummaryStat point_stat(const wormsim::Metrics& m, bool censored_flag,
                                std::optional<double> v) {
  wormsim::SummaryStat s;
  (void)m;
  if (v) {
    s.median = s.q1 = s.q3 = *v;
    s.defined = 1;
  } else {
    s.censored = 1;
  }
  if (censored_flag) s.censored = 1;
  return s;
}

void write_plot_script(const std::string& path, const std::string& csv_name) {
  std::ofstream out(path);
  out << R"(#!/usr/bin/env python3
"""Render one chart per metric from the sweep CSV next to this script."""
import csv
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, ")" << csv_name << R"("))))
by_metric = defaultdict(list)
for r in rows:
    if r["median"] == "":
        continue
    by_metric[r["metric"]].append(
        (float(r["value"]), float(r["median"]), float(r["q1"]), float(r["q3"])))

param = rows[0]["param"] if rows else "value"
for metric, pts in by_metric.items():
    pts.sort()
    xs = [p[0] for p in pts]
    med = [p[1] for p in pts]
    q1 = [p[2] for p in pts]
    q3 = [p[3] for p in pts]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, med, "o-", label="median")
    ax.fill_between(xs, q1, q3, alpha=0.25, label="quartiles")
    ax.set_xlabel(param)
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(here, f"sweep_{metric}.png"), dpi=120)
    plt.close(fig)
print(f"wrote {len(by_metric)} charts")
)";
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir) {
  const SweepSpec spec = load_sweep_spec(spec_path);
  const wormsim::Scenario base = wormsim::load_scenario(spec.scenario_path);

  std::vector<wormsim::EncounterEvent> encs;
  if (spec.engine == "trace") {
    const auto report = wormsim::parse_associations_file(spec.trace_path);
    encs = wormsim::derive_encounters(report.records);
  }

  struct PointResult {
    wormsim::MetricsSummary summary;
    std::string error;
  };
  std::vector<PointResult> points(spec.values.size());

  auto run_point = [&](std::size_t k) {
    wormsim::Scenario scn = base;
    try {
      apply_sweep_param(scn, spec.param, spec.values[k]);
      // replay scenarios take their population from the trace, so seed
      // feasibility is checked inside replay_sim instead.
      if (spec.engine != "trace") wormsim::require_valid(scn);
      if (spec.engine == "ode") {
        wormsim::OdeSettings settings;
        settings.step = spec.step;
        settings.output_stride = spec.stride;
        const auto m = wormsim::ode_metrics(scn, settings);
        wormsim::MetricsSummary s;
        s.runs = 1;
        s.ti = point_stat(m, false, m.ti);
        s.mi = point_stat(m, false, m.mi);
        s.tl = point_stat(m, m.tl_censored, m.tl);
        s.al = point_stat(m, false, m.al);
        s.ta = point_stat(m, false, m.ta);
        s.tr = point_stat(m, false, m.tr);
        points[k].summary = s;
      } else if (spec.engine == "sim") {
        points[k].summary =
            wormsim::monte_carlo(scn, spec.runs, spec.seed, 1);
      } else {
        wormsim::ReplayOptions opts;
        opts.batch_window = spec.window;
        std::vector<wormsim::RunMetrics> results(spec.runs);
        for (std::size_t r = 0; r < spec.runs; ++r)
          results[r] = wormsim::replay_sim(encs, scn, spec.seed + r, opts).second;
        points[k].summary = wormsim::summarize(results);
      }
    } catch (const std::exception& e) {
      points[k].error = e.what();
    }
  };

  std::size_t workers = spec.workers;
  if (workers == 0) {
    workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
  }
  workers = std::min(workers, spec.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= spec.values.size()) return;
      run_point(k);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  fs::create_directories(out_dir);
  wormsim::csv::Writer w(out_dir + "/sweep.csv");
  w.row({"param", "value", "metric", "median", "q1", "q3", "censored"});
  std::size_t failures = 0;
  for (std::size_t k = 0; k < spec.values.size(); ++k) {
    const auto& pt = points[k];
    auto emit = [&](const char* metric, const wormsim::SummaryStat& st) {
      using wormsim::csv::format_double;
      using wormsim::csv::format_optional;
      w.row({spec.param, format_double(spec.values[k]), metric,
             format_optional(st.median), format_optional(st.q1),
             format_optional(st.q3),
             pt.error.empty() ? std::to_string(st.censored) : "error"});
    };
    if (!pt.error.empty()) {
      ++failures;
      std::cerr << "point " << spec.values[k] << " failed: " << pt.error << "\n";
    }
    emit("ti", pt.summary.ti);
    emit("mi", pt.summary.mi);
    emit("tl", pt.summary.tl);
    emit("al", pt.summary.al);
    emit("ta", pt.summary.ta);
    emit("tr", pt.summary.tr);
  }
  write_plot_script(out_dir + "/plot_sweep.py", "sweep.csv");
  std::cout << "wrote " << out_dir << "/sweep.csv and plot_sweep.py ("
            << spec.values.size() - failures << "/" << spec.values.size()
            << " points ok)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predator-prey worm interaction engines for encounter-based "
               "networks"};
  app.require_subcommand(1);

  CommonArgs common;
  wormsim::OdeSettings ode_settings;
  std::size_t runs = 1;
  std::uint64_t seed = 1;
  std::string trace_path, encounters_path, events_path, spec_path;
  double window = 86400.0;

  auto* ode = app.add_subcommand("ode", "Deterministic ODE engine");
  ode->add_option("--scenario", common.scenario_path, "Scenario file")
      ->required();
  ode->add_option("--out", common.out_dir, "Output directory");
  ode->add_option("--step", ode_settings.step, "Integration step, s");
  ode->add_option("--stride", ode_settings.output_stride, "Output stride");
  ode->add_option("--epsilon", ode_settings.extinction_threshold,
                  "Extinction threshold, nodes");
  ode->add_option("--horizon", common.horizon, "Override horizon, s");

  auto* sim = app.add_subcommand("sim", "Stochastic encounter simulator");
  sim->add_option("--scenario", common.scenario_path, "Scenario file")
      ->required();
  sim->add_option("--runs", runs, "Monte Carlo rounds");
  sim->add_option("--seed", seed, "Base seed");
  sim->add_option("--out", common.out_dir, "Output directory");
  sim->add_option("--events", events_path, "Event-log CSV for the first run");
  sim->add_option("--horizon", common.horizon, "Override horizon, s");

  auto* trace = app.add_subcommand("trace", "Trace-driven pipeline");
  trace->require_subcommand(1);
  auto* tstats = trace->add_subcommand("stats", "Association-trace statistics");
  tstats->add_option("--trace", trace_path, "Association CSV");
  tstats->add_option("--encounters", encounters_path, "Encounter CSV");
  tstats->add_option("--out", common.out_dir, "Output directory");
  tstats->add_option("--window", window, "Batch cluster window, s");

  auto* tsim = trace->add_subcommand("sim", "Replay worms over a trace");
  tsim->add_option("--trace", trace_path, "Association CSV");
  tsim->add_option("--encounters", encounters_path, "Encounter CSV");
  tsim->add_option("--scenario", common.scenario_path, "Scenario file")
      ->required();
  tsim->add_option("--runs", runs, "Replay rounds");
  tsim->add_option("--seed", seed, "Base seed");
  tsim->add_option("--out", common.out_dir, "Output directory");
  tsim->add_option("--window", window, "Batch cluster window, s");
  tsim->add_option("--events", events_path, "Event-log CSV for the first run");
  tsim->add_option("--horizon", common.horizon, "Override horizon, s");

  auto* sweep = app.add_subcommand("sweep", "Parameter sweep");
  sweep->add_option("--spec", spec_path, "Sweep spec JSON")->required();
  sweep->add_option("--out", common.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // bad flags are a user error
  }

  try {
    if (app.got_subcommand(ode)) return cmd_ode(common, ode_settings);
    if (app.got_subcommand(sim))
      return cmd_sim(common, runs, seed, events_path);
    if (app.got_subcommand(trace)) {
      if (trace->got_subcommand(tstats)) {
        if (trace_path.empty() && encounters_path.empty())
          throw wormsim::Error("BadValue", "need --trace or --encounters");
        return cmd_trace_stats(trace_path, encounters_path, common.out_dir,
                               window);
      }
      if (trace_path.empty() && encounters_path.empty())
        throw wormsim::Error("BadValue", "need --trace or --encounters");
      return cmd_trace_sim(common, trace_path, encounters_path, runs, seed,
                           window, events_path);
    }
    if (app.got_subcommand(sweep)) return cmd_sweep(spec_path, common.out_dir);
  } catch (const wormsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
