#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wormsim/event_log.hpp"
#include "wormsim/metrics.hpp"
#include "wormsim/scenario.hpp"

namespace wormsim {

enum class Compartment : std::uint8_t {
  SusceptibleBoth,          // S*
  SusceptiblePredatorOnly,  // S'
  PreyInfected,             // I_A
  PredatorInfected,         // I_B
  Removed,
  NonCooperative,
  NotYetArrived,
};

struct NodeState {
  std::int32_t node_id = -1;
  std::int32_t group = 0;
  Compartment compartment = Compartment::NotYetArrived;
  bool is_on = true;
  std::optional<double> infection_start;  // set while prey-infected
};

struct RunMetrics {
  Metrics metrics;
  std::uint64_t seed = 0;
};

struct SummaryStat {
  std::optional<double> median;
  std::optional<double> q1;
  std::optional<double> q3;
  std::size_t defined = 0;   // runs contributing a value
  std::size_t censored = 0;  // runs where the metric was not reached/truncated
};

struct MetricsSummary {
  std::size_t runs = 0;
  SummaryStat ti, mi, tl, al, ta, tr;
};

// One stochastic run: pairwise-Poisson encounters resolved event by event,
// reproducible from (scenario, seed).
std::pair<EventLog, RunMetrics> simulate_run(const Scenario& scn,
                                             std::uint64_t seed);

// `runs` independent runs seeded base_seed .. base_seed + runs - 1, executed
// on worker threads and merged in seed order (workers = 0 picks the hardware
// concurrency). Deterministic regardless of worker count.
std::vector<RunMetrics> monte_carlo_runs(const Scenario& scn, std::size_t runs,
                                         std::uint64_t base_seed,
                                         std::size_t workers = 0);

MetricsSummary summarize(const std::vector<RunMetrics>& runs);

MetricsSummary monte_carlo(const Scenario& scn, std::size_t runs,
                           std::uint64_t base_seed, std::size_t workers = 0);

// Exact expected metrics from the absorbing continuous-time Markov chain over
// compartment counts. Requires a single group, p = 1, no manual rates, no
// re-susceptibility, no batches, zero delay, and at most 8 nodes.
// e_tl is nullopt when the chain can absorb with living prey (E[TL] infinite).
struct ExactMetrics {
  double e_ti = 0.0;
  std::optional<double> e_tl;
};
ExactMetrics exact_small_markov(const Scenario& scn);

// Type-7 (linear interpolation) quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

// CSV export: one row per run (run,seed + shared metric columns) and a
// summary table (metric,median,q1,q3,defined,censored,runs).
void write_run_metrics_csv(const std::vector<RunMetrics>& runs,
                           const Scenario& scn, const std::string& path);
void write_summary_csv(const MetricsSummary& summary, const std::string& path);

}  // namespace wormsim
