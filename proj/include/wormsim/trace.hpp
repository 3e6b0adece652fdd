#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wormsim/event_log.hpp"
#include "wormsim/scenario.hpp"
#include "wormsim/sim.hpp"

namespace wormsim {

struct AssociationRecord {
  std::string node_id;
  std::string ap_id;
  double start_ts = 0.0;
  double end_ts = 0.0;
};

struct ParseReport {
  std::vector<AssociationRecord> records;  // sorted by start_ts
  struct Reject {
    std::size_t line = 0;
    std::string reason;
  };
  std::vector<Reject> rejects;
};

// CSV `node_id,ap_id,start_ts,end_ts`, header optional. Malformed lines land
// in the rejects report; an empty input or > 50% malformed lines is an error.
ParseReport parse_associations(std::istream& in);
ParseReport parse_associations_file(const std::string& path);

// A timed pairwise contact; node_a < node_b lexicographically.
struct EncounterEvent {
  double t_start = 0.0;
  double t_end = 0.0;
  std::string node_a;
  std::string node_b;
};

// Two nodes sharing an access point over a strictly overlapping interval.
// Zero-length intersections are not encounters; per-pair intervals that
// themselves overlap (re-associations, simultaneous APs) are merged.
std::vector<EncounterEvent> derive_encounters(
    const std::vector<AssociationRecord>& assocs);

void write_encounters_csv(const std::vector<EncounterEvent>& encs,
                          const std::string& path);
std::vector<EncounterEvent> read_encounters_csv(const std::string& path);

struct NodeTraceStats {
  std::string node;
  std::size_t total_encounters = 0;
  std::size_t unique_peers = 0;
  double contact_rate = 0.0;  // mean per-pair rate over the node's presence
  double arrival = 0.0;       // first appearance
};

struct BatchCluster {
  double time = 0.0;  // first arrival in the cluster
  std::vector<std::string> members;
};

struct GroupEstimate {
  std::map<std::string, int> group_of;
  std::vector<std::size_t> sizes;
  // g x g symmetric rate matrix; [n][n] is the intra-group estimate.
  std::vector<std::vector<double>> rates;
  std::vector<double> batch_times;
};

struct TraceStats {
  double span_start = 0.0;
  double span_end = 0.0;
  std::vector<NodeTraceStats> per_node;  // ordered by node id
  std::vector<BatchCluster> batches;     // ordered by time
  // (fraction of nodes, fraction of encounter endpoints) at 5% steps.
  std::vector<std::pair<double, double>> top_share_curve;
  GroupEstimate groups;
};

// Per-node totals, arrival batches (single-linkage clusters of first
// appearances within `window`), and group/rate estimation.
TraceStats trace_stats(const std::vector<EncounterEvent>& encs,
                       double window = 86400.0);

// Fraction of all encounter endpoints attributable to the busiest
// ceil(fraction * N) nodes.
double top_share(const std::vector<NodeTraceStats>& per_node, double fraction);

// Group assignment by batch-arrival membership (group = batch index, capped
// at the last batch) and block rate estimation:
//   rate = encounters between members / total pairwise co-presence time.
GroupEstimate estimate_groups(const std::vector<EncounterEvent>& encs,
                              const std::vector<BatchCluster>& batches);

struct ReplayOptions {
  double batch_window = 86400.0;
  // Pin specific trace nodes as the seeds instead of the seeded draw.
  std::optional<std::string> pinned_prey;
  std::optional<std::string> pinned_predator;
};

// Replays worm interactions over a recorded encounter sequence, applying the
// same per-encounter rules as simulate_run. Cooperation/immunization are
// assigned per node by a seeded draw; groups come from batch-arrival
// clusters; the initial prey starts at t = 0 in the group the scenario seeds
// it in, the predator activates at t = delay.
std::pair<EventLog, RunMetrics> replay_sim(
    const std::vector<EncounterEvent>& encs, const Scenario& scn,
    std::uint64_t seed, const ReplayOptions& opts = {});

// Synthetic association-trace generator for fixtures and round-trip tests.
// Per-pair encounter counts are Poisson with block-normalized rates, so each
// block's mean pair rate matches `rates` exactly even under skew or sparse
// acquaintance. acquaintance_prob < 1 gives the unique-partner sparsity seen
// in campus traces: only a Bernoulli subset of pairs ever meets, with the
// block's encounter mass concentrated on those pairs (isolated nodes are
// reconnected so every node appears).
struct SyntheticTraceSpec {
  std::vector<std::size_t> group_sizes;
  std::vector<std::vector<double>> rates;  // g x g mean pair rates
  std::vector<double> group_start;         // batch arrival time per group
  double span_end = 0.0;
  double encounter_duration = 60.0;
  double skew_sigma = 0.0;       // lognormal node-weight spread; 0 = uniform
  double acquaintance_prob = 1.0;  // fraction of pairs that ever meet
  std::uint64_t seed = 1;
};

std::vector<AssociationRecord> generate_synthetic_trace(
    const SyntheticTraceSpec& spec);

void write_associations_csv(const std::vector<AssociationRecord>& records,
                            const std::string& path);

// Stats CSV bundle: per-node table, batch table, rate matrix, top-share
// curve, and total/unique encounter histograms.
void write_trace_stats_csv(const TraceStats& stats, const std::string& out_dir);

}  // namespace wormsim
