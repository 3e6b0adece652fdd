#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wormsim/csv.hpp"
#include "wormsim/rng.hpp"
#include "wormsim/trace.hpp"

using namespace wormsim;

namespace {

std::vector<AssociationRecord> random_fixture(Rng& rng, std::size_t records,
                                              std::size_t nodes,
                                              std::size_t aps) {
  std::vector<AssociationRecord> out;
  for (std::size_t k = 0; k < records; ++k) {
    AssociationRecord r;
    r.node_id = "n" + std::to_string(rng.next_below(nodes));
    r.ap_id = "ap" + std::to_string(rng.next_below(aps));
    r.start_ts = rng.next_double() * 1000.0;
    r.end_ts = r.start_ts + 0.5 + rng.next_double() * 120.0;
    out.push_back(std::move(r));
  }
  return out;
}

Scenario replay_scenario(std::size_t groups, double horizon) {
  Scenario scn;
  for (std::size_t g = 0; g < groups; ++g) scn.groups.push_back({0, 0.0});
  if (groups > 1)
    scn.inter_rates.assign(groups, std::vector<double>(groups, 0.0));
  scn.initial_prey.assign(groups, 0.0);
  scn.initial_predator.assign(groups, 0.0);
  scn.initial_prey[0] = 1.0;
  scn.initial_predator[groups - 1] = 1.0;
  scn.horizon = horizon;
  return scn;
}

}  // namespace

TEST_CASE("association parsing accepts records and rejects garbage") {
  std::istringstream in(
      "node_id,ap_id,start_ts,end_ts\n"
      "n1,ap1,0,100\n"
      "n2,ap1,50,150\n"
      "n3,ap2,200,150\n"      // start >= end
      "n4,ap2,bad,300\n");    // unparseable
  const auto report = parse_associations(in);
  CHECK(report.records.size() == 2);
  REQUIRE(report.rejects.size() == 2);
  CHECK(report.rejects[0].line == 4);
  CHECK(report.rejects[0].reason == "start_ts >= end_ts");
}

TEST_CASE("empty or hopeless input is an error") {
  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(parse_associations(empty), doctest::Contains("EmptyInput"),
                       Error);
  std::istringstream header_only("node_id,ap_id,start_ts,end_ts\n");
  CHECK_THROWS_AS(parse_associations(header_only), Error);
  std::istringstream garbage("a,b\nc,d\ne,f\nn1,ap1,0,10\n");
  CHECK_THROWS_WITH_AS(parse_associations(garbage), doctest::Contains("FormatError"),
                       Error);
}

TEST_CASE("encounters require a shared AP and a positive overlap") {
  std::vector<AssociationRecord> recs = {{"n1", "ap1", 0, 100},
                                         {"n2", "ap1", 50, 150}};
  auto encs = derive_encounters(recs);
  REQUIRE(encs.size() == 1);
  CHECK(encs[0].node_a == "n1");
  CHECK(encs[0].node_b == "n2");
  CHECK(encs[0].t_start == 50.0);
  CHECK(encs[0].t_end == 100.0);

  // Different APs never meet.
  recs = {{"n1", "ap1", 0, 100}, {"n2", "ap2", 0, 100}};
  CHECK(derive_encounters(recs).empty());

  // Zero-length touch is not an encounter.
  recs = {{"n1", "ap1", 0, 10}, {"n2", "ap1", 10, 20}};
  CHECK(derive_encounters(recs).empty());
}

TEST_CASE("same-pair overlapping intervals merge") {
  const std::vector<AssociationRecord> recs = {{"n1", "ap1", 0, 60},
                                               {"n2", "ap1", 10, 50},
                                               {"n1", "ap2", 40, 100},
                                               {"n2", "ap2", 45, 90}};
  const auto encs = derive_encounters(recs);
  REQUIRE(encs.size() == 1);  // [10,50] and [45,90] merge
  CHECK(encs[0].t_start == 10.0);
  CHECK(encs[0].t_end == 90.0);
}

TEST_CASE("derive_encounters equals the quadratic oracle on random fixtures") {
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const auto recs = random_fixture(rng, 120 + rng.next_below(100), 12, 4);
    const auto got = derive_encounters(recs);
    const auto want = oracles::brute_force_encounters(recs);
    CAPTURE(trial);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].node_a == want[k].node_a);
      CHECK(got[k].node_b == want[k].node_b);
      CHECK(got[k].t_start == want[k].t_start);
      CHECK(got[k].t_end == want[k].t_end);
    }
  }
}

TEST_CASE("trace stats for a single chatty pair") {
  std::vector<EncounterEvent> encs;
  for (int k = 0; k < 10; ++k)
    encs.push_back({k * 100.0, k * 100.0 + 10.0, "a", "b"});
  const auto stats = trace_stats(encs);
  const double span = stats.span_end - stats.span_start;
  REQUIRE(stats.per_node.size() == 2);
  CHECK(stats.per_node[0].total_encounters == 10);
  CHECK(stats.per_node[0].unique_peers == 1);
  CHECK(stats.per_node[0].contact_rate == doctest::Approx(10.0 / span));
  CHECK(stats.batches.size() == 1);  // both arrive together
  CHECK(stats.groups.sizes == std::vector<std::size_t>{2});
  CHECK(stats.groups.rates[0][0] == doctest::Approx(10.0 / span));
}

TEST_CASE("per-node totals double-count each encounter once per endpoint") {
  Rng rng(11);
  std::vector<EncounterEvent> encs;
  for (int k = 0; k < 200; ++k) {
    const auto a = rng.next_below(12);
    auto b = rng.next_below(12);
    if (a == b) continue;
    const std::string na = "n" + std::to_string(std::min(a, b));
    const std::string nb = "n" + std::to_string(std::max(a, b));
    const double t = rng.next_double() * 5000.0;
    encs.push_back({t, t + 10.0, na, nb});
  }
  std::sort(encs.begin(), encs.end(),
            [](const EncounterEvent& x, const EncounterEvent& y) {
              return x.t_start < y.t_start;
            });
  const auto stats = trace_stats(encs);
  std::size_t total = 0;
  for (const auto& s : stats.per_node) total += s.total_encounters;
  CHECK(total == 2 * encs.size());
  CHECK(top_share(stats.per_node, 0.2) >= 0.2);
  CHECK(top_share(stats.per_node, 0.2) <= 1.0);
  CHECK(top_share(stats.per_node, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("batch clustering splits on gaps wider than the window") {
  std::vector<EncounterEvent> encs = {
      {0.0, 10.0, "a", "b"},      {50.0, 60.0, "b", "c"},
      {5000.0, 5010.0, "d", "e"}, {5040.0, 5050.0, "e", "f"}};
  const auto stats = trace_stats(encs, /*window=*/1000.0);
  REQUIRE(stats.batches.size() == 2);
  CHECK(stats.batches[0].members.size() == 3);
  CHECK(stats.batches[1].members.size() == 3);
  CHECK(stats.groups.group_of.at("a") == 0);
  CHECK(stats.groups.group_of.at("f") == 1);
}

TEST_CASE("two-group synthetic trace recovers sizes and rates") {
  SyntheticTraceSpec spec;
  spec.group_sizes = {45, 5};
  spec.rates = {{4e-5, 5e-6}, {5e-6, 3e-5}};
  spec.group_start = {0.0, 40000.0};
  spec.span_end = 400000.0;
  spec.seed = 9;
  const auto recs = generate_synthetic_trace(spec);
  const auto encs = derive_encounters(recs);
  const auto stats = trace_stats(encs, /*window=*/20000.0);
  REQUIRE(stats.groups.sizes.size() == 2);
  CHECK(stats.groups.sizes[0] == 45);
  CHECK(stats.groups.sizes[1] == 5);
  CHECK(stats.groups.rates[0][0] == doctest::Approx(4e-5).epsilon(0.10));
  CHECK(stats.groups.rates[1][1] == doctest::Approx(3e-5).epsilon(0.15));
  CHECK(stats.groups.rates[0][1] == doctest::Approx(5e-6).epsilon(0.15));
}

TEST_CASE("single batch degenerates to one group") {
  std::vector<EncounterEvent> encs = {{0.0, 10.0, "a", "b"},
                                      {20.0, 30.0, "b", "c"}};
  const auto stats = trace_stats(encs);
  CHECK(stats.groups.sizes == std::vector<std::size_t>{3});
  CHECK(stats.groups.rates.size() == 1);
}

TEST_CASE("compressing timestamps scales estimated rates exactly") {
  Rng rng(5);
  std::vector<EncounterEvent> encs;
  for (int k = 0; k < 300; ++k) {
    const auto a = rng.next_below(10);
    const auto b = rng.next_below(10);
    if (a == b) continue;
    const std::string na = "n" + std::to_string(std::min(a, b));
    const std::string nb = "n" + std::to_string(std::max(a, b));
    const double t = rng.next_double() * 10000.0;
    encs.push_back({t, t + 5.0, na, nb});
  }
  std::sort(encs.begin(), encs.end(),
            [](const EncounterEvent& x, const EncounterEvent& y) {
              return x.t_start < y.t_start;
            });
  const double k = 4.0;
  auto compressed = encs;
  for (auto& e : compressed) {
    e.t_start /= k;
    e.t_end /= k;
  }
  const auto s1 = trace_stats(encs);
  const auto s2 = trace_stats(compressed);
  CHECK(s2.groups.rates[0][0] ==
        doctest::Approx(s1.groups.rates[0][0] * k).epsilon(1e-12));
}

TEST_CASE("replaying an empty encounter list is trivial") {
  const auto [log, rm] = replay_sim({}, replay_scenario(1, 1000.0), 1);
  CHECK(log.empty());
  CHECK(rm.metrics.ti == 0.0);
  CHECK(rm.metrics.tr == 0.0);
  CHECK_FALSE(rm.metrics.ta.has_value());
}

TEST_CASE("replay is deterministic and seed-sensitive") {
  SyntheticTraceSpec spec;
  spec.group_sizes = {30};
  spec.rates = {{1e-4}};
  spec.group_start = {0.0};
  spec.span_end = 40000.0;
  spec.seed = 3;
  const auto encs = derive_encounters(generate_synthetic_trace(spec));
  Scenario scn = replay_scenario(1, 40000.0);
  scn.cooperation = 0.8;
  scn.on_prob = 0.7;

  const auto r1 = replay_sim(encs, scn, 42);
  const auto r2 = replay_sim(encs, scn, 42);
  REQUIRE(r1.first.size() == r2.first.size());
  for (std::size_t i = 0; i < r1.first.size(); ++i) {
    CHECK(r1.first[i].t == r2.first[i].t);
    CHECK(r1.first[i].node_a == r2.first[i].node_a);
  }
}

TEST_CASE("pinned seed nodes must exist in the trace") {
  SyntheticTraceSpec spec;
  spec.group_sizes = {10};
  spec.rates = {{1e-3}};
  spec.group_start = {0.0};
  spec.span_end = 5000.0;
  const auto encs = derive_encounters(generate_synthetic_trace(spec));
  ReplayOptions opts;
  opts.pinned_prey = "ghost";
  CHECK_THROWS_WITH_AS(replay_sim(encs, replay_scenario(1, 5000.0), 1, opts),
                       doctest::Contains("UnknownNode"), Error);
}

TEST_CASE("replay over a Poisson trace matches the direct simulator") {
  // Trace generated by the same law the simulator samples from; TI
  // distributions must be statistically indistinguishable.
  const std::size_t n = 40;
  const double beta = 1e-3, span = 4000.0;
  const std::size_t rounds = 150;

  Scenario sim_scn;
  sim_scn.groups = {{static_cast<std::int64_t>(n), beta}};
  sim_scn.initial_prey = {1};
  sim_scn.initial_predator = {1};
  sim_scn.horizon = span;

  std::vector<double> ti_sim, ti_replay;
  for (std::size_t r = 0; r < rounds; ++r)
    ti_sim.push_back(simulate_run(sim_scn, 10000 + r).second.metrics.ti);

  Scenario rep_scn = replay_scenario(1, span);
  for (std::size_t r = 0; r < rounds; ++r) {
    SyntheticTraceSpec spec;
    spec.group_sizes = {n};
    spec.rates = {{beta}};
    spec.group_start = {0.0};
    spec.span_end = span;
    spec.encounter_duration = 1.0;
    spec.seed = 777 + r;
    const auto encs = derive_encounters(generate_synthetic_trace(spec));
    ti_replay.push_back(replay_sim(encs, rep_scn, 5000 + r).second.metrics.ti);
  }

  const double d = oracles::ks_statistic(ti_sim, ti_replay);
  CHECK(d < oracles::ks_critical(0.01, rounds, rounds));
}

TEST_CASE("encounter CSV round-trips") {
  std::vector<EncounterEvent> encs = {{1.5, 20.0, "a", "b"},
                                      {30.0, 42.0, "b", "c"}};
  const std::string path = "/tmp/wormsim_test_encs.csv";
  write_encounters_csv(encs, path);
  const auto back = read_encounters_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].t_start == 1.5);
  CHECK(back[1].node_b == "c");
}

TEST_CASE("trace stats CSV bundle lands on disk") {
  SyntheticTraceSpec spec;
  spec.group_sizes = {20};
  spec.rates = {{2e-4}};
  spec.group_start = {0.0};
  spec.span_end = 20000.0;
  const auto encs = derive_encounters(generate_synthetic_trace(spec));
  const auto stats = trace_stats(encs);
  write_trace_stats_csv(stats, "/tmp");
  const auto nodes = csv::read_table("/tmp/trace_nodes.csv");
  CHECK(nodes.rows.size() == stats.per_node.size());
  const auto hist = csv::read_table("/tmp/trace_histogram.csv");
  CHECK(hist.rows.size() == 40);  // 20 bins x {total, unique}
}
