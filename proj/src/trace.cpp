#include "wormsim/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "wormsim/csv.hpp"
#include "wormsim/metrics.hpp"
#include "wormsim/rng.hpp"

namespace wormsim {

namespace {

bool parse_ts(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

}  // namespace

ParseReport parse_associations(std::istream& in) {
  ParseReport report;
  std::string line;
  std::size_t line_no = 0;
  std::size_t data_lines = 0;
  bool first_content = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = csv::split_line(line);
    double s, e;
    if (first_content) {
      first_content = false;
      // Header row: timestamps fail to parse.
      if (fields.size() == 4 && (!parse_ts(fields[2], s) || !parse_ts(fields[3], e)))
        continue;
    }
    ++data_lines;
    if (fields.size() != 4) {
      report.rejects.push_back({line_no, "expected 4 fields"});
      continue;
    }
    if (fields[0].empty() || fields[1].empty()) {
      report.rejects.push_back({line_no, "empty node or ap id"});
      continue;
    }
    if (!parse_ts(fields[2], s) || !parse_ts(fields[3], e)) {
      report.rejects.push_back({line_no, "unparseable timestamp"});
      continue;
    }
    if (s >= e) {
      report.rejects.push_back({line_no, "start_ts >= end_ts"});
      continue;
    }
    report.records.push_back({fields[0], fields[1], s, e});
  }

  if (data_lines == 0) throw Error("EmptyInput", "no association records");
  if (report.rejects.size() * 2 > data_lines)
    throw Error("FormatError",
                std::to_string(report.rejects.size()) + " of " +
                    std::to_string(data_lines) + " lines malformed");
  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const AssociationRecord& a, const AssociationRecord& b) {
                     return a.start_ts < b.start_ts;
                   });
  return report;
}

ParseReport parse_associations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("FileNotFound", "cannot open trace file: " + path);
  return parse_associations(in);
}

std::vector<EncounterEvent> derive_encounters(
    const std::vector<AssociationRecord>& assocs) {
  // Bucket by AP, sweep each bucket in start order with an active list.
  std::unordered_map<std::string, std::vector<const AssociationRecord*>> by_ap;
  for (const auto& r : assocs) by_ap[r.ap_id].push_back(&r);

  std::map<std::pair<std::string, std::string>,
           std::vector<std::pair<double, double>>>
      raw;
  for (auto& [ap, recs] : by_ap) {
    std::sort(recs.begin(), recs.end(),
              [](const AssociationRecord* a, const AssociationRecord* b) {
                return a->start_ts < b->start_ts;
              });
    std::vector<const AssociationRecord*> active;
    for (const auto* r : recs) {
      std::erase_if(active, [&](const AssociationRecord* a) {
        return a->end_ts <= r->start_ts;
      });
      for (const auto* a : active) {
        if (a->node_id == r->node_id) continue;
        const double lo = std::max(a->start_ts, r->start_ts);
        const double hi = std::min(a->end_ts, r->end_ts);
        if (hi <= lo) continue;  // zero-length contact is not an encounter
        auto key = std::minmax(a->node_id, r->node_id);
        raw[{key.first, key.second}].push_back({lo, hi});
      }
      active.push_back(r);
    }
  }

  std::vector<EncounterEvent> out;
  for (auto& [pair, intervals] : raw) {
    std::sort(intervals.begin(), intervals.end());
    // Merge strictly overlapping intervals for the pair.
    double lo = intervals.front().first, hi = intervals.front().second;
    for (std::size_t k = 1; k < intervals.size(); ++k) {
      if (intervals[k].first < hi) {
        hi = std::max(hi, intervals[k].second);
      } else {
        out.push_back({lo, hi, pair.first, pair.second});
        lo = intervals[k].first;
        hi = intervals[k].second;
      }
    }
    out.push_back({lo, hi, pair.first, pair.second});
  }
  std::sort(out.begin(), out.end(),
            [](const EncounterEvent& a, const EncounterEvent& b) {
              return std::tie(a.t_start, a.t_end, a.node_a, a.node_b) <
                     std::tie(b.t_start, b.t_end, b.node_a, b.node_b);
            });
  return out;
}

void write_encounters_csv(const std::vector<EncounterEvent>& encs,
                          const std::string& path) {
  csv::Writer w(path);
  w.row({"t_start", "t_end", "node_a", "node_b"});
  for (const auto& e : encs)
    w.row({csv::format_double(e.t_start), csv::format_double(e.t_end),
           e.node_a, e.node_b});
}

std::vector<EncounterEvent> read_encounters_csv(const std::string& path) {
  const auto table = csv::read_table(path);
  std::vector<EncounterEvent> out;
  for (const auto& r : table.rows) {
    if (r.size() != 4)
      throw Error("ParseError", "encounter row needs 4 fields");
    EncounterEvent e;
    e.t_start = csv::parse_double(r[0]);
    e.t_end = csv::parse_double(r[1]);
    e.node_a = r[2];
    e.node_b = r[3];
    if (e.node_b < e.node_a) std::swap(e.node_a, e.node_b);
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(),
            [](const EncounterEvent& a, const EncounterEvent& b) {
              return a.t_start < b.t_start;
            });
  return out;
}

TraceStats trace_stats(const std::vector<EncounterEvent>& encs, double window) {
  if (encs.empty()) throw Error("EmptyInput", "no encounters to analyse");

  TraceStats stats;
  stats.span_start = std::numeric_limits<double>::infinity();
  stats.span_end = -std::numeric_limits<double>::infinity();

  std::map<std::string, NodeTraceStats> per_node;
  std::map<std::string, std::set<std::string>> peers;
  for (const auto& e : encs) {
    stats.span_start = std::min(stats.span_start, e.t_start);
    stats.span_end = std::max(stats.span_end, e.t_end);
    for (const auto* node : {&e.node_a, &e.node_b}) {
      auto& s = per_node[*node];
      if (s.node.empty()) {
        s.node = *node;
        s.arrival = e.t_start;
      }
      s.total_encounters += 1;
      s.arrival = std::min(s.arrival, e.t_start);
    }
    peers[e.node_a].insert(e.node_b);
    peers[e.node_b].insert(e.node_a);
  }

  const std::size_t n = per_node.size();
  for (auto& [name, s] : per_node) {
    s.unique_peers = peers[name].size();
    const double presence = stats.span_end - s.arrival;
    if (n > 1 && presence > 0.0)
      s.contact_rate = static_cast<double>(s.total_encounters) /
                       (static_cast<double>(n - 1) * presence);
    stats.per_node.push_back(s);
  }

  // Batch clusters: single-linkage over first appearances.
  std::vector<std::pair<double, std::string>> arrivals;
  arrivals.reserve(n);
  for (const auto& s : stats.per_node) arrivals.push_back({s.arrival, s.node});
  std::sort(arrivals.begin(), arrivals.end());
  double last = 0.0;
  for (const auto& [t, node] : arrivals) {
    if (stats.batches.empty() || t - last > window)
      stats.batches.push_back({t, {}});
    stats.batches.back().members.push_back(node);
    last = t;
  }

  for (int pct = 5; pct <= 100; pct += 5)
    stats.top_share_curve.push_back(
        {pct / 100.0, top_share(stats.per_node, pct / 100.0)});

  stats.groups = estimate_groups(encs, stats.batches);
  return stats;
}

double top_share(const std::vector<NodeTraceStats>& per_node, double fraction) {
  if (per_node.empty()) throw Error("EmptyInput", "no per-node stats");
  std::vector<std::size_t> totals;
  totals.reserve(per_node.size());
  std::size_t sum = 0;
  for (const auto& s : per_node) {
    totals.push_back(s.total_encounters);
    sum += s.total_encounters;
  }
  std::sort(totals.rbegin(), totals.rend());
  const std::size_t k = std::min(
      per_node.size(),
      static_cast<std::size_t>(
          std::ceil(fraction * static_cast<double>(per_node.size()))));
  std::size_t top = 0;
  for (std::size_t i = 0; i < k; ++i) top += totals[i];
  return sum == 0 ? 0.0 : static_cast<double>(top) / static_cast<double>(sum);
}

GroupEstimate estimate_groups(const std::vector<EncounterEvent>& encs,
                              const std::vector<BatchCluster>& batches) {
  GroupEstimate est;
  if (batches.empty()) throw Error("EmptyInput", "no batch clusters");
  const std::size_t g = batches.size();
  est.sizes.assign(g, 0);
  for (std::size_t k = 0; k < g; ++k) {
    est.batch_times.push_back(batches[k].time);
    for (const auto& node : batches[k].members) {
      est.group_of[node] = static_cast<int>(k);
      est.sizes[k] += 1;
    }
  }

  double span_end = -std::numeric_limits<double>::infinity();
  for (const auto& e : encs) span_end = std::max(span_end, e.t_end);

  // Arrival per node for pairwise co-presence.
  std::map<std::string, double> arrival;
  for (const auto& e : encs) {
    for (const auto* node : {&e.node_a, &e.node_b}) {
      auto it = arrival.find(*node);
      if (it == arrival.end())
        arrival[*node] = e.t_start;
      else
        it->second = std::min(it->second, e.t_start);
    }
  }

  std::vector<std::vector<double>> counts(g, std::vector<double>(g, 0.0));
  std::vector<std::vector<double>> pair_time(g, std::vector<double>(g, 0.0));
  for (const auto& e : encs) {
    const int ga = est.group_of.at(e.node_a);
    const int gb = est.group_of.at(e.node_b);
    counts[ga][gb] += 1.0;
    if (ga != gb) counts[gb][ga] += 1.0;
  }
  // Co-presence time summed over unordered member pairs.
  std::vector<std::pair<int, double>> nodes;  // (group, arrival)
  nodes.reserve(arrival.size());
  for (const auto& [name, t] : arrival) nodes.push_back({est.group_of.at(name), t});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const double overlap =
          span_end - std::max(nodes[i].second, nodes[j].second);
      if (overlap <= 0.0) continue;
      pair_time[nodes[i].first][nodes[j].first] += overlap;
      if (nodes[i].first != nodes[j].first)
        pair_time[nodes[j].first][nodes[i].first] += overlap;
    }
  }

  est.rates.assign(g, std::vector<double>(g, 0.0));
  for (std::size_t a = 0; a < g; ++a)
    for (std::size_t b = 0; b < g; ++b)
      if (pair_time[a][b] > 0.0) est.rates[a][b] = counts[a][b] / pair_time[a][b];
  return est;
}

// ---------------------------------------------------------------------------
// Replay

namespace {

struct ReplayNode {
  std::string name;
  int group = 0;
  double arrival = 0.0;
  bool coop = true;
  bool immune = false;
  Compartment comp = Compartment::SusceptibleBoth;
  std::uint32_t version = 0;  // invalidates scheduled manual events
};

enum class ManualKind : std::uint8_t { Removal, Vaccination, Resusceptible };

struct ManualEvent {
  double t;
  std::int32_t node;
  std::uint32_t version;
  ManualKind kind;
  bool operator>(const ManualEvent& o) const { return t > o.t; }
};

struct TimelineItem {
  double t;
  int prio;  // 0 arrive, 1 prey seed, 2 inject, 3 encounter
  std::int32_t idx;
  bool operator<(const TimelineItem& o) const {
    return std::tie(t, prio, idx) < std::tie(o.t, o.prio, o.idx);
  }
};

}  // namespace

std::pair<EventLog, RunMetrics> replay_sim(
    const std::vector<EncounterEvent>& encs, const Scenario& scn,
    std::uint64_t seed, const ReplayOptions& opts) {
  // The trace supplies the population, so the scenario's node counts are not
  // required to cover the seeds; parameter-range violations still reject.
  {
    auto violations = validate_scenario(scn);
    std::erase_if(violations, [](const Violation& v) {
      return v.code == "NegativeCompartment";
    });
    if (!violations.empty())
      throw Error("InvalidScenario",
                  violations.front().code + " (" + violations.front().message +
                      ")");
  }
  const auto flags = build_interaction_flags(scn.interaction).first;
  const double alpha = effective_alpha(scn);
  const double gamma = scn.manual_removal_rate;
  const double gamma_s = scn.manual_vaccination_rate;
  const double horizon = scn.horizon;
  Rng rng(splitmix64(seed ^ 0x1d5a86f2c03bd4e1ull));

  EventLog log;
  RunMetrics rm;
  rm.seed = seed;

  if (encs.empty()) {
    rm.metrics = metrics_from_log(log, scn, {0.0, horizon});
    return {std::move(log), rm};
  }

  // Node table ordered by name; ids are the indices.
  std::map<std::string, std::int32_t> id_of;
  for (const auto& e : encs) {
    id_of.emplace(e.node_a, 0);
    id_of.emplace(e.node_b, 0);
  }
  std::vector<ReplayNode> nodes;
  nodes.reserve(id_of.size());
  for (auto& [name, id] : id_of) {
    id = static_cast<std::int32_t>(nodes.size());
    ReplayNode n;
    n.name = name;
    n.arrival = std::numeric_limits<double>::infinity();
    nodes.push_back(std::move(n));
  }
  for (const auto& e : encs) {
    auto& a = nodes[id_of[e.node_a]];
    auto& b = nodes[id_of[e.node_b]];
    a.arrival = std::min(a.arrival, e.t_start);
    b.arrival = std::min(b.arrival, e.t_start);
  }

  // Groups from batch-arrival clusters, capped at the scenario's group count.
  std::vector<std::pair<double, std::string>> arrivals;
  for (const auto& n : nodes) arrivals.push_back({n.arrival, n.name});
  std::sort(arrivals.begin(), arrivals.end());
  std::vector<BatchCluster> batches;
  double last_arrival = 0.0;
  for (const auto& [t, name] : arrivals) {
    if (batches.empty() || t - last_arrival > opts.batch_window)
      batches.push_back({t, {}});
    batches.back().members.push_back(name);
    last_arrival = t;
  }
  const int g_max = static_cast<int>(scn.group_count()) - 1;
  for (std::size_t k = 0; k < batches.size(); ++k)
    for (const auto& name : batches[k].members)
      nodes[id_of[name]].group = std::min(static_cast<int>(k), g_max);

  // Node characteristics by seeded threshold draws; nested across c/i sweeps.
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    nodes[v].coop = hash_uniform(seed, 0xC00Full, v) < scn.cooperation;
    nodes[v].immune =
        nodes[v].coop && hash_uniform(seed, 0x1111ull, v) < scn.immunization;
    nodes[v].comp = nodes[v].immune ? Compartment::SusceptiblePredatorOnly
                                    : Compartment::SusceptibleBoth;
  }

  // Seed hosts: lowest-priority-hash eligible nodes, so sweeps over c or i
  // keep the same hosts wherever possible.
  auto pick_hosts = [&](std::int64_t count, int group, bool prefer_immune,
                        const std::optional<std::string>& pinned,
                        const std::vector<std::int32_t>& exclude) {
    std::vector<std::int32_t> hosts;
    if (pinned) {
      auto it = id_of.find(*pinned);
      if (it == id_of.end())
        throw Error("UnknownNode",
                    "pinned node '" + *pinned + "' absent from the trace");
      hosts.push_back(it->second);
    }
    std::vector<std::pair<double, std::int32_t>> ranked;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      const auto id = static_cast<std::int32_t>(v);
      if (!nodes[v].coop || nodes[v].group != group) continue;
      if (std::find(exclude.begin(), exclude.end(), id) != exclude.end())
        continue;
      if (std::find(hosts.begin(), hosts.end(), id) != hosts.end()) continue;
      if (!prefer_immune && nodes[v].immune) continue;
      double key = hash_uniform(seed, 0x5EEDull, v);
      if (prefer_immune && !nodes[v].immune) key += 1.0;  // immune first
      ranked.push_back({key, id});
    }
    std::sort(ranked.begin(), ranked.end());
    for (const auto& [key, id] : ranked) {
      if (static_cast<std::int64_t>(hosts.size()) >= count) break;
      hosts.push_back(id);
    }
    if (static_cast<std::int64_t>(hosts.size()) < count)
      throw Error("NoEligibleHost",
                  "group " + std::to_string(group) +
                      " lacks eligible hosts for seeding");
    return hosts;
  };

  auto first_seed_group = [&](const std::vector<double>& counts) {
    for (std::size_t n = 0; n < counts.size(); ++n)
      if (counts[n] > 0.0) return static_cast<int>(n);
    return -1;
  };

  std::vector<std::int32_t> prey_hosts, pred_hosts;
  const int prey_group = first_seed_group(scn.initial_prey);
  if (prey_group >= 0)
    prey_hosts = pick_hosts(std::llround(scn.total_initial_prey()), prey_group,
                            /*prefer_immune=*/false, opts.pinned_prey, {});
  const int pred_group = first_seed_group(scn.initial_predator);
  if (pred_group >= 0)
    pred_hosts = pick_hosts(std::llround(scn.total_initial_predator()),
                            pred_group, /*prefer_immune=*/true,
                            opts.pinned_predator, prey_hosts);

  // Manual-rate clocks (zero rates schedule nothing).
  std::priority_queue<ManualEvent, std::vector<ManualEvent>,
                      std::greater<ManualEvent>>
      clocks;
  auto schedule = [&](std::int32_t id, double now) {
    const auto& n = nodes[id];
    switch (n.comp) {
      case Compartment::SusceptibleBoth:
      case Compartment::SusceptiblePredatorOnly:
        if (gamma_s > 0.0)
          clocks.push({now + rng.exponential(gamma_s), id, n.version,
                       ManualKind::Vaccination});
        break;
      case Compartment::PreyInfected:
      case Compartment::PredatorInfected:
        if (gamma > 0.0)
          clocks.push({now + rng.exponential(gamma), id, n.version,
                       ManualKind::Removal});
        if (alpha > 0.0)
          clocks.push({now + rng.exponential(alpha), id, n.version,
                       ManualKind::Resusceptible});
        break;
      default:
        break;
    }
  };

  auto transition = [&](std::int32_t id, Compartment to, EventKind kind,
                        std::int32_t peer, double t) {
    auto& n = nodes[id];
    n.comp = to;
    ++n.version;
    log.push_back({t, kind, id, peer});
    schedule(id, t);
  };

  auto drain_clocks = [&](double until) {
    while (!clocks.empty() && clocks.top().t <= until) {
      const ManualEvent ev = clocks.top();
      clocks.pop();
      if (ev.t >= horizon) continue;
      auto& n = nodes[ev.node];
      if (n.version != ev.version) continue;  // state changed since scheduled
      switch (ev.kind) {
        case ManualKind::Vaccination:
          transition(ev.node, Compartment::Removed, EventKind::Vaccinate, -1,
                     ev.t);
          break;
        case ManualKind::Removal:
          transition(ev.node, Compartment::Removed, EventKind::Terminate, -1,
                     ev.t);
          break;
        case ManualKind::Resusceptible:
          transition(ev.node,
                     n.immune ? Compartment::SusceptiblePredatorOnly
                              : Compartment::SusceptibleBoth,
                     EventKind::Arrive, ev.node, ev.t);
          break;
      }
    }
  };

  auto is_on = [&](std::int32_t id, double t) {
    if (scn.on_prob >= 1.0) return true;
    const auto interval =
        static_cast<std::uint64_t>(std::floor(t / scn.on_interval));
    return hash_uniform(seed ^ 0x0B0Full, static_cast<std::uint64_t>(id),
                        interval) < scn.on_prob;
  };

  // Timeline: coop arrivals, prey seeds at t = 0, injection at t = delay,
  // then the encounters.
  std::vector<TimelineItem> timeline;
  timeline.reserve(encs.size() + nodes.size() + 8);
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    if (!nodes[v].coop) continue;
    if (std::find(prey_hosts.begin(), prey_hosts.end(),
                  static_cast<std::int32_t>(v)) != prey_hosts.end())
      continue;  // logged via PreyInfect instead
    timeline.push_back({nodes[v].arrival, 0, static_cast<std::int32_t>(v)});
  }
  for (const auto id : prey_hosts) timeline.push_back({0.0, 1, id});
  for (const auto id : pred_hosts) timeline.push_back({scn.delay, 2, id});
  for (std::size_t k = 0; k < encs.size(); ++k)
    timeline.push_back({encs[k].t_start, 3, static_cast<std::int32_t>(k)});
  std::sort(timeline.begin(), timeline.end());

  for (const auto& item : timeline) {
    if (item.t >= horizon) break;
    drain_clocks(item.t);
    switch (item.prio) {
      case 0:
        log.push_back({item.t, EventKind::Arrive, item.idx, -1});
        schedule(item.idx, item.t);
        break;
      case 1:
        transition(item.idx, Compartment::PreyInfected, EventKind::PreyInfect,
                   -1, item.t);
        break;
      case 2:
        transition(item.idx, Compartment::PredatorInfected, EventKind::Inject,
                   -1, item.t);
        break;
      case 3: {
        const auto& e = encs[item.idx];
        const std::int32_t a = id_of[e.node_a];
        const std::int32_t b = id_of[e.node_b];
        if (!nodes[a].coop || !nodes[b].coop) break;
        const Compartment ca = nodes[a].comp;
        const Compartment cb = nodes[b].comp;
        auto directed = [&](std::int32_t src, Compartment cs, std::int32_t dst,
                            Compartment cd) {
          const auto dg = static_cast<std::size_t>(nodes[dst].group);
          if (cs == Compartment::PreyInfected &&
              cd == Compartment::SusceptibleBoth && flags.s_to_a(dg) &&
              is_on(dst, item.t)) {
            transition(dst, Compartment::PreyInfected, EventKind::PreyInfect,
                       src, item.t);
          } else if (cs == Compartment::PredatorInfected && is_on(dst, item.t)) {
            if (cd == Compartment::SusceptibleBoth && flags.s_to_b(dg))
              transition(dst, Compartment::PredatorInfected,
                         EventKind::Vaccinate, src, item.t);
            else if (cd == Compartment::SusceptiblePredatorOnly &&
                     flags.sp_to_b(dg))
              transition(dst, Compartment::PredatorInfected,
                         EventKind::Vaccinate, src, item.t);
            else if (cd == Compartment::PreyInfected && flags.a_to_b(dg))
              transition(dst, Compartment::PredatorInfected,
                         EventKind::Terminate, src, item.t);
          }
        };
        directed(a, ca, b, cb);
        directed(b, cb, a, ca);
        break;
      }
    }
  }
  drain_clocks(horizon);

  LogMetricsOptions mopts;
  mopts.last_batch_time = batches.empty() ? 0.0 : batches.back().time;
  mopts.horizon = horizon;
  rm.metrics = metrics_from_log(log, scn, mopts);
  return {std::move(log), rm};
}

// ---------------------------------------------------------------------------
// Synthetic trace generation

namespace {

double sample_normal(Rng& rng) {
  const double u1 = rng.next_double_open();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

std::int64_t sample_poisson(Rng& rng, double lambda) {
  std::int64_t k = 0;
  // Additivity keeps Knuth's product method in exp() range.
  while (lambda > 256.0) {
    k += sample_poisson(rng, 256.0);
    lambda -= 256.0;
  }
  const double limit = std::exp(-lambda);
  double prod = rng.next_double_open();
  while (prod > limit) {
    ++k;
    prod *= rng.next_double_open();
  }
  return k;
}

}  // namespace

std::vector<AssociationRecord> generate_synthetic_trace(
    const SyntheticTraceSpec& spec) {
  const std::size_t g = spec.group_sizes.size();
  if (g == 0 || spec.rates.size() != g)
    throw Error("BadValue", "group sizes and rate matrix must agree");
  if (spec.group_start.size() != g)
    throw Error("BadValue", "need one start time per group");

  Rng rng(splitmix64(spec.seed ^ 0x7ace5ca1eull));

  struct GenNode {
    std::string name;
    int group;
    double weight;
    double start;
  };
  std::vector<GenNode> nodes;
  for (std::size_t gi = 0; gi < g; ++gi) {
    for (std::size_t k = 0; k < spec.group_sizes[gi]; ++k) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "g%zu_n%04zu", gi, k);
      double w = 1.0;
      if (spec.skew_sigma > 0.0) {
        w = std::exp(spec.skew_sigma * sample_normal(rng) -
                     0.5 * spec.skew_sigma * spec.skew_sigma);
        w = std::clamp(w, 0.05, 20.0);
      }
      nodes.push_back({buf, static_cast<int>(gi), w, spec.group_start[gi]});
    }
  }

  // Acquaintance graph: which pairs ever meet. Nodes left isolated by the
  // Bernoulli draw get one fallback partner so every node appears.
  const std::size_t total = nodes.size();
  const double q = spec.acquaintance_prob;
  std::vector<std::vector<bool>> meets(total, std::vector<bool>(total, false));
  std::vector<std::size_t> degree(total, 0);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      // Weight-proportional acquaintance: heavy nodes meet many partners,
      // light nodes mostly attach to hubs.
      const double p_edge =
          q >= 1.0 ? 1.0 : std::min(1.0, q * nodes[i].weight * nodes[j].weight);
      if (p_edge >= 1.0 || rng.bernoulli(p_edge)) {
        meets[i][j] = true;
        ++degree[i];
        ++degree[j];
      }
    }
  }
  if (q < 1.0) {
    // Cohort backbone: neighbours within a group always know each other, so
    // every node has a same-start acquaintance and every block has edges.
    std::size_t base = 0;
    for (std::size_t gi = 0; gi < g; ++gi) {
      const std::size_t sz = spec.group_sizes[gi];
      for (std::size_t k = 0; k + 1 < sz; ++k) {
        const std::size_t i = base + k, j = base + k + 1;
        if (!meets[i][j]) {
          meets[i][j] = true;
          ++degree[i];
          ++degree[j];
        }
      }
      if (sz > 2) {
        const std::size_t i = base, j = base + sz - 1;
        if (!meets[i][j]) {
          meets[i][j] = true;
          ++degree[i];
          ++degree[j];
        }
      }
      base += sz;
    }
  }

  // Normalizers per block over the realized acquaintance set, so the mean
  // rate over all member pairs is exactly the requested block rate.
  std::vector<std::vector<double>> weight_sum(g, std::vector<double>(g, 0.0));
  std::vector<std::vector<double>> pair_count(g, std::vector<double>(g, 0.0));
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      const int a = nodes[i].group, b = nodes[j].group;
      pair_count[std::min(a, b)][std::max(a, b)] += 1.0;
      if (meets[i][j])
        weight_sum[std::min(a, b)][std::max(a, b)] +=
            nodes[i].weight * nodes[j].weight;
    }
  }

  std::vector<AssociationRecord> records;
  std::size_t ap_counter = 0;
  std::vector<std::size_t> emitted(total, 0);
  auto emit = [&](std::size_t i, std::size_t j, double t) {
    char ap[32];
    std::snprintf(ap, sizeof(ap), "ap%08zu", ap_counter++);
    records.push_back({nodes[i].name, ap, t, t + spec.encounter_duration});
    records.push_back({nodes[j].name, ap, t, t + spec.encounter_duration});
    ++emitted[i];
    ++emitted[j];
  };
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = i + 1; j < total; ++j) {
      if (!meets[i][j]) continue;
      const int a = std::min(nodes[i].group, nodes[j].group);
      const int b = std::max(nodes[i].group, nodes[j].group);
      const double window_start = std::max(nodes[i].start, nodes[j].start);
      const double window = spec.span_end - window_start;
      if (window <= 0.0 || weight_sum[a][b] <= 0.0) continue;
      const double lambda = spec.rates[a][b] * window * pair_count[a][b] *
                            nodes[i].weight * nodes[j].weight /
                            weight_sum[a][b];
      const std::int64_t count = sample_poisson(rng, lambda);
      for (std::int64_t k = 0; k < count; ++k)
        emit(i, j, window_start + rng.next_double() * window);
    }
  }
  // Arrival anchor: every node shows up within half a day of its batch
  // joining the network (first day on campus), which both guarantees the
  // node appears and keeps first appearances clustered at the batch starts.
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t best = total;
    for (std::size_t j = 0; j < total; ++j) {
      if (j == i || !meets[std::min(i, j)][std::max(i, j)]) continue;
      if (nodes[j].start > nodes[i].start) continue;  // partner already present
      if (best == total || nodes[j].weight > nodes[best].weight) best = j;
    }
    if (best == total) {
      for (std::size_t j = 0; j < total; ++j) {
        if (j == i || !meets[std::min(i, j)][std::max(i, j)]) continue;
        if (best == total || nodes[j].weight > nodes[best].weight) best = j;
      }
    }
    if (best == total) continue;  // single-node trace
    const double anchor_start = std::max(nodes[i].start, nodes[best].start);
    if (anchor_start >= spec.span_end) continue;
    const double burst =
        std::min(43200.0, (spec.span_end - anchor_start) * 0.5);
    emit(std::min(i, best), std::max(i, best),
         anchor_start + rng.next_double() * burst);
  }
  std::sort(records.begin(), records.end(),
            [](const AssociationRecord& x, const AssociationRecord& y) {
              return std::tie(x.start_ts, x.node_id) <
                     std::tie(y.start_ts, y.node_id);
            });
  return records;
}

void write_associations_csv(const std::vector<AssociationRecord>& records,
                            const std::string& path) {
  csv::Writer w(path);
  w.row({"node_id", "ap_id", "start_ts", "end_ts"});
  for (const auto& r : records)
    w.row({r.node_id, r.ap_id, csv::format_double(r.start_ts),
           csv::format_double(r.end_ts)});
}

void write_trace_stats_csv(const TraceStats& stats,
                           const std::string& out_dir) {
  {
    csv::Writer w(out_dir + "/trace_nodes.csv");
    w.row({"node", "group", "total_encounters", "unique_peers", "contact_rate",
           "arrival"});
    for (const auto& s : stats.per_node) {
      const auto it = stats.groups.group_of.find(s.node);
      w.row({s.node,
             it == stats.groups.group_of.end() ? "" : std::to_string(it->second),
             std::to_string(s.total_encounters), std::to_string(s.unique_peers),
             csv::format_double(s.contact_rate), csv::format_double(s.arrival)});
    }
  }
  {
    csv::Writer w(out_dir + "/trace_batches.csv");
    w.row({"batch", "time", "size"});
    for (std::size_t k = 0; k < stats.batches.size(); ++k)
      w.row({std::to_string(k), csv::format_double(stats.batches[k].time),
             std::to_string(stats.batches[k].members.size())});
  }
  {
    csv::Writer w(out_dir + "/trace_rates.csv");
    w.row({"group_n", "group_m", "rate"});
    for (std::size_t a = 0; a < stats.groups.rates.size(); ++a)
      for (std::size_t b = a; b < stats.groups.rates.size(); ++b)
        w.row({std::to_string(a), std::to_string(b),
               csv::format_double(stats.groups.rates[a][b])});
  }
  {
    csv::Writer w(out_dir + "/trace_top_share.csv");
    w.row({"fraction", "share"});
    for (const auto& [frac, share] : stats.top_share_curve)
      w.row({csv::format_double(frac), csv::format_double(share)});
  }
  {
    // Histograms of per-node total and unique encounters (20 equal bins).
    csv::Writer w(out_dir + "/trace_histogram.csv");
    w.row({"kind", "bin_lo", "bin_hi", "count"});
    auto emit = [&w](const char* kind, std::vector<double> vals) {
      if (vals.empty()) return;
      const double lo = *std::min_element(vals.begin(), vals.end());
      const double hi = *std::max_element(vals.begin(), vals.end());
      const int bins = 20;
      const double width = std::max((hi - lo) / bins, 1e-12);
      std::vector<std::size_t> count(bins, 0);
      for (double v : vals) {
        int b = static_cast<int>((v - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        count[b] += 1;
      }
      for (int b = 0; b < bins; ++b)
        w.row({kind, csv::format_double(lo + b * width),
               csv::format_double(lo + (b + 1) * width),
               std::to_string(count[b])});
    };
    std::vector<double> totals, uniques;
    for (const auto& s : stats.per_node) {
      totals.push_back(static_cast<double>(s.total_encounters));
      uniques.push_back(static_cast<double>(s.unique_peers));
    }
    emit("total", totals);
    emit("unique", uniques);
  }
}

}  // namespace wormsim
