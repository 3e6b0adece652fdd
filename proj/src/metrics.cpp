#include "wormsim/metrics.hpp"

#include <algorithm>
#include <unordered_map>

#include "wormsim/csv.hpp"

namespace wormsim {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::PreyInfect: return "PreyInfect";
    case EventKind::Vaccinate: return "Vaccinate";
    case EventKind::Terminate: return "Terminate";
    case EventKind::Arrive: return "Arrive";
    case EventKind::OnOffToggle: return "OnOffToggle";
    case EventKind::Inject: return "Inject";
    case EventKind::Depart: return "Depart";
  }
  return "?";
}

EventKind event_kind_from_name(const std::string& name) {
  for (auto k : {EventKind::PreyInfect, EventKind::Vaccinate,
                 EventKind::Terminate, EventKind::Arrive,
                 EventKind::OnOffToggle, EventKind::Inject, EventKind::Depart})
    if (name == event_kind_name(k)) return k;
  throw Error("BadValue", "unknown event kind '" + name + "'");
}

void write_event_log_csv(const EventLog& log, const std::string& path) {
  csv::Writer w(path);
  w.row({"t", "event", "node_a", "node_b"});
  for (const auto& e : log)
    w.row({csv::format_double(e.t), event_kind_name(e.kind),
           std::to_string(e.node_a), std::to_string(e.node_b)});
}

EventLog read_event_log_csv(const std::string& path) {
  const auto table = csv::read_table(path);
  EventLog log;
  for (const auto& r : table.rows) {
    if (r.size() != 4) throw Error("ParseError", "event row needs 4 fields");
    Event e;
    e.t = csv::parse_double(r[0]);
    e.kind = event_kind_from_name(r[1]);
    e.node_a = static_cast<std::int32_t>(std::stol(r[2]));
    e.node_b = static_cast<std::int32_t>(std::stol(r[3]));
    log.push_back(e);
  }
  return log;
}

double compute_y(const Scenario& scn) {
  const double prey = scn.total_initial_prey();
  if (prey <= 0.0)
    throw Error("DivisionByZero", "Y undefined: no initial prey");
  return scn.total_initial_predator() / prey;
}

RelativeMetrics relative_metrics(const Metrics& m, const Scenario& scn) {
  const double n_star =
      scn.cooperation * (1.0 - scn.immunization) * scn.total_nodes();
  if (n_star <= 0.0)
    throw Error("DegenerateDenominator",
                "N* = c(1-i)N is zero; relative metrics undefined");
  return {m.ti / n_star, m.mi / n_star};
}

namespace {

enum class Comp : std::uint8_t { Susceptible, Prey, Predator, Removed, Gone };

struct NodeTrack {
  Comp comp = Comp::Susceptible;
  double episode_start = 0.0;
  bool ever_prey = false;
};

}  // namespace

Metrics metrics_from_log(const EventLog& log, const Scenario& scn,
                         const LogMetricsOptions& opts) {
  const double horizon = opts.horizon.value_or(scn.horizon);
  const double t_b = opts.last_batch_time.value_or(scn.last_batch_time());

  std::unordered_map<std::int32_t, NodeTrack> nodes;
  nodes.reserve(log.size() / 2 + 8);

  double ti = 0.0;
  double tl = 0.0;
  long prey_count = 0;
  long mi = 0;
  long absorbable = 0;  // present nodes in {S*, S', I_A}
  double ta_candidate = -1.0;  // < 0 means unset
  double tr_candidate = -1.0;
  bool tl_censored = false;
  double prev_t = -1.0;

  auto close_episode = [&](NodeTrack& n, double t) {
    tl += t - n.episode_start;
    --prey_count;
    if (prey_count == 0) tr_candidate = t;
  };
  auto reset_ta = [&ta_candidate] { ta_candidate = -1.0; };

  for (const auto& e : log) {
    if (e.t < prev_t) throw Error("UnsortedLog", "event log not time-ordered");
    prev_t = e.t;

    switch (e.kind) {
      case EventKind::OnOffToggle:
        break;

      case EventKind::Arrive: {
        auto [it, inserted] = nodes.try_emplace(e.node_a);
        NodeTrack& n = it->second;
        if (e.node_b == e.node_a) {
          // Re-susceptibility: an infected node rejoined the susceptible pool.
          if (n.comp == Comp::Prey) {
            close_episode(n, e.t);
            n.comp = Comp::Susceptible;  // was absorbable, still is
          } else if (n.comp == Comp::Predator) {
            n.comp = Comp::Susceptible;
            ++absorbable;
            reset_ta();
          }
        } else if (inserted || n.comp == Comp::Gone) {
          n.comp = Comp::Susceptible;
          ++absorbable;
          reset_ta();
        }
        break;
      }

      case EventKind::Depart: {
        auto it = nodes.find(e.node_a);
        if (it == nodes.end()) break;
        NodeTrack& n = it->second;
        if (n.comp == Comp::Prey) close_episode(n, e.t);
        if (n.comp == Comp::Prey || n.comp == Comp::Susceptible) --absorbable;
        n.comp = Comp::Gone;
        break;
      }

      case EventKind::PreyInfect: {
        auto [it, inserted] = nodes.try_emplace(e.node_a);
        NodeTrack& n = it->second;
        if (inserted) {  // implicit arrival (seed placement)
          ++absorbable;
          reset_ta();
        }
        if (n.comp != Comp::Susceptible) break;
        if (!n.ever_prey) {
          n.ever_prey = true;
          ti += 1.0;
        }
        n.comp = Comp::Prey;
        n.episode_start = e.t;
        ++prey_count;
        mi = std::max(mi, prey_count);
        tr_candidate = -1.0;
        break;
      }

      case EventKind::Vaccinate: {
        auto [it, inserted] = nodes.try_emplace(e.node_a);
        NodeTrack& n = it->second;
        if (inserted) {
          ++absorbable;
          reset_ta();
        }
        if (n.comp != Comp::Susceptible) break;
        if (e.node_b >= 0) {
          n.comp = Comp::Predator;
          if (--absorbable == 0) ta_candidate = e.t;
        } else {
          n.comp = Comp::Removed;
          --absorbable;
        }
        break;
      }

      case EventKind::Terminate: {
        auto it = nodes.find(e.node_a);
        if (it == nodes.end()) break;
        NodeTrack& n = it->second;
        if (n.comp == Comp::Prey) {
          close_episode(n, e.t);
          --absorbable;
          if (e.node_b >= 0) {
            n.comp = Comp::Predator;
            if (absorbable == 0) ta_candidate = e.t;
          } else {
            n.comp = Comp::Removed;
          }
        } else if (e.node_b < 0 && n.comp == Comp::Predator) {
          n.comp = Comp::Removed;  // manual removal of a predator host
        }
        break;
      }

      case EventKind::Inject: {
        auto [it, inserted] = nodes.try_emplace(e.node_a);
        NodeTrack& n = it->second;
        const bool was_absorbable =
            !inserted && (n.comp == Comp::Prey || n.comp == Comp::Susceptible);
        if (n.comp == Comp::Prey) close_episode(n, e.t);
        if (was_absorbable && --absorbable == 0) ta_candidate = e.t;
        n.comp = Comp::Predator;
        break;
      }
    }
  }

  // Episodes still open at the horizon: truncated lifespan, censored flags.
  for (auto& [id, n] : nodes) {
    if (n.comp == Comp::Prey) {
      tl += horizon - n.episode_start;
      tl_censored = true;
    }
  }

  Metrics m;
  m.ti = ti;
  m.mi = static_cast<double>(mi);
  m.tl = tl;
  m.tl_censored = tl_censored;

  if (ti == 0.0) {
    m.tr = t_b;  // no prey ever existed
  } else if (prey_count == 0 && tr_candidate >= 0.0) {
    m.tr = std::max(tr_candidate, t_b);
  }
  if (ta_candidate >= 0.0) m.ta = std::max(ta_candidate, t_b);
  if (ti > 0.0 && !tl_censored) m.al = tl / ti;
  return m;
}

std::vector<std::string> metrics_csv_header() {
  return {"ti", "mi", "tl", "al", "ta", "tr", "ti_rel", "mi_rel", "y",
          "censored_flags"};
}

std::vector<std::string> metrics_csv_row(const Metrics& m,
                                         const Scenario& scn) {
  std::string rel_ti, rel_mi, y_str;
  try {
    const auto rel = relative_metrics(m, scn);
    rel_ti = csv::format_double(rel.ti_rel);
    rel_mi = csv::format_double(rel.mi_rel);
  } catch (const Error&) {
    // degenerate N*: leave relative cells empty
  }
  if (scn.total_initial_prey() > 0.0)
    y_str = csv::format_double(compute_y(scn));

  std::string censored;
  auto mark = [&censored](const char* name) {
    if (!censored.empty()) censored += ';';
    censored += name;
  };
  if (m.tl_censored) mark("tl");
  if (!m.al) mark("al");
  if (!m.ta) mark("ta");
  if (!m.tr) mark("tr");

  return {csv::format_double(m.ti),
          csv::format_double(m.mi),
          csv::format_double(m.tl),
          csv::format_optional(m.al),
          csv::format_optional(m.ta),
          csv::format_optional(m.tr),
          rel_ti,
          rel_mi,
          y_str,
          censored};
}

}  // namespace wormsim
