#include "wormsim/sim.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "wormsim/csv.hpp"
#include "wormsim/rng.hpp"

namespace wormsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t round_count(double v, const char* what) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9)
    throw Error("NonIntegerCount",
                std::string(what) + " must be integral for the simulator, got " +
                    std::to_string(v));
  return static_cast<std::int64_t>(r);
}

// Integer initial compartments per group, mirroring init_state. Predator
// seeds are designated hosts drawn from S' first, then S*.
struct GroupInit {
  std::int64_t s_star = 0;       // regular S* nodes
  std::int64_t s_prime = 0;      // regular S' nodes
  std::int64_t prey = 0;         // initial prey
  std::int64_t pred_from_star = 0;
  std::int64_t pred_from_prime = 0;
  std::int64_t non_coop = 0;
};

std::vector<GroupInit> integer_init(const Scenario& scn) {
  std::vector<GroupInit> out(scn.group_count());
  for (std::size_t n = 0; n < scn.group_count(); ++n) {
    const auto nn = scn.groups[n].n_nodes;
    std::int64_t n_coop = std::llround(scn.cooperation * static_cast<double>(nn));
    std::int64_t n_imm = std::llround(scn.cooperation * scn.immunization *
                                      static_cast<double>(nn));
    n_imm = std::min(n_imm, n_coop);
    GroupInit gi;
    gi.prey = n < scn.initial_prey.size()
                  ? round_count(scn.initial_prey[n], "initial_prey")
                  : 0;
    const std::int64_t pred =
        n < scn.initial_predator.size()
            ? round_count(scn.initial_predator[n], "initial_predator")
            : 0;
    gi.s_star = n_coop - n_imm - gi.prey;
    if (gi.s_star < 0)
      throw Error("NegativeCompartment",
                  "group " + std::to_string(n) + ": S*(0) < 0");
    gi.pred_from_prime = std::min(pred, n_imm);
    gi.pred_from_star = pred - gi.pred_from_prime;
    gi.s_star -= gi.pred_from_star;
    if (gi.s_star < 0)
      throw Error("NegativeCompartment",
                  "group " + std::to_string(n) +
                      ": predator seeds exceed susceptible pool");
    gi.s_prime = n_imm - gi.pred_from_prime;
    gi.non_coop = nn - n_coop;
    out[n] = gi;
  }
  return out;
}

// Swap-remove index set with O(1) insert/erase/uniform pick.
class NodeSet {
 public:
  bool contains(std::int32_t id) const {
    return id < static_cast<std::int32_t>(pos_.size()) && pos_[id] >= 0;
  }
  void insert(std::int32_t id) {
    if (static_cast<std::size_t>(id) >= pos_.size()) pos_.resize(id + 1, -1);
    pos_[id] = static_cast<std::int32_t>(items_.size());
    items_.push_back(id);
  }
  void erase(std::int32_t id) {
    const std::int32_t p = pos_[id];
    const std::int32_t last = items_.back();
    items_[p] = last;
    pos_[last] = p;
    items_.pop_back();
    pos_[id] = -1;
  }
  std::size_t size() const { return items_.size(); }
  std::int32_t at(std::size_t i) const { return items_[i]; }
  std::int32_t pick(Rng& rng) const {
    return items_[rng.next_below(items_.size())];
  }

 private:
  std::vector<std::int32_t> items_;
  std::vector<std::int32_t> pos_;
};

struct GroupSets {
  NodeSet s_star_on, s_star_off;
  NodeSet s_prime_on, s_prime_off;
  NodeSet i_a_on, i_a_off;
  NodeSet i_b;

  std::size_t s_star_total() const {
    return s_star_on.size() + s_star_off.size();
  }
  std::size_t s_prime_total() const {
    return s_prime_on.size() + s_prime_off.size();
  }
  std::size_t i_a_total() const { return i_a_on.size() + i_a_off.size(); }
  std::size_t i_b_total() const { return i_b.size(); }
};

class Simulation {
 public:
  Simulation(const Scenario& scn, std::uint64_t seed)
      : scn_(scn),
        flags_(build_interaction_flags(scn.interaction).first),
        alpha_(effective_alpha(scn)),
        rng_(splitmix64(seed ^ 0x77606d5ca5f1d3adull)),
        groups_(scn.group_count()),
        departed_ib_(scn.group_count()) {}

  EventLog run() {
    build_initial_population();
    const double horizon = scn_.horizon;
    const bool onoff = scn_.on_prob < 1.0;
    double next_resample = onoff ? scn_.on_interval : kInf;
    std::size_t next_batch = 0;
    double inject_at =
        (scn_.delay > 0.0 && has_designated_) ? scn_.delay : kInf;
    if (scn_.delay == 0.0 && has_designated_) inject_predators(0.0);

    double t = 0.0;
    while (t < horizon) {
      double boundary = std::min(
          {next_resample, inject_at,
           next_batch < scn_.batch_schedule.size()
               ? scn_.batch_schedule[next_batch].time
               : kInf,
           horizon});
      const double rate = total_rate();
      if (rate > 0.0) {
        const double dt = rng_.exponential(rate);
        if (t + dt < boundary) {
          t += dt;
          fire_reaction(t);
          continue;
        }
      }
      t = boundary;
      if (t >= horizon) break;
      // Boundary order at equal times: injection, batches, resample.
      if (t == inject_at) {
        inject_predators(t);
        inject_at = kInf;
      }
      while (next_batch < scn_.batch_schedule.size() &&
             scn_.batch_schedule[next_batch].time <= t)
        apply_batch(scn_.batch_schedule[next_batch++], t);
      if (t == next_resample) {
        resample_on_off(t);
        next_resample += scn_.on_interval;
      }
    }
    return std::move(log_);
  }

 private:
  static constexpr int kChannels = 7;

  void add_node(std::int32_t group, Compartment comp, bool designated,
                double t) {
    NodeState node;
    node.node_id = static_cast<std::int32_t>(nodes_.size());
    node.group = group;
    node.compartment = comp;
    node.is_on = true;
    nodes_.push_back(node);
    if (designated) {
      designated_ids_[group].push_back(node.node_id);
      has_designated_ = true;
    }
    auto& n = nodes_.back();
    switch (comp) {
      case Compartment::SusceptibleBoth:
      case Compartment::SusceptiblePredatorOnly:
      case Compartment::PreyInfected:
        n.is_on = scn_.on_prob >= 1.0 || rng_.bernoulli(scn_.on_prob);
        if (comp == Compartment::PreyInfected) {
          n.infection_start = t;
          log_.push_back({t, EventKind::PreyInfect, n.node_id, -1});
        } else {
          log_.push_back({t, EventKind::Arrive, n.node_id, -1});
        }
        insert_into_sets(n);
        break;
      case Compartment::PredatorInfected:
        groups_[group].i_b.insert(n.node_id);
        log_.push_back({t, EventKind::Inject, n.node_id, -1});
        break;
      case Compartment::NonCooperative:
      case Compartment::NotYetArrived:
      case Compartment::Removed:
        break;
    }
  }

  void insert_into_sets(const NodeState& n) {
    auto& gs = groups_[n.group];
    switch (n.compartment) {
      case Compartment::SusceptibleBoth:
        (n.is_on ? gs.s_star_on : gs.s_star_off).insert(n.node_id);
        break;
      case Compartment::SusceptiblePredatorOnly:
        (n.is_on ? gs.s_prime_on : gs.s_prime_off).insert(n.node_id);
        break;
      case Compartment::PreyInfected:
        (n.is_on ? gs.i_a_on : gs.i_a_off).insert(n.node_id);
        break;
      case Compartment::PredatorInfected:
        gs.i_b.insert(n.node_id);
        break;
      default:
        break;
    }
  }

  void remove_from_sets(const NodeState& n) {
    auto& gs = groups_[n.group];
    switch (n.compartment) {
      case Compartment::SusceptibleBoth:
        (n.is_on ? gs.s_star_on : gs.s_star_off).erase(n.node_id);
        break;
      case Compartment::SusceptiblePredatorOnly:
        (n.is_on ? gs.s_prime_on : gs.s_prime_off).erase(n.node_id);
        break;
      case Compartment::PreyInfected:
        (n.is_on ? gs.i_a_on : gs.i_a_off).erase(n.node_id);
        break;
      case Compartment::PredatorInfected:
        gs.i_b.erase(n.node_id);
        break;
      default:
        break;
    }
  }

  void set_compartment(NodeState& n, Compartment comp) {
    remove_from_sets(n);
    n.compartment = comp;
    n.infection_start.reset();
    insert_into_sets(n);
  }

  void build_initial_population() {
    const auto init = integer_init(scn_);
    designated_ids_.assign(scn_.group_count(), {});
    for (std::size_t g = 0; g < init.size(); ++g) {
      const auto& gi = init[g];
      const auto gi32 = static_cast<std::int32_t>(g);
      for (std::int64_t k = 0; k < gi.s_star; ++k)
        add_node(gi32, Compartment::SusceptibleBoth, false, 0.0);
      for (std::int64_t k = 0; k < gi.pred_from_star; ++k)
        add_node(gi32, Compartment::SusceptibleBoth, true, 0.0);
      for (std::int64_t k = 0; k < gi.prey; ++k)
        add_node(gi32, Compartment::PreyInfected, false, 0.0);
      for (std::int64_t k = 0; k < gi.s_prime; ++k)
        add_node(gi32, Compartment::SusceptiblePredatorOnly, false, 0.0);
      for (std::int64_t k = 0; k < gi.pred_from_prime; ++k)
        add_node(gi32, Compartment::SusceptiblePredatorOnly, true, 0.0);
      for (std::int64_t k = 0; k < gi.non_coop; ++k)
        add_node(gi32, Compartment::NonCooperative, false, 0.0);
    }
  }

  void inject_predators(double t) {
    for (std::size_t g = 0; g < designated_ids_.size(); ++g) {
      for (std::int32_t id : designated_ids_[g]) {
        NodeState* n = &nodes_[id];
        if (n->compartment == Compartment::Removed ||
            n->compartment == Compartment::NotYetArrived) {
          // Host no longer available; activate on a substitute instead.
          const std::int32_t sub = pick_substitute_host(g);
          if (sub < 0) continue;
          n = &nodes_[sub];
        }
        if (n->compartment == Compartment::PredatorInfected) continue;
        set_compartment(*n, Compartment::PredatorInfected);
        log_.push_back({t, EventKind::Inject, n->node_id, -1});
      }
    }
  }

  std::int32_t pick_substitute_host(std::size_t g) {
    auto& gs = groups_[g];
    for (const NodeSet* s : {&gs.s_prime_on, &gs.s_prime_off, &gs.s_star_on,
                             &gs.s_star_off, &gs.i_a_on, &gs.i_a_off})
      if (s->size() > 0) return s->pick(rng_);
    return -1;
  }

  void apply_batch(const BatchEvent& ev, double t) {
    auto handle = [&](const std::vector<double>& deltas, Compartment comp) {
      for (std::size_t g = 0; g < deltas.size(); ++g) {
        const std::int64_t d = round_count(deltas[g], "batch delta");
        if (d >= 0) {
          for (std::int64_t k = 0; k < d; ++k) {
            if (comp == Compartment::PredatorInfected &&
                !departed_ib_[g].empty()) {
              // Rejoining predator hosts come back before new ones appear.
              const std::int32_t id = departed_ib_[g].back();
              departed_ib_[g].pop_back();
              nodes_[id].compartment = Compartment::PredatorInfected;
              groups_[g].i_b.insert(id);
              log_.push_back({t, EventKind::Inject, id, -1});
            } else {
              add_node(static_cast<std::int32_t>(g), comp, false, t);
            }
          }
        } else {
          for (std::int64_t k = 0; k < -d; ++k) depart_one(g, comp, t);
        }
      }
    };
    handle(ev.d_s_star, Compartment::SusceptibleBoth);
    handle(ev.d_s_prime, Compartment::SusceptiblePredatorOnly);
    handle(ev.d_i_a, Compartment::PreyInfected);
    handle(ev.d_i_b, Compartment::PredatorInfected);
  }

  void depart_one(std::size_t g, Compartment comp, double t) {
    auto& gs = groups_[g];
    std::int32_t id = -1;
    auto pick_from = [&](NodeSet& on, NodeSet& off) -> std::int32_t {
      const std::size_t total = on.size() + off.size();
      if (total == 0) return -1;
      const std::size_t k = rng_.next_below(total);
      return k < on.size() ? on.at(k) : off.at(k - on.size());
    };
    switch (comp) {
      case Compartment::SusceptibleBoth:
        id = pick_from(gs.s_star_on, gs.s_star_off);
        break;
      case Compartment::SusceptiblePredatorOnly:
        id = pick_from(gs.s_prime_on, gs.s_prime_off);
        break;
      case Compartment::PreyInfected:
        id = pick_from(gs.i_a_on, gs.i_a_off);
        break;
      case Compartment::PredatorInfected:
        id = gs.i_b.size() ? gs.i_b.pick(rng_) : -1;
        break;
      default:
        break;
    }
    if (id < 0)
      throw Error("NegativeCompartment",
                  "batch departure at t = " + std::to_string(t) +
                      " drives a compartment below zero");
    NodeState& n = nodes_[id];
    if (comp == Compartment::PredatorInfected)
      departed_ib_[g].push_back(id);
    remove_from_sets(n);
    n.compartment = Compartment::NotYetArrived;
    n.infection_start.reset();
    log_.push_back({t, EventKind::Depart, id, -1});
  }

  void resample_on_off(double t) {
    for (auto& n : nodes_) {
      switch (n.compartment) {
        case Compartment::SusceptibleBoth:
        case Compartment::SusceptiblePredatorOnly:
        case Compartment::PreyInfected: {
          const bool on = rng_.bernoulli(scn_.on_prob);
          if (on != n.is_on) {
            remove_from_sets(n);
            n.is_on = on;
            insert_into_sets(n);
            log_.push_back({t, EventKind::OnOffToggle, n.node_id, -1});
          }
          break;
        }
        case Compartment::PredatorInfected:
          // I_B on/off state never gates anything: sources are not gated and
          // nothing targets I_B.
          break;
        default:
          break;
      }
    }
  }

  void compute_forces() {
    const std::size_t g = groups_.size();
    prey_force_.assign(g, 0.0);
    pred_force_.assign(g, 0.0);
    for (std::size_t n = 0; n < g; ++n) {
      for (std::size_t m = 0; m < g; ++m) {
        const double beta = scn_.contact_rate(n, m);
        prey_force_[n] += beta * static_cast<double>(groups_[m].i_a_total());
        pred_force_[n] += beta * static_cast<double>(groups_[m].i_b_total());
      }
    }
  }

  // Channel order per group: prey infection, vaccination of S*, vaccination
  // of S', termination, manual vaccination, manual removal, re-susceptible.
  double channel_rate(std::size_t g, int c) const {
    const auto& gs = groups_[g];
    switch (c) {
      case 0:
        return flags_.s_to_a(g) * static_cast<double>(gs.s_star_on.size()) *
               prey_force_[g];
      case 1:
        return flags_.s_to_b(g) * static_cast<double>(gs.s_star_on.size()) *
               pred_force_[g];
      case 2:
        return flags_.sp_to_b(g) * static_cast<double>(gs.s_prime_on.size()) *
               pred_force_[g];
      case 3:
        return flags_.a_to_b(g) * static_cast<double>(gs.i_a_on.size()) *
               pred_force_[g];
      case 4:
        return scn_.manual_vaccination_rate *
               static_cast<double>(gs.s_star_total() + gs.s_prime_total());
      case 5:
        return scn_.manual_removal_rate *
               static_cast<double>(gs.i_a_total() + gs.i_b_total());
      case 6:
        return alpha_ *
               static_cast<double>(gs.i_a_total() + gs.i_b_total());
    }
    return 0.0;
  }

  double total_rate() {
    compute_forces();
    double sum = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (int c = 0; c < kChannels; ++c) sum += channel_rate(g, c);
    return sum;
  }

  // Weighted pick of the infecting node: group by beta-weighted population,
  // then uniform within the group (sources are not gated by on/off).
  std::int32_t pick_source(std::size_t target_group, bool prey) {
    double total = 0.0;
    std::vector<double> w(groups_.size());
    for (std::size_t m = 0; m < groups_.size(); ++m) {
      const double pop = prey ? static_cast<double>(groups_[m].i_a_total())
                              : static_cast<double>(groups_[m].i_b_total());
      w[m] = scn_.contact_rate(target_group, m) * pop;
      total += w[m];
    }
    double u = rng_.next_double() * total;
    std::size_t m = 0;
    for (; m + 1 < w.size(); ++m) {
      if (u < w[m]) break;
      u -= w[m];
    }
    auto& gs = groups_[m];
    if (prey) {
      const std::size_t k = rng_.next_below(gs.i_a_total());
      return k < gs.i_a_on.size() ? gs.i_a_on.at(k)
                                  : gs.i_a_off.at(k - gs.i_a_on.size());
    }
    return gs.i_b.pick(rng_);
  }

  void fire_reaction(double t) {
    // Forces are current: total_rate() ran in the caller and no state changed.
    double total = 0.0;
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (int c = 0; c < kChannels; ++c) total += channel_rate(g, c);
    double u = rng_.next_double() * total;
    std::size_t g = 0;
    int c = -1;
    bool found = false;
    for (std::size_t gg = 0; gg < groups_.size() && !found; ++gg) {
      for (int cc = 0; cc < kChannels; ++cc) {
        const double r = channel_rate(gg, cc);
        if (r <= 0.0) continue;
        g = gg;
        c = cc;  // remember the last live channel for float slack
        if (u < r) {
          found = true;
          break;
        }
        u -= r;
      }
    }
    if (c < 0) return;

    auto& gs = groups_[g];
    switch (c) {
      case 0: {  // prey infects an on S* node
        const std::int32_t target = gs.s_star_on.pick(rng_);
        const std::int32_t source = pick_source(g, /*prey=*/true);
        NodeState& n = nodes_[target];
        set_compartment(n, Compartment::PreyInfected);
        n.infection_start = t;
        log_.push_back({t, EventKind::PreyInfect, target, source});
        break;
      }
      case 1: {  // predator vaccinates an on S* node
        const std::int32_t target = gs.s_star_on.pick(rng_);
        const std::int32_t source = pick_source(g, /*prey=*/false);
        set_compartment(nodes_[target], Compartment::PredatorInfected);
        log_.push_back({t, EventKind::Vaccinate, target, source});
        break;
      }
      case 2: {  // predator vaccinates an on S' node
        const std::int32_t target = gs.s_prime_on.pick(rng_);
        const std::int32_t source = pick_source(g, /*prey=*/false);
        set_compartment(nodes_[target], Compartment::PredatorInfected);
        log_.push_back({t, EventKind::Vaccinate, target, source});
        break;
      }
      case 3: {  // predator terminates an on prey node
        const std::int32_t target = gs.i_a_on.pick(rng_);
        const std::int32_t source = pick_source(g, /*prey=*/false);
        set_compartment(nodes_[target], Compartment::PredatorInfected);
        log_.push_back({t, EventKind::Terminate, target, source});
        break;
      }
      case 4: {  // manual vaccination: S* or S' -> Removed
        const std::size_t k = rng_.next_below(gs.s_star_total() +
                                              gs.s_prime_total());
        std::int32_t target;
        std::size_t i = k;
        if (i < gs.s_star_on.size()) {
          target = gs.s_star_on.at(i);
        } else if ((i -= gs.s_star_on.size()) < gs.s_star_off.size()) {
          target = gs.s_star_off.at(i);
        } else if ((i -= gs.s_star_off.size()) < gs.s_prime_on.size()) {
          target = gs.s_prime_on.at(i);
        } else {
          target = gs.s_prime_off.at(i - gs.s_prime_on.size());
        }
        set_compartment(nodes_[target], Compartment::Removed);
        log_.push_back({t, EventKind::Vaccinate, target, -1});
        break;
      }
      case 5: {  // manual removal: I_A or I_B -> Removed
        const std::int32_t target = pick_infected(gs);
        set_compartment(nodes_[target], Compartment::Removed);
        log_.push_back({t, EventKind::Terminate, target, -1});
        break;
      }
      case 6: {  // re-susceptible: infected node rejoins a susceptible pool
        const std::int32_t target = pick_infected(gs);
        NodeState& n = nodes_[target];
        Compartment dest = Compartment::SusceptibleBoth;
        if (n.compartment == Compartment::PredatorInfected &&
            rng_.bernoulli(scn_.immunization))
          dest = Compartment::SusceptiblePredatorOnly;
        set_compartment(n, dest);
        log_.push_back({t, EventKind::Arrive, target, target});
        break;
      }
    }
  }

  std::int32_t pick_infected(GroupSets& gs) {
    const std::size_t k =
        rng_.next_below(gs.i_a_total() + gs.i_b_total());
    std::size_t i = k;
    if (i < gs.i_a_on.size()) return gs.i_a_on.at(i);
    i -= gs.i_a_on.size();
    if (i < gs.i_a_off.size()) return gs.i_a_off.at(i);
    i -= gs.i_a_off.size();
    return gs.i_b.at(i);
  }

  const Scenario& scn_;
  TransitionIndicators flags_;
  double alpha_;
  Rng rng_;
  std::vector<NodeState> nodes_;
  std::vector<std::vector<std::int32_t>> designated_ids_;
  bool has_designated_ = false;
  std::vector<GroupSets> groups_;
  std::vector<std::vector<std::int32_t>> departed_ib_;
  std::vector<double> prey_force_, pred_force_;
  EventLog log_;
};

}  // namespace

std::pair<EventLog, RunMetrics> simulate_run(const Scenario& scn,
                                             std::uint64_t seed) {
  require_valid(scn);
  Simulation sim(scn, seed);
  EventLog log = sim.run();
  RunMetrics rm;
  rm.seed = seed;
  rm.metrics = metrics_from_log(log, scn);
  return {std::move(log), rm};
}

std::vector<RunMetrics> monte_carlo_runs(const Scenario& scn, std::size_t runs,
                                         std::uint64_t base_seed,
                                         std::size_t workers) {
  if (runs == 0) throw Error("BadValue", "runs must be >= 1");
  require_valid(scn);
  if (workers == 0) {
    workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
  }
  workers = std::min(workers, runs);

  std::vector<RunMetrics> results(runs);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= runs) return;
      Simulation sim(scn, base_seed + k);
      const EventLog log = sim.run();
      results[k].seed = base_seed + k;
      results[k].metrics = metrics_from_log(log, scn);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return results;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("BadValue", "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double idx = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

namespace {

SummaryStat summarize_values(const std::vector<double>& vals,
                             std::size_t censored) {
  SummaryStat s;
  s.defined = vals.size();
  s.censored = censored;
  if (!vals.empty()) {
    s.median = quantile(vals, 0.5);
    s.q1 = quantile(vals, 0.25);
    s.q3 = quantile(vals, 0.75);
  }
  return s;
}

}  // namespace

MetricsSummary summarize(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw Error("BadValue", "summary needs at least one run");
  MetricsSummary s;
  s.runs = runs.size();
  std::vector<double> ti, mi, tl, al, ta, tr;
  std::size_t tl_censored = 0;
  for (const auto& r : runs) {
    const Metrics& m = r.metrics;
    ti.push_back(m.ti);
    mi.push_back(m.mi);
    tl.push_back(m.tl);
    if (m.tl_censored) ++tl_censored;
    if (m.al) al.push_back(*m.al);
    if (m.ta) ta.push_back(*m.ta);
    if (m.tr) tr.push_back(*m.tr);
  }
  s.ti = summarize_values(ti, 0);
  s.mi = summarize_values(mi, 0);
  s.tl = summarize_values(tl, tl_censored);
  s.al = summarize_values(al, runs.size() - al.size());
  s.ta = summarize_values(ta, runs.size() - ta.size());
  s.tr = summarize_values(tr, runs.size() - tr.size());
  return s;
}

MetricsSummary monte_carlo(const Scenario& scn, std::size_t runs,
                           std::uint64_t base_seed, std::size_t workers) {
  return summarize(monte_carlo_runs(scn, runs, base_seed, workers));
}

// ---------------------------------------------------------------------------
// Exact small-population Markov oracle

namespace {

struct CountState {
  std::int64_t s, sp, a, b;
  auto operator<=>(const CountState&) const = default;
};

// Topological order: every transition strictly decreases (s + sp, a) in this
// lexicographic sense.
struct TopoOrder {
  bool operator()(const CountState& x, const CountState& y) const {
    if (x.s + x.sp != y.s + y.sp) return x.s + x.sp > y.s + y.sp;
    if (x.a != y.a) return x.a > y.a;
    return x < y;
  }
};

}  // namespace

ExactMetrics exact_small_markov(const Scenario& scn) {
  require_valid(scn);
  if (scn.group_count() != 1)
    throw Error("UnsupportedScenario", "oracle needs a single group");
  if (scn.on_prob != 1.0)
    throw Error("UnsupportedScenario", "oracle needs p = 1");
  if (scn.manual_removal_rate != 0.0 || scn.manual_vaccination_rate != 0.0 ||
      effective_alpha(scn) != 0.0)
    throw Error("UnsupportedScenario", "oracle needs gamma = gamma_S = alpha = 0");
  if (!scn.batch_schedule.empty())
    throw Error("UnsupportedScenario", "oracle allows no batch events");
  if (scn.delay != 0.0)
    throw Error("UnsupportedScenario", "oracle needs zero delay");
  if (scn.groups[0].n_nodes > 8)
    throw Error("TooLarge", "oracle bounded at 8 nodes");

  const auto init = integer_init(scn)[0];
  const auto flags = build_interaction_flags(scn.interaction).first;
  const double beta = scn.groups[0].intra_rate;
  if (beta <= 0.0)
    throw Error("UnsupportedScenario", "oracle needs a positive contact rate");

  const CountState init_state{init.s_star, init.s_prime, init.prey,
                              init.pred_from_star + init.pred_from_prime};

  const double f_sa = flags.s_to_a(0), f_sb = flags.s_to_b(0);
  const double f_pb = flags.sp_to_b(0), f_ab = flags.a_to_b(0);
  auto rates = [&](const CountState& x) {
    return std::array<double, 4>{
        f_sa * beta * static_cast<double>(x.s * x.a),   // infection
        f_sb * beta * static_cast<double>(x.s * x.b),   // vaccinate S*
        f_pb * beta * static_cast<double>(x.sp * x.b),  // vaccinate S'
        f_ab * beta * static_cast<double>(x.a * x.b),   // termination
    };
  };
  auto successor = [](const CountState& x, int k) -> CountState {
    switch (k) {
      case 0: return {x.s - 1, x.sp, x.a + 1, x.b};
      case 1: return {x.s - 1, x.sp, x.a, x.b + 1};
      case 2: return {x.s, x.sp - 1, x.a, x.b + 1};
      default: return {x.s, x.sp, x.a - 1, x.b + 1};
    }
  };

  // Entry probability propagated in topological order; expected occupancy of
  // a transient state is entry / exit-rate. Successors always sort after the
  // current state, so inserting them mid-iteration is safe for std::map.
  std::map<CountState, double, TopoOrder> entry;
  entry[init_state] = 1.0;
  double e_ti = static_cast<double>(init.prey);
  double e_tl = 0.0;
  bool tl_infinite = false;

  for (auto it = entry.begin(); it != entry.end(); ++it) {
    const CountState x = it->first;
    const double p_enter = it->second;
    if (p_enter <= 0.0) continue;
    const auto r = rates(x);
    const double lambda = r[0] + r[1] + r[2] + r[3];
    if (lambda <= 0.0) {
      if (x.a > 0) tl_infinite = true;  // absorbed with living prey
      continue;
    }
    const double occupancy = p_enter / lambda;
    e_tl += occupancy * static_cast<double>(x.a);
    e_ti += occupancy * r[0];
    for (int k = 0; k < 4; ++k) {
      if (r[k] <= 0.0) continue;
      entry[successor(x, k)] += p_enter * (r[k] / lambda);
    }
  }

  ExactMetrics out;
  out.e_ti = e_ti;
  if (!tl_infinite) out.e_tl = e_tl;
  return out;
}

// ---------------------------------------------------------------------------
// CSV export

void write_run_metrics_csv(const std::vector<RunMetrics>& runs,
                           const Scenario& scn, const std::string& path) {
  csv::Writer w(path);
  std::vector<std::string> header = {"run", "seed"};
  for (const auto& c : metrics_csv_header()) header.push_back(c);
  w.row(header);
  for (std::size_t k = 0; k < runs.size(); ++k) {
    std::vector<std::string> row = {std::to_string(k),
                                    std::to_string(runs[k].seed)};
    for (auto& c : metrics_csv_row(runs[k].metrics, scn)) row.push_back(c);
    w.row(row);
  }
}

void write_summary_csv(const MetricsSummary& s, const std::string& path) {
  csv::Writer w(path);
  w.row({"metric", "median", "q1", "q3", "defined", "censored", "runs"});
  auto emit = [&](const char* name, const SummaryStat& st) {
    w.row({name, csv::format_optional(st.median), csv::format_optional(st.q1),
           csv::format_optional(st.q3), std::to_string(st.defined),
           std::to_string(st.censored), std::to_string(s.runs)});
  };
  emit("ti", s.ti);
  emit("mi", s.mi);
  emit("tl", s.tl);
  emit("al", s.al);
  emit("ta", s.ta);
  emit("tr", s.tr);
}

}  // namespace wormsim
