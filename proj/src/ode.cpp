#include "wormsim/ode.hpp"

#include <algorithm>
#include <cmath>

#include "wormsim/csv.hpp"

namespace wormsim {

namespace {

constexpr double kUndershootTolerance = 1e-9;

// Flat layout: [s_star(g) | s_prime(g) | i_a(g) | i_b(g) | r].
struct Layout {
  std::size_t g;
  std::size_t size() const { return 4 * g + 1; }
  std::size_t s_star(std::size_t n) const { return n; }
  std::size_t s_prime(std::size_t n) const { return g + n; }
  std::size_t i_a(std::size_t n) const { return 2 * g + n; }
  std::size_t i_b(std::size_t n) const { return 3 * g + n; }
  std::size_t r() const { return 4 * g; }
};

std::vector<double> flatten(const StateVector& st, const Layout& L) {
  std::vector<double> y(L.size());
  for (std::size_t n = 0; n < L.g; ++n) {
    y[L.s_star(n)] = st.s_star[n];
    y[L.s_prime(n)] = st.s_prime[n];
    y[L.i_a(n)] = st.i_a[n];
    y[L.i_b(n)] = st.i_b[n];
  }
  y[L.r()] = st.r;
  return y;
}

StateVector unflatten(const std::vector<double>& y, const Layout& L, double t) {
  StateVector st;
  st.s_star.resize(L.g);
  st.s_prime.resize(L.g);
  st.i_a.resize(L.g);
  st.i_b.resize(L.g);
  for (std::size_t n = 0; n < L.g; ++n) {
    st.s_star[n] = y[L.s_star(n)];
    st.s_prime[n] = y[L.s_prime(n)];
    st.i_a[n] = y[L.i_a(n)];
    st.i_b[n] = y[L.i_b(n)];
  }
  st.r = y[L.r()];
  st.t = t;
  return st;
}

void rhs_flat(const std::vector<double>& y, std::vector<double>& dydt,
              const Scenario& scn, const TransitionIndicators& flags,
              double alpha, const Layout& L) {
  const std::size_t g = L.g;
  const double p = scn.on_prob;
  const double imm = scn.immunization;
  const double gamma = scn.manual_removal_rate;
  const double gamma_s = scn.manual_vaccination_rate;
  const auto& gt = scn.group_transitions;

  // Contact pressure exerted on group n by each worm population.
  std::vector<double> prey_force(g, 0.0), pred_force(g, 0.0);
  for (std::size_t n = 0; n < g; ++n) {
    for (std::size_t m = 0; m < g; ++m) {
      const double beta = scn.contact_rate(n, m);
      prey_force[n] += beta * y[L.i_a(m)];
      pred_force[n] += beta * y[L.i_b(m)];
    }
  }

  auto migration = [&](const std::vector<std::vector<double>>& rates,
                       auto index, std::size_t n) {
    if (rates.empty()) return 0.0;
    double net = 0.0;
    for (std::size_t m = 0; m < g; ++m) {
      if (m == n) continue;
      net += rates[m][n] * y[index(m)] - rates[n][m] * y[index(n)];
    }
    return net;
  };

  double removed_inflow = 0.0;
  for (std::size_t n = 0; n < g; ++n) {
    const double s_star = y[L.s_star(n)];
    const double s_prime = y[L.s_prime(n)];
    const double i_a = y[L.i_a(n)];
    const double i_b = y[L.i_b(n)];

    dydt[L.s_star(n)] =
        -p * s_star *
            (flags.s_to_a(n) * prey_force[n] + flags.s_to_b(n) * pred_force[n]) +
        migration(gt.s_star, [&](std::size_t m) { return L.s_star(m); }, n) -
        gamma_s * s_star + alpha * (i_a + (1.0 - imm) * i_b);

    dydt[L.s_prime(n)] =
        -p * flags.sp_to_b(n) * s_prime * pred_force[n] +
        migration(gt.s_prime, [&](std::size_t m) { return L.s_prime(m); }, n) -
        gamma_s * s_prime + alpha * i_b;

    dydt[L.i_a(n)] =
        p * (flags.s_to_a(n) * s_star * prey_force[n] -
             flags.a_to_b(n) * i_a * pred_force[n]) +
        migration(gt.i_a, [&](std::size_t m) { return L.i_a(m); }, n) -
        (alpha + gamma) * i_a;

    dydt[L.i_b(n)] =
        p * pred_force[n] *
            (flags.s_to_b(n) * s_star + flags.sp_to_b(n) * s_prime +
             flags.a_to_b(n) * i_a) +
        migration(gt.i_b, [&](std::size_t m) { return L.i_b(m); }, n) -
        (alpha + gamma) * i_b;

    removed_inflow += gamma_s * (s_star + s_prime) + gamma * (i_a + i_b);
  }
  dydt[L.r()] = removed_inflow;
}

void rk4_step(std::vector<double>& y, double h, const Scenario& scn,
              const TransitionIndicators& flags, double alpha, const Layout& L) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs_flat(y, k1, scn, flags, alpha, L);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  rhs_flat(tmp, k2, scn, flags, alpha, L);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  rhs_flat(tmp, k3, scn, flags, alpha, L);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  rhs_flat(tmp, k4, scn, flags, alpha, L);
  for (std::size_t i = 0; i < n; ++i)
    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void clamp_or_throw(std::vector<double>& y, double t) {
  for (double& v : y) {
    if (v < 0.0) {
      if (v < -kUndershootTolerance)
        throw Error("StepTooLarge",
                    "compartment fell to " + std::to_string(v) + " at t = " +
                        std::to_string(t) + "; reduce the integration step");
      v = 0.0;
    }
  }
}

struct DiscreteEvent {
  double time;
  int batch_index;  // -1 for the predator injection
};

}  // namespace

StateVector rhs(const StateVector& state, const Scenario& scn,
                const TransitionIndicators& flags, double t) {
  const Layout L{scn.group_count()};
  auto y = flatten(state, L);
  std::vector<double> dydt(L.size());
  rhs_flat(y, dydt, scn, flags, effective_alpha(scn), L);
  return unflatten(dydt, L, t);
}

Trajectory integrate(const Scenario& scn, const OdeSettings& settings) {
  require_valid(scn);
  if (settings.step <= 0.0) throw Error("BadSettings", "step must be > 0");
  if (settings.output_stride == 0)
    throw Error("BadSettings", "output_stride must be >= 1");

  const Layout L{scn.group_count()};
  const auto [flags, alpha_override] = build_interaction_flags(scn.interaction);
  const double alpha = alpha_override.value_or(scn.resusceptible_rate);

  auto y = flatten(init_state(scn), L);

  std::vector<DiscreteEvent> events;
  for (std::size_t k = 0; k < scn.batch_schedule.size(); ++k) {
    if (scn.batch_schedule[k].time <= scn.horizon)
      events.push_back({scn.batch_schedule[k].time, static_cast<int>(k)});
  }
  if (scn.delay > 0.0 && scn.total_initial_predator() > 0.0 &&
      scn.delay <= scn.horizon)
    events.push_back({scn.delay, -1});
  std::stable_sort(events.begin(), events.end(),
                   [](const DiscreteEvent& a, const DiscreteEvent& b) {
                     return a.time < b.time;
                   });

  Trajectory traj;
  auto record = [&](double t) {
    StateVector st = unflatten(y, L, t);
    if (!traj.samples.empty() && traj.samples.back().t == t)
      traj.samples.back() = std::move(st);
    else
      traj.samples.push_back(std::move(st));
  };

  auto apply_injection = [&](double t) {
    for (std::size_t n = 0; n < L.g; ++n) {
      double want = n < scn.initial_predator.size() ? scn.initial_predator[n] : 0.0;
      if (want <= 0.0) continue;
      const double total = want;
      // Hosts convert from S' first, then S*, then prey-infected hosts (a
      // predator activating on an infected host terminates the local prey).
      for (auto idx : {L.s_prime(n), L.s_star(n), L.i_a(n)}) {
        const double take = std::min(want, y[idx]);
        y[idx] -= take;
        want -= take;
      }
      if (want > kUndershootTolerance)
        throw Error("NegativeCompartment",
                    "group " + std::to_string(n) +
                        ": predator injection at t = " + std::to_string(t) +
                        " exceeds the available population");
      y[L.i_b(n)] += total;
    }
    traj.events.push_back({t, "predator_injection"});
  };

  auto apply_batch = [&](const BatchEvent& ev, double t) {
    auto apply = [&](const std::vector<double>& d, auto index) {
      for (std::size_t n = 0; n < d.size(); ++n) {
        y[index(n)] += d[n];
        if (y[index(n)] < 0.0)
          throw Error("NegativeCompartment",
                      "batch delta at t = " + std::to_string(t) +
                          " drives a compartment below zero");
      }
    };
    apply(ev.d_s_star, [&](std::size_t n) { return L.s_star(n); });
    apply(ev.d_s_prime, [&](std::size_t n) { return L.s_prime(n); });
    apply(ev.d_i_a, [&](std::size_t n) { return L.i_a(n); });
    apply(ev.d_i_b, [&](std::size_t n) { return L.i_b(n); });
    traj.events.push_back({t, "batch_arrival"});
  };

  double t = 0.0;
  std::size_t next_event = 0;
  std::size_t steps_since_sample = 0;

  // Events scheduled exactly at t = 0 fire before the first sample.
  while (next_event < events.size() && events[next_event].time <= 0.0) {
    const auto& ev = events[next_event++];
    if (ev.batch_index < 0)
      apply_injection(0.0);
    else
      apply_batch(scn.batch_schedule[ev.batch_index], 0.0);
  }
  record(0.0);

  while (t < scn.horizon) {
    const double seg_end =
        next_event < events.size() ? events[next_event].time : scn.horizon;
    while (t < seg_end) {
      const double h = std::min(settings.step, seg_end - t);
      rk4_step(y, h, scn, flags, alpha, L);
      t += h;
      clamp_or_throw(y, t);
      if (++steps_since_sample >= settings.output_stride || t >= seg_end) {
        record(t);
        steps_since_sample = 0;
      }
    }
    while (next_event < events.size() && events[next_event].time <= t) {
      const auto& ev = events[next_event++];
      if (ev.batch_index < 0)
        apply_injection(t);
      else
        apply_batch(scn.batch_schedule[ev.batch_index], t);
      record(t);
    }
  }
  record(scn.horizon);
  return traj;
}

std::vector<bool> suppression_condition(const Scenario& scn) {
  require_valid(scn);
  const auto st = init_state(scn);
  const std::size_t g = scn.group_count();
  std::vector<bool> suppressed(g);
  for (std::size_t n = 0; n < g; ++n) {
    double prey_force = 0.0, pred_force = 0.0;
    for (std::size_t m = 0; m < g; ++m) {
      prey_force += scn.contact_rate(n, m) * st.i_a[m];
      pred_force += scn.contact_rate(n, m) * st.i_b[m];
    }
    suppressed[n] = st.s_star[n] * prey_force <= st.i_a[n] * pred_force;
  }
  return suppressed;
}

Metrics trajectory_metrics(const Trajectory& traj, const Scenario& scn,
                           const OdeSettings& settings) {
  if (traj.samples.empty())
    throw Error("EmptyTrajectory", "no samples to evaluate");
  const auto [flags, alpha_override] = build_interaction_flags(scn.interaction);
  const double p = scn.on_prob;
  const double eps = settings.extinction_threshold;
  const double t_b = scn.last_batch_time();
  const std::size_t g = scn.group_count();

  // Nodes that start or are batch-injected as prey count toward TI on top of
  // the new-infection flux integral.
  double ti = scn.total_initial_prey();
  for (const auto& ev : scn.batch_schedule)
    for (double d : ev.d_i_a)
      if (d > 0.0) ti += d;

  auto infection_flux = [&](const StateVector& st) {
    double flux = 0.0;
    for (std::size_t n = 0; n < g; ++n) {
      double prey_force = 0.0;
      for (std::size_t m = 0; m < g; ++m)
        prey_force += scn.contact_rate(n, m) * st.i_a[m];
      flux += flags.s_to_a(n) * st.s_star[n] * prey_force;
    }
    return p * flux;
  };

  double mi = 0.0;
  double tl = 0.0;
  std::optional<double> tr, ta;
  double prev_flux = infection_flux(traj.samples.front());
  double prev_ia = traj.samples.front().total_i_a();

  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& st = traj.samples[k];
    const double ia = st.total_i_a();
    if (k > 0) {
      const double dt = st.t - traj.samples[k - 1].t;
      const double flux = infection_flux(st);
      ti += 0.5 * (prev_flux + flux) * dt;
      tl += 0.5 * (prev_ia + ia) * dt;
      prev_flux = flux;
    }
    prev_ia = ia;
    mi = std::max(mi, ia);
    if (st.t >= t_b) {
      if (!tr && ia < eps) tr = st.t;
      if (!ta && st.total_susceptible() + ia < eps) ta = st.t;
    }
  }

  Metrics m;
  m.ti = ti;
  m.mi = mi;
  m.tl = tl;
  m.tr = tr;
  m.ta = ta;
  m.tl_censored = !tr.has_value();
  if (ti > 0.0 && !m.tl_censored) m.al = tl / ti;
  return m;
}

Metrics ode_metrics(const Scenario& scn, const OdeSettings& settings) {
  return trajectory_metrics(integrate(scn, settings), scn, settings);
}

double broadcast_time_estimate(std::int64_t n, double beta) {
  if (n < 2) throw Error("DomainError", "broadcast time needs n >= 2");
  if (beta <= 0.0) throw Error("DomainError", "broadcast time needs beta > 0");
  const double nd = static_cast<double>(n);
  return (2.0 * std::log(nd) + 0.5772) / (nd * beta);
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  csv::Writer w(path);
  w.row({"t", "group", "s_star", "s_prime", "i_a", "i_b", "r"});
  for (const auto& st : traj.samples) {
    for (std::size_t n = 0; n < st.s_star.size(); ++n) {
      w.row({csv::format_double(st.t), std::to_string(n),
             csv::format_double(st.s_star[n]), csv::format_double(st.s_prime[n]),
             csv::format_double(st.i_a[n]), csv::format_double(st.i_b[n]),
             csv::format_double(st.r)});
    }
  }
}

}  // namespace wormsim
