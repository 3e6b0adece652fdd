// Acceptance suite: one checkable criterion per function, one pass/fail line
// per criterion on stdout. Run everything or a single one via --criterion N.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "wormsim/metrics.hpp"
#include "wormsim/ode.hpp"
#include "wormsim/rng.hpp"
#include "wormsim/scenario.hpp"
#include "wormsim/sim.hpp"
#include "wormsim/trace.hpp"

using namespace wormsim;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome& out;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      out.pass = false;
      out.detail += (out.detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) {
    out.detail += (out.detail.empty() ? "" : "; ") + what;
  }
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Scenario uniform_scenario(std::int64_t n, double beta, double prey, double pred,
                          double horizon) {
  Scenario scn;
  scn.groups = {{n, beta}};
  scn.initial_prey = {prey};
  scn.initial_predator = {pred};
  scn.horizon = horizon;
  return scn;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// --------------------------------------------------------------------------
// 1. SIR reduction: general model vs an independently coded SIR integrator.
Outcome criterion_1() {
  Outcome out;
  Check c{out};
  const auto t0 = std::chrono::steady_clock::now();

  const double beta = 5e-5, gamma = 1e-4;
  Scenario scn = uniform_scenario(1000, beta, 1, 0, 1e5);
  scn.interaction = InteractionType::custom_flags({1, 0, 0, 0, 0, 0, 0, 0});
  scn.manual_removal_rate = gamma;
  OdeSettings settings;  // step = 1 s
  const auto traj = integrate(scn, settings);
  const auto ref = oracles::sir_rk4(999, 1, 0, beta, gamma, 1.0, 1e5);

  c.require(traj.samples.size() == ref.size(), "sample grids differ");
  double err = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < ref.size() && out.pass; ++k) {
    err = std::max({err, std::abs(traj.samples[k].s_star[0] - ref[k].s),
                    std::abs(traj.samples[k].i_a[0] - ref[k].i),
                    std::abs(traj.samples[k].r - ref[k].r)});
    scale = std::max({scale, ref[k].s, ref[k].i, ref[k].r});
  }
  const double rel = err / scale;
  c.require(rel < 1e-6, "relative sup-norm " + fmt(rel) + " >= 1e-6");
  const double secs = elapsed_s(t0);
  c.require(secs < 5.0, "runtime " + fmt(secs) + " s >= 5 s");
  c.note("sup-norm " + fmt(rel, 3) + ", " + fmt(secs, 3) + " s");
  return out;
}

// --------------------------------------------------------------------------
// 2. Logistic oracle for the prey-only SI system.
Outcome criterion_2() {
  Outcome out;
  Check c{out};
  const auto t0 = std::chrono::steady_clock::now();

  Scenario scn = uniform_scenario(1000, 5e-5, 1, 0, 400.0);
  scn.interaction = InteractionType::custom_flags({1, 1, 0, 0, 0, 0, 0, 0});
  const auto traj = integrate(scn, {});
  double worst = 0.0;
  for (const auto& st : traj.samples) {
    const double expect = oracles::logistic_i(1000, 1, 5e-5, st.t);
    worst = std::max(worst, std::abs(st.i_a[0] - expect) / expect);
  }
  c.require(worst < 1e-4, "relative error " + fmt(worst) + " >= 1e-4");
  const double secs = elapsed_s(t0);
  c.require(secs < 1.0, "runtime " + fmt(secs) + " s >= 1 s");
  c.note("max rel err " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s");
  return out;
}

// --------------------------------------------------------------------------
// 3. Suppression theorem over random scenarios meeting the initial-decline
//    condition.
Outcome criterion_3() {
  Outcome out;
  Check c{out};
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(30303);
  const double margin = 60.0;

  int checked = 0;
  while (checked < 100 && out.pass) {
    const std::size_t g = 1 + rng.next_below(2);
    std::vector<double> s_star(g), prey(g), beta_row(g, 0.0);
    Scenario scn;
    std::vector<std::vector<double>> beta(g, std::vector<double>(g, 0.0));
    for (std::size_t n = 0; n < g; ++n) {
      s_star[n] = 5.0 + static_cast<double>(rng.next_below(26));
      prey[n] = 1.0 + static_cast<double>(rng.next_below(2));
      beta[n][n] = std::pow(10.0, -4.0 + rng.next_double());
    }
    if (g == 2) beta[0][1] = beta[1][0] = 0.3 * std::min(beta[0][0], beta[1][1]) * rng.next_double();

    // Predator count sized so every group meets the suppression condition
    // with a wide margin.
    double x = 0.0;
    for (std::size_t n = 0; n < g; ++n) {
      double prey_force = 0.0, row = 0.0;
      for (std::size_t m = 0; m < g; ++m) {
        prey_force += beta[n][m] * prey[m];
        row += beta[n][m];
      }
      x = std::max(x, std::ceil(margin * s_star[n] * prey_force / (prey[n] * row)));
    }

    double max_rate = 0.0, min_decay = 1e300;
    for (std::size_t n = 0; n < g; ++n) {
      scn.groups.push_back({static_cast<std::int64_t>(s_star[n] + prey[n] + x),
                            beta[n][n]});
      double row = 0.0;
      for (std::size_t m = 0; m < g; ++m) row += beta[n][m];
      max_rate = std::max(max_rate, row * (x + s_star[n] + prey[n]) * 3.0);
      min_decay = std::min(min_decay, row * x * (1.0 - 2.0 / margin));
    }
    if (g == 2) scn.inter_rates = {{0.0, beta[0][1]}, {beta[0][1], 0.0}};
    scn.initial_prey.assign(prey.begin(), prey.end());
    scn.initial_predator.assign(g, x);
    scn.horizon = 14.0 / min_decay;

    const auto cond = suppression_condition(scn);
    bool all = true;
    for (bool b : cond) all = all && b;
    c.require(all, "generator produced a non-suppressed scenario");
    if (!out.pass) break;

    OdeSettings settings;
    settings.step = 0.02 / max_rate;
    const auto traj = integrate(scn, settings);
    const auto m = trajectory_metrics(traj, scn, settings);
    const double prey0 = scn.total_initial_prey();
    c.require(std::abs(m.ti - prey0) < 0.05,
              "case " + std::to_string(checked) + ": TI " + fmt(m.ti) +
                  " vs " + fmt(prey0));
    c.require(std::abs(m.mi - prey0) < 0.05,
              "case " + std::to_string(checked) + ": MI " + fmt(m.mi));
    c.require(traj.samples.back().total_i_a() < 1e-3,
              "case " + std::to_string(checked) + ": I_A(horizon) " +
                  fmt(traj.samples.back().total_i_a()));
    ++checked;
  }
  const double secs = elapsed_s(t0);
  c.require(secs < 30.0, "runtime " + fmt(secs) + " s >= 30 s");
  c.note(std::to_string(checked) + " scenarios, " + fmt(secs, 3) + " s");
  return out;
}

// --------------------------------------------------------------------------
// 4. Exact CTMC oracle vs Monte Carlo means over 1e5 runs.
Outcome criterion_4() {
  Outcome out;
  Check c{out};
  const auto t0 = std::chrono::steady_clock::now();
  const double beta = 0.01;

  struct Case {
    std::int64_t s, sp, a, b;
    InteractionType itype;
    const char* tag;
  };
  const auto aggr = InteractionType::aggressive_one_sided();
  const auto cons = InteractionType::conservative_one_sided();
  const auto two = InteractionType::aggressive_two_sided();
  const std::vector<Case> cases = {
      {1, 0, 1, 1, aggr, "aggr"},  // the E[TI] = 4/3 case
      {2, 0, 1, 1, aggr, "aggr"},  {3, 0, 1, 1, aggr, "aggr"},
      {4, 0, 1, 1, aggr, "aggr"},  {2, 0, 2, 1, aggr, "aggr"},
      {2, 0, 1, 2, aggr, "aggr"},  {1, 0, 2, 1, aggr, "aggr"},
      {1, 0, 1, 2, aggr, "aggr"},  {3, 0, 2, 1, aggr, "aggr"},
      {0, 0, 1, 1, aggr, "aggr"},  {0, 0, 2, 2, aggr, "aggr"},
      {1, 1, 1, 1, aggr, "aggr"},  {2, 1, 1, 1, aggr, "aggr"},
      {1, 2, 1, 1, aggr, "aggr"},  {2, 2, 1, 1, aggr, "aggr"},
      {2, 0, 1, 1, cons, "cons"},  {3, 0, 1, 2, cons, "cons"},
      {1, 0, 2, 1, cons, "cons"},  {2, 0, 1, 1, two, "two"},
      {3, 0, 1, 1, two, "two"},    {1, 1, 1, 1, two, "two"},
  };

  const std::size_t runs = 100000;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& cs = cases[k];
    const std::int64_t n = cs.s + cs.sp + cs.a + cs.b;
    Scenario scn;
    scn.groups = {{n, beta}};
    scn.immunization = static_cast<double>(cs.sp + cs.b) / static_cast<double>(n);
    scn.initial_prey = {static_cast<double>(cs.a)};
    scn.initial_predator = {static_cast<double>(cs.b)};
    scn.interaction = cs.itype;
    scn.horizon = 1e7;

    const auto exact = exact_small_markov(scn);
    const auto mc = monte_carlo_runs(scn, runs, 40000 + 1000 * k);
    std::vector<double> ti, tl;
    ti.reserve(runs);
    tl.reserve(runs);
    for (const auto& r : mc) {
      ti.push_back(r.metrics.ti);
      tl.push_back(r.metrics.tl);
    }
    const double se_ti =
        std::max(sd_of(ti) / std::sqrt(static_cast<double>(runs)), 1e-12);
    const std::string id = std::string(cs.tag) + "(" + std::to_string(cs.s) +
                           "," + std::to_string(cs.sp) + "," +
                           std::to_string(cs.a) + "," + std::to_string(cs.b) +
                           ")";
    c.require(std::abs(mean_of(ti) - exact.e_ti) <= 3.0 * se_ti,
              id + ": TI " + fmt(mean_of(ti), 6) + " vs exact " +
                  fmt(exact.e_ti, 6) + " (3se " + fmt(3 * se_ti, 3) + ")");
    if (exact.e_tl) {
      const double se_tl =
          std::max(sd_of(tl) / std::sqrt(static_cast<double>(runs)), 1e-12);
      c.require(std::abs(mean_of(tl) - *exact.e_tl) <= 3.0 * se_tl,
                id + ": TL " + fmt(mean_of(tl), 6) + " vs exact " +
                    fmt(*exact.e_tl, 6) + " (3se " + fmt(3 * se_tl, 3) + ")");
    }
    ++checked;
  }
  const double secs = elapsed_s(t0);
  c.require(checked >= 20, "needs at least 20 enumerated cases");
  c.require(secs < 120.0, "runtime " + fmt(secs) + " s >= 2 min");
  c.note(std::to_string(checked) + " cases x 1e5 runs, " + fmt(secs, 3) + " s");
  return out;
}

// --------------------------------------------------------------------------
// 5. Contact-rate invariance of TI/MI; TL scales as 1/beta.
Outcome criterion_5() {
  Outcome out;
  Check c{out};
  const std::size_t runs = 400;
  for (double y : {1.0, 10.0}) {
    std::vector<double> ti_med, tl_med, betas = {1e-4, 2e-4, 4e-4};
    for (double beta : betas) {
      Scenario scn = uniform_scenario(200, beta, 1, y, 1e6);
      const auto s = monte_carlo(scn, runs, 500);
      ti_med.push_back(*s.ti.median);
      tl_med.push_back(*s.tl.median);
    }
    const double spread = (*std::max_element(ti_med.begin(), ti_med.end()) -
                           *std::min_element(ti_med.begin(), ti_med.end())) /
                          *std::max_element(ti_med.begin(), ti_med.end());
    c.require(spread < 0.05, "Y=" + fmt(y) + ": TI spread " + fmt(spread));
    for (std::size_t k = 1; k < betas.size(); ++k) {
      const double expected = tl_med[0] * betas[0] / betas[k];
      const double err = std::abs(tl_med[k] - expected) / expected;
      c.require(err < 0.15, "Y=" + fmt(y) + ": TL(beta=" + fmt(betas[k]) +
                                ") off by " + fmt(err));
    }
    c.note("Y=" + fmt(y) + " TI med " + fmt(ti_med[0], 5) + " spread " +
           fmt(spread, 2));
  }
  return out;
}

// --------------------------------------------------------------------------
// 6. Node-size scaling: relative TI/MI constant, absolute TL saturates.
Outcome criterion_6() {
  Outcome out;
  Check c{out};
  // Medians need to be tight here: the finite-size drift of relative MI
  // between N = 100 and N = 400 is a genuine ~9%, close to the 10% gate.
  const std::size_t runs = 1600;
  std::vector<double> rel_ti, rel_mi, tl;
  for (std::int64_t n : {100, 200, 400}) {
    Scenario scn = uniform_scenario(n, 5e-5, n / 100, n / 100, 2e5);
    const auto results = monte_carlo_runs(scn, runs, 600);
    std::vector<double> rti, rmi, rtl;
    for (const auto& r : results) {
      const auto rel = relative_metrics(r.metrics, scn);
      rti.push_back(rel.ti_rel);
      rmi.push_back(rel.mi_rel);
      rtl.push_back(r.metrics.tl);
    }
    rel_ti.push_back(quantile(rti, 0.5));
    rel_mi.push_back(quantile(rmi, 0.5));
    tl.push_back(quantile(rtl, 0.5));
  }
  auto spread = [](const std::vector<double>& v) {
    return (*std::max_element(v.begin(), v.end()) -
            *std::min_element(v.begin(), v.end())) /
           *std::max_element(v.begin(), v.end());
  };
  c.require(spread(rel_ti) < 0.10, "relative TI spread " + fmt(spread(rel_ti)));
  c.require(spread(rel_mi) < 0.10, "relative MI spread " + fmt(spread(rel_mi)));
  c.require(spread(tl) < 0.20, "absolute TL spread " + fmt(spread(tl)));
  c.note("relTI " + fmt(rel_ti[0], 3) + "/" + fmt(rel_ti[1], 3) + "/" +
         fmt(rel_ti[2], 3) + ", TL " + fmt(tl[0], 4) + "/" + fmt(tl[1], 4) +
         "/" + fmt(tl[2], 4));
  return out;
}

// --------------------------------------------------------------------------
// 7. On-off behavior: relative TI flat, TL(p=0.5) about twice TL(p=1).
Outcome criterion_7() {
  Outcome out;
  Check c{out};
  // relTI at Y = 1 is widely dispersed; medians need many rounds to settle
  // inside the 10% gate.
  const std::size_t runs = 4000;
  std::vector<double> rel_ti_med, tl_med;
  for (double p : {0.25, 0.5, 1.0}) {
    Scenario scn = uniform_scenario(200, 5e-5, 1, 1, 1e5);
    scn.on_prob = p;
    // Resample fast relative to the encounter dynamics. Long intervals make
    // the fixed on-subset saturate mid-interval, which stalls infections
    // while terminations keep running and skews TI; the flat-TI behavior
    // holds in the fast-resampling (thinned-process) regime.
    scn.on_interval = 5.0;
    const auto results = monte_carlo_runs(scn, runs, 700);
    std::vector<double> rti, rtl;
    for (const auto& r : results) {
      rti.push_back(relative_metrics(r.metrics, scn).ti_rel);
      rtl.push_back(r.metrics.tl);
    }
    rel_ti_med.push_back(quantile(rti, 0.5));
    tl_med.push_back(quantile(rtl, 0.5));
  }
  const double spread = (*std::max_element(rel_ti_med.begin(), rel_ti_med.end()) -
                         *std::min_element(rel_ti_med.begin(), rel_ti_med.end())) /
                        *std::max_element(rel_ti_med.begin(), rel_ti_med.end());
  c.require(spread < 0.10, "relative TI spread " + fmt(spread));
  const double ratio = tl_med[1] / tl_med[2];  // p = 0.5 vs p = 1.0
  c.require(ratio >= 1.6 && ratio <= 2.4, "TL ratio " + fmt(ratio));
  c.note("relTI spread " + fmt(spread, 3) + ", TL(0.5)/TL(1) " + fmt(ratio, 4));
  return out;
}

// --------------------------------------------------------------------------
// 8. Delay additivity in the prey-saturated regime.
Outcome criterion_8() {
  Outcome out;
  Check c{out};
  const std::size_t runs = 200;
  const double d = 5000.0;
  const double delta = broadcast_time_estimate(200, 5e-5);  // one saturation unit
  auto ta_at = [&](double delay, std::uint64_t seed) {
    Scenario scn = uniform_scenario(200, 5e-5, 1, 1, 60000.0);
    scn.delay = delay;
    const auto m = simulate_run(scn, seed).second.metrics;
    return m.ta;
  };
  std::vector<double> diffs;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto ta1 = ta_at(d, 800 + r);
    const auto ta2 = ta_at(d + delta, 800 + r);
    if (ta1 && ta2) diffs.push_back(*ta2 - *ta1);
  }
  c.require(diffs.size() > runs * 9 / 10, "too many unreached TA");
  const double med = quantile(diffs, 0.5);
  const double err = std::abs(med - delta) / delta;
  c.require(err < 0.10, "median TA shift " + fmt(med) + " vs delta " +
                            fmt(delta) + " (err " + fmt(err) + ")");
  c.note("delta " + fmt(delta, 5) + ", median shift " + fmt(med, 5));
  return out;
}

// --------------------------------------------------------------------------
// 9. Y = 1: TA coincides with TR across node sizes.
Outcome criterion_9() {
  Outcome out;
  Check c{out};
  const std::size_t runs = 400;
  for (std::int64_t n : {100, 400}) {
    Scenario scn = uniform_scenario(n, 5e-5, 1, 1, 2e5);
    const auto results = monte_carlo_runs(scn, runs, 900);
    std::vector<double> gap, ta;
    for (const auto& r : results) {
      if (r.metrics.ta && r.metrics.tr) {
        gap.push_back(std::abs(*r.metrics.ta - *r.metrics.tr));
        ta.push_back(*r.metrics.ta);
      }
    }
    c.require(gap.size() > runs * 9 / 10, "N=" + std::to_string(n) + ": censored");
    const double med_gap = quantile(gap, 0.5);
    const double med_ta = quantile(ta, 0.5);
    c.require(med_gap < 0.05 * med_ta,
              "N=" + std::to_string(n) + ": |TA-TR| " + fmt(med_gap) +
                  " vs 5% of TA " + fmt(0.05 * med_ta));
    c.note("N=" + std::to_string(n) + " gap " + fmt(med_gap, 3) + " TA " +
           fmt(med_ta, 5));
  }
  return out;
}

// --------------------------------------------------------------------------
// 10. Predator-only TA matches the broadcast-time estimate.
Outcome criterion_10() {
  Outcome out;
  Check c{out};
  const std::size_t runs = 400;
  Scenario scn = uniform_scenario(200, 5e-5, 0, 1, 1e5);
  const auto results = monte_carlo_runs(scn, runs, 1000);
  std::vector<double> ta;
  for (const auto& r : results)
    if (r.metrics.ta) ta.push_back(*r.metrics.ta);
  c.require(ta.size() == runs, "TA unreached in some runs");
  const double med = quantile(ta, 0.5);
  const double estimate = broadcast_time_estimate(200, 5e-5);
  const double err = std::abs(med - estimate) / estimate;
  c.require(err < 0.25, "median TA " + fmt(med) + " vs estimate " +
                            fmt(estimate) + " (err " + fmt(err) + ")");
  c.note("median TA " + fmt(med, 5) + ", estimate " + fmt(estimate, 5) +
         ", err " + fmt(err, 3));
  return out;
}

// --------------------------------------------------------------------------
// 11. Interaction-type ordering and censoring at Y = 1.

// Exact probability that a conservative predator ever secures every node at
// Y = 1. In the embedded jump chain of (S*, I_A, I_B), prey count cancels
// from the branching odds: from (s, a, b) the next event infects with
// probability s/(s+b), else terminates. TA is reached iff S* hits zero
// before the prey dies out.
double conservative_ta_reached_exact(std::int64_t n) {
  const std::int64_t s0 = n - 2;  // Y = 1: one prey, one predator
  // p[s][a], b = n - s - a implied.
  std::vector<std::vector<double>> p(s0 + 1);
  for (std::int64_t s = 0; s <= s0; ++s) {
    p[s].assign(n - s + 1, 0.0);
    for (std::int64_t a = 0; a <= n - s; ++a) {
      if (s == 0) {
        p[s][a] = 1.0;  // remaining prey all get terminated
      } else if (a == 0) {
        p[s][a] = 0.0;  // prey extinct with susceptibles left
      } else {
        const double b = static_cast<double>(n - s - a);
        const double q = static_cast<double>(s) / (static_cast<double>(s) + b);
        p[s][a] = q * p[s - 1][a + 1] + (1.0 - q) * p[s][a - 1];
      }
    }
  }
  return p[s0][1];
}

Outcome criterion_11() {
  Outcome out;
  Check c{out};
  const std::size_t runs = 500;
  auto run_with = [&](const InteractionType& itype, std::size_t rounds) {
    Scenario scn = uniform_scenario(200, 5e-5, 1, 1, 1e5);
    scn.interaction = itype;
    return monte_carlo(scn, rounds, 1100);
  };
  const auto aggr = run_with(InteractionType::aggressive_one_sided(), runs);
  const auto two = run_with(InteractionType::aggressive_two_sided(), runs);

  c.require(aggr.ti.median.has_value(), "aggressive TI median missing");
  c.require(two.tl.censored == runs, "two-sided TL not censored everywhere");
  c.require(two.al.censored == runs, "two-sided AL not censored everywhere");
  c.require(two.ta.censored == runs, "two-sided TA not censored everywhere");
  c.require(two.tr.censored == runs, "two-sided TR not censored everywhere");

  // The conservative TA split at Y = 1 is a near-exact coin: the chain says
  // the censored side holds the majority by ~0.13%. A sample median cannot
  // resolve that, so assert the exact median and tie the simulator to it
  // within Monte Carlo error.
  const double p_reached = conservative_ta_reached_exact(200);
  c.require(p_reached < 0.5, "exact P(TA reached) " + fmt(p_reached, 6) +
                                 " not below 1/2");
  const std::size_t cons_runs = 20000;
  const auto cons = run_with(InteractionType::conservative_one_sided(),
                             cons_runs);
  const double frac_reached =
      static_cast<double>(cons_runs - cons.ta.censored) /
      static_cast<double>(cons_runs);
  const double se = std::sqrt(p_reached * (1.0 - p_reached) /
                              static_cast<double>(cons_runs));
  c.require(std::abs(frac_reached - p_reached) <= 3.0 * se,
            "simulated reached fraction " + fmt(frac_reached, 4) +
                " inconsistent with exact " + fmt(p_reached, 4));

  c.require(cons.ti.median.has_value(), "conservative TI median missing");
  c.require(*aggr.ti.median < *cons.ti.median,
            "aggressive TI " + fmt(*aggr.ti.median) + " !< conservative " +
                fmt(*cons.ti.median));
  c.note("TI aggr " + fmt(*aggr.ti.median, 5) + " cons " +
         fmt(*cons.ti.median, 5) + ", exact P(cons TA reached) " +
         fmt(p_reached, 5) + ", sim " + fmt(frac_reached, 5));
  return out;
}

// --------------------------------------------------------------------------
// 12. Trace round-trip: parameter recovery and the immunization sweep.
Outcome criterion_12() {
  Outcome out;
  Check c{out};

  SyntheticTraceSpec spec;
  spec.group_sizes = {180, 20};                  // 90% / 10%
  spec.rates = {{3.6e-6, 4e-7}, {4e-7, 3.3e-6}};
  spec.group_start = {0.0, 751680.0};            // 8.7-day batch gap
  spec.span_end = 1728000.0;                     // 20 days
  spec.skew_sigma = 1.8;
  // Campus-style unique-partner sparsity: a node only ever meets a few
  // percent of the population, so immunization fragments the prey's reach.
  spec.acquaintance_prob = 0.08;
  spec.seed = 1212;
  const auto recs = generate_synthetic_trace(spec);
  const auto encs = derive_encounters(recs);
  const auto stats = trace_stats(encs, 2 * 86400.0);

  c.require(stats.groups.sizes.size() == 2,
            "expected 2 batches, got " + std::to_string(stats.groups.sizes.size()));
  if (stats.groups.sizes.size() == 2) {
    c.require(stats.groups.sizes[0] == 180 && stats.groups.sizes[1] == 20,
              "sizes " + std::to_string(stats.groups.sizes[0]) + "/" +
                  std::to_string(stats.groups.sizes[1]));
    const double e11 = std::abs(stats.groups.rates[0][0] - 3.6e-6) / 3.6e-6;
    const double e22 = std::abs(stats.groups.rates[1][1] - 3.3e-6) / 3.3e-6;
    const double e12 = std::abs(stats.groups.rates[0][1] - 4e-7) / 4e-7;
    c.require(e11 < 0.15, "beta11 err " + fmt(e11));
    c.require(e22 < 0.15, "beta22 err " + fmt(e22));
    c.require(e12 < 0.15, "beta12 err " + fmt(e12));
    c.note("rate errors " + fmt(e11, 3) + "/" + fmt(e22, 3) + "/" + fmt(e12, 3));
  }

  // Slow predator: seeded in the late, slower batch; prey starts at day 0.
  const std::size_t runs = 300;
  std::vector<double> medians;
  for (int step = 0; step <= 6; ++step) {
    const double imm = 0.15 * step;
    Scenario scn;
    scn.groups = {{180, 3.6e-6}, {20, 3.3e-6}};
    scn.inter_rates = {{0.0, 4e-7}, {4e-7, 0.0}};
    scn.immunization = imm;
    scn.delay = 751680.0;
    scn.initial_prey = {1, 0};
    scn.initial_predator = {0, 1};
    scn.horizon = spec.span_end;
    std::vector<double> rel;
    for (std::size_t r = 0; r < runs; ++r) {
      const auto rm = replay_sim(encs, scn, 3000 + r).second;
      rel.push_back(rm.metrics.ti / ((1.0 - imm) * 200.0));
    }
    medians.push_back(quantile(rel, 0.5));
  }
  for (std::size_t k = 1; k < medians.size(); ++k)
    c.require(medians[k] <= medians[k - 1] + 1e-9,
              "relative TI rose from i=" + fmt(0.1 * (k - 1), 2) + " (" +
                  fmt(medians[k - 1]) + ") to i=" + fmt(0.1 * k, 2) + " (" +
                  fmt(medians[k]) + ")");
  c.require(medians.back() < medians.front(),
            "sweep shows no overall decrease");
  c.note("relTI " + fmt(medians.front(), 3) + " -> " + fmt(medians.back(), 3));
  return out;
}

// --------------------------------------------------------------------------
// 13. derive_encounters equals the quadratic oracle, exactly.
Outcome criterion_13() {
  Outcome out;
  Check c{out};
  Rng rng(131313);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t records = 50 + rng.next_below(451);
    std::vector<AssociationRecord> recs;
    const std::size_t nodes = 5 + rng.next_below(30);
    const std::size_t aps = 1 + rng.next_below(8);
    for (std::size_t k = 0; k < records; ++k) {
      AssociationRecord r;
      r.node_id = "n" + std::to_string(rng.next_below(nodes));
      r.ap_id = "ap" + std::to_string(rng.next_below(aps));
      r.start_ts = std::floor(rng.next_double() * 2000.0) / 2.0;
      r.end_ts = r.start_ts + 0.5 + std::floor(rng.next_double() * 400.0) / 2.0;
      recs.push_back(std::move(r));
    }
    const auto got = derive_encounters(recs);
    const auto want = oracles::brute_force_encounters(recs);
    bool equal = got.size() == want.size();
    for (std::size_t k = 0; equal && k < got.size(); ++k)
      equal = got[k].t_start == want[k].t_start &&
              got[k].t_end == want[k].t_end && got[k].node_a == want[k].node_a &&
              got[k].node_b == want[k].node_b;
    c.require(equal, "fixture " + std::to_string(trial) + " mismatch (" +
                         std::to_string(got.size()) + " vs " +
                         std::to_string(want.size()) + " encounters)");
    if (!equal) break;
  }
  c.note("50 fixtures up to 500 records");
  return out;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "SIR reduction", criterion_1},
    {2, "logistic oracle", criterion_2},
    {3, "suppression theorem", criterion_3},
    {4, "exact CTMC oracle", criterion_4},
    {5, "beta invariance", criterion_5},
    {6, "N scaling", criterion_6},
    {7, "on-off behavior", criterion_7},
    {8, "delay additivity", criterion_8},
    {9, "Y=1 TA/TR coincidence", criterion_9},
    {10, "broadcast-time cross-check", criterion_10},
    {11, "interaction-type ordering", criterion_11},
    {12, "trace round-trip", criterion_12},
    {13, "encounter derivation oracle", criterion_13},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int k = 1; k + 1 < argc + 1; ++k) {
    if (std::strcmp(argv[k], "--criterion") == 0 && k + 1 < argc)
      only = std::atoi(argv[k + 1]);
  }
  int failures = 0;
  for (const auto& crit : kCriteria) {
    if (only != 0 && crit.id != only) continue;
    Outcome out;
    try {
      out = crit.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << crit.id
              << ": " << crit.name
              << (out.detail.empty() ? "" : " - " + out.detail) << "\n";
    if (!out.pass) ++failures;
  }
  return failures;
}
