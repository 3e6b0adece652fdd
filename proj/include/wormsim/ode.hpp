#pragma once

#include <string>
#include <vector>

#include "wormsim/metrics.hpp"
#include "wormsim/scenario.hpp"

namespace wormsim {

struct OdeSettings {
  double step = 1.0;              // fixed RK4 step, s
  std::size_t output_stride = 1;  // record every k-th step
  double extinction_threshold = 0.5;  // epsilon for TA/TR detection, nodes
};

struct TrajectoryEvent {
  double t = 0.0;
  std::string label;
};

// Time-ordered samples of the integrated system. Samples are recorded on the
// output stride, immediately after every discrete event, and at the horizon;
// a sample at an event time holds the post-jump state.
struct Trajectory {
  std::vector<StateVector> samples;
  std::vector<TrajectoryEvent> events;
};

// Instantaneous derivative of every compartment (batch jumps excluded; those
// are discrete events handled by integrate).
StateVector rhs(const StateVector& state, const Scenario& scn,
                const TransitionIndicators& flags, double t);

// Fixed-step RK4 from t = 0 to the horizon. Integration pauses exactly at
// each event time (delayed predator injection, batch arrivals), applies the
// jump, and resumes. Throws Error("StepTooLarge") if a compartment undershoots
// zero by more than 1e-9.
Trajectory integrate(const Scenario& scn, const OdeSettings& settings);

// Per-group initial-suppression test: true when
//   S*_n(0) * sum_m beta_nm I_Am(0) <= I_An(0) * sum_m beta_nm I_Bm(0).
// When true for every group the prey never grows and TI = MI = sum I_An(0).
std::vector<bool> suppression_condition(const Scenario& scn);

// The six metrics extracted from a trajectory: TI from the infection-flux
// integral plus nodes seeded or batch-injected as prey, MI as the sampled
// peak, TL as the integrated prey population, AL = TL/TI, and TR/TA as the
// first times at/after the last batch arrival where the prey population
// (respectively all prey and susceptibles) falls below the extinction
// threshold.
Metrics trajectory_metrics(const Trajectory& traj, const Scenario& scn,
                           const OdeSettings& settings);

// Convenience: integrate + trajectory_metrics.
Metrics ode_metrics(const Scenario& scn, const OdeSettings& settings);

// Mean time for a broadcast from a random source to cover an N-node uniform
// encounter network: (2 ln N + 0.5772) / (N beta).
double broadcast_time_estimate(std::int64_t n, double beta);

// CSV export, header `t,group,s_star,s_prime,i_a,i_b,r`; the global removed
// count is repeated on every group row.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace wormsim
