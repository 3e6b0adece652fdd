#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wormsim {

// Error with a stable machine-readable code ("NegativeCompartment",
// "StepTooLarge", ...) plus a human diagnostic.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// The eight binary state-transition indicators. Flags come in four kinds
// (prey infection of S*, vaccination of S*, vaccination of S', termination of
// prey), each with a first-group and a second-group variant; groups beyond
// the second reuse the second-group value.
struct TransitionIndicators {
  int k_s1_a = 0;   // S*_1 -> I_A
  int k_s2_a = 0;   // S*_2 -> I_A
  int k_s1_b = 0;   // S*_1 -> I_B
  int k_s2_b = 0;   // S*_2 -> I_B
  int k_sp1_b = 0;  // S'_1 -> I_B
  int k_sp2_b = 0;  // S'_2 -> I_B
  int k_a1_b = 0;   // I_A1 -> I_B
  int k_a2_b = 0;   // I_A2 -> I_B

  int s_to_a(std::size_t group) const { return group == 0 ? k_s1_a : k_s2_a; }
  int s_to_b(std::size_t group) const { return group == 0 ? k_s1_b : k_s2_b; }
  int sp_to_b(std::size_t group) const { return group == 0 ? k_sp1_b : k_sp2_b; }
  int a_to_b(std::size_t group) const { return group == 0 ? k_a1_b : k_a2_b; }

  bool operator==(const TransitionIndicators&) const = default;
};

struct InteractionType {
  enum class Kind {
    AggressiveOneSided,
    ConservativeOneSided,
    AggressiveTwoSided,
    Custom,
  };

  Kind kind = Kind::AggressiveOneSided;
  TransitionIndicators custom{};  // only meaningful when kind == Custom

  static InteractionType aggressive_one_sided() { return {}; }
  static InteractionType conservative_one_sided() {
    return {Kind::ConservativeOneSided, {}};
  }
  static InteractionType aggressive_two_sided() {
    return {Kind::AggressiveTwoSided, {}};
  }
  static InteractionType custom_flags(const TransitionIndicators& f) {
    return {Kind::Custom, f};
  }
};

struct GroupParams {
  std::int64_t n_nodes = 0;  // N_n
  double intra_rate = 0.0;   // beta_nn, per-pair contacts / s
};

// One scheduled population jump. Positive deltas add nodes, negative deltas
// remove them; applying a delta must not drive a compartment below zero.
struct BatchEvent {
  double time = 0.0;
  std::vector<double> d_s_star;   // per group
  std::vector<double> d_s_prime;  // per group
  std::vector<double> d_i_a;      // per group, for trace replication
  std::vector<double> d_i_b;      // per group, for trace replication
};

// Group-transition rate matrices (lambda), one g x g matrix per compartment
// class. Empty means all-zero.
struct GroupTransitions {
  std::vector<std::vector<double>> s_star;
  std::vector<std::vector<double>> s_prime;
  std::vector<std::vector<double>> i_a;
  std::vector<std::vector<double>> i_b;

  bool empty() const {
    return s_star.empty() && s_prime.empty() && i_a.empty() && i_b.empty();
  }
};

// Complete parameterization of one experiment.
struct Scenario {
  std::vector<GroupParams> groups;
  // Full g x g symmetric matrix of beta_nm; the diagonal must be zero (the
  // intra rates live in GroupParams). Empty means all-zero.
  std::vector<std::vector<double>> inter_rates;

  double cooperation = 1.0;              // c
  double immunization = 0.0;             // i
  double on_prob = 1.0;                  // p
  double on_interval = 600.0;            // on/off resampling interval, s
  double delay = 0.0;                    // d, predator start-time gap
  double resusceptible_rate = 0.0;       // alpha
  double manual_removal_rate = 0.0;      // gamma
  double manual_vaccination_rate = 0.0;  // gamma_S

  GroupTransitions group_transitions;

  std::vector<double> initial_prey;      // I_An(0) per group
  std::vector<double> initial_predator;  // I_Bn(d) per group

  InteractionType interaction;
  std::vector<BatchEvent> batch_schedule;
  double horizon = 0.0;

  std::size_t group_count() const { return groups.size(); }

  // beta_nm: intra rate on the diagonal, inter matrix elsewhere.
  double contact_rate(std::size_t n, std::size_t m) const {
    if (n == m) return groups[n].intra_rate;
    if (inter_rates.empty()) return 0.0;
    return inter_rates[n][m];
  }

  double total_nodes() const {
    double sum = 0.0;
    for (const auto& g : groups) sum += static_cast<double>(g.n_nodes);
    return sum;
  }

  double total_initial_prey() const {
    double s = 0.0;
    for (double v : initial_prey) s += v;
    return s;
  }

  double total_initial_predator() const {
    double s = 0.0;
    for (double v : initial_predator) s += v;
    return s;
  }

  // Time of the last batch arrival, 0 when the schedule is empty.
  double last_batch_time() const {
    return batch_schedule.empty() ? 0.0 : batch_schedule.back().time;
  }

  double lambda(const std::vector<std::vector<double>>& m, std::size_t from,
                std::size_t to) const {
    if (m.empty()) return 0.0;
    return m[from][to];
  }
};

// Continuous per-group populations plus the global removed count.
struct StateVector {
  std::vector<double> s_star;
  std::vector<double> s_prime;
  std::vector<double> i_a;
  std::vector<double> i_b;
  double r = 0.0;
  double t = 0.0;

  double total_i_a() const {
    double s = 0.0;
    for (double v : i_a) s += v;
    return s;
  }
  double total_i_b() const {
    double s = 0.0;
    for (double v : i_b) s += v;
    return s;
  }
  double total_susceptible() const {
    double s = 0.0;
    for (double v : s_star) s += v;
    for (double v : s_prime) s += v;
    return s;
  }
  double total_population() const {
    return total_susceptible() + total_i_a() + total_i_b();
  }
};

struct Violation {
  std::string code;
  std::string message;
};

// Maps an interaction type to its indicator flags and, for the three named
// variants, the forced alpha = 0 override.
std::pair<TransitionIndicators, std::optional<double>> build_interaction_flags(
    const InteractionType& itype);

// Effective re-susceptible rate after the interaction-type override.
double effective_alpha(const Scenario& scn);

// Initial compartments at t = 0. Predator seeds leave S' first and fall back
// to S*; with delay > 0 the predators are not yet present (they are injected
// at t = d by the engines). Throws Error("NegativeCompartment") when the
// configuration is infeasible.
StateVector init_state(const Scenario& scn);

// Non-throwing invariant check; empty result means the scenario is valid.
std::vector<Violation> validate_scenario(const Scenario& scn);

// Throws Error("InvalidScenario") listing all violations.
void require_valid(const Scenario& scn);

// Structured-text (JSON) serialization. Field names match the scenario
// definition one-to-one; unknown keys are an error.
Scenario scenario_from_json_text(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json_text(const Scenario& scn);
void save_scenario(const Scenario& scn, const std::string& path);

}  // namespace wormsim
