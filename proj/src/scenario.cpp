#include "wormsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace wormsim {

namespace {

bool finite(double v) { return std::isfinite(v); }

bool matrix_ok(const std::vector<std::vector<double>>& m, std::size_t g) {
  if (m.empty()) return true;
  if (m.size() != g) return false;
  for (const auto& row : m)
    if (row.size() != g) return false;
  return true;
}

}  // namespace

std::pair<TransitionIndicators, std::optional<double>> build_interaction_flags(
    const InteractionType& itype) {
  using Kind = InteractionType::Kind;
  TransitionIndicators f;
  switch (itype.kind) {
    case Kind::AggressiveOneSided:
      f = {1, 1, 1, 1, 1, 1, 1, 1};
      return {f, 0.0};
    case Kind::ConservativeOneSided:
      // Predator terminates but never vaccinates: the four S -> I_B flags
      // stay 0.
      f = {1, 1, 0, 0, 0, 0, 1, 1};
      return {f, 0.0};
    case Kind::AggressiveTwoSided:
      // Both worms vaccinate and block each other; no termination.
      f = {1, 1, 1, 1, 1, 1, 0, 0};
      return {f, 0.0};
    case Kind::Custom:
      return {itype.custom, std::nullopt};
  }
  throw Error("InternalError", "unreachable interaction kind");
}

double effective_alpha(const Scenario& scn) {
  auto [flags, alpha_override] = build_interaction_flags(scn.interaction);
  (void)flags;
  return alpha_override.value_or(scn.resusceptible_rate);
}

StateVector init_state(const Scenario& scn) {
  const std::size_t g = scn.group_count();
  StateVector st;
  st.s_star.assign(g, 0.0);
  st.s_prime.assign(g, 0.0);
  st.i_a.assign(g, 0.0);
  st.i_b.assign(g, 0.0);
  st.r = 0.0;
  st.t = 0.0;

  const double c = scn.cooperation;
  const double i = scn.immunization;
  for (std::size_t n = 0; n < g; ++n) {
    const double nn = static_cast<double>(scn.groups[n].n_nodes);
    const double prey0 = n < scn.initial_prey.size() ? scn.initial_prey[n] : 0.0;
    const double pred0 =
        n < scn.initial_predator.size() ? scn.initial_predator[n] : 0.0;

    double s_star = c * (1.0 - i) * nn - prey0;
    double s_prime = c * i * nn;
    if (s_star < 0.0)
      throw Error("NegativeCompartment",
                  "group " + std::to_string(n) + ": S*(0) = " +
                      std::to_string(s_star) + " < 0");

    if (scn.delay == 0.0 && pred0 > 0.0) {
      // Predator hosts leave the prey-immune pool first, then S*.
      const double from_prime = std::min(pred0, s_prime);
      const double from_star = pred0 - from_prime;
      s_prime -= from_prime;
      s_star -= from_star;
      if (s_star < 0.0)
        throw Error("NegativeCompartment",
                    "group " + std::to_string(n) +
                        ": predator seeds exceed susceptible pool");
      st.i_b[n] = pred0;
    }
    st.s_star[n] = s_star;
    st.s_prime[n] = s_prime;
    st.i_a[n] = prey0;
  }
  return st;
}

std::vector<Violation> validate_scenario(const Scenario& scn) {
  std::vector<Violation> out;
  auto add = [&out](const std::string& code, const std::string& msg) {
    out.push_back({code, msg});
  };

  const std::size_t g = scn.group_count();
  if (g == 0) {
    add("EmptyGroups", "at least one group is required");
    return out;
  }

  for (std::size_t n = 0; n < g; ++n) {
    if (scn.groups[n].n_nodes < 0)
      add("NegativeNodeCount", "groups[" + std::to_string(n) + "].n_nodes");
    if (!finite(scn.groups[n].intra_rate) || scn.groups[n].intra_rate < 0.0)
      add("NegativeRate", "groups[" + std::to_string(n) + "].intra_rate");
  }

  if (!matrix_ok(scn.inter_rates, g)) {
    add("BadMatrixShape", "inter_rates must be a " + std::to_string(g) + "x" +
                              std::to_string(g) + " matrix");
  } else if (!scn.inter_rates.empty()) {
    for (std::size_t n = 0; n < g; ++n) {
      if (scn.inter_rates[n][n] != 0.0)
        add("BadMatrixShape",
            "inter_rates[" + std::to_string(n) + "][" + std::to_string(n) +
                "] must be 0 (intra rates live in groups[].intra_rate)");
      for (std::size_t m = n + 1; m < g; ++m) {
        if (scn.inter_rates[n][m] != scn.inter_rates[m][n])
          add("AsymmetricRates", "inter_rates[" + std::to_string(n) + "][" +
                                     std::to_string(m) + "]");
        if (!finite(scn.inter_rates[n][m]) || scn.inter_rates[n][m] < 0.0)
          add("NegativeRate", "inter_rates[" + std::to_string(n) + "][" +
                                  std::to_string(m) + "]");
      }
    }
  }

  auto check_prob = [&](double v, const std::string& name) {
    if (!finite(v) || v < 0.0 || v > 1.0) add("ProbabilityOutOfRange", name);
  };
  check_prob(scn.cooperation, "cooperation");
  check_prob(scn.immunization, "immunization");
  check_prob(scn.on_prob, "on_prob");

  auto check_nonneg = [&](double v, const std::string& name) {
    if (!finite(v) || v < 0.0) add("NegativeRate", name);
  };
  check_nonneg(scn.resusceptible_rate, "resusceptible_rate");
  check_nonneg(scn.manual_removal_rate, "manual_removal_rate");
  check_nonneg(scn.manual_vaccination_rate, "manual_vaccination_rate");
  if (!finite(scn.delay) || scn.delay < 0.0) add("NegativeDelay", "delay");
  if (!finite(scn.horizon) || scn.horizon < 0.0)
    add("NegativeHorizon", "horizon");
  if (!finite(scn.on_interval) || scn.on_interval <= 0.0)
    add("NegativeOnInterval", "on_interval");

  for (const auto* m :
       {&scn.group_transitions.s_star, &scn.group_transitions.s_prime,
        &scn.group_transitions.i_a, &scn.group_transitions.i_b}) {
    if (!matrix_ok(*m, g)) {
      add("BadMatrixShape", "group_transitions matrices must be " +
                                std::to_string(g) + "x" + std::to_string(g));
      continue;
    }
    for (const auto& row : *m)
      for (double v : row)
        if (!finite(v) || v < 0.0) add("NegativeRate", "group_transitions");
  }

  auto check_counts = [&](const std::vector<double>& v, const std::string& name) {
    if (v.size() > g) add("BadCountShape", name + " has more entries than groups");
    for (double x : v)
      if (!finite(x) || x < 0.0) add("NegativeInitialCount", name);
  };
  check_counts(scn.initial_prey, "initial_prey");
  check_counts(scn.initial_predator, "initial_predator");

  if (scn.interaction.kind == InteractionType::Kind::Custom) {
    const auto& f = scn.interaction.custom;
    for (int v : {f.k_s1_a, f.k_s2_a, f.k_s1_b, f.k_s2_b, f.k_sp1_b, f.k_sp2_b,
                  f.k_a1_b, f.k_a2_b})
      if (v != 0 && v != 1) {
        add("NonBinaryFlag", "interaction custom flags must be 0 or 1");
        break;
      }
  }

  double prev_time = -1.0;
  for (std::size_t k = 0; k < scn.batch_schedule.size(); ++k) {
    const auto& ev = scn.batch_schedule[k];
    if (!finite(ev.time) || ev.time < 0.0)
      add("NegativeEventTime", "batch_schedule[" + std::to_string(k) + "].time");
    if (ev.time < prev_time)
      add("UnsortedEvents", "batch_schedule[" + std::to_string(k) + "]");
    prev_time = ev.time;
    for (const auto* d : {&ev.d_s_star, &ev.d_s_prime, &ev.d_i_a, &ev.d_i_b})
      if (d->size() > g)
        add("BadDeltaShape", "batch_schedule[" + std::to_string(k) +
                                 "] delta has more entries than groups");
  }

  // Initial-compartment feasibility, reported rather than thrown.
  if (out.empty()) {
    try {
      init_state(scn);
    } catch (const Error& e) {
      add(e.code(), e.what());
    }
  }
  return out;
}

void require_valid(const Scenario& scn) {
  const auto violations = validate_scenario(scn);
  if (violations.empty()) return;
  std::ostringstream msg;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) msg << "; ";
    msg << violations[i].code << " (" << violations[i].message << ")";
  }
  throw Error("InvalidScenario", msg.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw Error("UnknownKey", "unknown key '" + it.key() + "' in " + where);
}

std::vector<double> read_number_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error("BadValue", where + " must be a list");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw Error("BadValue", where + " must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::vector<double>> read_matrix(const json& j,
                                             const std::string& where) {
  if (!j.is_array()) throw Error("BadValue", where + " must be a matrix");
  std::vector<std::vector<double>> out;
  for (const auto& row : j) out.push_back(read_number_list(row, where));
  return out;
}

InteractionType read_interaction(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "AggressiveOneSided") return InteractionType::aggressive_one_sided();
    if (s == "ConservativeOneSided")
      return InteractionType::conservative_one_sided();
    if (s == "AggressiveTwoSided") return InteractionType::aggressive_two_sided();
    throw Error("BadValue", "unknown interaction type '" + s + "'");
  }
  if (j.is_object() && j.contains("Custom")) {
    reject_unknown_keys(j, {"Custom"}, "interaction");
    const json& c = j.at("Custom");
    static const std::set<std::string> keys = {
        "k_s1_a", "k_s2_a", "k_s1_b", "k_s2_b",
        "k_sp1_b", "k_sp2_b", "k_a1_b", "k_a2_b"};
    reject_unknown_keys(c, keys, "interaction.Custom");
    TransitionIndicators f;
    auto rd = [&c](const char* key, int& dst) {
      if (c.contains(key)) dst = c.at(key).get<int>();
    };
    rd("k_s1_a", f.k_s1_a);
    rd("k_s2_a", f.k_s2_a);
    rd("k_s1_b", f.k_s1_b);
    rd("k_s2_b", f.k_s2_b);
    rd("k_sp1_b", f.k_sp1_b);
    rd("k_sp2_b", f.k_sp2_b);
    rd("k_a1_b", f.k_a1_b);
    rd("k_a2_b", f.k_a2_b);
    return InteractionType::custom_flags(f);
  }
  throw Error("BadValue",
              "interaction must be a type name or {\"Custom\": {...}}");
}

json interaction_to_json(const InteractionType& it) {
  using Kind = InteractionType::Kind;
  switch (it.kind) {
    case Kind::AggressiveOneSided:
      return "AggressiveOneSided";
    case Kind::ConservativeOneSided:
      return "ConservativeOneSided";
    case Kind::AggressiveTwoSided:
      return "AggressiveTwoSided";
    case Kind::Custom: {
      const auto& f = it.custom;
      return json{{"Custom",
                   {{"k_s1_a", f.k_s1_a},
                    {"k_s2_a", f.k_s2_a},
                    {"k_s1_b", f.k_s1_b},
                    {"k_s2_b", f.k_s2_b},
                    {"k_sp1_b", f.k_sp1_b},
                    {"k_sp2_b", f.k_sp2_b},
                    {"k_a1_b", f.k_a1_b},
                    {"k_a2_b", f.k_a2_b}}}};
    }
  }
  throw Error("InternalError", "unreachable interaction kind");
}

}  // namespace

Scenario scenario_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("ParseError", e.what());
  }
  if (!root.is_object()) throw Error("BadValue", "scenario must be an object");

  static const std::set<std::string> top_keys = {
      "groups", "inter_rates", "cooperation", "immunization", "on_prob",
      "on_interval", "delay", "resusceptible_rate", "manual_removal_rate",
      "manual_vaccination_rate", "group_transitions", "initial_prey",
      "initial_predator", "interaction", "batch_schedule", "horizon"};
  reject_unknown_keys(root, top_keys, "scenario");

  Scenario scn;
  if (!root.contains("groups"))
    throw Error("MissingKey", "scenario requires 'groups'");
  for (const auto& gj : root.at("groups")) {
    reject_unknown_keys(gj, {"n_nodes", "intra_rate"}, "groups[]");
    GroupParams gp;
    gp.n_nodes = gj.value("n_nodes", std::int64_t{0});
    gp.intra_rate = gj.value("intra_rate", 0.0);
    scn.groups.push_back(gp);
  }

  if (root.contains("inter_rates"))
    scn.inter_rates = read_matrix(root.at("inter_rates"), "inter_rates");
  scn.cooperation = root.value("cooperation", 1.0);
  scn.immunization = root.value("immunization", 0.0);
  scn.on_prob = root.value("on_prob", 1.0);
  scn.on_interval = root.value("on_interval", 600.0);
  scn.delay = root.value("delay", 0.0);
  scn.resusceptible_rate = root.value("resusceptible_rate", 0.0);
  scn.manual_removal_rate = root.value("manual_removal_rate", 0.0);
  scn.manual_vaccination_rate = root.value("manual_vaccination_rate", 0.0);

  if (root.contains("group_transitions")) {
    const json& gt = root.at("group_transitions");
    reject_unknown_keys(gt, {"s_star", "s_prime", "i_a", "i_b"},
                        "group_transitions");
    if (gt.contains("s_star"))
      scn.group_transitions.s_star =
          read_matrix(gt.at("s_star"), "group_transitions.s_star");
    if (gt.contains("s_prime"))
      scn.group_transitions.s_prime =
          read_matrix(gt.at("s_prime"), "group_transitions.s_prime");
    if (gt.contains("i_a"))
      scn.group_transitions.i_a =
          read_matrix(gt.at("i_a"), "group_transitions.i_a");
    if (gt.contains("i_b"))
      scn.group_transitions.i_b =
          read_matrix(gt.at("i_b"), "group_transitions.i_b");
  }

  if (root.contains("initial_prey"))
    scn.initial_prey = read_number_list(root.at("initial_prey"), "initial_prey");
  if (root.contains("initial_predator"))
    scn.initial_predator =
        read_number_list(root.at("initial_predator"), "initial_predator");
  if (root.contains("interaction"))
    scn.interaction = read_interaction(root.at("interaction"));

  if (root.contains("batch_schedule")) {
    for (const auto& ej : root.at("batch_schedule")) {
      reject_unknown_keys(ej, {"time", "deltas"}, "batch_schedule[]");
      BatchEvent ev;
      ev.time = ej.value("time", 0.0);
      if (ej.contains("deltas")) {
        const json& d = ej.at("deltas");
        reject_unknown_keys(d, {"s_star", "s_prime", "i_a", "i_b"},
                            "batch_schedule[].deltas");
        if (d.contains("s_star"))
          ev.d_s_star = read_number_list(d.at("s_star"), "deltas.s_star");
        if (d.contains("s_prime"))
          ev.d_s_prime = read_number_list(d.at("s_prime"), "deltas.s_prime");
        if (d.contains("i_a"))
          ev.d_i_a = read_number_list(d.at("i_a"), "deltas.i_a");
        if (d.contains("i_b"))
          ev.d_i_b = read_number_list(d.at("i_b"), "deltas.i_b");
      }
      scn.batch_schedule.push_back(std::move(ev));
    }
  }

  if (!root.contains("horizon"))
    throw Error("MissingKey", "scenario requires 'horizon'");
  scn.horizon = root.at("horizon").get<double>();
  return scn;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("FileNotFound", "cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json_text(buf.str());
}

std::string scenario_to_json_text(const Scenario& scn) {
  json root;
  root["groups"] = json::array();
  for (const auto& g : scn.groups)
    root["groups"].push_back(
        {{"n_nodes", g.n_nodes}, {"intra_rate", g.intra_rate}});
  if (!scn.inter_rates.empty()) root["inter_rates"] = scn.inter_rates;
  root["cooperation"] = scn.cooperation;
  root["immunization"] = scn.immunization;
  root["on_prob"] = scn.on_prob;
  root["on_interval"] = scn.on_interval;
  root["delay"] = scn.delay;
  root["resusceptible_rate"] = scn.resusceptible_rate;
  root["manual_removal_rate"] = scn.manual_removal_rate;
  root["manual_vaccination_rate"] = scn.manual_vaccination_rate;
  if (!scn.group_transitions.empty()) {
    json gt;
    if (!scn.group_transitions.s_star.empty())
      gt["s_star"] = scn.group_transitions.s_star;
    if (!scn.group_transitions.s_prime.empty())
      gt["s_prime"] = scn.group_transitions.s_prime;
    if (!scn.group_transitions.i_a.empty())
      gt["i_a"] = scn.group_transitions.i_a;
    if (!scn.group_transitions.i_b.empty())
      gt["i_b"] = scn.group_transitions.i_b;
    root["group_transitions"] = gt;
  }
  root["initial_prey"] = scn.initial_prey;
  root["initial_predator"] = scn.initial_predator;
  root["interaction"] = interaction_to_json(scn.interaction);
  if (!scn.batch_schedule.empty()) {
    root["batch_schedule"] = json::array();
    for (const auto& ev : scn.batch_schedule) {
      json d;
      if (!ev.d_s_star.empty()) d["s_star"] = ev.d_s_star;
      if (!ev.d_s_prime.empty()) d["s_prime"] = ev.d_s_prime;
      if (!ev.d_i_a.empty()) d["i_a"] = ev.d_i_a;
      if (!ev.d_i_b.empty()) d["i_b"] = ev.d_i_b;
      root["batch_schedule"].push_back({{"time", ev.time}, {"deltas", d}});
    }
  }
  root["horizon"] = scn.horizon;
  return root.dump(2) + "\n";
}

void save_scenario(const Scenario& scn, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("FileError", "cannot write scenario file: " + path);
  out << scenario_to_json_text(scn);
}

}  // namespace wormsim
