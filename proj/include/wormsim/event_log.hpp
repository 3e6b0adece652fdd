#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wormsim {

// Event semantics, with `a` the affected node and `b` the peer:
//
//   PreyInfect   a becomes prey-infected; b is the infecting node, or -1 for
//                an initial seed placement.
//   Vaccinate    b >= 0: predator b converts susceptible a to
//                predator-infected. b == -1: manual vaccination, a is removed.
//   Terminate    b >= 0: predator b terminates prey a (a becomes
//                predator-infected). b == -1: manual removal, a is removed.
//   Arrive       b == -1: a enters the network as a susceptible (initial
//                population or batch arrival). b == a: a became susceptible
//                again (re-susceptibility).
//   OnOffToggle  a flipped its on/off state; never affects metrics.
//   Inject       delayed predator activation on host a; a becomes
//                predator-infected whatever its previous compartment.
//   Depart       a left the network (negative batch delta).
enum class EventKind : std::uint8_t {
  PreyInfect,
  Vaccinate,
  Terminate,
  Arrive,
  OnOffToggle,
  Inject,
  Depart,
};

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::PreyInfect;
  std::int32_t node_a = -1;
  std::int32_t node_b = -1;
};

using EventLog = std::vector<Event>;

const char* event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

// CSV export with header `t,event,node_a,node_b`.
void write_event_log_csv(const EventLog& log, const std::string& path);
EventLog read_event_log_csv(const std::string& path);

}  // namespace wormsim
