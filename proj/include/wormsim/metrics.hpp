#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wormsim/event_log.hpp"
#include "wormsim/scenario.hpp"

namespace wormsim {

// The six-metric evaluation frame. ti/mi are node counts, the rest are
// seconds. A time metric whose defining event never happens inside the
// horizon is "not reached" (nullopt). tl always carries a value; when prey
// episodes were still open at the horizon it is a lower bound and
// tl_censored is set (which also censors al).
struct Metrics {
  double ti = 0.0;
  double mi = 0.0;
  double tl = 0.0;
  std::optional<double> al;
  std::optional<double> ta;
  std::optional<double> tr;
  bool tl_censored = false;
};

struct RelativeMetrics {
  double ti_rel = 0.0;
  double mi_rel = 0.0;
};

// Y = initial predators / initial prey. Throws Error("DivisionByZero") when
// the scenario seeds no prey.
double compute_y(const Scenario& scn);

// ti/N*, mi/N* with N* = c(1-i) * total nodes. Throws
// Error("DegenerateDenominator") when N* <= 0.
RelativeMetrics relative_metrics(const Metrics& m, const Scenario& scn);

struct LogMetricsOptions {
  // Overrides for replay runs, where arrivals come from the trace rather
  // than the scenario's batch schedule.
  std::optional<double> last_batch_time;
  std::optional<double> horizon;
};

// Single-pass metric extraction from a time-ordered event log.
Metrics metrics_from_log(const EventLog& log, const Scenario& scn,
                         const LogMetricsOptions& opts = {});

// Shared CSV row format: ti,mi,tl,al,ta,tr,ti_rel,mi_rel,y,censored_flags.
std::vector<std::string> metrics_csv_header();
std::vector<std::string> metrics_csv_row(const Metrics& m, const Scenario& scn);

}  // namespace wormsim
