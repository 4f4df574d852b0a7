#pragma once

// Key=value text reports. One `key=value` pair per line, keys are dotted
// lowercase identifiers, list values are space separated, lines starting
// with '#' are comments. Reals use the shortest round-trip decimal form.

#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nuig/attribution.hpp"
#include "nuig/bench.hpp"
#include "nuig/schedule.hpp"
#include "nuig/text.hpp"

namespace nuig {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline void write_schedule(std::ostream& os, const IntervalSchedule& s) {
  os << "schedule.n_int=" << s.intervals() << '\n'
     << "schedule.boundaries=" << text::join_reals(s.boundaries) << '\n'
     << "schedule.boundary_probs=" << text::join_reals(s.boundary_probs) << '\n'
     << "schedule.delta_f=" << text::join_reals(s.delta_f) << '\n'
     << "schedule.steps=" << text::join_ints<std::size_t>(s.steps) << '\n';
}

/// Wall time is left out so identical runs produce identical bytes.
inline void write_attribution_report(std::ostream& os, const AttributionResult& r, const KeyValues& header = {}) {
  os << "# attribution report\n";
  for (const auto& [k, v] : header) os << k << '=' << v << '\n';
  os << "delta=" << text::format_real(r.delta) << '\n'
     << "f_input=" << text::format_real(r.f_input) << '\n'
     << "f_baseline=" << text::format_real(r.f_baseline) << '\n'
     << "total_steps=" << r.total_steps << '\n'
     << "work.n_forward=" << r.work.n_forward << '\n'
     << "work.n_backward=" << r.work.n_backward << '\n'
     << "work.n_probe_forward=" << r.work.n_probe_forward << '\n';
  if (r.schedule) write_schedule(os, *r.schedule);
  os << "phi.shape=" << text::join_ints<std::size_t>(r.phi.shape()) << '\n'
     << "phi.sum=" << text::format_real(ordered_sum(r.phi.values())) << '\n'
     << "phi=" << text::join_reals(r.phi.values()) << '\n';
}

inline void write_bench_report(std::ostream& os, std::span<const BenchReport> reports) {
  os << "# benchmark report\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const std::string p = "job" + std::to_string(i) + ".";
    os << p << "label=" << r.label << '\n';
    for (const auto& [k, v] : r.config) os << p << "config." << k << '=' << v << '\n';
    os << p << "warmup_runs=" << r.warmup_runs << '\n'
       << p << "measured_runs=" << r.measured_runs << '\n'
       << p << "run_seconds=" << text::join_reals(r.run_seconds) << '\n'
       << p << "median_seconds=" << text::format_real(r.median_seconds) << '\n'
       << p << "mad_seconds=" << text::format_real(r.mad_seconds) << '\n'
       << p << "normalized_latency=" << text::format_real(r.normalized_latency) << '\n'
       << p << "work.n_forward=" << r.work.n_forward << '\n'
       << p << "work.n_backward=" << r.work.n_backward << '\n'
       << p << "work.n_probe_forward=" << r.work.n_probe_forward << '\n';
    if (!r.run_seconds.empty()) {
      const auto o = overhead_fraction(r);
      os << p << "overhead.measured=" << text::format_real(o.measured) << '\n'
         << p << "overhead.counter=" << text::format_real(o.counter_based) << '\n';
    }
    if (r.error) os << p << "error=" << *r.error << '\n';
  }
}

}  // namespace nuig
