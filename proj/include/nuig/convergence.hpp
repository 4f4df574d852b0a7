#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nuig/attribution.hpp"
#include "nuig/error.hpp"
#include "nuig/scheduler.hpp"
#include "nuig/text.hpp"

namespace nuig {

struct SchedulerConfig {
  enum class Kind { uniform, nonuniform };

  Kind kind = Kind::uniform;
  std::size_t n_int = 1;
  EngineOptions engine;
  std::size_t min_steps = 1;

  static SchedulerConfig uniform(EngineOptions engine = {}) { return {Kind::uniform, 1, engine, 1}; }
  static SchedulerConfig nonuniform(std::size_t n_int, EngineOptions engine = {}, std::size_t min_steps = 1) {
    return {Kind::nonuniform, n_int, engine, min_steps};
  }

  bool is_uniform() const { return kind == Kind::uniform; }

  std::string label() const { return is_uniform() ? "uniform" : "nonuniform(" + std::to_string(n_int) + ")"; }

  /// Smallest step count the scheduler accepts.
  std::size_t min_feasible_steps() const { return is_uniform() ? 1 : n_int * min_steps; }
};

inline AttributionResult attribute(const DifferentiableModel& model, const PathSpec& path,
                                   const SchedulerConfig& cfg, std::size_t m) {
  if (cfg.is_uniform()) return uniform_ig(model, path, m, cfg.engine);
  return nonuniform_ig(model, path, m, cfg.n_int, cfg.engine, cfg.min_steps);
}

struct SweepPoint {
  std::size_t m = 0;
  double delta = 0.0;
  WorkCounters work;
};

struct ConvergenceSweep {
  std::string scheduler_id;
  std::vector<SweepPoint> points;
  std::optional<double> threshold;
  std::optional<std::size_t> steps_at_threshold;
};

/// One attribution per grid point, in ascending m.
inline ConvergenceSweep sweep(const DifferentiableModel& model, const PathSpec& path, const SchedulerConfig& cfg,
                              std::span<const std::size_t> m_grid, std::optional<double> threshold = std::nullopt) {
  if (m_grid.empty()) fail(ErrorKind::config, "sweep grid is empty");
  for (std::size_t i = 0; i < m_grid.size(); ++i) {
    if (i && m_grid[i] <= m_grid[i - 1]) fail(ErrorKind::config, "sweep grid must be strictly ascending");
    if (m_grid[i] < cfg.min_feasible_steps()) {
      fail(ErrorKind::config, "grid value m = " + std::to_string(m_grid[i]) + " is below the minimum " +
                                  std::to_string(cfg.min_feasible_steps()) + " for " + cfg.label());
    }
  }
  ConvergenceSweep s;
  s.scheduler_id = cfg.label();
  s.threshold = threshold;
  for (std::size_t m : m_grid) {
    const AttributionResult r = attribute(model, path, cfg, m);
    s.points.push_back({m, r.delta, r.work});
    if (threshold && !s.steps_at_threshold && r.delta <= *threshold) s.steps_at_threshold = m;
  }
  return s;
}

struct SearchOptions {
  std::size_t m_start = 16;
  std::size_t m_max = 8192;
};

struct ThresholdSearch {
  std::size_t steps = 0;
  AttributionResult result;
  /// Every evaluated point of the doubling grid, in order.
  std::vector<SweepPoint> trail;
};

/// Doubling search over m_start, 2 m_start, ... <= m_max for the first m whose
/// delta meets delta_th. Grid points below the scheduler's feasible minimum
/// are skipped. Throws ConvergenceError with the best point when none qualifies.
inline ThresholdSearch search_threshold(const DifferentiableModel& model, const PathSpec& path,
                                        const SchedulerConfig& cfg, double delta_th, SearchOptions opts = {}) {
  if (!(delta_th > 0.0)) fail(ErrorKind::config, "delta_th must be positive");
  if (opts.m_start == 0) fail(ErrorKind::config, "m_start must be at least 1");
  if (opts.m_max < opts.m_start) fail(ErrorKind::config, "m_max must not be below m_start");

  ThresholdSearch out;
  std::size_t best_m = 0;
  double best_delta = std::numeric_limits<double>::infinity();
  for (std::size_t m = opts.m_start; m <= opts.m_max; m *= 2) {
    if (m < cfg.min_feasible_steps()) continue;
    AttributionResult r = attribute(model, path, cfg, m);
    out.trail.push_back({m, r.delta, r.work});
    if (r.delta < best_delta) {
      best_delta = r.delta;
      best_m = m;
    }
    if (r.delta <= delta_th) {
      out.steps = m;
      out.result = std::move(r);
      return out;
    }
  }
  throw ConvergenceError(cfg.label() + " did not reach delta <= " + text::format_real(delta_th) +
                             " within m <= " + std::to_string(opts.m_max) + " (best delta " +
                             text::format_real(best_delta) + " at m = " + std::to_string(best_m) + ")",
                         best_m, best_delta);
}

inline std::size_t min_steps_for_threshold(const DifferentiableModel& model, const PathSpec& path,
                                           const SchedulerConfig& cfg, double delta_th, SearchOptions opts = {}) {
  return search_threshold(model, path, cfg, delta_th, opts).steps;
}

// ---------------------------------------------------------------------------
// Scheduler comparison table.

struct ComparisonRow {
  SchedulerConfig scheduler;
  double delta_th = 0.0;
  std::optional<std::size_t> steps;
  WorkCounters work;
  /// uniform forwards / this row's forwards at the same threshold.
  std::optional<double> reduction_ratio;
  /// stage-1 forwards / total forwards.
  double overhead_fraction = 0.0;
  std::optional<std::string> error;
  /// Filled by callers that time each cell.
  std::optional<double> normalized_latency;

  bool ok() const { return steps.has_value(); }
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.ok() ? 0 : 1;
    return n;
  }
};

/// For every threshold: the uniform scheduler first, then non-uniform with
/// each n_int. Convergence failures are recorded in the row, not thrown.
inline ComparisonTable compare_schedulers(const DifferentiableModel& model, const PathSpec& path,
                                          std::span<const double> delta_ths, std::span<const std::size_t> n_ints,
                                          const EngineOptions& engine = {}, SearchOptions search = {},
                                          std::size_t min_steps = 1) {
  if (delta_ths.empty() || n_ints.empty()) fail(ErrorKind::config, "comparison grids must be non-empty");
  ComparisonTable table;
  for (double th : delta_ths) {
    std::vector<SchedulerConfig> configs{SchedulerConfig::uniform(engine)};
    for (std::size_t n : n_ints) configs.push_back(SchedulerConfig::nonuniform(n, engine, min_steps));

    std::optional<std::size_t> uniform_forwards;
    for (const auto& cfg : configs) {
      ComparisonRow row;
      row.scheduler = cfg;
      row.delta_th = th;
      try {
        const ThresholdSearch s = search_threshold(model, path, cfg, th, search);
        row.steps = s.steps;
        row.work = s.result.work;
        row.overhead_fraction =
            static_cast<double>(row.work.n_probe_forward) / static_cast<double>(row.work.n_forward);
        if (cfg.is_uniform()) uniform_forwards = row.work.n_forward;
        if (uniform_forwards) {
          row.reduction_ratio = static_cast<double>(*uniform_forwards) / static_cast<double>(row.work.n_forward);
        }
      } catch (const ConvergenceError& e) {
        row.error = e.what();
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

inline constexpr const char* kComparisonCsvHeader =
    "scheduler,n_int,delta_th,steps,forwards,backwards,reduction_ratio,overhead_fraction";

/// Writes the comparison CSV. Failed cells print NA for every measured column;
/// uniform rows carry n_int = 0. With `with_latency` a trailing
/// normalized_latency column is added.
inline void write_comparison_csv(std::ostream& os, const ComparisonTable& table, bool with_latency = false) {
  os << kComparisonCsvHeader << (with_latency ? ",normalized_latency" : "") << '\n';
  for (const auto& r : table.rows) {
    os << (r.scheduler.is_uniform() ? "uniform" : "nonuniform") << ','
       << (r.scheduler.is_uniform() ? 0 : r.scheduler.n_int) << ',' << text::format_real(r.delta_th) << ',';
    if (r.ok()) {
      os << *r.steps << ',' << r.work.n_forward << ',' << r.work.n_backward << ','
         << (r.reduction_ratio ? text::format_real(*r.reduction_ratio) : "NA") << ','
         << text::format_real(r.overhead_fraction);
    } else {
      os << "NA,NA,NA,NA,NA";
    }
    if (with_latency) os << ',' << (r.normalized_latency ? text::format_real(*r.normalized_latency) : "NA");
    os << '\n';
  }
}

}  // namespace nuig
