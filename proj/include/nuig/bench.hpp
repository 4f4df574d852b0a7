#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nuig/convergence.hpp"
#include "nuig/error.hpp"
#include "nuig/text.hpp"

namespace nuig {

struct BenchJob {
  SchedulerConfig scheduler;
  std::size_t m = 0;
};

struct BenchReport {
  std::string label;
  BenchJob job;
  /// Free-form configuration echo (seed, rule, batch size, threads, ...).
  std::vector<std::pair<std::string, std::string>> config;
  std::size_t warmup_runs = 0;
  std::size_t measured_runs = 0;
  std::vector<double> run_seconds;
  std::vector<double> probe_seconds;
  double median_seconds = 0.0;
  double mad_seconds = 0.0;
  double normalized_latency = 1.0;
  WorkCounters work;
  /// Set when an attribution failed; the report then holds the runs completed so far.
  std::optional<std::string> error;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median absolute deviation around the median.
inline double mad_of(const std::vector<double>& v) {
  const double med = median_of(v);
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - med));
  return median_of(std::move(dev));
}

inline std::vector<std::pair<std::string, std::string>> default_echo(const BenchJob& job) {
  const auto& e = job.scheduler.engine;
  return {{"scheduler", job.scheduler.is_uniform() ? "uniform" : "nonuniform"},
          {"n_int", std::to_string(job.scheduler.is_uniform() ? 0 : job.scheduler.n_int)},
          {"m", std::to_string(job.m)},
          {"rule", std::string(to_string(e.rule))},
          {"batch_size", std::to_string(e.batch_size)},
          {"threads", std::to_string(e.threads)},
          {"min_steps", std::to_string(job.scheduler.min_steps)}};
}

/// Runs `warmup` unmeasured attributions, then `repeats` timed ones. Only the
/// attribution call is timed. Work counters must match across every run.
inline BenchReport benchmark(const DifferentiableModel& model, const PathSpec& path, const BenchJob& job,
                             std::size_t warmup, std::size_t repeats,
                             std::vector<std::pair<std::string, std::string>> extra_echo = {}) {
  if (repeats < 3) fail(ErrorKind::config, "benchmark needs at least 3 measured runs");
  BenchReport rep;
  rep.label = job.scheduler.label() + " m=" + std::to_string(job.m);
  rep.job = job;
  rep.config = default_echo(job);
  rep.config.insert(rep.config.end(), extra_echo.begin(), extra_echo.end());
  rep.warmup_runs = warmup;

  std::optional<WorkCounters> first;
  auto check_counters = [&](const WorkCounters& w) {
    if (!first) {
      first = w;
    } else if (!(*first == w)) {
      fail(ErrorKind::measurement, "work counters changed between runs of " + rep.label);
    }
  };

  try {
    for (std::size_t i = 0; i < warmup; ++i) check_counters(attribute(model, path, job.scheduler, job.m).work);
    for (std::size_t i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const AttributionResult r = attribute(model, path, job.scheduler, job.m);
      const auto t1 = std::chrono::steady_clock::now();
      check_counters(r.work);
      rep.run_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
      rep.probe_seconds.push_back(r.probe_time ? std::chrono::duration<double>(*r.probe_time).count() : 0.0);
      ++rep.measured_runs;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::measurement) throw;
    rep.error = e.what();
  }
  if (first) rep.work = *first;
  rep.median_seconds = median_of(rep.run_seconds);
  rep.mad_seconds = mad_of(rep.run_seconds);
  return rep;
}

struct OverheadEstimate {
  /// stage-1 time / total time over the measured runs.
  double measured = 0.0;
  /// n_probe_forward / (n_forward + n_backward).
  double counter_based = 0.0;
};

inline OverheadEstimate overhead_fraction(const BenchReport& report) {
  double total = 0.0, probe = 0.0;
  for (double t : report.run_seconds) total += t;
  for (double t : report.probe_seconds) probe += t;
  if (!(total > 0.0)) fail(ErrorKind::measurement, "total measured time is zero for " + report.label);
  OverheadEstimate est;
  est.measured = probe / total;
  const std::size_t passes = report.work.n_forward + report.work.n_backward;
  est.counter_based = passes ? static_cast<double>(report.work.n_probe_forward) / static_cast<double>(passes) : 0.0;
  return est;
}

/// Divides every median latency by the smallest one in the set.
inline void normalize_latencies(std::span<BenchReport> reports) {
  if (reports.empty()) fail(ErrorKind::config, "no reports to normalize");
  double fastest = reports.front().median_seconds;
  for (const auto& r : reports) fastest = std::min(fastest, r.median_seconds);
  if (!(fastest > 0.0)) fail(ErrorKind::measurement, "fastest median latency is zero");
  for (auto& r : reports) r.normalized_latency = r.median_seconds / fastest;
}

inline constexpr const char* kBenchCsvHeader =
    "label,scheduler,n_int,m,rule,batch_size,threads,warmup_runs,measured_runs,median_s,mad_s,"
    "normalized_latency,n_forward,n_backward,n_probe_forward,overhead_measured,overhead_counter";

inline void write_bench_csv(std::ostream& os, std::span<const BenchReport> reports) {
  os << kBenchCsvHeader << '\n';
  for (const auto& r : reports) {
    const auto& e = r.job.scheduler.engine;
    std::string overhead_m = "NA", overhead_c = "NA";
    if (!r.run_seconds.empty()) {
      const auto o = overhead_fraction(r);
      overhead_m = text::format_real(o.measured);
      overhead_c = text::format_real(o.counter_based);
    }
    os << r.label << ',' << (r.job.scheduler.is_uniform() ? "uniform" : "nonuniform") << ','
       << (r.job.scheduler.is_uniform() ? 0 : r.job.scheduler.n_int) << ',' << r.job.m << ',' << to_string(e.rule)
       << ',' << e.batch_size << ',' << e.threads << ',' << r.warmup_runs << ',' << r.measured_runs << ','
       << text::format_real(r.median_seconds) << ',' << text::format_real(r.mad_seconds) << ','
       << text::format_real(r.normalized_latency) << ',' << r.work.n_forward << ',' << r.work.n_backward << ','
       << r.work.n_probe_forward << ',' << overhead_m << ',' << overhead_c << '\n';
  }
}

}  // namespace nuig
