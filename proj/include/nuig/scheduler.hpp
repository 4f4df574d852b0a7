#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "nuig/attribution.hpp"
#include "nuig/error.hpp"
#include "nuig/model.hpp"
#include "nuig/path.hpp"
#include "nuig/schedule.hpp"
#include "nuig/tensor.hpp"
#include "nuig/work_counters.hpp"

namespace nuig {

struct ProbeResult {
  std::vector<double> boundaries;
  std::vector<double> probs;
};

/// Equal-width boundaries k / n_int, k = 0..n_int. The endpoints are exact.
inline std::vector<double> equal_boundaries(std::size_t n_int) {
  std::vector<double> b(n_int + 1);
  for (std::size_t k = 0; k <= n_int; ++k) b[k] = static_cast<double>(k) / static_cast<double>(n_int);
  return b;
}

/// Stage 1: evaluates the model at the n_int + 1 interval boundaries. Each
/// evaluation is recorded as a probe forward pass.
inline ProbeResult probe_boundaries(CountingEvaluator& eval, const PathSpec& path, std::size_t n_int,
                                    std::size_t batch_size = kDefaultBatchSize) {
  if (n_int == 0) fail(ErrorKind::config, "n_int must be at least 1");
  if (batch_size == 0) fail(ErrorKind::config, "batch size must be at least 1");
  ProbeResult r;
  r.boundaries = equal_boundaries(n_int);
  r.probs.reserve(n_int + 1);
  for (std::size_t lo = 0; lo <= n_int; lo += batch_size) {
    const std::size_t count = std::min(batch_size, n_int + 1 - lo);
    const auto points = interpolate(path, std::span<const double>(r.boundaries).subspan(lo, count));
    const auto f = eval.forward(points, path.target, /*probe=*/true);
    r.probs.insert(r.probs.end(), f.begin(), f.end());
  }
  return r;
}

inline ProbeResult probe_boundaries(const DifferentiableModel& model, const PathSpec& path, std::size_t n_int) {
  CountingEvaluator eval(model);
  return probe_boundaries(eval, path, n_int);
}

/// |f(a_{j+1}) - f(a_j)| normalized by the sum over all intervals. All zeros
/// when the probability is constant along the path.
inline std::vector<double> normalized_changes(std::span<const double> boundary_probs) {
  if (boundary_probs.size() < 2) fail(ErrorKind::config, "need at least two boundary probabilities");
  std::vector<double> d(boundary_probs.size() - 1);
  for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::abs(boundary_probs[j + 1] - boundary_probs[j]);
  const double total = ordered_sum(d);
  if (total > 0.0) {
    for (double& v : d) v /= total;
  }
  return d;
}

namespace detail {

/// Largest-remainder apportionment of m_total by the given shares. Ties in
/// the remainder go to the lower interval index.
inline std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t m_total) {
  const std::size_t n = shares.size();
  const double share_sum = ordered_sum(shares);
  std::vector<std::size_t> steps(n);
  std::vector<double> remainder(n);
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double quota = static_cast<double>(m_total) * shares[j] / share_sum;
    const double whole = std::floor(quota);
    steps[j] = static_cast<std::size_t>(whole);
    remainder[j] = quota - whole;
    assigned += steps[j];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&remainder](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  // rounding noise can leave the floors slightly over or under m_total
  for (std::size_t k = 0; assigned < m_total; k = (k + 1) % n, ++assigned) ++steps[order[k]];
  for (std::size_t k = n; assigned > m_total;) {
    k = (k + n - 1) % n;
    if (steps[order[k]] > 0) {
      --steps[order[k]];
      --assigned;
    }
  }
  return steps;
}

}  // namespace detail

/// Splits m_total across intervals in proportion to sqrt of the normalized
/// change, then raises every interval to min_steps by taking steps from the
/// currently largest allocation. All-zero changes fall back to equal shares.
inline std::vector<std::size_t> allocate_from_changes(std::span<const double> delta_f, std::size_t m_total,
                                                      std::size_t min_steps = 1) {
  const std::size_t n = delta_f.size();
  if (n == 0) fail(ErrorKind::config, "no intervals to allocate");
  if (min_steps == 0) fail(ErrorKind::config, "min_steps must be at least 1");
  if (m_total < n * min_steps) {
    fail(ErrorKind::config, "m_total = " + std::to_string(m_total) + " cannot give " + std::to_string(n) +
                                " intervals at least " + std::to_string(min_steps) + " step(s) each");
  }
  std::vector<double> shares(n);
  for (std::size_t j = 0; j < n; ++j) shares[j] = std::sqrt(std::abs(delta_f[j]));
  if (!(ordered_sum(shares) > 0.0)) std::fill(shares.begin(), shares.end(), 1.0);

  std::vector<std::size_t> steps = detail::largest_remainder(shares, m_total);

  for (std::size_t j = 0; j < n; ++j) {
    while (steps[j] < min_steps) {
      std::size_t donor = n;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == j || steps[k] <= min_steps) continue;
        // among equal allocations the smaller change donates, which keeps the order of steps
        if (donor == n || steps[k] > steps[donor] ||
            (steps[k] == steps[donor] && std::abs(delta_f[k]) < std::abs(delta_f[donor]))) {
          donor = k;
        }
      }
      // feasibility was checked above, so a donor always exists
      --steps[donor];
      ++steps[j];
    }
  }
  return steps;
}

inline std::vector<std::size_t> allocate_steps(std::span<const double> boundary_probs, std::size_t m_total,
                                               std::size_t min_steps = 1) {
  return allocate_from_changes(normalized_changes(boundary_probs), m_total, min_steps);
}

/// Elementwise sum in segment order. The first segment is copied, not added
/// to zero, so a single segment comes back bit for bit.
inline Tensor stitch_segments(std::span<const Tensor> segments) {
  if (segments.empty()) fail(ErrorKind::shape, "no segments to stitch");
  Tensor out = segments.front();
  for (std::size_t s = 1; s < segments.size(); ++s) {
    if (segments[s].shape() != out.shape()) {
      fail(ErrorKind::shape, "segment " + std::to_string(s) + " has shape " + shape_to_string(segments[s].shape()) +
                                 ", expected " + shape_to_string(out.shape()));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += segments[s][i];
  }
  return out;
}

struct NonuniformOptions {
  EngineOptions engine;
  std::size_t min_steps = 1;
  /// Per-interval attributions are returned when set.
  bool keep_segments = false;
};

struct NonuniformResult {
  AttributionResult result;
  std::vector<Tensor> segments;
};

/// Two-stage attribution: probe the interval boundaries, allocate m_total
/// steps by sqrt of the probability change, integrate uniformly inside each
/// interval, then sum the interval attributions.
inline NonuniformResult nonuniform_ig_detailed(const DifferentiableModel& model, const PathSpec& path,
                                               std::size_t m_total, std::size_t n_int,
                                               const NonuniformOptions& opts) {
  if (n_int == 0) fail(ErrorKind::config, "n_int must be at least 1");
  if (m_total < n_int) fail(ErrorKind::config, "m_total must be at least n_int");
  opts.engine.validate();
  path.validate();
  const auto start = std::chrono::steady_clock::now();

  CountingEvaluator eval(model);
  IntervalSchedule schedule;
  {
    ProbeResult probe = probe_boundaries(eval, path, n_int, opts.engine.batch_size);
    schedule.boundaries = std::move(probe.boundaries);
    schedule.boundary_probs = std::move(probe.probs);
  }
  schedule.delta_f = normalized_changes(schedule.boundary_probs);
  schedule.steps = allocate_from_changes(schedule.delta_f, m_total, opts.min_steps);
  schedule.validate();
  const auto probe_done = std::chrono::steady_clock::now();

  std::vector<Tensor> segments;
  segments.reserve(n_int);
  for (std::size_t j = 0; j < n_int; ++j) {
    const AlphaGrid grid =
        alpha_grid(opts.engine.rule, schedule.boundaries[j], schedule.boundaries[j + 1], schedule.steps[j]);
    segments.push_back(detail::segment_attribution(eval, path, grid, opts.engine));
  }

  NonuniformResult out;
  AttributionResult& r = out.result;
  r.phi = stitch_segments(segments);
  // probes at alpha = 0 and 1 double as the completeness endpoints
  r.f_baseline = schedule.boundary_probs.front();
  r.f_input = schedule.boundary_probs.back();
  r.delta = completeness_delta(r.phi, r.f_input, r.f_baseline);
  r.total_steps = m_total;
  r.schedule = std::move(schedule);
  r.work = eval.counters();
  const auto end = std::chrono::steady_clock::now();
  r.wall_time = end - start;
  r.probe_time = probe_done - start;
  if (opts.keep_segments) out.segments = std::move(segments);
  return out;
}

inline AttributionResult nonuniform_ig(const DifferentiableModel& model, const PathSpec& path, std::size_t m_total,
                                       std::size_t n_int, const EngineOptions& engine = {},
                                       std::size_t min_steps = 1) {
  return nonuniform_ig_detailed(model, path, m_total, n_int, NonuniformOptions{engine, min_steps, false}).result;
}

}  // namespace nuig
