#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <future>
#include <optional>
#include <vector>

#include "nuig/error.hpp"
#include "nuig/model.hpp"
#include "nuig/path.hpp"
#include "nuig/schedule.hpp"
#include "nuig/tensor.hpp"
#include "nuig/work_counters.hpp"

namespace nuig {

inline constexpr std::size_t kDefaultBatchSize = 16;

struct EngineOptions {
  QuadratureRule rule = QuadratureRule::midpoint;
  std::size_t batch_size = kDefaultBatchSize;
  /// Gradient batches evaluated concurrently. Accumulation order never changes.
  std::size_t threads = 1;

  void validate() const {
    if (batch_size == 0) fail(ErrorKind::config, "batch size must be at least 1");
    if (threads == 0) fail(ErrorKind::config, "thread count must be at least 1");
  }
};

struct AttributionResult {
  Tensor phi;
  double delta = 0.0;
  double f_input = 0.0;
  double f_baseline = 0.0;
  /// Requested step count m (m_total for the non-uniform scheduler).
  std::size_t total_steps = 0;
  std::optional<IntervalSchedule> schedule;
  WorkCounters work;
  std::optional<std::chrono::nanoseconds> wall_time;
  /// Time spent in the probe stage, non-uniform only.
  std::optional<std::chrono::nanoseconds> probe_time;
};

/// |sum_i phi_i - (f_input - f_baseline)|, summed in index order.
inline double completeness_delta(const Tensor& phi, double f_input, double f_baseline) {
  return std::abs(ordered_sum(phi.values()) - (f_input - f_baseline));
}

namespace detail {

/// Returns sum_k weight_k * grad(point_k), accumulated strictly in k order.
/// Points are packed into batches of `batch_size` with a ragged final batch.
inline Tensor weighted_gradient_sum(CountingEvaluator& eval, const PathSpec& path, const AlphaGrid& grid,
                                    const EngineOptions& opts) {
  const std::size_t n = grid.alphas.size();
  const std::size_t batches = (n + opts.batch_size - 1) / opts.batch_size;
  auto run_batch = [&](std::size_t b) {
    const std::size_t lo = b * opts.batch_size;
    const std::size_t hi = std::min(n, lo + opts.batch_size);
    const std::vector<Tensor> points =
        interpolate(path, std::span<const double>(grid.alphas).subspan(lo, hi - lo));
    return eval.model().grad_batch(points, path.target);
  };

  std::vector<std::vector<Tensor>> grads(batches);
  if (opts.threads <= 1 || batches <= 1) {
    for (std::size_t b = 0; b < batches; ++b) grads[b] = run_batch(b);
  } else {
    for (std::size_t start = 0; start < batches; start += opts.threads) {
      const std::size_t stop = std::min(batches, start + opts.threads);
      std::vector<std::future<std::vector<Tensor>>> pending;
      for (std::size_t b = start; b < stop; ++b) pending.push_back(std::async(std::launch::async, run_batch, b));
      for (std::size_t b = start; b < stop; ++b) grads[b] = pending[b - start].get();
    }
  }
  eval.record_gradients(n);

  Tensor acc(path.input.shape(), 0.0);
  std::size_t k = 0;
  for (const auto& batch : grads) {
    for (const Tensor& g : batch) {
      const double w = grid.weights[k++];
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * g[i];
    }
  }
  return acc;
}

/// (x - x') * accumulated gradient, elementwise.
inline Tensor scale_by_displacement(const PathSpec& path, const Tensor& accumulated) {
  const Tensor d = path.displacement();
  Tensor out(accumulated.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] * accumulated[i];
  return out;
}

inline Tensor segment_attribution(CountingEvaluator& eval, const PathSpec& path, const AlphaGrid& grid,
                                  const EngineOptions& opts) {
  return scale_by_displacement(path, weighted_gradient_sum(eval, path, grid, opts));
}

}  // namespace detail

/// Integrated gradients with m uniform steps over the whole path.
inline AttributionResult uniform_ig(const DifferentiableModel& model, const PathSpec& path, std::size_t m,
                                    const EngineOptions& opts = {}) {
  if (m == 0) fail(ErrorKind::domain, "uniform IG needs m >= 1");
  opts.validate();
  path.validate();
  const auto start = std::chrono::steady_clock::now();

  CountingEvaluator eval(model);
  const Tensor endpoints[] = {path.input, path.baseline};
  const std::vector<double> f = eval.forward(endpoints, path.target);

  const AlphaGrid grid = alpha_grid(opts.rule, 0.0, 1.0, m);
  AttributionResult r;
  r.phi = detail::segment_attribution(eval, path, grid, opts);
  r.f_input = f[0];
  r.f_baseline = f[1];
  r.delta = completeness_delta(r.phi, r.f_input, r.f_baseline);
  r.total_steps = m;
  r.work = eval.counters();
  r.wall_time = std::chrono::steady_clock::now() - start;
  return r;
}

}  // namespace nuig
