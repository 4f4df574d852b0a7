#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nuig/model.hpp"
#include "nuig/tensor.hpp"

namespace nuig {

/// Platform-independent cost of an attribution. A gradient evaluation counts
/// as one forward and one backward pass; probe forwards are a subset of
/// n_forward.
struct WorkCounters {
  std::size_t n_forward = 0;
  std::size_t n_backward = 0;
  std::size_t n_probe_forward = 0;

  WorkCounters& operator+=(const WorkCounters& o) {
    n_forward += o.n_forward;
    n_backward += o.n_backward;
    n_probe_forward += o.n_probe_forward;
    return *this;
  }

  friend bool operator==(const WorkCounters&, const WorkCounters&) = default;
};

/// Model wrapper that records every pass it forwards to the underlying model.
class CountingEvaluator {
 public:
  explicit CountingEvaluator(const DifferentiableModel& model) : model_(model) {}

  const DifferentiableModel& model() const { return model_; }
  const WorkCounters& counters() const { return counters_; }

  std::vector<double> forward(std::span<const Tensor> inputs, TargetSpec target, bool probe = false) {
    auto out = model_.forward_batch(inputs, target);
    counters_.n_forward += inputs.size();
    if (probe) counters_.n_probe_forward += inputs.size();
    return out;
  }

  std::vector<Tensor> gradients(std::span<const Tensor> inputs, TargetSpec target) {
    auto out = model_.grad_batch(inputs, target);
    record_gradients(inputs.size());
    return out;
  }

  void record_gradients(std::size_t n) {
    counters_.n_forward += n;
    counters_.n_backward += n;
  }

 private:
  const DifferentiableModel& model_;
  WorkCounters counters_;
};

}  // namespace nuig
