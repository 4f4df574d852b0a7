#pragma once

#include <vector>

#include "nuig/error.hpp"
#include "nuig/model.hpp"
#include "nuig/tensor.hpp"

namespace nuig {

/// Central-difference gradient estimate (f(x + h e_i) - f(x - h e_i)) / 2h.
/// All 2D perturbed inputs go through the model as one batch.
inline Tensor finite_difference_gradient(const DifferentiableModel& model, const Tensor& input, TargetSpec target,
                                         double h) {
  if (!(h > 0.0)) fail(ErrorKind::domain, "finite-difference step must be positive");
  const std::size_t d = input.size();
  std::vector<Tensor> probes;
  probes.reserve(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    Tensor plus = input;
    Tensor minus = input;
    plus[i] += h;
    minus[i] -= h;
    probes.push_back(std::move(plus));
    probes.push_back(std::move(minus));
  }
  const std::vector<double> f = model.forward_batch(probes, target);
  Tensor g(input.shape());
  for (std::size_t i = 0; i < d; ++i) g[i] = (f[2 * i] - f[2 * i + 1]) / (2.0 * h);
  return g;
}

}  // namespace nuig
