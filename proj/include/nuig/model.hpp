#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nuig/error.hpp"
#include "nuig/tensor.hpp"

namespace nuig {

struct TargetSpec {
  std::size_t class_index = 0;
};

/// Which scalar of the model is differentiated. Probability is the default;
/// logit is only offered by the softmax models and leaves the [0,1] range.
enum class OutputKind { probability, logit };

/// Scalar-output model with an input gradient, evaluated in batches.
///
/// Implementations must be pure: equal inputs give bitwise-equal outputs, and
/// a batch gives the same values as evaluating its members one at a time.
/// Instances are immutable after construction and may be shared across threads.
class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual const Shape& input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::string name() const = 0;

  /// One target-class output per input.
  virtual std::vector<double> forward_batch(std::span<const Tensor> inputs, TargetSpec target) const = 0;

  /// Gradient of the target-class output with respect to each input, shaped like the input.
  virtual std::vector<Tensor> grad_batch(std::span<const Tensor> inputs, TargetSpec target) const = 0;

  double forward(const Tensor& input, TargetSpec target) const {
    return forward_batch(std::span<const Tensor>(&input, 1), target).front();
  }

  Tensor grad(const Tensor& input, TargetSpec target) const {
    return std::move(grad_batch(std::span<const Tensor>(&input, 1), target).front());
  }

  void check_target(TargetSpec target) const {
    if (target.class_index >= num_classes()) {
      fail(ErrorKind::target, "class index " + std::to_string(target.class_index) + " out of range for " +
                                  name() + " with " + std::to_string(num_classes()) + " classes");
    }
  }

  void check_inputs(std::span<const Tensor> inputs) const {
    for (const Tensor& x : inputs) {
      if (x.shape() != input_shape()) {
        fail(ErrorKind::shape, name() + " expects input shape " + shape_to_string(input_shape()) + ", got " +
                                   shape_to_string(x.shape()));
      }
    }
  }
};

}  // namespace nuig
