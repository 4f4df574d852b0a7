#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nuig/error.hpp"
#include "nuig/model.hpp"
#include "nuig/tensor.hpp"

namespace nuig {

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Numerically stable softmax in place.
inline void softmax(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
}

/// Row-major matrix-vector product: out[r] = bias[r] + sum_c m[r*cols + c] * x[c].
inline std::vector<double> affine(std::span<const double> m, std::span<const double> bias,
                                  std::span<const double> x) {
  const std::size_t rows = bias.size();
  const std::size_t cols = x.size();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = bias[r] + dot(m.subspan(r * cols, cols), x);
  return out;
}

inline void require_size(const std::string& model, const char* what, std::size_t got, std::size_t want) {
  if (got != want) {
    fail(ErrorKind::shape, model + " " + what + " has " + std::to_string(got) + " values, expected " +
                               std::to_string(want));
  }
}

inline void require_finite(const std::string& model, std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::domain, model + " parameters must be finite");
  }
}

}  // namespace detail

/// Adapts a per-sample model (value + gradient on one input) to the batched
/// contract. Batch members are evaluated in order and independently.
template <class Derived>
class PointwiseModel : public DifferentiableModel {
 public:
  const Shape& input_shape() const final { return input_shape_; }

  std::vector<double> forward_batch(std::span<const Tensor> inputs, TargetSpec target) const final {
    check_target(target);
    check_inputs(inputs);
    std::vector<double> out;
    out.reserve(inputs.size());
    for (const Tensor& x : inputs) out.push_back(self().value(x.values(), target.class_index));
    return out;
  }

  std::vector<Tensor> grad_batch(std::span<const Tensor> inputs, TargetSpec target) const final {
    check_target(target);
    check_inputs(inputs);
    std::vector<Tensor> out;
    out.reserve(inputs.size());
    for (const Tensor& x : inputs) {
      Tensor g(input_shape_);
      self().gradient(x.values(), target.class_index, g.values());
      out.push_back(std::move(g));
    }
    return out;
  }

  std::size_t input_size() const { return shape_numel(input_shape_); }

 protected:
  explicit PointwiseModel(Shape input_shape) : input_shape_(std::move(input_shape)) {
    if (input_shape_.empty() || shape_numel(input_shape_) == 0) {
      fail(ErrorKind::shape, "model input shape must be non-empty with positive dimensions");
    }
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }

  Shape input_shape_;
};

/// softmax(W x + b)[c], W is C x D row-major.
class LinearSoftmax : public PointwiseModel<LinearSoftmax> {
 public:
  LinearSoftmax(Shape input_shape, std::size_t classes, std::vector<double> weights, std::vector<double> bias,
                OutputKind output = OutputKind::probability)
      : PointwiseModel(std::move(input_shape)),
        classes_(classes),
        weights_(std::move(weights)),
        bias_(std::move(bias)),
        output_(output) {
    if (classes_ == 0) fail(ErrorKind::shape, "LinearSoftmax needs at least one class");
    detail::require_size(name(), "weights", weights_.size(), classes_ * input_size());
    detail::require_size(name(), "bias", bias_.size(), classes_);
    detail::require_finite(name(), weights_);
    detail::require_finite(name(), bias_);
  }

  std::string name() const override { return "LinearSoftmax"; }
  std::size_t num_classes() const override { return classes_; }

  std::span<const double> weights() const { return weights_; }
  std::span<const double> bias() const { return bias_; }
  OutputKind output() const { return output_; }

  double value(std::span<const double> x, std::size_t c) const {
    std::vector<double> z = detail::affine(weights_, bias_, x);
    if (output_ == OutputKind::logit) return z[c];
    detail::softmax(z);
    return z[c];
  }

  void gradient(std::span<const double> x, std::size_t c, std::span<double> g) const {
    const std::size_t d = input_size();
    if (output_ == OutputKind::logit) {
      std::copy_n(weights_.begin() + static_cast<std::ptrdiff_t>(c * d), d, g.begin());
      return;
    }
    std::vector<double> p = detail::affine(weights_, bias_, x);
    detail::softmax(p);
    // dp_c/dx = p_c * (W_c - sum_k p_k W_k)
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t k = 0; k < classes_; ++k) {
      const double coeff = p[c] * ((k == c ? 1.0 : 0.0) - p[k]);
      for (std::size_t i = 0; i < d; ++i) g[i] += coeff * weights_[k * d + i];
    }
  }

 private:
  std::size_t classes_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  OutputKind output_;
};

/// sigmoid(gain * (w . x + bias)), a single-class probability.
class LogisticScalar : public PointwiseModel<LogisticScalar> {
 public:
  LogisticScalar(Shape input_shape, std::vector<double> weights, double bias, double gain)
      : PointwiseModel(std::move(input_shape)), weights_(std::move(weights)), bias_(bias), gain_(gain) {
    detail::require_size(name(), "weights", weights_.size(), input_size());
    detail::require_finite(name(), weights_);
    const double scalars[] = {bias_, gain_};
    detail::require_finite(name(), scalars);
  }

  std::string name() const override { return "LogisticScalar"; }
  std::size_t num_classes() const override { return 1; }

  std::span<const double> weights() const { return weights_; }
  double bias() const { return bias_; }
  double gain() const { return gain_; }

  double value(std::span<const double> x, std::size_t) const {
    return detail::sigmoid(gain_ * (detail::dot(weights_, x) + bias_));
  }

  void gradient(std::span<const double> x, std::size_t, std::span<double> g) const {
    const double p = value(x, 0);
    const double scale = gain_ * p * (1.0 - p);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * weights_[i];
  }

 private:
  std::vector<double> weights_;
  double bias_;
  double gain_;
};

/// sigmoid(gain * (x - threshold)) on a single feature. With a large gain the
/// probability switches inside a narrow window around the threshold.
class SharpSigmoid1D : public PointwiseModel<SharpSigmoid1D> {
 public:
  SharpSigmoid1D(double gain, double threshold)
      : PointwiseModel(Shape{1}), gain_(gain), threshold_(threshold) {
    const double scalars[] = {gain_, threshold_};
    detail::require_finite(name(), scalars);
  }

  std::string name() const override { return "SharpSigmoid1D"; }
  std::size_t num_classes() const override { return 1; }

  double gain() const { return gain_; }
  double threshold() const { return threshold_; }

  double value(std::span<const double> x, std::size_t) const {
    return detail::sigmoid(gain_ * (x[0] - threshold_));
  }

  void gradient(std::span<const double> x, std::size_t, std::span<double> g) const {
    const double p = value(x, 0);
    g[0] = gain_ * p * (1.0 - p);
  }

 private:
  double gain_;
  double threshold_;
};

/// softmax(W2 tanh(W1 x + b1) + b2)[c]; W1 is H x D, W2 is C x H.
class MLP2 : public PointwiseModel<MLP2> {
 public:
  MLP2(Shape input_shape, std::size_t hidden, std::size_t classes, std::vector<double> w1, std::vector<double> b1,
       std::vector<double> w2, std::vector<double> b2, OutputKind output = OutputKind::probability)
      : PointwiseModel(std::move(input_shape)),
        hidden_(hidden),
        classes_(classes),
        w1_(std::move(w1)),
        b1_(std::move(b1)),
        w2_(std::move(w2)),
        b2_(std::move(b2)),
        output_(output) {
    if (hidden_ == 0 || classes_ == 0) fail(ErrorKind::shape, "MLP2 needs positive hidden and class counts");
    detail::require_size(name(), "W1", w1_.size(), hidden_ * input_size());
    detail::require_size(name(), "b1", b1_.size(), hidden_);
    detail::require_size(name(), "W2", w2_.size(), classes_ * hidden_);
    detail::require_size(name(), "b2", b2_.size(), classes_);
    for (const auto* v : {&w1_, &b1_, &w2_, &b2_}) detail::require_finite(name(), *v);
  }

  std::string name() const override { return "MLP2"; }
  std::size_t num_classes() const override { return classes_; }

  std::size_t hidden() const { return hidden_; }
  std::span<const double> w1() const { return w1_; }
  std::span<const double> b1() const { return b1_; }
  std::span<const double> w2() const { return w2_; }
  std::span<const double> b2() const { return b2_; }
  OutputKind output() const { return output_; }

  double value(std::span<const double> x, std::size_t c) const {
    std::vector<double> z = logits(hidden_activations(x));
    if (output_ == OutputKind::logit) return z[c];
    detail::softmax(z);
    return z[c];
  }

  void gradient(std::span<const double> x, std::size_t c, std::span<double> g) const {
    const std::vector<double> h = hidden_activations(x);
    std::vector<double> dz(classes_, 0.0);
    if (output_ == OutputKind::logit) {
      dz[c] = 1.0;
    } else {
      std::vector<double> p = logits(h);
      detail::softmax(p);
      for (std::size_t k = 0; k < classes_; ++k) dz[k] = p[c] * ((k == c ? 1.0 : 0.0) - p[k]);
    }
    // back through W2 and tanh
    std::vector<double> da(hidden_, 0.0);
    for (std::size_t k = 0; k < classes_; ++k) {
      for (std::size_t j = 0; j < hidden_; ++j) da[j] += dz[k] * w2_[k * hidden_ + j];
    }
    for (std::size_t j = 0; j < hidden_; ++j) da[j] *= 1.0 - h[j] * h[j];
    const std::size_t d = input_size();
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
      for (std::size_t i = 0; i < d; ++i) g[i] += da[j] * w1_[j * d + i];
    }
  }

 private:
  std::vector<double> hidden_activations(std::span<const double> x) const {
    std::vector<double> a = detail::affine(w1_, b1_, x);
    for (double& v : a) v = std::tanh(v);
    return a;
  }

  std::vector<double> logits(const std::vector<double>& h) const { return detail::affine(w2_, b2_, h); }

  std::size_t hidden_;
  std::size_t classes_;
  std::vector<double> w1_, b1_, w2_, b2_;
  OutputKind output_;
};

/// w . x + bias used directly as a probability. Inputs that push the output
/// outside [0,1] are rejected, so completeness holds exactly on its domain.
class AffineProbability : public PointwiseModel<AffineProbability> {
 public:
  AffineProbability(Shape input_shape, std::vector<double> weights, double bias)
      : PointwiseModel(std::move(input_shape)), weights_(std::move(weights)), bias_(bias) {
    detail::require_size(name(), "weights", weights_.size(), input_size());
    detail::require_finite(name(), weights_);
    const double scalars[] = {bias_};
    detail::require_finite(name(), scalars);
  }

  std::string name() const override { return "AffineProbability"; }
  std::size_t num_classes() const override { return 1; }

  std::span<const double> weights() const { return weights_; }
  double bias() const { return bias_; }

  double value(std::span<const double> x, std::size_t) const {
    const double p = detail::dot(weights_, x) + bias_;
    if (p < 0.0 || p > 1.0) fail(ErrorKind::domain, "AffineProbability output " + std::to_string(p) + " leaves [0,1]");
    return p;
  }

  void gradient(std::span<const double> x, std::size_t, std::span<double> g) const {
    (void)value(x, 0);
    std::copy(weights_.begin(), weights_.end(), g.begin());
  }

 private:
  std::vector<double> weights_;
  double bias_;
};

using BuiltinModel = std::variant<LinearSoftmax, LogisticScalar, SharpSigmoid1D, MLP2, AffineProbability>;

inline const DifferentiableModel& as_model(const BuiltinModel& model) {
  return std::visit([](const auto& m) -> const DifferentiableModel& { return m; }, model);
}

}  // namespace nuig
