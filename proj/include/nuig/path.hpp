#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nuig/error.hpp"
#include "nuig/model.hpp"
#include "nuig/tensor.hpp"

namespace nuig {

/// Straight line from baseline (alpha = 0) to input (alpha = 1).
struct PathSpec {
  Tensor input;
  Tensor baseline;
  TargetSpec target;

  void validate() const {
    if (input.shape() != baseline.shape()) {
      fail(ErrorKind::shape, "input shape " + shape_to_string(input.shape()) + " differs from baseline shape " +
                                 shape_to_string(baseline.shape()));
    }
  }

  /// x - x', the factor applied to accumulated gradients.
  Tensor displacement() const {
    validate();
    Tensor d(input.shape());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = input[i] - baseline[i];
    return d;
  }
};

inline Tensor interpolate_one(const PathSpec& path, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorKind::domain, "interpolation constant " + std::to_string(alpha) + " outside [0,1]");
  }
  // endpoints are copied so they reproduce baseline and input bit for bit
  if (alpha == 0.0) return path.baseline;
  if (alpha == 1.0) return path.input;
  Tensor out(path.input.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = path.baseline[i] + alpha * (path.input[i] - path.baseline[i]);
  }
  return out;
}

inline std::vector<Tensor> interpolate(const PathSpec& path, std::span<const double> alphas) {
  path.validate();
  std::vector<Tensor> out;
  out.reserve(alphas.size());
  for (double a : alphas) out.push_back(interpolate_one(path, a));
  return out;
}

// ---------------------------------------------------------------------------
// Quadrature rules over a sub-range [a, b] of the path.

enum class QuadratureRule {
  paper_inclusive,  // k = 0..m, every point weighted (b-a)/m
  left,
  right,
  midpoint,
  trapezoid,
};

inline std::string_view to_string(QuadratureRule rule) {
  switch (rule) {
    case QuadratureRule::paper_inclusive: return "paper_inclusive";
    case QuadratureRule::left: return "left";
    case QuadratureRule::right: return "right";
    case QuadratureRule::midpoint: return "midpoint";
    case QuadratureRule::trapezoid: return "trapezoid";
  }
  return "unknown";
}

inline QuadratureRule parse_rule(std::string_view name) {
  for (auto r : {QuadratureRule::paper_inclusive, QuadratureRule::left, QuadratureRule::right,
                 QuadratureRule::midpoint, QuadratureRule::trapezoid}) {
    if (name == to_string(r)) return r;
  }
  fail(ErrorKind::config, "unknown quadrature rule '" + std::string(name) +
                              "' (expected paper_inclusive, left, right, midpoint or trapezoid)");
}

/// Number of evaluation points the rule places for m steps.
inline std::size_t points_per_steps(QuadratureRule rule, std::size_t m) {
  return (rule == QuadratureRule::paper_inclusive || rule == QuadratureRule::trapezoid) ? m + 1 : m;
}

/// True when the weights sum to (b - a).
inline bool has_unit_weight_sum(QuadratureRule rule) { return rule != QuadratureRule::paper_inclusive; }

struct AlphaGrid {
  std::vector<double> alphas;
  std::vector<double> weights;
};

inline AlphaGrid alpha_grid(QuadratureRule rule, double a, double b, std::size_t m) {
  if (m == 0) fail(ErrorKind::domain, "quadrature needs at least one step");
  if (!(a >= 0.0 && a < b && b <= 1.0)) {
    fail(ErrorKind::domain, "quadrature range [" + std::to_string(a) + ", " + std::to_string(b) + "] is invalid");
  }
  const double width = b - a;
  const double h = width / static_cast<double>(m);
  const auto md = static_cast<double>(m);
  auto at = [&](double k) { return a + width * (k / md); };

  AlphaGrid g;
  const std::size_t n = points_per_steps(rule, m);
  g.alphas.reserve(n);
  g.weights.reserve(n);
  switch (rule) {
    case QuadratureRule::paper_inclusive:
      for (std::size_t k = 0; k <= m; ++k) {
        g.alphas.push_back(k == m ? b : at(static_cast<double>(k)));
        g.weights.push_back(h);
      }
      break;
    case QuadratureRule::left:
      for (std::size_t k = 0; k < m; ++k) {
        g.alphas.push_back(at(static_cast<double>(k)));
        g.weights.push_back(h);
      }
      break;
    case QuadratureRule::right:
      for (std::size_t k = 1; k <= m; ++k) {
        g.alphas.push_back(k == m ? b : at(static_cast<double>(k)));
        g.weights.push_back(h);
      }
      break;
    case QuadratureRule::midpoint:
      for (std::size_t k = 0; k < m; ++k) {
        g.alphas.push_back(at(static_cast<double>(k) + 0.5));
        g.weights.push_back(h);
      }
      break;
    case QuadratureRule::trapezoid:
      for (std::size_t k = 0; k <= m; ++k) {
        g.alphas.push_back(k == m ? b : at(static_cast<double>(k)));
        g.weights.push_back(k == 0 || k == m ? 0.5 * h : h);
      }
      break;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Baselines.

struct ZeroBaseline {};
struct ConstantBaseline {
  double value = 1.0;
};
struct NoiseBaseline {
  std::uint64_t seed = 0;
  double lo = 0.0;
  double hi = 1.0;
};
using BaselineKind = std::variant<ZeroBaseline, ConstantBaseline, NoiseBaseline>;

/// Zero ("black"), constant (1.0 is "white") or seeded uniform noise. The noise
/// maps raw mt19937_64 output to [lo, hi) directly, so it is identical on every
/// standard library.
inline Tensor make_baseline(const BaselineKind& kind, const Shape& shape) {
  return std::visit(
      [&shape](const auto& k) -> Tensor {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ZeroBaseline>) {
          return Tensor(shape, 0.0);
        } else if constexpr (std::is_same_v<K, ConstantBaseline>) {
          return Tensor(shape, k.value);
        } else {
          if (!(std::isfinite(k.lo) && std::isfinite(k.hi) && k.lo < k.hi)) {
            fail(ErrorKind::domain, "noise baseline needs finite lo < hi");
          }
          std::mt19937_64 rng(k.seed);
          Tensor t(shape);
          for (double& v : t.values()) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            v = k.lo + (k.hi - k.lo) * u;
          }
          return t;
        }
      },
      kind);
}

/// Parses "zero", "constant:<c>", "white", "black" or "noise:<seed>:<lo>:<hi>".
inline BaselineKind parse_baseline(std::string_view spec) {
  auto bad = [&spec]() -> BaselineKind {
    fail(ErrorKind::config, "invalid baseline '" + std::string(spec) +
                                "' (expected zero, black, white, constant:<c> or noise:<seed>:<lo>:<hi>)");
  };
  if (spec == "zero" || spec == "black") return ZeroBaseline{};
  if (spec == "white") return ConstantBaseline{1.0};
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    const auto colon = spec.find(':', pos);
    parts.emplace_back(spec.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos));
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  try {
    if (parts[0] == "constant" && parts.size() == 2) return ConstantBaseline{std::stod(parts[1])};
    if (parts[0] == "noise" && parts.size() == 4) {
      return NoiseBaseline{std::stoull(parts[1]), std::stod(parts[2]), std::stod(parts[3])};
    }
  } catch (const std::logic_error&) {
    return bad();
  }
  return bad();
}

}  // namespace nuig
