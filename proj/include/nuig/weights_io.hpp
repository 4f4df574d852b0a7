#pragma once

// Weights file format (see docs/weights_format.md):
//
//   line 1   variant name
//   line 2   whitespace-separated dimension list, variant specific
//   rest     whitespace-separated decimal parameters in a fixed order
//
//   LinearSoftmax       dims: C d1..dk      params: W (C x D), b (C)
//   LogisticScalar      dims: d1..dk        params: w (D), bias, gain
//   SharpSigmoid1D      dims: 1             params: gain, threshold
//   MLP2                dims: H C d1..dk    params: W1 (H x D), b1 (H), W2 (C x H), b2 (C)
//   AffineProbability   dims: d1..dk        params: w (D), bias
//
// D is the product of d1..dk. Parameters may wrap across lines freely.

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nuig/builtin_models.hpp"
#include "nuig/error.hpp"
#include "nuig/text.hpp"

namespace nuig {

namespace detail {

struct ParamCursor {
  const std::vector<double>& values;
  std::size_t pos = 0;

  std::vector<double> take(std::size_t n) {
    std::vector<double> out(values.begin() + static_cast<std::ptrdiff_t>(pos),
                            values.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return out;
  }
  double one() { return values[pos++]; }
};

inline void write_params(std::ostream& os, std::span<const double> values) {
  // eight per line keeps files diffable
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << text::format_real(values[i]) << ((i + 1) % 8 == 0 || i + 1 == values.size() ? '\n' : ' ');
  }
}

}  // namespace detail

inline void write_model(std::ostream& os, const BuiltinModel& model) {
  std::visit(
      [&os](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        os << m.name() << '\n';
        const Shape& in = m.input_shape();
        if constexpr (std::is_same_v<M, LinearSoftmax>) {
          os << m.num_classes() << ' ' << text::join_ints<std::size_t>(in) << '\n';
          detail::write_params(os, m.weights());
          detail::write_params(os, m.bias());
        } else if constexpr (std::is_same_v<M, LogisticScalar>) {
          os << text::join_ints<std::size_t>(in) << '\n';
          detail::write_params(os, m.weights());
          const double tail[] = {m.bias(), m.gain()};
          detail::write_params(os, tail);
        } else if constexpr (std::is_same_v<M, SharpSigmoid1D>) {
          os << "1\n";
          const double p[] = {m.gain(), m.threshold()};
          detail::write_params(os, p);
        } else if constexpr (std::is_same_v<M, MLP2>) {
          os << m.hidden() << ' ' << m.num_classes() << ' ' << text::join_ints<std::size_t>(in) << '\n';
          detail::write_params(os, m.w1());
          detail::write_params(os, m.b1());
          detail::write_params(os, m.w2());
          detail::write_params(os, m.b2());
        } else {
          os << text::join_ints<std::size_t>(in) << '\n';
          detail::write_params(os, m.weights());
          const double tail[] = {m.bias()};
          detail::write_params(os, tail);
        }
      },
      model);
}

inline void save_model(const std::string& path, const BuiltinModel& model) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::config, "cannot open '" + path + "' for writing");
  write_model(os, model);
  if (!os) fail(ErrorKind::config, "failed writing '" + path + "'");
}

/// Parses the weights format. `source` names the stream in diagnostics.
inline BuiltinModel read_model(std::istream& is, const std::string& source = "<weights>",
                               OutputKind output = OutputKind::probability) {
  auto where = [&source](std::size_t line, std::size_t field) {
    std::string s = source + ":" + std::to_string(line);
    if (field) s += ", field " + std::to_string(field);
    return s + ": ";
  };

  std::string line;
  std::size_t line_no = 0;
  auto next_content_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (!text::trim(line).empty()) return true;
    }
    return false;
  };

  if (!next_content_line()) fail(ErrorKind::parse, where(1, 0) + "missing variant name");
  const std::string variant(text::trim(line));
  const std::size_t variant_line = line_no;

  if (!next_content_line()) fail(ErrorKind::parse, where(line_no + 1, 0) + "missing dimension line");
  std::vector<std::size_t> dims;
  {
    const auto fields = text::split(line);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto d = text::parse_size(fields[i]);
      if (!d || *d == 0) {
        fail(ErrorKind::parse, where(line_no, i + 1) + "expected a positive integer dimension, got '" +
                                   std::string(fields[i]) + "'");
      }
      dims.push_back(*d);
    }
  }
  const std::size_t dims_line = line_no;

  std::vector<double> params;
  while (std::getline(is, line)) {
    ++line_no;
    const auto fields = text::split(line);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto v = text::parse_real(fields[i]);
      if (!v || !std::isfinite(*v)) {
        fail(ErrorKind::parse, where(line_no, i + 1) + "expected a finite real number, got '" +
                                   std::string(fields[i]) + "'");
      }
      params.push_back(*v);
    }
  }

  auto need_dims = [&](std::size_t leading) {
    if (dims.size() < leading + 1) {
      fail(ErrorKind::parse, where(dims_line, 0) + variant + " needs " + std::to_string(leading) +
                                 " leading dimension(s) followed by the input shape");
    }
    return Shape(dims.begin() + static_cast<std::ptrdiff_t>(leading), dims.end());
  };
  auto need_count = [&](std::size_t want) {
    if (params.size() != want) {
      fail(ErrorKind::parse, source + ": " + variant + " with dimensions " + text::join_ints<std::size_t>(dims) +
                                 " expects " + std::to_string(want) + " parameters, found " +
                                 std::to_string(params.size()));
    }
  };

  detail::ParamCursor cur{params};
  if (variant == "LinearSoftmax") {
    Shape in = need_dims(1);
    const std::size_t c = dims[0], d = shape_numel(in);
    need_count(c * d + c);
    auto w = cur.take(c * d);
    auto b = cur.take(c);
    return LinearSoftmax(std::move(in), c, std::move(w), std::move(b), output);
  }
  if (variant == "LogisticScalar") {
    Shape in = need_dims(0);
    const std::size_t d = shape_numel(in);
    need_count(d + 2);
    auto w = cur.take(d);
    const double bias = cur.one();
    const double gain = cur.one();
    return LogisticScalar(std::move(in), std::move(w), bias, gain);
  }
  if (variant == "SharpSigmoid1D") {
    if (dims != std::vector<std::size_t>{1}) fail(ErrorKind::parse, where(dims_line, 0) + "SharpSigmoid1D dims must be '1'");
    need_count(2);
    const double gain = cur.one();
    const double threshold = cur.one();
    return SharpSigmoid1D(gain, threshold);
  }
  if (variant == "MLP2") {
    Shape in = need_dims(2);
    const std::size_t h = dims[0], c = dims[1], d = shape_numel(in);
    need_count(h * d + h + c * h + c);
    auto w1 = cur.take(h * d);
    auto b1 = cur.take(h);
    auto w2 = cur.take(c * h);
    auto b2 = cur.take(c);
    return MLP2(std::move(in), h, c, std::move(w1), std::move(b1), std::move(w2), std::move(b2), output);
  }
  if (variant == "AffineProbability") {
    Shape in = need_dims(0);
    const std::size_t d = shape_numel(in);
    need_count(d + 1);
    auto w = cur.take(d);
    const double bias = cur.one();
    return AffineProbability(std::move(in), std::move(w), bias);
  }
  fail(ErrorKind::parse, where(variant_line, 1) + "unknown model variant '" + variant + "'");
}

inline BuiltinModel load_model(const std::string& path, OutputKind output = OutputKind::probability) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::config, "cannot open weights file '" + path + "'");
  return read_model(is, path, output);
}

inline std::string model_to_string(const BuiltinModel& model) {
  std::ostringstream os;
  write_model(os, model);
  return os.str();
}

}  // namespace nuig
