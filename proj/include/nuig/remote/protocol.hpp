#pragma once

// Line-delimited JSON protocol between the engine (client) and a model
// provider. See PROTOCOL.md for the normative description.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nuig/error.hpp"
#include "nuig/tensor.hpp"

namespace nuig::remote {

using json = nlohmann::json;

enum class Op { meta, forward, grad, shutdown };

inline std::string_view to_string(Op op) {
  switch (op) {
    case Op::meta: return "meta";
    case Op::forward: return "forward";
    case Op::grad: return "grad";
    case Op::shutdown: return "shutdown";
  }
  return "unknown";
}

struct Meta {
  Shape shape;
  std::size_t classes = 0;
  std::string name;
};

/// Serializes a request. Keys come out in lexicographic order and numbers in
/// shortest round-trip form, so equal requests are byte-identical.
inline std::string encode_request(Op op, std::uint64_t id, std::size_t target = 0,
                                  std::span<const Tensor> inputs = {}, const Shape& shape = {}) {
  json j;
  j["op"] = std::string(to_string(op));
  j["id"] = id;
  if (op == Op::forward || op == Op::grad) {
    j["target"] = target;
    j["shape"] = shape;
    json arr = json::array();
    for (const Tensor& t : inputs) arr.push_back(std::vector<double>(t.values().begin(), t.values().end()));
    j["inputs"] = std::move(arr);
  }
  return j.dump();
}

namespace detail {

[[noreturn]] inline void invalid(const std::string& what) { fail(ErrorKind::validation, "provider response " + what); }

inline json parse_line(std::string_view line) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) invalid("is not valid JSON: '" + std::string(line.substr(0, 120)) + "'");
  if (!j.is_object()) invalid("is not an object");
  return j;
}

inline std::vector<double> real_array(const json& j, const char* field, std::size_t expected) {
  if (!j.is_array()) invalid(std::string(field) + " is not an array");
  if (j.size() != expected) {
    invalid(std::string(field) + " has " + std::to_string(j.size()) + " values, expected " + std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const json& v : j) {
    if (!v.is_number()) invalid(std::string(field) + " contains a non-number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) invalid(std::string(field) + " contains a non-finite value");
    out.push_back(d);
  }
  return out;
}

}  // namespace detail

/// Checks framing fields common to every response and surfaces provider
/// errors. Returns the parsed object for payload extraction.
inline json check_envelope(std::string_view line, std::uint64_t expected_id) {
  json j = detail::parse_line(line);
  if (!j.contains("id") || !j["id"].is_number_unsigned()) detail::invalid("lacks an unsigned integer id");
  const auto id = j["id"].get<std::uint64_t>();
  if (id != expected_id) {
    detail::invalid("id " + std::to_string(id) + " does not echo request id " + std::to_string(expected_id));
  }
  if (!j.contains("ok") || !j["ok"].is_boolean()) detail::invalid("lacks boolean ok");
  if (!j["ok"].get<bool>()) {
    std::string msg = j.contains("error") && j["error"].is_string() ? j["error"].get<std::string>() : "(no message)";
    fail(ErrorKind::provider, msg);
  }
  return j;
}

inline Meta decode_meta(std::string_view line, std::uint64_t id) {
  const json j = check_envelope(line, id);
  if (!j.contains("meta") || !j["meta"].is_object()) detail::invalid("lacks meta object");
  const json& m = j["meta"];
  Meta meta;
  if (!m.contains("shape") || !m["shape"].is_array() || m["shape"].empty()) detail::invalid("meta.shape missing");
  for (const json& d : m["shape"]) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) detail::invalid("meta.shape has a non-positive entry");
    meta.shape.push_back(d.get<std::size_t>());
  }
  if (!m.contains("classes") || !m["classes"].is_number_unsigned() || m["classes"].get<std::size_t>() == 0) {
    detail::invalid("meta.classes must be a positive integer");
  }
  meta.classes = m["classes"].get<std::size_t>();
  if (m.contains("name") && m["name"].is_string()) meta.name = m["name"].get<std::string>();
  return meta;
}

/// Probabilities, one per input, each finite and inside [0, 1].
inline std::vector<double> decode_probs(std::string_view line, std::uint64_t id, std::size_t batch) {
  const json j = check_envelope(line, id);
  if (!j.contains("probs")) detail::invalid("lacks probs");
  std::vector<double> p = detail::real_array(j["probs"], "probs", batch);
  for (double v : p) {
    if (v < 0.0 || v > 1.0) detail::invalid("probability " + std::to_string(v) + " outside [0,1]");
  }
  return p;
}

inline std::vector<Tensor> decode_grads(std::string_view line, std::uint64_t id, std::size_t batch,
                                        const Shape& shape) {
  const json j = check_envelope(line, id);
  if (!j.contains("grads") || !j["grads"].is_array()) detail::invalid("lacks grads array");
  const json& g = j["grads"];
  if (g.size() != batch) detail::invalid("grads has " + std::to_string(g.size()) + " rows, expected " + std::to_string(batch));
  std::vector<Tensor> out;
  out.reserve(batch);
  const std::size_t n = shape_numel(shape);
  for (const json& row : g) out.emplace_back(shape, detail::real_array(row, "grads row", n));
  return out;
}

inline void decode_ack(std::string_view line, std::uint64_t id) { (void)check_envelope(line, id); }

}  // namespace nuig::remote
