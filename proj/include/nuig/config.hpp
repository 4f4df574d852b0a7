#pragma once

// Run configuration: a line-oriented file of `key = value` pairs grouped by
// `[section]` headers, merged with command-line overrides (overrides win).
// Keys are addressed as "section.key"; see docs/config.md for the full list.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nuig/error.hpp"
#include "nuig/image.hpp"
#include "nuig/path.hpp"
#include "nuig/tensor.hpp"
#include "nuig/text.hpp"

namespace nuig {

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "seed",
      "model.weights", "model.builtin", "model.remote", "model.output", "model.timeout_ms",
      "input.file", "input.values", "input.shape", "input.baseline", "input.target",
      "scheduler.kind", "scheduler.n_int", "scheduler.m", "scheduler.delta_th", "scheduler.rule",
      "scheduler.batch_size", "scheduler.threads", "scheduler.min_steps", "scheduler.m_start", "scheduler.m_max",
      "output.report", "output.heatmap", "output.csv", "output.clip_quantile",
      "sweep.m_grid",
      "compare.delta_th_grid", "compare.n_int_set", "compare.time_cells",
      "bench.warmup", "bench.repeats", "bench.schedulers",
  };
  return keys;
}

/// Flat "section.key" -> value map with the origin of each entry for diagnostics.
class ConfigMap {
 public:
  void parse(std::istream& is, const std::string& source) {
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      std::string_view s = text::trim(line);
      if (s.empty() || s.front() == '#' || s.front() == ';') continue;
      const std::string where = source + ":" + std::to_string(line_no);
      if (s.front() == '[') {
        if (s.back() != ']') fail(ErrorKind::config, where + ": unterminated section header");
        section = std::string(text::trim(s.substr(1, s.size() - 2)));
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) fail(ErrorKind::config, where + ": expected key = value");
      const std::string key(text::trim(s.substr(0, eq)));
      const std::string full = section.empty() ? key : section + "." + key;
      set(full, std::string(text::trim(s.substr(eq + 1))), where);
    }
  }

  /// Relative model.weights and input.file paths are taken relative to the
  /// directory holding the config file.
  void parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::config, "cannot open config file '" + path + "'");
    parse(is, path);
    const std::filesystem::path dir = std::filesystem::path(path).parent_path();
    for (const char* key : {"model.weights", "input.file"}) {
      const auto it = values_.find(key);
      if (it == values_.end() || it->second.origin.rfind(path + ":", 0) != 0) continue;
      const std::filesystem::path p(it->second.value);
      if (p.is_relative()) it->second.value = (dir / p).lexically_normal().string();
    }
  }

  /// Applies a "section.key=value" override.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::config, "override '" + std::string(assignment) + "' lacks '='");
    set(std::string(text::trim(assignment.substr(0, eq))), std::string(text::trim(assignment.substr(eq + 1))),
        "command line");
  }

  void set(const std::string& key, std::string value, const std::string& origin) {
    const auto& known = known_config_keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(ErrorKind::config, origin + ": unknown configuration key '" + key + "'");
    }
    values_[key] = {std::move(value), origin};
  }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second.value;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string origin(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? "default" : it->second.origin;
  }

  std::optional<std::size_t> get_size(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    const auto n = text::parse_size(*v);
    if (!n) fail(ErrorKind::config, origin(key) + ": " + key + " must be a non-negative integer, got '" + *v + "'");
    return n;
  }

  std::optional<double> get_real(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    const auto d = text::parse_real(*v);
    if (!d || !std::isfinite(*d)) fail(ErrorKind::config, origin(key) + ": " + key + " must be a real number, got '" + *v + "'");
    return d;
  }

  std::optional<bool> get_bool(const std::string& key) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    fail(ErrorKind::config, origin(key) + ": " + key + " must be true or false, got '" + *v + "'");
  }

  template <class T, class Parse>
  std::optional<std::vector<T>> get_list(const std::string& key, Parse parse) const {
    const auto v = get(key);
    if (!v) return std::nullopt;
    std::vector<T> out;
    for (auto field : text::split(*v, ", \t")) {
      const auto x = parse(field);
      if (!x) fail(ErrorKind::config, origin(key) + ": bad list element '" + std::string(field) + "' in " + key);
      out.push_back(*x);
    }
    if (out.empty()) fail(ErrorKind::config, origin(key) + ": " + key + " is empty");
    return out;
  }

 private:
  struct Entry {
    std::string value;
    std::string origin;
  };
  std::map<std::string, Entry> values_;
};

enum class Verb { attribute, compare, bench, sweep };

struct SchedulerChoice {
  bool uniform = true;
  std::size_t n_int = 1;
};

/// Parses "uniform" or "nonuniform:<n_int>".
inline SchedulerChoice parse_scheduler_choice(std::string_view s, std::size_t default_n_int) {
  if (s == "uniform") return {true, 1};
  if (s == "nonuniform") return {false, default_n_int};
  if (s.starts_with("nonuniform:")) {
    const auto n = text::parse_size(s.substr(11));
    if (n && *n > 0) return {false, *n};
  }
  fail(ErrorKind::config, "scheduler must be uniform, nonuniform or nonuniform:<n_int>, got '" + std::string(s) + "'");
}

struct RunConfig {
  Verb verb = Verb::attribute;
  std::uint64_t seed = 0;

  std::optional<std::string> weights_file;
  std::optional<std::string> builtin_name;
  std::optional<std::string> remote_endpoint;
  bool logit_output = false;
  std::size_t timeout_ms = 30000;

  std::optional<std::string> input_file;
  std::optional<std::vector<double>> input_values;
  std::optional<Shape> input_shape;
  std::string baseline = "zero";
  std::size_t target = 0;

  SchedulerChoice scheduler;
  std::optional<std::size_t> m;
  std::optional<double> delta_th;
  QuadratureRule rule = QuadratureRule::midpoint;
  std::size_t batch_size = 16;
  std::size_t threads = 1;
  std::size_t min_steps = 1;
  std::size_t m_start = 16;
  std::size_t m_max = 8192;

  std::optional<std::string> report_path;
  std::optional<std::string> heatmap_path;
  std::optional<std::string> csv_path;
  double clip_quantile = 0.99;

  std::vector<std::size_t> m_grid;
  std::vector<double> delta_th_grid{0.02, 0.01, 0.005};
  std::vector<std::size_t> n_int_set{2, 4, 8};
  bool time_cells = false;

  std::size_t warmup = 3;
  std::size_t repeats = 10;
  std::vector<SchedulerChoice> bench_schedulers;

  BaselineKind baseline_kind() const {
    if (baseline == "noise") return NoiseBaseline{seed, 0.0, 1.0};
    return parse_baseline(baseline);
  }
};

inline std::vector<std::size_t> parse_size_list(const ConfigMap& c, const std::string& key) {
  return *c.get_list<std::size_t>(key, [](std::string_view f) { return text::parse_size(f); });
}

/// Builds and validates the configuration for one verb. Every check happens
/// here, before any model is loaded or evaluated.
inline RunConfig build_run_config(const ConfigMap& c, Verb verb) {
  RunConfig r;
  r.verb = verb;
  if (auto v = c.get_size("seed")) r.seed = *v;

  r.weights_file = c.get("model.weights");
  r.builtin_name = c.get("model.builtin");
  r.remote_endpoint = c.get("model.remote");
  if (r.weights_file.has_value() == r.remote_endpoint.has_value()) {
    fail(ErrorKind::config, "exactly one of model.weights and model.remote must be given");
  }
  if (r.builtin_name && !r.weights_file) fail(ErrorKind::config, "model.builtin needs model.weights");
  if (auto v = c.get("model.output")) {
    if (*v != "probability" && *v != "logit") fail(ErrorKind::config, "model.output must be probability or logit");
    r.logit_output = *v == "logit";
  }
  if (auto v = c.get_size("model.timeout_ms")) r.timeout_ms = *v;

  r.input_file = c.get("input.file");
  if (c.has("input.values")) {
    r.input_values = c.get_list<double>("input.values", [](std::string_view f) { return text::parse_real(f); });
  }
  if (r.input_file.has_value() == r.input_values.has_value()) {
    fail(ErrorKind::config, "exactly one of input.file and input.values must be given");
  }
  if (c.has("input.shape")) {
    r.input_shape = parse_size_list(c, "input.shape");
    if (!r.input_values) fail(ErrorKind::config, "input.shape only applies to input.values");
  }
  if (auto v = c.get("input.baseline")) r.baseline = *v;
  (void)r.baseline_kind();
  if (auto v = c.get_size("input.target")) r.target = *v;

  if (auto v = c.get_size("scheduler.n_int")) {
    if (*v == 0) fail(ErrorKind::config, "scheduler.n_int must be at least 1");
    r.scheduler.n_int = *v;
  }
  if (auto v = c.get("scheduler.kind")) r.scheduler = parse_scheduler_choice(*v, r.scheduler.n_int);
  r.m = c.get_size("scheduler.m");
  r.delta_th = c.get_real("scheduler.delta_th");
  if (auto v = c.get("scheduler.rule")) r.rule = parse_rule(*v);
  if (auto v = c.get_size("scheduler.batch_size")) r.batch_size = *v;
  if (auto v = c.get_size("scheduler.threads")) r.threads = *v;
  if (auto v = c.get_size("scheduler.min_steps")) r.min_steps = *v;
  if (auto v = c.get_size("scheduler.m_start")) r.m_start = *v;
  if (auto v = c.get_size("scheduler.m_max")) r.m_max = *v;
  if (r.batch_size == 0) fail(ErrorKind::config, "scheduler.batch_size must be at least 1");
  if (r.threads == 0) fail(ErrorKind::config, "scheduler.threads must be at least 1");
  if (r.min_steps == 0) fail(ErrorKind::config, "scheduler.min_steps must be at least 1");
  if (r.m_start == 0 || r.m_max < r.m_start) fail(ErrorKind::config, "need 1 <= scheduler.m_start <= scheduler.m_max");
  if (r.m && *r.m == 0) fail(ErrorKind::config, "scheduler.m must be at least 1");
  if (r.delta_th && !(*r.delta_th > 0.0)) fail(ErrorKind::config, "scheduler.delta_th must be positive");

  r.report_path = c.get("output.report");
  r.heatmap_path = c.get("output.heatmap");
  r.csv_path = c.get("output.csv");
  if (auto v = c.get_real("output.clip_quantile")) {
    if (!(*v > 0.0 && *v <= 1.0)) fail(ErrorKind::config, "output.clip_quantile must lie in (0, 1]");
    r.clip_quantile = *v;
  }

  if (c.has("sweep.m_grid")) r.m_grid = parse_size_list(c, "sweep.m_grid");
  if (c.has("compare.delta_th_grid")) {
    r.delta_th_grid = *c.get_list<double>("compare.delta_th_grid", [](std::string_view f) { return text::parse_real(f); });
  }
  if (c.has("compare.n_int_set")) r.n_int_set = parse_size_list(c, "compare.n_int_set");
  if (auto v = c.get_bool("compare.time_cells")) r.time_cells = *v;
  if (auto v = c.get_size("bench.warmup")) r.warmup = *v;
  if (auto v = c.get_size("bench.repeats")) r.repeats = *v;
  if (auto v = c.get("bench.schedulers")) {
    for (auto f : text::split(*v, ", \t")) r.bench_schedulers.push_back(parse_scheduler_choice(f, r.scheduler.n_int));
  }

  // files referenced by the configuration must exist
  for (const auto* f : {&r.weights_file, &r.input_file}) {
    if (*f && !std::filesystem::is_regular_file(**f)) fail(ErrorKind::config, "file not found: '" + **f + "'");
  }

  switch (verb) {
    case Verb::attribute:
      if (r.m.has_value() == r.delta_th.has_value()) {
        fail(ErrorKind::config, "attribute needs exactly one of scheduler.m and scheduler.delta_th");
      }
      break;
    case Verb::sweep:
      if (r.m_grid.empty()) fail(ErrorKind::config, "sweep needs sweep.m_grid");
      for (std::size_t i = 1; i < r.m_grid.size(); ++i) {
        if (r.m_grid[i] <= r.m_grid[i - 1]) fail(ErrorKind::config, "sweep.m_grid must be strictly ascending");
      }
      if (r.m_grid.front() == 0) fail(ErrorKind::config, "sweep.m_grid values must be positive");
      break;
    case Verb::compare:
      for (double th : r.delta_th_grid) {
        if (!(th > 0.0)) fail(ErrorKind::config, "compare.delta_th_grid values must be positive");
      }
      for (std::size_t n : r.n_int_set) {
        if (n == 0) fail(ErrorKind::config, "compare.n_int_set values must be positive");
      }
      if (r.time_cells && r.repeats < 3) fail(ErrorKind::config, "bench.repeats must be at least 3");
      break;
    case Verb::bench:
      if (!r.m) fail(ErrorKind::config, "bench needs scheduler.m");
      if (r.repeats < 3) fail(ErrorKind::config, "bench.repeats must be at least 3");
      break;
  }
  if (r.m && !r.scheduler.uniform && *r.m < r.scheduler.n_int * r.min_steps && verb != Verb::compare) {
    fail(ErrorKind::config, "scheduler.m must be at least n_int * min_steps");
  }
  return r;
}

/// Text tensor file: first line is the shape, the rest are row-major values.
inline Tensor read_tensor_text(std::istream& is, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  Shape shape;
  while (std::getline(is, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    for (auto f : text::split(line)) {
      const auto d = text::parse_size(f);
      if (!d || *d == 0) fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": bad dimension '" + std::string(f) + "'");
      shape.push_back(*d);
    }
    break;
  }
  if (shape.empty()) fail(ErrorKind::parse, source + ": missing shape line");
  std::vector<double> values;
  while (std::getline(is, line)) {
    ++line_no;
    for (auto f : text::split(line)) {
      const auto v = text::parse_real(f);
      if (!v) fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": bad value '" + std::string(f) + "'");
      values.push_back(*v);
    }
  }
  if (values.size() != shape_numel(shape)) {
    fail(ErrorKind::parse, source + ": shape " + shape_to_string(shape) + " needs " + std::to_string(shape_numel(shape)) +
                               " values, found " + std::to_string(values.size()));
  }
  return Tensor(std::move(shape), std::move(values));
}

/// Loads input.file (netpbm by extension, otherwise the text tensor format)
/// or builds the tensor from input.values / input.shape.
inline Tensor load_input(const RunConfig& r) {
  if (r.input_values) {
    Shape shape = r.input_shape.value_or(Shape{r.input_values->size()});
    return Tensor(std::move(shape), *r.input_values);
  }
  const std::string& path = *r.input_file;
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_netpbm(path);
  std::ifstream is(path);
  if (!is) fail(ErrorKind::config, "cannot open input file '" + path + "'");
  return read_tensor_text(is, path);
}

}  // namespace nuig
