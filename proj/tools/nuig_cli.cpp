// nuig: attribute inputs, sweep and compare schedulers, benchmark them.
//
// Every verb reads an optional config file (--config), then `--set key=value`
// overrides, then the convenience flags; later sources win.
//
// Exit codes: 0 success, 1 internal error, 2 configuration or input error,
// 3 convergence failure, 4 transport or provider error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nuig/nuig.hpp"
#include "nuig/config.hpp"
#include "nuig/remote/remote_model.hpp"

namespace {

using namespace nuig;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape:
    case ErrorKind::target:
    case ErrorKind::domain:
    case ErrorKind::config:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::convergence:
      return 3;
    case ErrorKind::transport:
    case ErrorKind::provider:
    case ErrorKind::validation:
      return 4;
    case ErrorKind::measurement:
      return 1;
  }
  return 1;
}

/// Command-line values that map onto configuration keys.
struct FlagSet {
  std::string config_file;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> raw;  // config key -> flag value

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { raw[key] = v; }, help);
  }

  ConfigMap build() const {
    ConfigMap c;
    if (!config_file.empty()) c.parse_file(config_file);
    for (const auto& o : overrides) c.apply_override(o);
    for (const auto& [k, v] : raw) c.set(k, v, "flag");
    return c;
  }
};

void add_common_flags(CLI::App* app, FlagSet& f) {
  app->add_option("-c,--config", f.config_file, "configuration file");
  app->add_option("--set", f.overrides, "override a configuration key (section.key=value)");
  f.add(app, "--weights", "model.weights", "builtin model weights file");
  f.add(app, "--remote", "model.remote", "remote provider endpoint (stdio:<cmd> or tcp:<host>:<port>)");
  f.add(app, "--input", "input.file", "input tensor file (.pgm/.ppm or text tensor)");
  f.add(app, "--values", "input.values", "input values inline");
  f.add(app, "--shape", "input.shape", "shape for --values");
  f.add(app, "--baseline", "input.baseline", "zero, black, white, constant:<c>, noise or noise:<seed>:<lo>:<hi>");
  f.add(app, "--target", "input.target", "target class index");
  f.add(app, "--scheduler", "scheduler.kind", "uniform, nonuniform or nonuniform:<n_int>");
  f.add(app, "--n-int", "scheduler.n_int", "intervals for the non-uniform scheduler");
  f.add(app, "-m,--steps", "scheduler.m", "total interpolation steps");
  f.add(app, "--rule", "scheduler.rule", "paper_inclusive, left, right, midpoint or trapezoid");
  f.add(app, "--batch-size", "scheduler.batch_size", "gradient batch size");
  f.add(app, "--threads", "scheduler.threads", "concurrent gradient batches");
  f.add(app, "--min-steps", "scheduler.min_steps", "minimum steps per interval");
  f.add(app, "--seed", "seed", "seed for the noise baseline");
  f.add(app, "--report", "output.report", "key=value report path");
  f.add(app, "--csv", "output.csv", "CSV output path");
}

struct LoadedModel {
  std::optional<BuiltinModel> builtin;
  std::unique_ptr<remote::RemoteModel> remote_model;

  const DifferentiableModel& get() const {
    if (remote_model) return *remote_model;
    return as_model(*builtin);
  }
};

LoadedModel load(const RunConfig& r) {
  LoadedModel m;
  if (r.remote_endpoint) {
    m.remote_model =
        remote::connect(*r.remote_endpoint, remote::RemoteOptions{std::chrono::milliseconds(r.timeout_ms)});
    return m;
  }
  m.builtin = load_model(*r.weights_file, r.logit_output ? OutputKind::logit : OutputKind::probability);
  const std::string name = as_model(*m.builtin).name();
  if (r.builtin_name && *r.builtin_name != name) {
    fail(ErrorKind::config, "model.builtin is '" + *r.builtin_name + "' but " + *r.weights_file + " holds " + name);
  }
  return m;
}

PathSpec make_path(const RunConfig& r, const DifferentiableModel& model) {
  Tensor input = load_input(r);
  Tensor baseline = make_baseline(r.baseline_kind(), input.shape());
  PathSpec path{std::move(input), std::move(baseline), TargetSpec{r.target}};
  path.validate();
  if (path.input.shape() != model.input_shape()) {
    fail(ErrorKind::shape, model.name() + " expects input shape " + shape_to_string(model.input_shape()) +
                               ", got " + shape_to_string(path.input.shape()));
  }
  model.check_target(path.target);
  return path;
}

EngineOptions engine_of(const RunConfig& r) { return EngineOptions{r.rule, r.batch_size, r.threads}; }

SchedulerConfig scheduler_of(const RunConfig& r, const SchedulerChoice& c) {
  if (c.uniform) return SchedulerConfig::uniform(engine_of(r));
  return SchedulerConfig::nonuniform(c.n_int, engine_of(r), r.min_steps);
}

/// Writes to the file when a path is given, otherwise to stdout.
template <class Fn>
void emit(const std::optional<std::string>& path, Fn&& write) {
  if (!path) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(*path, std::ios::binary);
  if (!os) fail(ErrorKind::config, "cannot open '" + *path + "' for writing");
  write(os);
  if (!os) fail(ErrorKind::config, "failed writing '" + *path + "'");
}

KeyValues run_header(const RunConfig& r, const DifferentiableModel& model, const SchedulerConfig& s) {
  KeyValues h{{"model", model.name()},
              {"scheduler", s.label()},
              {"rule", std::string(to_string(r.rule))},
              {"batch_size", std::to_string(r.batch_size)},
              {"threads", std::to_string(r.threads)},
              {"min_steps", std::to_string(r.min_steps)},
              {"baseline", r.baseline},
              {"seed", std::to_string(r.seed)},
              {"target", std::to_string(r.target)}};
  return h;
}

int cmd_attribute(const RunConfig& r) {
  LoadedModel lm = load(r);
  const DifferentiableModel& model = lm.get();
  const PathSpec path = make_path(r, model);
  const SchedulerConfig sched = scheduler_of(r, r.scheduler);

  KeyValues header = run_header(r, model, sched);
  AttributionResult result;
  if (r.m) {
    result = attribute(model, path, sched, *r.m);
    header.emplace_back("mode", "steps");
  } else {
    ThresholdSearch s = search_threshold(model, path, sched, *r.delta_th, {r.m_start, r.m_max});
    header.emplace_back("mode", "threshold");
    header.emplace_back("delta_th", text::format_real(*r.delta_th));
    std::vector<std::size_t> ms;
    std::vector<double> deltas;
    for (const auto& p : s.trail) {
      ms.push_back(p.m);
      deltas.push_back(p.delta);
    }
    header.emplace_back("search.m", text::join_ints<std::size_t>(ms));
    header.emplace_back("search.delta", text::join_reals(deltas));
    result = std::move(s.result);
  }
  emit(r.report_path, [&](std::ostream& os) { write_attribution_report(os, result, header); });

  if (r.heatmap_path) {
    if (is_image_shaped(result.phi.shape())) {
      write_pgm(*r.heatmap_path, render_heatmap(result.phi, {r.clip_quantile}));
    } else {
      std::cerr << "nuig: input shape " << shape_to_string(result.phi.shape())
                << " is not image-shaped, no heatmap written\n";
    }
  }
  return 0;
}

int cmd_sweep(const RunConfig& r) {
  LoadedModel lm = load(r);
  const DifferentiableModel& model = lm.get();
  const PathSpec path = make_path(r, model);
  const SchedulerConfig sched = scheduler_of(r, r.scheduler);
  const ConvergenceSweep s = sweep(model, path, sched, r.m_grid, r.delta_th);
  emit(r.csv_path, [&](std::ostream& os) {
    os << "scheduler,n_int,m,delta,forwards,backwards,probe_forwards\n";
    for (const auto& p : s.points) {
      os << (sched.is_uniform() ? "uniform" : "nonuniform") << ',' << (sched.is_uniform() ? 0 : sched.n_int) << ','
         << p.m << ',' << text::format_real(p.delta) << ',' << p.work.n_forward << ',' << p.work.n_backward << ','
         << p.work.n_probe_forward << '\n';
    }
  });
  if (r.delta_th) {
    if (s.steps_at_threshold) {
      std::cerr << "nuig: " << s.scheduler_id << " reaches delta <= " << text::format_real(*r.delta_th)
                << " at m = " << *s.steps_at_threshold << '\n';
    } else {
      std::cerr << "nuig: " << s.scheduler_id << " never reaches delta <= " << text::format_real(*r.delta_th)
                << " on the grid\n";
    }
  }
  return 0;
}

int cmd_compare(const RunConfig& r) {
  LoadedModel lm = load(r);
  const DifferentiableModel& model = lm.get();
  const PathSpec path = make_path(r, model);
  ComparisonTable table =
      compare_schedulers(model, path, r.delta_th_grid, r.n_int_set, engine_of(r), {r.m_start, r.m_max}, r.min_steps);

  if (r.time_cells) {
    // latencies are normalized within each threshold
    for (std::size_t lo = 0; lo < table.rows.size();) {
      std::size_t hi = lo;
      while (hi < table.rows.size() && table.rows[hi].delta_th == table.rows[lo].delta_th) ++hi;
      std::vector<BenchReport> reports;
      std::vector<std::size_t> rows;
      for (std::size_t i = lo; i < hi; ++i) {
        const ComparisonRow& row = table.rows[i];
        if (!row.ok()) continue;
        reports.push_back(benchmark(model, path, {row.scheduler, *row.steps}, r.warmup, r.repeats));
        rows.push_back(i);
      }
      if (!reports.empty()) {
        normalize_latencies(reports);
        for (std::size_t k = 0; k < rows.size(); ++k) table.rows[rows[k]].normalized_latency = reports[k].normalized_latency;
      }
      lo = hi;
    }
  }

  emit(r.csv_path, [&](std::ostream& os) { write_comparison_csv(os, table, r.time_cells); });
  for (const auto& row : table.rows) {
    if (row.error) std::cerr << "nuig: " << *row.error << '\n';
  }
  if (table.failures() == table.rows.size()) {
    std::cerr << "nuig: no scheduler reached any threshold\n";
    return 3;
  }
  return 0;
}

int cmd_bench(const RunConfig& r) {
  LoadedModel lm = load(r);
  const DifferentiableModel& model = lm.get();
  const PathSpec path = make_path(r, model);

  std::vector<SchedulerChoice> choices = r.bench_schedulers;
  if (choices.empty()) choices.push_back(r.scheduler);
  std::vector<BenchReport> reports;
  for (const SchedulerChoice& c : choices) {
    const SchedulerConfig sched = scheduler_of(r, c);
    if (*r.m < sched.min_feasible_steps()) {
      fail(ErrorKind::config, "scheduler.m = " + std::to_string(*r.m) + " is too small for " + sched.label());
    }
    reports.push_back(
        benchmark(model, path, {sched, *r.m}, r.warmup, r.repeats, {{"seed", std::to_string(r.seed)}, {"model", model.name()}}));
  }
  std::vector<BenchReport> timed;
  for (const auto& rep : reports) {
    if (!rep.run_seconds.empty()) timed.push_back(rep);
  }
  if (!timed.empty()) {
    normalize_latencies(timed);
    for (std::size_t i = 0, k = 0; i < reports.size(); ++i) {
      if (!reports[i].run_seconds.empty()) reports[i].normalized_latency = timed[k++].normalized_latency;
    }
  }

  if (r.csv_path) {
    emit(r.csv_path, [&](std::ostream& os) { write_bench_csv(os, reports); });
  }
  if (r.report_path || !r.csv_path) {
    emit(r.report_path, [&](std::ostream& os) { write_bench_report(os, reports); });
  }
  bool failed = false;
  for (const auto& rep : reports) {
    if (rep.error) {
      std::cerr << "nuig: " << rep.label << ": " << *rep.error << '\n';
      failed = true;
    }
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrated-gradients attribution with uniform and non-uniform step schedules"};
  app.require_subcommand(1);

  struct VerbSpec {
    const char* name;
    const char* help;
    Verb verb;
  };
  const VerbSpec verbs[] = {
      {"attribute", "attribute one input and write a report (and heatmap for images)", Verb::attribute},
      {"sweep", "convergence delta over a grid of step counts", Verb::sweep},
      {"compare", "steps and work needed per threshold, uniform against non-uniform", Verb::compare},
      {"bench", "measure wall-clock latency and work counters", Verb::bench},
  };
  std::vector<std::unique_ptr<FlagSet>> flag_sets;
  std::vector<CLI::App*> subs;
  for (const VerbSpec& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    flag_sets.push_back(std::make_unique<FlagSet>());
    FlagSet& f = *flag_sets.back();
    add_common_flags(sub, f);
    switch (v.verb) {
      case Verb::attribute:
        f.add(sub, "--delta-th", "scheduler.delta_th", "search for the fewest steps meeting this delta");
        f.add(sub, "--heatmap", "output.heatmap", "grayscale PGM heatmap path");
        f.add(sub, "--clip-quantile", "output.clip_quantile", "heatmap clip quantile");
        break;
      case Verb::sweep:
        f.add(sub, "--grid", "sweep.m_grid", "ascending step counts");
        f.add(sub, "--delta-th", "scheduler.delta_th", "report the first grid point meeting this delta");
        break;
      case Verb::compare:
        f.add(sub, "--thresholds", "compare.delta_th_grid", "delta thresholds");
        f.add(sub, "--n-int-set", "compare.n_int_set", "interval counts for the non-uniform rows");
        f.add(sub, "--time-cells", "compare.time_cells", "benchmark each cell (true/false)");
        f.add(sub, "--warmup", "bench.warmup", "warm-up runs per timed cell");
        f.add(sub, "--repeats", "bench.repeats", "measured runs per timed cell");
        break;
      case Verb::bench:
        f.add(sub, "--warmup", "bench.warmup", "unmeasured warm-up runs");
        f.add(sub, "--repeats", "bench.repeats", "measured runs");
        f.add(sub, "--schedulers", "bench.schedulers", "jobs to compare, e.g. 'uniform nonuniform:4'");
        break;
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const RunConfig r = build_run_config(flag_sets[i]->build(), verbs[i].verb);
      switch (r.verb) {
        case Verb::attribute: return cmd_attribute(r);
        case Verb::sweep: return cmd_sweep(r);
        case Verb::compare: return cmd_compare(r);
        case Verb::bench: return cmd_bench(r);
      }
    }
  } catch (const nuig::Error& e) {
    std::cerr << "nuig: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nuig: internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
