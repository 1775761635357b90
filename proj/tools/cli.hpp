#pragma once

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mulopt/config.hpp"
#include "mulopt/io.hpp"
#include "mulopt/svg.hpp"
#include "mulopt/verify.hpp"
#include "mulopt/verilog.hpp"

namespace mulopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Thrown for bad flags or inputs detected after parsing; maps to exit 2.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(what) {}
};

inline std::string cost_summary(const CostReport& r, int stages) {
  return "stages " + std::to_string(stages) + ", area " + format_double(r.total_area()) + ", delay " +
         format_double(r.total_delay()) + ", power " + format_double(r.total_power());
}

inline DesignDoc load_design(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  try {
    return design_from_string(text);
  } catch (const Error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

inline PpgKind ppg_flag(const std::string& s) {
  try {
    return parse_ppg(s);
  } catch (const Error&) {
    throw UsageError("--ppg must be \"and\" or \"booth4\" (got \"" + s + "\")");
  }
}

// ---- baseline ---------------------------------------------------------------

struct BaselineArgs {
  int width = 8;
  std::string ppg = "and";
  bool mac = false;
  std::string kind = "wallace";
  std::string out;
};

inline int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  const auto ppg = ppg_flag(a.ppg);
  if (a.width < 1 || a.width > kMaxWidth) throw UsageError("--width must lie in [1, " + std::to_string(kMaxWidth) + "]");
  const auto profile = pp_profile(a.width, ppg, a.mac);
  const auto counts = a.kind == "dadda" ? dadda(profile) : wallace(profile);
  const auto tree = assign(profile, counts);
  auto doc = make_design(tree);
  doc.meta["name"] = a.kind + "_" + default_module_name(doc);
  write_file_atomic(a.out, design_to_string(doc));
  out << a.kind << " " << a.width << "-bit " << to_string(ppg) << (a.mac ? " mac" : "") << ": full adders "
      << counts.total_full() << ", half adders " << counts.total_half() << ", "
      << cost_summary(analytical_cost(tree), tree.stages) << "\n";
  return kExitOk;
}

// ---- optimize ---------------------------------------------------------------

struct OptimizeArgs {
  std::string config;
  std::string out_dir = "run";
  bool resume = false;
};

namespace detail {

inline void write_artifacts(const fs::path& dir, const Searcher& s, const OptimizeConfig& cfg) {
  const auto r = s.result();
  auto best = r.best;
  best.meta["algo"] = cfg.algo;
  best.meta["seed"] = cfg.seed;
  best.meta["scalar_cost"] = r.best_cost;
  best.meta["steps"] = s.steps_done();
  write_file_atomic(dir / "run.csv", r.log.to_csv());
  write_file_atomic(dir / "best.json", design_to_string(best));
  write_file_atomic(dir / "pareto.csv", pareto_to_csv(r.pareto));
}

inline std::string bytes_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Network first, then the state that names its digest, so a crash between
// the two is detected on resume.
inline void write_checkpoint(const fs::path& dir, const Searcher& s, const OptimizeConfig& cfg) {
  nlohmann::json j{{"config", cfg.fingerprint()}, {"state", s.save_state()}};
  if (const auto net = s.network_bytes()) {
    write_file_atomic(dir / "net.ckpt", *net);
    j["net_digest"] = bytes_digest(*net);
  }
  write_file_atomic(dir / "state.json", j.dump() + "\n");
}

inline void load_checkpoint(const fs::path& dir, Searcher& s, const OptimizeConfig& cfg) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(dir / "state.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "state.json").string() + ": " + e.what());
  }
  if (j.at("config") != cfg.fingerprint())
    throw UsageError("checkpoint in " + dir.string() + " was written with a different configuration");
  if (j.contains("net_digest")) {
    const auto net = read_file(dir / "net.ckpt");
    if (bytes_digest(net) != j.at("net_digest").get<std::string>())
      throw IoError("net.ckpt does not match state.json; the checkpoint is incomplete");
    s.load_network(net);
  }
  s.load_state(j.at("state"));
}

}  // namespace detail

inline int cmd_optimize(const OptimizeArgs& a, std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = read_file(a.config);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  const char* seed_env = std::getenv("MULOPT_SEED");
  const auto cfg = parse_optimize_config(text, a.config,
                                         seed_env ? std::optional<std::string>(seed_env) : std::nullopt);
  const fs::path dir = a.out_dir;
  const auto env = cfg.make_env();
  auto searcher = cfg.make_searcher(env);
  if (a.resume) {
    if (!fs::exists(dir / "state.json")) throw UsageError("--resume: no checkpoint in " + dir.string());
    detail::load_checkpoint(dir, *searcher, cfg);
    out << "resumed at step " << searcher->steps_done() << "\n";
  } else {
    detail::write_checkpoint(dir, *searcher, cfg);
  }
  std::uint64_t last = searcher->steps_done();
  try {
    while (!searcher->done()) {
      searcher->step();
      if (searcher->steps_done() - last >= cfg.checkpoint_every) {
        last = searcher->steps_done();
        detail::write_artifacts(dir, *searcher, cfg);
        detail::write_checkpoint(dir, *searcher, cfg);
      }
    }
  } catch (const Error& e) {
    // The failed step may have drawn random numbers already, so the last
    // periodic checkpoint stays the resume point.
    detail::write_artifacts(dir, *searcher, cfg);
    err << "optimization stopped at step " << searcher->steps_done() << ": " << e.what() << "\n";
    err << "resume with --resume to continue from step " << last << "\n";
    return kExitFailure;
  }
  detail::write_artifacts(dir, *searcher, cfg);
  detail::write_checkpoint(dir, *searcher, cfg);
  const auto& t = searcher->tracker();
  out << cfg.algo << ": " << searcher->steps_done() << " steps, best scalar cost " << format_double(t.best_cost())
      << " (" << cost_summary(t.best_state().cost, t.best_state().tree.stages) << "), " << t.pareto().size()
      << " Pareto points\n";
  return kExitOk;
}

// ---- verify -----------------------------------------------------------------

struct VerifyArgs {
  std::string design;
  std::uint64_t sampled = 0;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string report;
};

inline int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const auto doc = load_design(a.design);
  const unsigned workers = a.workers ? a.workers : std::max(1u, std::thread::hardware_concurrency());
  nlohmann::json j;
  bool pass = false;
  try {
    VerifyMode mode = Exhaustive{};
    if (a.sampled) mode = Sampled{a.sampled, a.seed};
    const auto r = verify(doc, mode, workers);
    j = to_json(r);
    pass = r.pass;
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string(e.what()) + " (use --sampled N)");
  } catch (const Error& e) {
    j = {{"pass", false}, {"tested", 0}, {"counterexample", nullptr}, {"error", e.what()}};
  }
  const auto text = j.dump(2) + "\n";
  if (!a.report.empty()) write_file_atomic(a.report, text);
  out << text;
  return pass ? kExitOk : kExitFailure;
}

// ---- pareto -----------------------------------------------------------------

struct ParetoArgs {
  std::vector<std::string> inputs;
  std::vector<double> ref;
  std::string out;
  std::string svg;
};

inline int cmd_pareto(const ParetoArgs& a, std::ostream& out) {
  ParetoSet merged;
  std::vector<SvgSeries> series;
  for (const auto& path : a.inputs) {
    std::vector<ParetoPoint> pts;
    const auto name = fs::path(path).stem().string();
    try {
      pts = read_points_csv(read_file(path), name, path);
    } catch (const IoError& e) {
      throw UsageError(e.what());
    }
    ParetoSet own;
    for (auto& p : pts) {
      own.insert(p);
      merged.insert(std::move(p));
    }
    series.push_back({path, own.sorted()});
  }
  RefPoint ref;
  if (a.ref.size() == 2) {
    ref = {a.ref[0], a.ref[1]};
  } else {
    // Default reference: 10% beyond the worst frontier coordinate.
    for (const auto& p : merged.points()) {
      ref.area = std::max(ref.area, p.area * 1.1);
      ref.delay = std::max(ref.delay, p.delay * 1.1);
    }
  }
  double hv = 0.0;
  try {
    hv = hypervolume(merged, ref);
  } catch (const RefDominated& e) {
    throw UsageError(e.what());
  }
  if (!a.out.empty()) write_file_atomic(a.out, pareto_to_csv(merged));
  if (!a.svg.empty()) write_file_atomic(a.svg, frontier_svg(series));
  out << "points " << merged.size() << "\n";
  out << "reference " << format_double(ref.area) << " " << format_double(ref.delay) << "\n";
  out << "hypervolume " << format_double(hv) << "\n";
  if (a.out.empty()) out << pareto_to_csv(merged);
  return kExitOk;
}

// ---- emit-rtl ---------------------------------------------------------------

struct EmitArgs {
  std::string design;
  std::string out;
  std::string module;
};

inline int cmd_emit_rtl(const EmitArgs& a, std::ostream& out) {
  auto doc = load_design(a.design);
  if (!a.module.empty()) doc.meta["name"] = a.module;
  std::string text;
  try {
    text = emit_verilog(doc);
  } catch (const IllegalDesign& e) {
    throw UsageError(a.design + ": " + e.what());
  }
  write_file_atomic(a.out, text);
  out << "wrote module " << default_module_name(doc) << " to " << a.out << "\n";
  return kExitOk;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  int width = 8;
  std::string ppg = "and";
  bool mac = false;
  int count = 500;
  std::uint64_t seed = 1;
  std::string out;
};

inline int cmd_sample(const SampleArgs& a, std::ostream& out) {
  const auto ppg = ppg_flag(a.ppg);
  if (a.width < 1 || a.width > kMaxWidth) throw UsageError("--width must lie in [1, " + std::to_string(kMaxWidth) + "]");
  const auto rows = sample_designs(a.width, ppg, a.count, a.seed, a.mac);
  write_file_atomic(a.out, samples_to_csv(rows));
  std::vector<double> st, area, delay, power;
  for (const auto& r : rows) {
    st.push_back(r.stage_count);
    area.push_back(r.area);
    delay.push_back(r.delay);
    power.push_back(r.power);
  }
  out << "designs " << rows.size() << "\n";
  if (rows.size() >= 2) {
    out << "spearman stage_count delay " << format_double(spearman(st, delay)) << "\n";
    out << "spearman area power " << format_double(spearman(area, power)) << "\n";
  }
  return kExitOk;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string design;
  std::string backend_cmd;
  double w_area = 0.5, w_delay = 0.5;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto doc = load_design(a.design);
  if (auto why = design_violation(doc)) throw UsageError(a.design + ": " + *why);
  std::shared_ptr<CostBackend> backend;
  if (a.backend_cmd.empty())
    backend = std::make_shared<AnalyticalBackend>();
  else
    backend = std::make_shared<ExternalBackend>(a.backend_cmd);
  RewardConfig rc;
  rc.w_area = a.w_area;
  rc.w_delay = a.w_delay;
  rc.validate();
  rc.baseline = backend->evaluate(make_design(assign(doc.profile(), wallace(doc.profile()))));
  auto report = backend->evaluate(doc);
  validate_report(report);
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& s : report.scenarios) scenarios.push_back({{"area", s.area}, {"delay", s.delay}, {"power", s.power}});
  nlohmann::json j{{"backend", backend->name()},
                   {"stages", doc.tree.stages},
                   {"scenarios", scenarios},
                   {"area", report.total_area()},
                   {"delay", report.total_delay()},
                   {"power", report.total_power()},
                   {"scalar_cost", scalar_cost(report, rc)}};
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---- app --------------------------------------------------------------------

struct Args {
  BaselineArgs baseline;
  OptimizeArgs optimize;
  VerifyArgs verify;
  ParetoArgs pareto;
  EmitArgs emit;
  SampleArgs sample;
  EvalArgs eval;
};

inline void build_app(CLI::App& app, Args& a) {
  app.description("Compressor-tree multiplier design-space optimizer");
  app.require_subcommand(1);

  auto* b = app.add_subcommand("baseline", "Write a Wallace or Dadda design");
  b->add_option("--width", a.baseline.width, "Operand width in bits")->capture_default_str();
  b->add_option("--ppg", a.baseline.ppg, "Partial product generator: and | booth4")->capture_default_str();
  b->add_flag("--mac", a.baseline.mac, "Add a 2N-bit addend (multiply-accumulate)");
  b->add_option("--kind", a.baseline.kind, "Baseline structure")
      ->check(CLI::IsMember({"wallace", "dadda"}))
      ->capture_default_str();
  b->add_option("-o,--out", a.baseline.out, "Design JSON to write")->required();

  auto* o = app.add_subcommand("optimize", "Run a search described by a TOML config");
  o->add_option("config", a.optimize.config, "TOML config file")->required();
  o->add_option("-o,--out", a.optimize.out_dir, "Artifact directory")->capture_default_str();
  o->add_flag("--resume", a.optimize.resume, "Continue from the checkpoint in the artifact directory");

  auto* v = app.add_subcommand("verify", "Check a design against integer multiplication");
  v->add_option("design", a.verify.design, "Design JSON")->required();
  v->add_option("--sampled", a.verify.sampled, "Test N random operand sets instead of all");
  v->add_option("--seed", a.verify.seed, "Seed for --sampled")->capture_default_str();
  v->add_option("--workers", a.verify.workers, "Threads for exhaustive checks (0: all cores)")->capture_default_str();
  v->add_option("--report", a.verify.report, "Also write the JSON report here");

  auto* p = app.add_subcommand("pareto", "Merge runs into one frontier and report its hypervolume");
  p->add_option("inputs", a.pareto.inputs, "CSV files with area and delay columns")->required();
  p->add_option("--ref", a.pareto.ref, "Reference point AREA DELAY (default: 1.1 x the worst coordinates)")
      ->expected(2);
  p->add_option("-o,--out", a.pareto.out, "Merged frontier CSV (default: print it)");
  p->add_option("--svg", a.pareto.svg, "Scatter plot of each input's frontier");

  auto* e = app.add_subcommand("emit-rtl", "Write structural Verilog for a design");
  e->add_option("design", a.emit.design, "Design JSON")->required();
  e->add_option("-o,--out", a.emit.out, "Verilog file to write")->required();
  e->add_option("--module", a.emit.module, "Module name (default: from the design)");

  auto* s = app.add_subcommand("sample", "Sample distinct designs near Wallace and score them");
  s->add_option("--width", a.sample.width, "Operand width in bits")->capture_default_str();
  s->add_option("--ppg", a.sample.ppg, "Partial product generator: and | booth4")->capture_default_str();
  s->add_flag("--mac", a.sample.mac, "Add a 2N-bit addend (multiply-accumulate)");
  s->add_option("--count", a.sample.count, "Number of designs")->capture_default_str()->check(CLI::NonNegativeNumber);
  s->add_option("--seed", a.sample.seed, "Random seed")->capture_default_str();
  s->add_option("-o,--out", a.sample.out, "CSV to write")->required();

  auto* ev = app.add_subcommand("eval", "Print the cost of a design");
  ev->add_option("design", a.eval.design, "Design JSON")->required();
  ev->add_option("--backend-cmd", a.eval.backend_cmd, "External cost command (default: analytical model)");
  ev->add_option("--w-area", a.eval.w_area, "Area weight for the scalar cost")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  ev->add_option("--w-delay", a.eval.w_delay, "Delay weight for the scalar cost")->capture_default_str()->check(CLI::Range(0.0, 1.0));
}

// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"", "mulopt"};
  Args a;
  build_app(app, a);
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (app.get_subcommands().empty()) err << "run with --help for usage\n";
    return kExitUsage;
  }
  try {
    if (app.got_subcommand("baseline")) return cmd_baseline(a.baseline, out);
    if (app.got_subcommand("optimize")) return cmd_optimize(a.optimize, out, err);
    if (app.got_subcommand("verify")) return cmd_verify(a.verify, out);
    if (app.got_subcommand("pareto")) return cmd_pareto(a.pareto, out);
    if (app.got_subcommand("emit-rtl")) return cmd_emit_rtl(a.emit, out);
    if (app.got_subcommand("sample")) return cmd_sample(a.sample, out);
    if (app.got_subcommand("eval")) return cmd_eval(a.eval, out);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mulopt::cli
