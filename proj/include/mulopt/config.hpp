#pragma once

#include <cstdlib>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <toml.hpp>

#include "mulopt/agents.hpp"
#include "mulopt/external_backend.hpp"
#include "mulopt/search.hpp"

namespace mulopt {

// Every problem found in a config, in file order.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& ps) {
    std::string s = "invalid config:";
    for (const auto& p : ps) s += "\n  " + p;
    return s;
  }
  std::vector<std::string> problems_;
};

struct OptimizeConfig {
  std::string algo;
  int width = 0;
  PpgKind ppg = PpgKind::And;
  bool mac = false;
  double w_area = 0.0, w_delay = 0.0, w_power = 0.0;
  std::optional<std::string> backend_cmd;  // unset: analytical
  double backend_timeout = kDefaultBackendTimeoutSecs;
  std::uint64_t seed = 1;
  std::uint64_t steps = 2000;
  std::optional<int> stage_cap;
  int episode_len = 30;
  bool reset_to_best = false;
  std::uint64_t checkpoint_every = 100;

  // learning agents
  double gamma = 0.8;
  double lr = 2e-4;
  int st_max = kDefaultStMax;
  std::vector<int> conv{16, 32};
  std::vector<int> hidden{256};
  // dqn
  double eps_start = 0.95, eps_end = 0.05;
  std::uint64_t warmup = 200;
  int batch = 64;
  std::uint64_t capacity = 10000;
  int target_sync = 0;
  // a2c
  int threads = 4;
  int n_step = 5;
  int t_up = 0;
  double entropy_coef = 0.0;
  // sa
  double t0 = 0.05, alpha = 0.995;

  NetArch arch() const {
    NetArch a;
    a.st_max = st_max;
    a.conv = conv;
    a.hidden = hidden;
    return a;
  }

  DqnConfig dqn() const {
    DqnConfig c;
    c.gamma = gamma;
    c.eps_start = eps_start;
    c.eps_end = eps_end;
    c.total_steps = steps;
    c.warmup = warmup;
    c.batch = batch;
    c.capacity = capacity;
    c.lr = lr;
    c.seed = seed;
    c.episode_len = episode_len;
    c.reset_to_best = reset_to_best;
    c.target_sync = target_sync;
    c.arch = arch();
    return c;
  }

  A2cConfig a2c() const {
    A2cConfig c;
    c.n_threads = threads;
    c.n_step = n_step;
    c.t_up = t_up;
    c.gamma = gamma;
    c.lr = lr;
    c.entropy_coef = entropy_coef;
    c.total_steps = steps;
    c.seed = seed;
    c.episode_len = episode_len;
    c.reset_to_best = reset_to_best;
    c.arch = arch();
    return c;
  }

  SaConfig sa() const { return {steps, t0, alpha, seed}; }
  RandomConfig random() const { return {steps, seed, episode_len}; }

  std::shared_ptr<CostBackend> make_backend() const {
    if (backend_cmd) return std::make_shared<ExternalBackend>(*backend_cmd, backend_timeout);
    return std::make_shared<AnalyticalBackend>();
  }

  Environment make_env() const {
    EnvConfig ec;
    ec.reward.w_area = w_area;
    ec.reward.w_delay = w_delay;
    ec.reward.w_power = w_power;
    ec.reward.reduce_power = w_power == 0.0;
    ec.stage_cap = stage_cap;
    return Environment(pp_profile(width, ppg, mac), make_backend(), ec);
  }

  std::unique_ptr<Searcher> make_searcher(const Environment& env) const {
    if (algo == "dqn") return std::make_unique<DqnAgent>(env, dqn());
    if (algo == "a2c") return std::make_unique<A2cAgent>(env, a2c());
    if (algo == "sa") return std::make_unique<SaSearch>(env, sa());
    return std::make_unique<RandomSearch>(env, random());
  }

  // Fields that change the trajectory; a checkpoint only resumes under the
  // same fingerprint.
  nlohmann::json fingerprint() const {
    return {{"algo", algo},         {"width", width},       {"ppg", std::string(to_string(ppg))},
            {"mac", mac},           {"weights", {w_area, w_delay, w_power}},
            {"backend", backend_cmd ? *backend_cmd : "analytical"},
            {"seed", seed},         {"steps", steps},       {"stage_cap", stage_cap ? *stage_cap : -1},
            {"episode_len", episode_len}, {"reset_to_best", reset_to_best},
            {"gamma", gamma},       {"lr", lr},             {"st_max", st_max},
            {"conv", conv},         {"hidden", hidden},     {"eps", {eps_start, eps_end}},
            {"warmup", warmup},     {"batch", batch},       {"capacity", capacity},
            {"target_sync", target_sync}, {"threads", threads}, {"n_step", n_step},
            {"t_up", t_up},         {"entropy_coef", entropy_coef}, {"t0", t0},
            {"alpha", alpha}};
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const toml::table& t) : t_(t) {}

  template <class T>
  void integer(const char* key, T& out, long long lo, bool required = false) {
    seen_.insert(key);
    const auto* node = t_.get(key);
    if (!node) {
      if (required) problems.push_back(std::string(key) + ": required");
      return;
    }
    const auto v = node->value<std::int64_t>();
    if (!node->is_integer() || !v) {
      problems.push_back(std::string(key) + ": expected an integer");
    } else if (*v < lo) {
      problems.push_back(std::string(key) + ": must be at least " + std::to_string(lo));
    } else {
      out = static_cast<T>(*v);
    }
  }

  void real(const char* key, double& out, double lo, double hi, const toml::table* from = nullptr,
            std::string prefix = {}) {
    const auto& tab = from ? *from : t_;
    if (!from) seen_.insert(key);
    const auto* node = tab.get(key);
    if (!node) return;
    const auto v = node->value<double>();
    const std::string name = prefix + key;
    if (!(node->is_floating_point() || node->is_integer()) || !v) {
      problems.push_back(name + ": expected a number");
    } else if (!(*v >= lo && *v <= hi)) {
      problems.push_back(name + ": must lie in [" + format_double(lo) + ", " + format_double(hi) + "]");
    } else {
      out = *v;
    }
  }

  void boolean(const char* key, bool& out) {
    seen_.insert(key);
    const auto* node = t_.get(key);
    if (!node) return;
    if (auto v = node->value<bool>(); node->is_boolean() && v)
      out = *v;
    else
      problems.push_back(std::string(key) + ": expected true or false");
  }

  std::optional<std::string> string(const char* key, bool required = false) {
    seen_.insert(key);
    const auto* node = t_.get(key);
    if (!node) {
      if (required) problems.push_back(std::string(key) + ": required");
      return std::nullopt;
    }
    if (auto v = node->value<std::string>(); node->is_string() && v) return *v;
    problems.push_back(std::string(key) + ": expected a string");
    return std::nullopt;
  }

  void int_list(const char* key, std::vector<int>& out, bool allow_empty) {
    seen_.insert(key);
    const auto* node = t_.get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr) {
      problems.push_back(std::string(key) + ": expected an array of integers");
      return;
    }
    std::vector<int> v;
    for (const auto& el : *arr) {
      const auto x = el.value<std::int64_t>();
      if (!el.is_integer() || !x || *x < 1) {
        problems.push_back(std::string(key) + ": entries must be positive integers");
        return;
      }
      v.push_back(static_cast<int>(*x));
    }
    if (v.empty() && !allow_empty) {
      problems.push_back(std::string(key) + ": must not be empty");
      return;
    }
    out = std::move(v);
  }

  const toml::table* table(const char* key) {
    seen_.insert(key);
    const auto* node = t_.get(key);
    if (!node) return nullptr;
    if (const auto* tab = node->as_table()) return tab;
    problems.push_back(std::string(key) + ": expected a table");
    return nullptr;
  }

  void mark(const char* key) { seen_.insert(key); }

  void unknown_keys() {
    for (const auto& [k, v] : t_)
      if (!seen_.count(std::string(k.str()))) problems.push_back(std::string(k.str()) + ": unknown key");
  }

  std::vector<std::string> problems;

 private:
  const toml::table& t_;
  std::set<std::string> seen_;
};

}  // namespace detail

// Parses and validates an optimize config. Every problem is collected before
// throwing ConfigError. `seed_override` (MULOPT_SEED) replaces `seed`.
inline OptimizeConfig parse_optimize_config(const std::string& text, const std::string& source = "config",
                                            std::optional<std::string> seed_override = std::nullopt) {
  toml::table t;
  try {
    t = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ConfigError({source + ":" + std::to_string(where.line) + ":" + std::to_string(where.column) + ": " +
                       std::string(e.description())});
  }
  OptimizeConfig c;
  detail::ConfigReader r(t);

  if (auto algo = r.string("algo", true)) {
    if (*algo == "dqn" || *algo == "a2c" || *algo == "sa" || *algo == "random")
      c.algo = *algo;
    else
      r.problems.push_back("algo: must be one of dqn, a2c, sa, random (got \"" + *algo + "\")");
  }
  r.integer("width", c.width, 1, true);
  if (c.width > kMaxWidth) r.problems.push_back("width: must be at most " + std::to_string(kMaxWidth));
  if (auto ppg = r.string("ppg")) {
    try {
      c.ppg = parse_ppg(*ppg);
    } catch (const Error&) {
      r.problems.push_back("ppg: must be \"and\" or \"booth4\" (got \"" + *ppg + "\")");
    }
  }
  r.boolean("mac", c.mac);

  if (const auto* w = r.table("weights")) {
    std::set<std::string> known{"area", "delay", "power"};
    for (const auto& [k, v] : *w)
      if (!known.count(std::string(k.str()))) r.problems.push_back("weights." + std::string(k.str()) + ": unknown key");
    if (!w->get("area") && !w->get("delay")) r.problems.push_back("weights: needs at least one of area, delay");
    r.real("area", c.w_area, 0.0, 1.0, w, "weights.");
    r.real("delay", c.w_delay, 0.0, 1.0, w, "weights.");
    r.real("power", c.w_power, 0.0, 1.0, w, "weights.");
    if (c.w_area == 0.0 && c.w_delay == 0.0 && c.w_power == 0.0 && (w->get("area") || w->get("delay")))
      r.problems.push_back("weights: at least one weight must be positive");
  } else if (!t.get("weights")) {
    r.problems.push_back("weights: required (a table with area, delay, and optionally power)");
  }

  r.mark("backend");
  if (const auto* b = t.get("backend")) {
    if (auto s = b->value<std::string>(); b->is_string() && s) {
      if (*s != "analytical") r.problems.push_back("backend: must be \"analytical\" or a table with cmd");
    } else if (const auto* bt = b->as_table()) {
      for (const auto& [k, v] : *bt)
        if (k.str() != "cmd" && k.str() != "timeout_secs")
          r.problems.push_back("backend." + std::string(k.str()) + ": unknown key");
      if (auto cmd = bt->get("cmd") ? bt->get("cmd")->value<std::string>() : std::nullopt; cmd && !cmd->empty())
        c.backend_cmd = *cmd;
      else
        r.problems.push_back("backend.cmd: required string for an external backend");
      c.backend_timeout = backend_timeout_from_env();
      r.real("timeout_secs", c.backend_timeout, 1e-3, 1e9, bt, "backend.");
    } else {
      r.problems.push_back("backend: must be \"analytical\" or a table with cmd");
    }
  }

  r.integer("seed", c.seed, 0);
  if (seed_override) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(*seed_override, &used);
      if (used != seed_override->size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      r.problems.push_back("MULOPT_SEED: expected a non-negative integer (got \"" + *seed_override + "\")");
    }
  }
  r.integer("steps", c.steps, 0);
  {
    int cap = 0;
    bool had = t.get("stage_cap") != nullptr;
    r.integer("stage_cap", cap, 0);
    if (had && cap >= 0) c.stage_cap = cap;  // 0 lifts the cap
  }
  r.integer("episode_len", c.episode_len, 1);
  r.boolean("reset_to_best", c.reset_to_best);
  r.integer("checkpoint_every", c.checkpoint_every, 1);

  r.real("gamma", c.gamma, 0.0, 1.0);
  if (c.gamma == 0.0 || c.gamma == 1.0) r.problems.push_back("gamma: must lie strictly between 0 and 1");
  r.real("lr", c.lr, 0.0, 1.0);
  if (c.lr == 0.0) r.problems.push_back("lr: must be positive");
  r.integer("st_max", c.st_max, 1);
  r.int_list("conv", c.conv, true);
  r.int_list("hidden", c.hidden, true);
  r.real("eps_start", c.eps_start, 0.0, 1.0);
  r.real("eps_end", c.eps_end, 0.0, 1.0);
  if (c.eps_end > c.eps_start) r.problems.push_back("eps_end: must not exceed eps_start");
  r.integer("warmup", c.warmup, 0);
  r.integer("batch", c.batch, 1);
  r.integer("capacity", c.capacity, 1);
  if (c.capacity < static_cast<std::uint64_t>(c.batch)) r.problems.push_back("capacity: must be at least batch");
  r.integer("target_sync", c.target_sync, 0);
  r.integer("threads", c.threads, 1);
  r.integer("n_step", c.n_step, 1);
  r.integer("t_up", c.t_up, 0);
  r.real("entropy_coef", c.entropy_coef, 0.0, 1e9);
  r.real("t0", c.t0, 0.0, 1e9);
  r.real("alpha", c.alpha, 0.0, 1.0);
  if (c.alpha == 0.0) r.problems.push_back("alpha: must be positive");

  r.unknown_keys();

  // Cross-field checks that need a valid profile.
  if (r.problems.empty() && (c.algo == "dqn" || c.algo == "a2c")) {
    const auto profile = pp_profile(c.width, c.ppg, c.mac);
    const int cap = c.stage_cap ? *c.stage_cap : default_stage_cap(profile);
    if (cap == 0)
      r.problems.push_back("stage_cap: learning agents need a finite stage cap");
    else if (cap > c.st_max)
      r.problems.push_back("st_max: must be at least the stage cap (" + std::to_string(cap) + ")");
  }
  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return c;
}

}  // namespace mulopt
