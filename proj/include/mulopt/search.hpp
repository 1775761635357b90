#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "mulopt/baseline.hpp"
#include "mulopt/env.hpp"
#include "mulopt/run.hpp"
#include "mulopt/stats.hpp"

namespace mulopt {

// ---- simulated annealing ----------------------------------------------------

struct SaConfig {
  std::uint64_t budget = 2000;  // evaluations
  double t0 = 0.05;             // in normalized-cost units
  double alpha = 0.995;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(t0 >= 0.0)) throw InvalidArgument("t0 must be non-negative");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  }
};

// Per-proposal record used to study the acceptance rate over the schedule.
struct SaMove {
  double temperature = 0.0;
  double delta = 0.0;
  bool accepted = false;
};

inline bool sa_accept(double delta, double temperature, double u) {
  if (delta <= 0.0) return true;
  if (temperature <= 0.0) return false;
  return u < std::exp(-delta / temperature);
}

class SaSearch final : public Searcher {
 public:
  SaSearch(const Environment& env, SaConfig cfg)
      : env_(env), cfg_((cfg.validate(), cfg)), rng_(cfg_.seed), initial_(env.reset()) {
    current_ = initial_;
    mask_ = env_.mask(current_);
    temperature_ = cfg_.t0;
    tracker_.start(initial_);
  }

  bool done() const override { return steps_ >= cfg_.budget || stuck_; }
  std::uint64_t steps_done() const override { return steps_; }
  const Tracker& tracker() const override { return tracker_; }
  const std::vector<SaMove>& moves() const { return moves_; }
  double temperature() const { return temperature_; }

  void step() override {
    if (done()) return;
    if (mask_.count() == 0) {
      current_ = initial_;
      mask_ = env_.mask(current_);
      if (mask_.count() == 0) {
        stuck_ = true;
        return;
      }
    }
    const int a = uniform_masked(mask_, rng_);
    auto next = env_.apply(current_, Action::from_flat(a));
    tracker_.observe(next, 0);
    const double delta = next.cost.scalar_cost - current_.cost.scalar_cost;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    const bool accepted = sa_accept(delta, temperature_, u);
    moves_.push_back({temperature_, delta, accepted});
    if (accepted) {
      current_ = std::move(next);
      mask_ = env_.mask(current_);
    }
    temperature_ *= cfg_.alpha;
    ++steps_;
  }

  nlohmann::json save_state() const override {
    nlohmann::json moves = nlohmann::json::array();
    for (const auto& m : moves_) moves.push_back({m.temperature, m.delta, m.accepted});
    return {{"algo", "sa"},
            {"steps", steps_},
            {"temperature", temperature_},
            {"rng", rng_state(rng_)},
            {"current", counts_to_json(current_.counts)},
            {"current_step", current_.step},
            {"moves", moves},
            {"tracker", tracker_.save()}};
  }

  void load_state(const nlohmann::json& j) override {
    if (j.at("algo") != "sa") throw IoError("checkpoint belongs to a different algorithm");
    steps_ = j.at("steps").get<std::uint64_t>();
    temperature_ = j.at("temperature").get<double>();
    load_rng_state(rng_, j.at("rng").get<std::string>());
    current_ = env_.make_state(counts_from_json(j.at("current")), j.at("current_step").get<int>());
    mask_ = env_.mask(current_);
    moves_.clear();
    for (const auto& m : j.at("moves")) moves_.push_back({m[0].get<double>(), m[1].get<double>(), m[2].get<bool>()});
    tracker_.load(j.at("tracker"), env_);
  }

 private:
  const Environment& env_;
  SaConfig cfg_;
  std::mt19937_64 rng_;
  EnvState initial_, current_;
  ActionMask mask_;
  double temperature_ = 0.0;
  Tracker tracker_;
  std::vector<SaMove> moves_;
  std::uint64_t steps_ = 0;
  bool stuck_ = false;
};

inline RunResult sa_search(const Environment& env, const SaConfig& cfg) { return SaSearch(env, cfg).run(); }

// ---- random search ----------------------------------------------------------

struct RandomConfig {
  std::uint64_t budget = 2000;
  std::uint64_t seed = 1;
  int episode_len = 30;

  void validate() const {
    if (episode_len < 1) throw InvalidArgument("episode_len must be positive");
  }
};

// Uniform masked-in walk, restarting from the initial design every episode.
class RandomSearch final : public Searcher {
 public:
  RandomSearch(const Environment& env, RandomConfig cfg)
      : env_(env), cfg_((cfg.validate(), cfg)), rng_(cfg_.seed), initial_(env.reset()) {
    current_ = initial_;
    mask_ = env_.mask(current_);
    tracker_.start(initial_);
  }

  bool done() const override { return steps_ >= cfg_.budget || stuck_; }
  std::uint64_t steps_done() const override { return steps_; }
  const Tracker& tracker() const override { return tracker_; }

  void step() override {
    if (done()) return;
    if (mask_.count() == 0) {
      restart();
      if (mask_.count() == 0) {
        stuck_ = true;
        return;
      }
    }
    current_ = env_.apply(current_, Action::from_flat(uniform_masked(mask_, rng_)));
    mask_ = env_.mask(current_);
    tracker_.observe(current_, 0);
    ++steps_;
    if (++episode_step_ >= cfg_.episode_len) restart();
  }

  nlohmann::json save_state() const override {
    return {{"algo", "random"},
            {"steps", steps_},
            {"episode_step", episode_step_},
            {"rng", rng_state(rng_)},
            {"current", counts_to_json(current_.counts)},
            {"current_step", current_.step},
            {"tracker", tracker_.save()}};
  }

  void load_state(const nlohmann::json& j) override {
    if (j.at("algo") != "random") throw IoError("checkpoint belongs to a different algorithm");
    steps_ = j.at("steps").get<std::uint64_t>();
    episode_step_ = j.at("episode_step").get<int>();
    load_rng_state(rng_, j.at("rng").get<std::string>());
    current_ = env_.make_state(counts_from_json(j.at("current")), j.at("current_step").get<int>());
    mask_ = env_.mask(current_);
    tracker_.load(j.at("tracker"), env_);
  }

 private:
  void restart() {
    current_ = initial_;
    mask_ = env_.mask(current_);
    episode_step_ = 0;
  }

  const Environment& env_;
  RandomConfig cfg_;
  std::mt19937_64 rng_;
  EnvState initial_, current_;
  ActionMask mask_;
  Tracker tracker_;
  std::uint64_t steps_ = 0;
  int episode_step_ = 0;
  bool stuck_ = false;
};

inline RunResult random_search(const Environment& env, const RandomConfig& cfg) {
  return RandomSearch(env, cfg).run();
}

// ---- design sampling --------------------------------------------------------

struct SampleRow {
  int stage_count = 0;
  double area = 0.0, delay = 0.0, power = 0.0;
};

inline constexpr const char* kSampleHeader = "stage_count,area,delay,power";

inline constexpr int kSampleWalkLength = 50;

// Distinct designs met on random masked-in walks from Wallace (restarting
// every kSampleWalkLength steps), scored with the analytical model. The first
// row is always Wallace.
inline std::vector<SampleRow> sample_designs(int width, PpgKind ppg, int count, std::uint64_t seed,
                                             bool mac = false, const AnalyticalModel& model = {}) {
  if (count < 0) throw InvalidArgument("count must be non-negative");
  const auto profile = pp_profile(width, ppg, mac);
  const auto start = wallace(profile);
  const auto cap = default_stage_cap(profile);
  std::mt19937_64 rng(seed);
  std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
  std::vector<SampleRow> rows;
  auto visit = [&](const CompressorCounts& c) {
    if (!seen.insert({c.f, c.h}).second) return;
    const auto tree = assign(profile, c);
    const auto report = analytical_cost(tree, model);
    rows.push_back({tree.stages, report.total_area(), report.total_delay(), report.total_power()});
  };
  if (count == 0) return rows;
  visit(start);
  if (compute_mask(profile, start, cap).count() == 0) return rows;
  auto current = start;
  int walk = 0, idle = 0;
  while (static_cast<int>(rows.size()) < count) {
    const auto m = compute_mask(profile, current, cap);
    if (m.count() == 0 || walk >= kSampleWalkLength) {
      current = start;
      walk = 0;
      continue;
    }
    current = apply_action(profile, current, Action::from_flat(uniform_masked(m, rng)));
    ++walk;
    const auto before = rows.size();
    visit(current);
    idle = rows.size() == before ? idle + 1 : 0;
    if (idle > 100000) break;  // the reachable space is exhausted
  }
  return rows;
}

inline std::string samples_to_csv(const std::vector<SampleRow>& rows) {
  std::string out = std::string(kSampleHeader) + "\n";
  for (const auto& r : rows)
    out += std::to_string(r.stage_count) + "," + format_double(r.area) + "," + format_double(r.delay) + "," +
           format_double(r.power) + "\n";
  return out;
}

}  // namespace mulopt
