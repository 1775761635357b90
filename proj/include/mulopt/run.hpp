#pragma once

#include <charconv>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mulopt/design.hpp"
#include "mulopt/env.hpp"
#include "mulopt/pareto.hpp"

namespace mulopt {

// Shortest text that reads back as the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct LogRow {
  std::uint64_t step = 0;
  int thread = 0;
  double scalar_cost = 0.0, area = 0.0, delay = 0.0, power = 0.0, best_cost = 0.0;
  int stage_count = 0;
  friend bool operator==(const LogRow&, const LogRow&) = default;
};

inline constexpr const char* kRunLogHeader = "step,thread,scalar_cost,area,delay,power,best_cost,stage_count";

struct RunLog {
  std::vector<LogRow> rows;

  std::string to_csv() const {
    std::string out = std::string(kRunLogHeader) + "\n";
    for (const auto& r : rows) {
      out += std::to_string(r.step) + "," + std::to_string(r.thread) + "," + format_double(r.scalar_cost) + "," +
             format_double(r.area) + "," + format_double(r.delay) + "," + format_double(r.power) + "," +
             format_double(r.best_cost) + "," + std::to_string(r.stage_count) + "\n";
    }
    return out;
  }
};

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void load_rng_state(std::mt19937_64& rng, const std::string& text) {
  std::istringstream is(text);
  is >> rng;
  if (!is) throw IoError("corrupt random generator state");
}

inline nlohmann::json counts_to_json(const CompressorCounts& c) { return {{"f", c.f}, {"h", c.h}}; }
inline CompressorCounts counts_from_json(const nlohmann::json& j) {
  return {j.at("f").get<std::vector<int>>(), j.at("h").get<std::vector<int>>()};
}

inline std::string hex_hash(const DesignDoc& d) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << content_hash(d);
  return os.str();
}

// Best-so-far design, Pareto set of every evaluated design, and the run log.
class Tracker {
 public:
  // Records the starting design without logging a row.
  void start(const EnvState& s) {
    best_cost_ = s.cost.scalar_cost;
    best_ = s;
    add_pareto(s);
  }

  void observe(const EnvState& s, int thread) {
    if (!best_ || s.cost.scalar_cost < best_cost_) {
      best_cost_ = s.cost.scalar_cost;
      best_ = s;
    }
    add_pareto(s);
    log_.rows.push_back({static_cast<std::uint64_t>(log_.rows.size()), thread, s.cost.scalar_cost,
                         s.cost.total_area(), s.cost.total_delay(), s.cost.total_power(), best_cost_,
                         s.tree.stages});
  }

  double best_cost() const { return best_cost_; }
  const EnvState& best_state() const { return *best_; }
  const ParetoSet& pareto() const { return pareto_; }
  const RunLog& log() const { return log_; }

  nlohmann::json save() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : log_.rows)
      rows.push_back({r.step, r.thread, r.scalar_cost, r.area, r.delay, r.power, r.best_cost, r.stage_count});
    nlohmann::json pareto = nlohmann::json::array();
    for (const auto& p : pareto_.points())
      pareto.push_back({{"area", p.area}, {"delay", p.delay}, {"label", p.label}, {"counts", counts_to_json(p.design->counts())}});
    return {{"best", counts_to_json(best_->counts)}, {"best_step", best_->step}, {"rows", rows}, {"pareto", pareto}};
  }

  void load(const nlohmann::json& j, const Environment& env) {
    best_ = env.make_state(counts_from_json(j.at("best")), j.at("best_step").get<int>());
    best_cost_ = best_->cost.scalar_cost;
    log_.rows.clear();
    for (const auto& r : j.at("rows"))
      log_.rows.push_back({r[0].get<std::uint64_t>(), r[1].get<int>(), r[2].get<double>(), r[3].get<double>(),
                           r[4].get<double>(), r[5].get<double>(), r[6].get<double>(), r[7].get<int>()});
    pareto_ = ParetoSet{};
    for (const auto& p : j.at("pareto")) {
      const auto tree = assign(env.profile(), counts_from_json(p.at("counts")));
      pareto_.insert(p.at("area").get<double>(), p.at("delay").get<double>(),
                     std::make_shared<const DesignDoc>(make_design(tree)), p.at("label").get<std::string>());
    }
  }

 private:
  void add_pareto(const EnvState& s) {
    auto design = std::make_shared<const DesignDoc>(make_design(s.tree));
    pareto_.insert(s.cost.total_area(), s.cost.total_delay(), design, hex_hash(*design));
  }

  double best_cost_ = 0.0;
  std::optional<EnvState> best_;
  ParetoSet pareto_;
  RunLog log_;
};

struct RunResult {
  DesignDoc best;
  double best_cost = 0.0;
  ParetoSet pareto;
  RunLog log;
};

// A resumable search. step() advances by one unit of work (an environment
// step, or one synchronized segment for A2C); between calls the full state
// can be saved and restored.
class Searcher {
 public:
  virtual ~Searcher() = default;
  virtual bool done() const = 0;
  virtual void step() = 0;
  virtual std::uint64_t steps_done() const = 0;
  virtual const Tracker& tracker() const = 0;
  virtual nlohmann::json save_state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;
  // Binary network checkpoint, for learning agents.
  virtual std::optional<std::string> network_bytes() const { return std::nullopt; }
  virtual void load_network(const std::string&) {}

  RunResult result() const {
    const auto& t = tracker();
    return {make_design(t.best_state().tree, "best"), t.best_cost(), t.pareto(), t.log()};
  }

  RunResult run() {
    while (!done()) step();
    return result();
  }
};

inline int uniform_masked(const ActionMask& m, std::mt19937_64& rng) {
  const auto idx = m.indices();
  if (idx.empty()) throw NoLegalAction("no action is legal in this state");
  return idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)];
}

}  // namespace mulopt
