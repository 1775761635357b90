#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mulopt/design.hpp"
#include "mulopt/error.hpp"
#include "mulopt/tree.hpp"

namespace mulopt {

// Metrics for one synthesis constraint.
struct CostScenario {
  double area = 0.0;
  double delay = 0.0;
  double power = 0.0;

  friend bool operator==(const CostScenario&, const CostScenario&) = default;
};

struct CostReport {
  std::vector<CostScenario> scenarios;
  double scalar_cost = 0.0;

  double total_area() const {
    double s = 0.0;
    for (const auto& sc : scenarios) s += sc.area;
    return s;
  }
  double total_delay() const {
    double s = 0.0;
    for (const auto& sc : scenarios) s += sc.delay;
    return s;
  }
  double total_power() const {
    double s = 0.0;
    for (const auto& sc : scenarios) s += sc.power;
    return s;
  }

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

inline void validate_report(const CostReport& report) {
  if (report.scenarios.empty()) throw BackendFailure("cost report has no scenarios");
  for (const auto& sc : report.scenarios)
    for (double v : {sc.area, sc.delay, sc.power})
      if (!std::isfinite(v) || v < 0.0)
        throw BackendFailure("cost metrics must be finite and non-negative");
}

// Weights plus the Wallace reference every metric is divided by.
struct RewardConfig {
  double w_area = 0.5;
  double w_delay = 0.5;
  double w_power = 0.0;
  CostReport baseline;
  bool reduce_power = true;  // drop the power term entirely

  void validate() const {
    for (double w : {w_area, w_delay, w_power})
      if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("weights must lie in [0, 1]");
    const bool any = w_area > 0.0 || w_delay > 0.0 || (!reduce_power && w_power > 0.0);
    if (!any) throw InvalidArgument("at least one active weight must be positive");
  }
};

inline double scalar_cost(const CostReport& report, const RewardConfig& cfg) {
  auto term = [](double weight, double value, double base, const char* name) {
    if (weight == 0.0) return 0.0;
    if (base == 0.0) throw ZeroBaseline(std::string("baseline ") + name + " sum is zero");
    return weight * value / base;
  };
  const auto& b = cfg.baseline;
  double cost = term(cfg.w_area, report.total_area(), b.total_area(), "area") +
                term(cfg.w_delay, report.total_delay(), b.total_delay(), "delay");
  if (!cfg.reduce_power) cost += term(cfg.w_power, report.total_power(), b.total_power(), "power");
  return cost;
}

// Cost decrease is positive reward.
inline double reward(double prev_cost, double next_cost) { return prev_cost - next_cost; }

// Unit-cost proxy: full adders and half adders contribute area, stages and a
// log-depth final adder contribute delay, and power tracks area.
struct AnalyticalModel {
  double full_area = 1.0;
  double half_area = 0.5;
  double stage_delay = 1.0;
  double cpa_delay = 1.0;
  double power_per_area = 1.0;
};

inline int ceil_log2(int n) {
  int bits = 0;
  while ((1LL << bits) < n) ++bits;
  return bits;
}

inline CostReport analytical_cost(const StagedTree& tree, const AnalyticalModel& model = {}) {
  const auto sums = tree.column_sums();
  CostScenario sc;
  sc.area = model.full_area * sums.total_full() + model.half_area * sums.total_half();
  sc.delay = tree.stages * model.stage_delay + ceil_log2(tree.num_columns()) * model.cpa_delay;
  sc.power = model.power_per_area * sc.area;
  return {{sc}, 0.0};
}

// Source of (area, delay, power) for a design. Implementations must be safe to
// call from several threads at once.
class CostBackend {
 public:
  virtual ~CostBackend() = default;
  virtual CostReport evaluate(const DesignDoc& design) = 0;
  virtual std::string name() const = 0;
};

class AnalyticalBackend final : public CostBackend {
 public:
  explicit AnalyticalBackend(AnalyticalModel model = {}) : model_(model) {}
  CostReport evaluate(const DesignDoc& design) override {
    return analytical_cost(design.tree, model_);
  }
  std::string name() const override { return "analytical"; }
  const AnalyticalModel& model() const { return model_; }

 private:
  AnalyticalModel model_;
};

}  // namespace mulopt
