#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "mulopt/baseline.hpp"
#include "mulopt/cost.hpp"
#include "mulopt/external_backend.hpp"
#include "mulopt/pareto.hpp"
#include "test_util.hpp"

using namespace mulopt;
namespace fs = std::filesystem;

namespace {

// Dominated area on an n x n grid of cell centres (exact for points on the grid).
double grid_hypervolume(const std::vector<ParetoPoint>& pts, RefPoint ref, double lo, int n) {
  const double cell_a = (ref.area - lo) / n, cell_d = (ref.delay - lo) / n;
  double volume = 0.0;
  for (int x = 0; x < n; ++x) {
    const double a = lo + (x + 0.5) * cell_a;
    for (int y = 0; y < n; ++y) {
      const double d = lo + (y + 0.5) * cell_d;
      for (const auto& p : pts)
        if (p.area <= a && p.delay <= d) {
          volume += cell_a * cell_d;
          break;
        }
    }
  }
  return volume;
}

std::vector<ParetoPoint> brute_front(const std::vector<ParetoPoint>& pts) {
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (k != i && dominates(pts[k], pts[i])) dominated = true;
    if (!dominated) out.push_back(pts[i]);
  }
  return out;
}

fs::path write_script(const std::string& name, const std::string& body) {
  const auto dir = fs::temp_directory_path() / "mulopt-test-backends";
  fs::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << "#!/bin/sh\n" << body;
  fs::permissions(path, fs::perms::owner_all);
  return path;
}

}  // namespace

TEST(AnalyticalCost, Examples) {
  const auto p1 = pp_profile(1, PpgKind::And, false);
  const auto empty = analytical_cost(assign(p1, wallace(p1)));
  ASSERT_EQ(empty.scenarios.size(), 1U);
  EXPECT_EQ(empty.scenarios[0].area, 0.0);
  EXPECT_EQ(empty.scenarios[0].delay, 1.0);

  const auto p8 = pp_profile(8, PpgKind::And, false);
  const auto tree = assign(p8, wallace(p8));
  const auto w = analytical_cost(tree);
  EXPECT_EQ(w.scenarios[0].delay, 8.0);
  EXPECT_EQ(w.scenarios[0].area, 36 + 0.5 * 25);
  EXPECT_EQ(w.scenarios[0].power, w.scenarios[0].area);

  AnalyticalModel doubled;
  doubled.full_area = 2.0;
  const auto w2 = analytical_cost(tree, doubled);
  EXPECT_EQ(w2.scenarios[0].area - w.scenarios[0].area, 36.0);
}

TEST(AnalyticalCost, Monotone) {
  std::mt19937_64 rng(3);
  const auto p = pp_profile(8, PpgKind::And, false);
  for (int t = 0; t < 200; ++t) {
    const auto c = testutil::random_legal_counts(p, rng);
    auto tree = assign(p, c);
    const auto base = analytical_cost(tree).scenarios[0];
    auto more = tree;
    more.t22[0][0] += 1;  // area only depends on totals
    EXPECT_GE(analytical_cost(more).scenarios[0].area, base.area);
    more = tree;
    more.stages += 1;
    more.t32.emplace_back(p.num_columns(), 0);
    more.t22.emplace_back(p.num_columns(), 0);
    EXPECT_GE(analytical_cost(more).scenarios[0].delay, base.delay);
  }
}

TEST(ScalarCost, Examples) {
  CostReport base{{{40.0, 8.0, 40.0}}, 0.0};
  RewardConfig cfg{0.5, 0.5, 0.0, base, true};
  EXPECT_DOUBLE_EQ(scalar_cost(base, cfg), 1.0);
  CostReport smaller{{{36.0, 8.0, 36.0}}, 0.0};
  EXPECT_DOUBLE_EQ(scalar_cost(smaller, cfg), 0.95);
  RewardConfig area_only{1.0, 0.0, 0.0, base, true};
  EXPECT_DOUBLE_EQ(scalar_cost(smaller, area_only), 0.9);
  RewardConfig with_power{0.0, 0.0, 1.0, base, false};
  EXPECT_DOUBLE_EQ(scalar_cost(smaller, with_power), 0.9);
  RewardConfig reduced{0.5, 0.5, 1.0, base, true};
  EXPECT_DOUBLE_EQ(scalar_cost(smaller, reduced), 0.95);
}

TEST(ScalarCost, SumsScenariosAndIsLinearInWeights) {
  CostReport base{{{10.0, 2.0, 5.0}, {20.0, 4.0, 5.0}}, 0.0};
  CostReport r{{{9.0, 3.0, 1.0}, {18.0, 3.0, 4.0}}, 0.0};
  RewardConfig a{1.0, 0.0, 0.0, base, false}, d{0.0, 1.0, 0.0, base, false},
      pw{0.0, 0.0, 1.0, base, false}, mix{0.3, 0.6, 0.1, base, false};
  EXPECT_DOUBLE_EQ(scalar_cost(r, a), 27.0 / 30.0);
  EXPECT_DOUBLE_EQ(scalar_cost(r, d), 1.0);
  EXPECT_NEAR(scalar_cost(r, mix),
              0.3 * scalar_cost(r, a) + 0.6 * scalar_cost(r, d) + 0.1 * scalar_cost(r, pw), 1e-12);
}

TEST(ScalarCost, ZeroBaseline) {
  CostReport base{{{0.0, 8.0, 0.0}}, 0.0};
  RewardConfig cfg{0.5, 0.5, 0.0, base, true};
  EXPECT_THROW(scalar_cost(base, cfg), ZeroBaseline);
  RewardConfig delay_only{0.0, 1.0, 0.0, base, true};
  EXPECT_DOUBLE_EQ(scalar_cost(base, delay_only), 1.0);
}

TEST(Reward, IsCostDecrease) {
  EXPECT_NEAR(reward(1.0, 0.9), 0.1, 1e-15);
  EXPECT_EQ(reward(0.7, 0.7), 0.0);
  EXPECT_NEAR(reward(0.9, 1.0), -0.1, 1e-15);
}

TEST(Pareto, InsertExamples) {
  ParetoSet s;
  EXPECT_TRUE(s.insert(1, 2));
  EXPECT_EQ(s.size(), 1U);
  EXPECT_TRUE(s.insert(2, 1));
  EXPECT_EQ(s.size(), 2U);
  ParetoSet t;
  t.insert(2, 2);
  EXPECT_TRUE(t.insert(1, 1));
  ASSERT_EQ(t.size(), 1U);
  EXPECT_EQ(t.points()[0].area, 1.0);
  EXPECT_FALSE(t.insert(3, 3));
  EXPECT_TRUE(t.insert(1, 1, nullptr, "other"));  // tie from another source is kept
  EXPECT_FALSE(t.insert(1, 1, nullptr, "other"));
}

TEST(Pareto, NeverHoldsDominatedPoints) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> coord(0, 30);
  for (int trial = 0; trial < 100; ++trial) {
    ParetoSet s;
    std::vector<ParetoPoint> all;
    for (int k = 0; k < 60; ++k) {
      ParetoPoint p{double(coord(rng)), double(coord(rng)), nullptr, ""};
      all.push_back(p);
      s.insert(p);
      for (const auto& a : s.points())
        for (const auto& b : s.points()) ASSERT_FALSE(dominates(a, b));
    }
    auto expected = brute_front(all);
    ParetoSet dedup;
    for (auto& p : expected) dedup.insert(p);
    ASSERT_EQ(s.size(), dedup.size());
  }
}

TEST(Hypervolume, Examples) {
  ParetoSet s;
  s.insert(1, 2);
  s.insert(2, 1);
  EXPECT_DOUBLE_EQ(hypervolume(s, {3, 3}), 3.0);
  EXPECT_NEAR(grid_hypervolume(s.points(), {3, 3}, 0.0, 300), 3.0, 1e-9);
  ParetoSet one;
  one.insert(1, 1);
  EXPECT_DOUBLE_EQ(hypervolume(one, {2, 2}), 1.0);
  EXPECT_EQ(hypervolume(ParetoSet{}, {1, 1}), 0.0);
  EXPECT_THROW(hypervolume(one, {1, 2}), RefDominated);
}

TEST(Hypervolume, MatchesMonteCarlo) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    ParetoSet s;
    for (int k = 0; k < 8; ++k) s.insert(u(rng), u(rng));
    const RefPoint ref{1.0, 1.0};
    const double exact = hypervolume(s, ref);
    const int samples = 4000;
    int hits = 0;
    for (int k = 0; k < samples; ++k) {
      const double a = u(rng), d = u(rng);
      for (const auto& p : s.points())
        if (p.area <= a && p.delay <= d) {
          ++hits;
          break;
        }
    }
    const double est = double(hits) / samples;
    const double sigma = std::sqrt(std::max(exact * (1 - exact), 1e-6) / samples);
    EXPECT_NEAR(est, exact, 3 * sigma + 1e-12) << trial;
  }
}

TEST(ExternalBackend, ParsesOutputVerbatim) {
  const auto script = write_script(
      "fixed.sh",
      "echo '{\"scenarios\":[{\"area\":12.5,\"delay\":3.25,\"power\":7},"
      "{\"area\":1,\"delay\":2,\"power\":3}]}'\n");
  const auto p = pp_profile(4, PpgKind::And, false);
  const auto doc = make_design(assign(p, wallace(p)));
  const auto report = external_cost(doc, script.string());
  ASSERT_EQ(report.scenarios.size(), 2U);
  EXPECT_EQ(report.scenarios[0], (CostScenario{12.5, 3.25, 7.0}));
  EXPECT_EQ(report.scenarios[1], (CostScenario{1.0, 2.0, 3.0}));
}

TEST(ExternalBackend, ReceivesDesignPathAndCaches) {
  const auto log = fs::temp_directory_path() / "mulopt-test-backends" / "calls.log";
  fs::remove(log);
  const auto script = write_script(
      "count.sh", "echo \"$1\" >> " + log.string() +
                      "\ngrep -q '\"width\": 4' \"$1\" || exit 3\n"
                      "echo '{\"scenarios\":[{\"area\":1,\"delay\":1,\"power\":1}]}'\n");
  ExternalBackend backend(script.string(), 30);
  const auto p = pp_profile(4, PpgKind::And, false);
  auto doc = make_design(assign(p, wallace(p)));
  backend.evaluate(doc);
  doc.meta["name"] = "renamed";
  backend.evaluate(doc);
  EXPECT_EQ(backend.invocations(), 1);
  backend.evaluate(make_design(assign(p, dadda(p))));
  EXPECT_EQ(backend.invocations(), 2);
}

TEST(ExternalBackend, SingleFlightUnderConcurrency) {
  const auto script = write_script(
      "slow.sh", "sleep 0.3\necho '{\"scenarios\":[{\"area\":2,\"delay\":1,\"power\":1}]}'\n");
  ExternalBackend backend(script.string(), 30);
  const auto p = pp_profile(4, PpgKind::And, false);
  const auto doc = make_design(assign(p, wallace(p)));
  std::vector<std::thread> threads;
  std::vector<double> areas(4);
  for (int k = 0; k < 4; ++k)
    threads.emplace_back([&, k] { areas[k] = backend.evaluate(doc).scenarios[0].area; });
  for (auto& t : threads) t.join();
  EXPECT_EQ(backend.invocations(), 1);
  for (double a : areas) EXPECT_EQ(a, 2.0);
}

TEST(ExternalBackend, FailureCarriesStderr) {
  const auto script = write_script("fail.sh", "echo 'synthesis exploded' >&2\nexit 1\n");
  const auto p = pp_profile(2, PpgKind::And, false);
  const auto doc = make_design(assign(p, wallace(p)));
  try {
    external_cost(doc, script.string());
    FAIL() << "expected BackendFailure";
  } catch (const BackendFailure& e) {
    EXPECT_NE(std::string(e.what()).find("synthesis exploded"), std::string::npos);
  }
  const auto bad = write_script("bad.sh", "echo 'not json'\n");
  EXPECT_THROW(external_cost(doc, bad.string()), BackendFailure);
  const auto negative =
      write_script("neg.sh", "echo '{\"scenarios\":[{\"area\":-1,\"delay\":1,\"power\":1}]}'\n");
  EXPECT_THROW(external_cost(doc, negative.string()), BackendFailure);
}

TEST(ExternalBackend, Timeout) {
  const auto script = write_script("hang.sh", "sleep 5\n");
  const auto p = pp_profile(2, PpgKind::And, false);
  const auto doc = make_design(assign(p, wallace(p)));
  EXPECT_THROW(external_cost(doc, script.string(), 0.2), BackendTimeout);
  setenv("MULOPT_BACKEND_TIMEOUT_SECS", "0.25", 1);
  EXPECT_DOUBLE_EQ(backend_timeout_from_env(), 0.25);
  unsetenv("MULOPT_BACKEND_TIMEOUT_SECS");
  EXPECT_DOUBLE_EQ(backend_timeout_from_env(), 600.0);
}
