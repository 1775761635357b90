#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mulopt/baseline.hpp"
#include "mulopt/verify.hpp"
#include "mulopt/verilog.hpp"
#include "test_util.hpp"
#include "verilog_lint.hpp"

using namespace mulopt;

namespace {

DesignDoc wallace_design(int n, PpgKind ppg = PpgKind::And, bool mac = false) {
  const auto p = pp_profile(n, ppg, mac);
  return make_design(assign(p, wallace(p)), "wallace");
}

DesignDoc dadda_design(int n, PpgKind ppg = PpgKind::And, bool mac = false) {
  const auto p = pp_profile(n, ppg, mac);
  return make_design(assign(p, dadda(p)), "dadda");
}

int sum_of(const std::vector<std::vector<int>>& grid) {
  int s = 0;
  for (const auto& row : grid)
    for (int v : row) s += v;
  return s;
}

}  // namespace

TEST(Simulate, Examples) {
  const auto w8 = wallace_design(8);
  EXPECT_EQ(simulate(w8, 0, 0), 0u);
  EXPECT_EQ(simulate(w8, 0, 173), 0u);
  EXPECT_EQ(simulate(w8, 255, 255), 65025u);
  EXPECT_EQ(simulate(w8, 13, 11), 143u);
  const auto mac = wallace_design(8, PpgKind::And, true);
  EXPECT_EQ(simulate(mac, 0, 99, 1234), 1234u);
  EXPECT_EQ(simulate(mac, 255, 255, 65535), (65025u + 65535u) & 0xffffu);
}

TEST(Simulate, RejectsOutOfRangeOperands) {
  const auto w4 = wallace_design(4);
  EXPECT_THROW(simulate(w4, 16, 1), InvalidArgument);
  EXPECT_THROW(simulate(w4, 1, 1, 3), InvalidArgument);
  EXPECT_THROW(simulate(wallace_design(4, PpgKind::And, true), 1, 1, 256), InvalidArgument);
}

TEST(Simulate, WeightedSumConservedAcrossStages) {
  std::mt19937_64 rng(17);
  for (auto ppg : testutil::all_ppgs())
    for (bool mac : {false, true})
      for (int n : {3, 8, 12}) {
        const auto p = pp_profile(n, ppg, mac);
        for (int t = 0; t < 3; ++t) {
          const auto design = make_design(assign(p, testutil::random_legal_counts(p, rng)));
          const auto net = build_netlist(design);
          for (int k = 0; k < 20; ++k) {
            const auto a = rng() & operand_mask(n), b = rng() & operand_mask(n);
            const auto c = mac ? rng() & operand_mask(2 * n) : 0;
            const auto v = evaluate(net, a, b, c);
            const auto sums = stage_weighted_sums(net, v);
            for (std::size_t i = 1; i < sums.size(); ++i) ASSERT_TRUE(sums[i] == sums[0]);
            // The initial weighted sum is the result modulo 2^(2N).
            const Wide mod = Wide{1} << (2 * n);
            ASSERT_EQ(static_cast<std::uint64_t>(sums[0] % mod), golden_product(n, a, b, c));
          }
        }
      }
}

TEST(Simulate, OutputColumnsHoldAtMostTwoBits) {
  std::mt19937_64 rng(3);
  for (auto ppg : testutil::all_ppgs())
    for (int n : {4, 9, 16}) {
      const auto p = pp_profile(n, ppg, false);
      const auto net = build_netlist(make_design(assign(p, testutil::random_legal_counts(p, rng))));
      for (const auto& col : net.columns.back()) EXPECT_LE(col.size(), 2u);
    }
}

TEST(Simulate, WireOrderDoesNotMatter) {
  std::mt19937_64 rng(8);
  const auto design = dadda_design(8, PpgKind::Booth4);
  const auto reference = build_netlist(design);
  for (int t = 0; t < 5; ++t) {
    const auto shuffled = build_netlist(design, &rng);
    for (int k = 0; k < 200; ++k) {
      const auto a = rng() & 0xff, b = rng() & 0xff;
      ASSERT_EQ(simulate(shuffled, a, b), simulate(reference, a, b));
      ASSERT_EQ(simulate(shuffled, a, b), a * b);
    }
  }
}

TEST(Verify, ExhaustiveSmallWidths) {
  for (auto ppg : testutil::all_ppgs())
    for (int n = 1; n <= 6; ++n) {
      const auto r = verify(wallace_design(n, ppg), Exhaustive{});
      EXPECT_TRUE(r.pass) << n;
      EXPECT_EQ(r.tested, std::uint64_t{1} << (2 * n));
    }
  const auto r4 = verify(wallace_design(4), Exhaustive{}, 3);
  EXPECT_TRUE(r4.pass);
  EXPECT_EQ(r4.tested, 256u);
}

TEST(Verify, ExhaustiveMacEnumeratesAddends) {
  const auto r = verify(wallace_design(3, PpgKind::Booth4, true), Exhaustive{}, 2);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.tested, 64u * 64u);
}

TEST(Verify, RandomLegalDesignsPass) {
  std::mt19937_64 rng(21);
  for (auto ppg : testutil::all_ppgs())
    for (bool mac : {false, true})
      for (int n : {5, 8}) {
        const auto p = pp_profile(n, ppg, mac);
        for (int t = 0; t < 4; ++t) {
          const auto d = make_design(assign(p, testutil::random_legal_counts(p, rng)));
          const auto r = n <= 5 ? verify(d, Exhaustive{}) : verify(d, Sampled{500, rng()});
          ASSERT_TRUE(r.pass) << to_json(r).dump();
        }
      }
}

TEST(Verify, SampledWideDesigns) {
  for (auto ppg : testutil::all_ppgs()) {
    EXPECT_TRUE(verify(dadda_design(32, ppg), Sampled{200, 4}).pass);
    EXPECT_TRUE(verify(wallace_design(24, ppg, true), Sampled{200, 5}).pass);
  }
  EXPECT_THROW(verify(wallace_design(17), Exhaustive{}), InvalidArgument);
}

TEST(Verify, CorruptedDesignYieldsCounterexample) {
  // Removing a full adder from the last stage leaves three bits in its column;
  // the final adder only sees two of them.
  auto broken = wallace_design(8);
  auto& last = broken.tree.t32.back();
  const auto it = std::find_if(last.begin(), last.end(), [](int v) { return v > 0; });
  ASSERT_NE(it, last.end());
  --*it;
  const auto r = verify(broken, Exhaustive{}, 2);
  ASSERT_FALSE(r.pass);
  ASSERT_TRUE(r.counterexample.has_value());
  const auto& cx = *r.counterexample;
  EXPECT_EQ(cx.expected, cx.a * cx.b);
  EXPECT_NE(cx.got, cx.expected);
  EXPECT_EQ(simulate(build_netlist(broken), cx.a, cx.b), cx.got);
}

TEST(Verify, DroppedHalfAdderIsAbsorbedByFinalAdder) {
  // Two bits left in place of a last-stage half adder still add up correctly.
  auto d = wallace_design(4);
  auto& last = d.tree.t22.back();
  const auto it = std::find_if(last.begin(), last.end(), [](int v) { return v > 0; });
  ASSERT_NE(it, last.end());
  --*it;
  EXPECT_TRUE(verify(d, Exhaustive{}).pass);
}

TEST(Verilog, InstanceCountsMatchDesign) {
  std::mt19937_64 rng(12);
  for (auto ppg : testutil::all_ppgs())
    for (bool mac : {false, true})
      for (int n : {4, 8}) {
        const auto p = pp_profile(n, ppg, mac);
        const auto d = make_design(assign(p, testutil::random_legal_counts(p, rng)), "x");
        const testutil::VerilogModel model(emit_verilog(d));
        EXPECT_EQ(model.instance_count("fa_cell"), sum_of(d.tree.t32));
        EXPECT_EQ(model.instance_count("ha_cell"), sum_of(d.tree.t22));
        EXPECT_EQ(model.has_port("x", "c"), mac);
        EXPECT_TRUE(model.has_port("x", "product"));
      }
}

TEST(Verilog, TextEvaluatesToProduct) {
  std::mt19937_64 rng(31);
  for (auto ppg : testutil::all_ppgs()) {
    const auto d = dadda_design(5, ppg);
    const testutil::VerilogModel model(emit_verilog(d));
    for (std::uint64_t a = 0; a < 32; ++a)
      for (std::uint64_t b = 0; b < 32; ++b)
        ASSERT_EQ(model.eval("dadda", {{"a", a}, {"b", b}}, "product"), a * b) << a << "*" << b;
  }
  const auto mac = wallace_design(6, PpgKind::Booth4, true);
  const testutil::VerilogModel model(emit_verilog(mac));
  for (int k = 0; k < 300; ++k) {
    const auto a = rng() & 63, b = rng() & 63, c = rng() & 4095;
    ASSERT_EQ(model.eval("wallace", {{"a", a}, {"b", b}, {"c", c}}, "product"), golden_product(6, a, b, c));
  }
}

TEST(Verilog, OneBitDesign) {
  const auto d = wallace_design(1);
  const auto text = emit_verilog(d);
  const testutil::VerilogModel model(text);
  EXPECT_EQ(model.module_names(), (std::vector<std::string>{"wallace"}));
  EXPECT_EQ(model.instance_count("fa_cell") + model.instance_count("ha_cell"), 0);
  for (std::uint64_t a = 0; a < 2; ++a)
    for (std::uint64_t b = 0; b < 2; ++b) EXPECT_EQ(model.eval("wallace", {{"a", a}, {"b", b}}, "product"), a * b);
}

TEST(Verilog, DeterministicAndNamed) {
  const auto d = dadda_design(8, PpgKind::Booth4);
  EXPECT_EQ(emit_verilog(d), emit_verilog(d));
  auto unnamed = d;
  unnamed.meta = nlohmann::json::object();
  EXPECT_EQ(default_module_name(unnamed), "mul8_booth4");
  auto odd = d;
  odd.meta["name"] = "9 lives-x";
  EXPECT_EQ(default_module_name(odd), "m_9_lives_x");
}

TEST(Verilog, RejectsIllegalDesign) {
  auto d = wallace_design(4);
  d.tree.t22.back().back() += 1;
  EXPECT_THROW(emit_verilog(d), IllegalDesign);
}

TEST(VerilogLint, CatchesUndeclaredWire) {
  EXPECT_THROW(testutil::VerilogModel("module m (input a, output y);\n  assign y = q;\nendmodule\n"),
               testutil::VerilogError);
  EXPECT_NO_THROW(testutil::VerilogModel("module m (input a, output y);\n  assign y = ~a;\nendmodule\n"));
}
