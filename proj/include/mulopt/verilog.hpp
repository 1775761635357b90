#pragma once

#include <cctype>
#include <map>
#include <sstream>
#include <string>

#include "mulopt/design.hpp"
#include "mulopt/netlist.hpp"

namespace mulopt {

namespace detail {

inline std::string verilog_identifier(const std::string& raw) {
  std::string id;
  for (char ch : raw) id += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
  if (id.empty() || std::isdigit(static_cast<unsigned char>(id[0]))) id = "m_" + id;
  return id;
}

inline std::string operand_bit(const char* name, int k, int width) {
  if (k < 0 || k >= width) return "1'b0";
  return std::string(name) + "[" + std::to_string(k) + "]";
}

}  // namespace detail

inline std::string default_module_name(const DesignDoc& design) {
  if (design.meta.is_object() && design.meta.contains("name") && design.meta["name"].is_string())
    return detail::verilog_identifier(design.meta["name"].get<std::string>());
  const auto& p = design.profile();
  return "mul" + std::to_string(p.width) + "_" + std::string(to_string(p.ppg)) + (p.mac ? "_mac" : "");
}

// Structural Verilog-2001 for a legal design: PPG logic, one fa_cell/ha_cell
// instance per compressor, and a behavioural final adder. Wires are named
// col<j>_s<i>_b<k> (bit k of column j entering stage i).
inline std::string emit_verilog(const DesignDoc& design) {
  if (auto why = design_violation(design)) throw IllegalDesign(*why);
  const auto& p = design.profile();
  const auto net = build_netlist(design);
  const int n = p.width, cols = p.num_columns(), stages = net.stages();

  // Every wire gets the name of the slot where it first appears.
  std::map<std::pair<int, int>, std::string> names;
  for (int i = 0; i <= stages; ++i)
    for (int j = 0; j < cols; ++j)
      for (std::size_t k = 0; k < net.columns[i][j].size(); ++k) {
        const auto& w = net.columns[i][j][k];
        names.try_emplace({w.cell, w.port}, "col" + std::to_string(j) + "_s" + std::to_string(i) +
                                                "_b" + std::to_string(k));
      }
  int dropped = 0;
  for (const auto& stage : net.overflow)
    for (const auto& w : stage) names.try_emplace({w.cell, w.port}, "carry_out_" + std::to_string(dropped++));
  auto name_of = [&](Wire w) -> std::string {
    if (net.cells[w.cell].kind == Cell::Kind::Zero) return "1'b0";
    return names.at({w.cell, w.port});
  };

  bool uses_fa = false, uses_ha = false;
  for (const auto& c : net.cells) {
    uses_fa |= c.kind == Cell::Kind::Full;
    uses_ha |= c.kind == Cell::Kind::Half;
  }

  std::ostringstream v;
  v << "// " << n << "-bit " << to_string(p.ppg) << (p.mac ? " multiply-accumulate" : " multiplier")
    << ", " << stages << " compressor stage" << (stages == 1 ? "" : "s") << "\n";
  if (uses_fa)
    v << "module fa_cell (input a, input b, input cin, output s, output cout);\n"
         "  assign s = a ^ b ^ cin;\n"
         "  assign cout = (a & b) | (a & cin) | (b & cin);\n"
         "endmodule\n\n";
  if (uses_ha)
    v << "module ha_cell (input a, input b, output s, output cout);\n"
         "  assign s = a ^ b;\n"
         "  assign cout = a & b;\n"
         "endmodule\n\n";

  v << "module " << default_module_name(design) << " (\n";
  v << "  input  [" << n - 1 << ":0] a,\n";
  v << "  input  [" << n - 1 << ":0] b,\n";
  if (p.mac) v << "  input  [" << cols - 1 << ":0] c,\n";
  v << "  output [" << cols - 1 << ":0] product\n);\n";

  if (p.ppg == PpgKind::Booth4) {
    v << "  // radix-4 Booth digit encoding\n";
    for (int r = 0; r < booth_rows(n); ++r) {
      const auto hi = detail::operand_bit("b", 2 * r + 1, n), mid = detail::operand_bit("b", 2 * r, n),
                 lo = detail::operand_bit("b", 2 * r - 1, n);
      v << "  wire neg_" << r << " = " << hi << ";\n";
      v << "  wire one_" << r << " = " << mid << " ^ " << lo << ";\n";
      v << "  wire two_" << r << " = (" << hi << " & ~" << mid << " & ~" << lo << ") | (~" << hi
        << " & " << mid << " & " << lo << ");\n";
    }
  }

  v << "  // partial products\n";
  for (std::size_t id = 0; id < net.cells.size(); ++id) {
    const auto& cell = net.cells[id];
    if (cell.kind != Cell::Kind::Input) continue;
    const auto& bit = cell.bit;
    std::string expr;
    using S = PpBit::Source;
    switch (bit.source) {
      case S::And:
        expr = "a[" + std::to_string(bit.index) + "] & b[" + std::to_string(bit.row) + "]";
        break;
      case S::BoothSel: {
        const auto r = std::to_string(bit.row);
        expr = "(one_" + r + " & " + detail::operand_bit("a", bit.index, n) + ") | (two_" + r + " & " +
               detail::operand_bit("a", bit.index - 1, n) + ")";
        if (bit.row + 1 < booth_rows(n)) expr = "(" + expr + ") ^ neg_" + r;
        break;
      }
      case S::BoothNeg: expr = "neg_" + std::to_string(bit.row); break;
      case S::BoothSignInv: expr = "~neg_" + std::to_string(bit.row); break;
      case S::One: expr = "1'b1"; break;
      case S::Addend: expr = "c[" + std::to_string(bit.index) + "]"; break;
    }
    v << "  wire " << name_of({static_cast<int>(id), 0}) << " = " << expr << ";\n";
  }

  int fa_count = 0, ha_count = 0;
  for (int i = 0; i < stages; ++i) {
    v << "  // stage " << i << "\n";
    // Declare compressor outputs, then instantiate.
    for (std::size_t id = 0; id < net.cells.size(); ++id) {
      const auto& cell = net.cells[id];
      if ((cell.kind != Cell::Kind::Full && cell.kind != Cell::Kind::Half) || cell.stage != i) continue;
      v << "  wire " << name_of({static_cast<int>(id), 0}) << ", " << name_of({static_cast<int>(id), 1})
        << ";\n";
    }
    for (std::size_t id = 0; id < net.cells.size(); ++id) {
      const auto& cell = net.cells[id];
      if (cell.stage != i) continue;
      const Wire s{static_cast<int>(id), 0}, co{static_cast<int>(id), 1};
      if (cell.kind == Cell::Kind::Full) {
        v << "  fa_cell fa" << fa_count++ << " (.a(" << name_of(cell.in[0]) << "), .b(" << name_of(cell.in[1])
          << "), .cin(" << name_of(cell.in[2]) << "), .s(" << name_of(s) << "), .cout(" << name_of(co)
          << "));\n";
      } else if (cell.kind == Cell::Kind::Half) {
        v << "  ha_cell ha" << ha_count++ << " (.a(" << name_of(cell.in[0]) << "), .b(" << name_of(cell.in[1])
          << "), .s(" << name_of(s) << "), .cout(" << name_of(co) << "));\n";
      }
    }
  }

  v << "  // final carry-propagate adder\n";
  v << "  wire [" << cols - 1 << ":0] rowa, rowb;\n";
  const auto& out = net.columns.back();
  for (int j = 0; j < cols; ++j) {
    v << "  assign rowa[" << j << "] = " << (out[j].size() > 0 ? name_of(out[j][0]) : "1'b0") << ";\n";
    v << "  assign rowb[" << j << "] = " << (out[j].size() > 1 ? name_of(out[j][1]) : "1'b0") << ";\n";
  }
  v << "  assign product = rowa + rowb;\n";
  v << "endmodule\n";
  return v.str();
}

}  // namespace mulopt
