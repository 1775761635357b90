#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mulopt/design.hpp"
#include "mulopt/error.hpp"
#include "mulopt/profile.hpp"
#include "mulopt/tree.hpp"

namespace mulopt {

using Wide = unsigned __int128;

// Output `port` of cell `cell`: port 0 is the value (or sum), port 1 the carry.
struct Wire {
  int cell = -1;
  int port = 0;
  friend bool operator==(const Wire&, const Wire&) = default;
};

struct Cell {
  enum class Kind : std::uint8_t { Input, Zero, Full, Half };
  Kind kind = Kind::Zero;
  PpBit bit{};                 // Input cells only
  std::array<Wire, 3> in{};    // Full uses 3, Half uses 2
  int stage = -1, column = -1;  // compressor location
};

// Bit-level structure of a multiplier: partial-product inputs followed by
// compressors in topological order. `columns[i][j]` lists the wires present in
// column j at the input of stage i; the last entry is the tree output.
// `overflow[i]` holds carries leaving the top column during stage i.
struct Netlist {
  int width = 1;
  std::vector<Cell> cells;
  std::vector<std::vector<std::vector<Wire>>> columns;
  std::vector<std::vector<Wire>> overflow;

  int num_columns() const { return columns.empty() ? 0 : static_cast<int>(columns[0].size()); }
  int stages() const { return static_cast<int>(columns.size()) - 1; }
};

// Builds the netlist of a design. Within a column, compressors consume the
// oldest bits first (full adders, then half adders); survivors keep their
// order and are followed by new sums, then by carries from the column below.
// A compressor that finds too few bits is fed constant zeros, so malformed
// designs still simulate (wrongly). With `shuffle`, every column list is
// permuted before consumption.
inline Netlist build_netlist(const DesignDoc& design, std::mt19937_64* shuffle = nullptr) {
  const auto& tree = design.tree;
  const auto& profile = tree.profile;
  const int cols = profile.num_columns();
  Netlist net;
  net.width = profile.width;
  const auto bits = pp_bits(profile.width, profile.ppg, profile.mac);
  auto add_cell = [&](Cell c) {
    net.cells.push_back(c);
    return static_cast<int>(net.cells.size()) - 1;
  };
  const int zero = add_cell({Cell::Kind::Zero, {}, {}, -1, -1});

  std::vector<std::vector<Wire>> current(cols);
  for (int j = 0; j < cols; ++j)
    for (const auto& bit : bits[j]) current[j].push_back({add_cell({Cell::Kind::Input, bit, {}, -1, -1}), 0});

  for (int i = 0; i < tree.stages; ++i) {
    if (shuffle)
      for (auto& column : current) std::shuffle(column.begin(), column.end(), *shuffle);
    net.columns.push_back(current);
    std::vector<std::vector<Wire>> sums(cols), carries(cols + 1);
    std::vector<std::vector<Wire>> survivors(cols);
    for (int j = 0; j < cols; ++j) {
      std::size_t next = 0;
      auto take = [&]() -> Wire { return next < current[j].size() ? current[j][next++] : Wire{zero, 0}; };
      for (int k = 0; k < tree.t32[i][j]; ++k) {
        Cell fa{Cell::Kind::Full, {}, {}, i, j};
        fa.in = {take(), take(), take()};
        const int id = add_cell(fa);
        sums[j].push_back({id, 0});
        carries[j + 1].push_back({id, 1});
      }
      for (int k = 0; k < tree.t22[i][j]; ++k) {
        Cell ha{Cell::Kind::Half, {}, {}, i, j};
        ha.in = {take(), take(), Wire{zero, 0}};
        const int id = add_cell(ha);
        sums[j].push_back({id, 0});
        carries[j + 1].push_back({id, 1});
      }
      survivors[j].assign(current[j].begin() + static_cast<std::ptrdiff_t>(std::min(next, current[j].size())),
                          current[j].end());
    }
    for (int j = 0; j < cols; ++j) {
      current[j] = std::move(survivors[j]);
      current[j].insert(current[j].end(), sums[j].begin(), sums[j].end());
      current[j].insert(current[j].end(), carries[j].begin(), carries[j].end());
    }
    net.overflow.push_back(std::move(carries[cols]));
  }
  net.columns.push_back(current);
  return net;
}

// Evaluated cell outputs for one operand triple.
struct NetValues {
  std::vector<std::array<std::uint8_t, 2>> out;
  int operator()(Wire w) const { return out[w.cell][w.port]; }
};

inline NetValues evaluate(const Netlist& net, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  NetValues v;
  v.out.resize(net.cells.size());
  for (std::size_t id = 0; id < net.cells.size(); ++id) {
    const auto& cell = net.cells[id];
    switch (cell.kind) {
      case Cell::Kind::Zero:
        v.out[id] = {0, 0};
        break;
      case Cell::Kind::Input:
        v.out[id] = {static_cast<std::uint8_t>(eval_pp_bit(cell.bit, net.width, a, b, c)), 0};
        break;
      case Cell::Kind::Full: {
        const int x = v(cell.in[0]), y = v(cell.in[1]), z = v(cell.in[2]);
        v.out[id] = {static_cast<std::uint8_t>(x ^ y ^ z),
                     static_cast<std::uint8_t>((x & y) | (x & z) | (y & z))};
        break;
      }
      case Cell::Kind::Half: {
        const int x = v(cell.in[0]), y = v(cell.in[1]);
        v.out[id] = {static_cast<std::uint8_t>(x ^ y), static_cast<std::uint8_t>(x & y)};
        break;
      }
    }
  }
  return v;
}

// Final carry-propagate addition of the first two bits of every output column.
inline std::uint64_t final_sum(const Netlist& net, const NetValues& v) {
  const int cols = net.num_columns();
  const auto& out = net.columns.back();
  Wide row_a = 0, row_b = 0;
  for (int j = 0; j < cols; ++j) {
    if (out[j].size() > 0 && v(out[j][0])) row_a |= Wide{1} << j;
    if (out[j].size() > 1 && v(out[j][1])) row_b |= Wide{1} << j;
  }
  const Wide mask = (Wide{1} << cols) - 1;
  return static_cast<std::uint64_t>((row_a + row_b) & mask);
}

// Sum of 2^j over every one-valued bit in column j at the input of each stage
// (and at the output), counting carries already dropped from the top column.
inline std::vector<Wide> stage_weighted_sums(const Netlist& net, const NetValues& v) {
  const int cols = net.num_columns();
  std::vector<Wide> sums;
  Wide dropped = 0;
  for (std::size_t i = 0; i < net.columns.size(); ++i) {
    if (i > 0)
      for (const auto& w : net.overflow[i - 1]) dropped += static_cast<Wide>(v(w)) << cols;
    Wide s = dropped;
    for (int j = 0; j < cols; ++j)
      for (const auto& w : net.columns[i][j]) s += static_cast<Wide>(v(w)) << j;
    sums.push_back(s);
  }
  return sums;
}

inline std::uint64_t operand_mask(int bits) {
  return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

// Reference result: a*b (+ c) truncated to the 2N-bit output.
inline std::uint64_t golden_product(int width, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const Wide full = static_cast<Wide>(a) * b + c;
  return static_cast<std::uint64_t>(full & ((Wide{1} << (2 * width)) - 1));
}

inline void check_operands(const PPProfile& p, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  if ((a & ~operand_mask(p.width)) || (b & ~operand_mask(p.width)))
    throw InvalidArgument("operands must be below 2^" + std::to_string(p.width));
  if (!p.mac && c != 0) throw InvalidArgument("addend given for a design without MAC");
  if (c & ~operand_mask(2 * p.width))
    throw InvalidArgument("addend must be below 2^" + std::to_string(2 * p.width));
}

// Bit-true evaluation of a design on one operand triple.
inline std::uint64_t simulate(const Netlist& net, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c = 0) {
  return final_sum(net, evaluate(net, a, b, c));
}

inline std::uint64_t simulate(const DesignDoc& design, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c = 0) {
  check_operands(design.profile(), a, b, c);
  return simulate(build_netlist(design), a, b, c);
}

}  // namespace mulopt
