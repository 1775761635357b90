#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mulopt/error.hpp"

namespace mulopt {

enum class PpgKind { And, Booth4 };

inline constexpr int kMaxWidth = 32;

inline std::string_view to_string(PpgKind kind) {
  return kind == PpgKind::And ? "and" : "booth4";
}

inline PpgKind parse_ppg(std::string_view text) {
  if (text == "and") return PpgKind::And;
  if (text == "booth4") return PpgKind::Booth4;
  throw InvalidArgument("unknown ppg kind '" + std::string(text) + "' (expected and|booth4)");
}

// One partial-product bit and the logic that produces it.
//
// And:          a[index] & b[row]
// BoothSel:     bit `index` of the radix-4 selected multiple for digit `row`,
//               xor'ed with the digit's negate flag when the row can be negative
// BoothNeg:     negate flag of digit `row` (the +1 of the two's complement)
// BoothSignInv: inverted negate flag of digit `row` (sign-extension trick)
// One:          constant 1 (folded sign-extension constant)
// Addend:       c[index] of a merged multiply-accumulate
struct PpBit {
  enum class Source : std::uint8_t { And, BoothSel, BoothNeg, BoothSignInv, One, Addend };
  Source source;
  int row = 0;
  int index = 0;

  friend bool operator==(const PpBit&, const PpBit&) = default;
};

// Radix-4 digit count for an unsigned N-bit multiplier zero-extended by one bit.
inline int booth_rows(int width) { return (width + 2) / 2; }

namespace detail {

inline int bit_of(std::uint64_t v, int k) {
  return (k < 0 || k >= 64) ? 0 : static_cast<int>((v >> k) & 1U);
}

struct BoothDigit {
  int neg, one, two;
};

inline BoothDigit booth_digit(std::uint64_t b, int row, int width) {
  auto bit = [&](int k) { return k < width ? bit_of(b, k) : 0; };
  const int hi = bit(2 * row + 1), mid = bit(2 * row), lo = bit(2 * row - 1);
  return {hi, mid ^ lo, (hi & (1 - mid) & (1 - lo)) | ((1 - hi) & mid & lo)};
}

}  // namespace detail

// Bits in each column, in generation order. Columns beyond 2N are dropped, so
// the array computes the result modulo 2^(2N).
inline std::vector<std::vector<PpBit>> pp_bits(int width, PpgKind ppg, bool mac) {
  if (width < 1 || width > kMaxWidth)
    throw InvalidArgument("width must be in [1, " + std::to_string(kMaxWidth) + "]");
  const int cols = 2 * width;
  std::vector<std::vector<PpBit>> out(cols);
  auto put = [&](int col, PpBit bit) {
    if (col >= 0 && col < cols) out[col].push_back(bit);
  };
  using S = PpBit::Source;
  if (ppg == PpgKind::And) {
    for (int row = 0; row < width; ++row)
      for (int k = 0; k < width; ++k) put(row + k, {S::And, row, k});
  } else {
    const int rows = booth_rows(width);
    // The top digit never negates because the multiplier is zero-extended.
    std::uint64_t constant = 0;
    for (int row = 0; row < rows; ++row) {
      const bool can_negate = row + 1 < rows;
      for (int k = 0; k <= width; ++k) put(2 * row + k, {S::BoothSel, row, k});
      if (can_negate) {
        put(2 * row, {S::BoothNeg, row, 0});
        put(2 * row + width + 1, {S::BoothSignInv, row, 0});
        const int pos = 2 * row + width + 1;
        if (pos < cols) constant -= std::uint64_t{1} << pos;
      }
    }
    if (cols < 64) constant &= (std::uint64_t{1} << cols) - 1;
    for (int j = 0; j < cols; ++j)
      if (detail::bit_of(constant, j)) put(j, {S::One, 0, j});
  }
  if (mac)
    for (int k = 0; k < cols; ++k) put(k, {S::Addend, 0, k});
  return out;
}

// Logic value of a partial-product bit for the given operands.
inline int eval_pp_bit(const PpBit& bit, int width, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  using S = PpBit::Source;
  using detail::bit_of;
  switch (bit.source) {
    case S::And:
      return bit_of(a, bit.index) & bit_of(b, bit.row);
    case S::BoothSel: {
      const auto d = detail::booth_digit(b, bit.row, width);
      auto a_bit = [&](int k) { return k < width ? bit_of(a, k) : 0; };
      const int sel = (d.one & a_bit(bit.index)) | (d.two & a_bit(bit.index - 1));
      const bool can_negate = bit.row + 1 < booth_rows(width);
      return can_negate ? sel ^ d.neg : sel;
    }
    case S::BoothNeg:
      return detail::booth_digit(b, bit.row, width).neg;
    case S::BoothSignInv:
      return 1 - detail::booth_digit(b, bit.row, width).neg;
    case S::One:
      return 1;
    case S::Addend:
      return bit_of(c, bit.index);
  }
  return 0;
}

// Initial partial-product bit count per column.
struct PPProfile {
  int width = 1;
  PpgKind ppg = PpgKind::And;
  bool mac = false;
  std::vector<int> counts;

  int num_columns() const { return static_cast<int>(counts.size()); }

  friend bool operator==(const PPProfile&, const PPProfile&) = default;
};

inline PPProfile pp_profile(int width, PpgKind ppg, bool mac) {
  const auto bits = pp_bits(width, ppg, mac);
  PPProfile profile{width, ppg, mac, {}};
  profile.counts.reserve(bits.size());
  for (const auto& column : bits) profile.counts.push_back(static_cast<int>(column.size()));
  return profile;
}

}  // namespace mulopt
