#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mulopt/design.hpp"
#include "mulopt/netlist.hpp"

namespace mulopt {

struct Exhaustive {};
struct Sampled {
  std::uint64_t count = 1000;
  std::uint64_t seed = 1;
};
using VerifyMode = std::variant<Exhaustive, Sampled>;

struct Counterexample {
  std::uint64_t a = 0, b = 0, c = 0;
  std::uint64_t expected = 0, got = 0;
};

struct VerifyReport {
  bool pass = true;
  std::uint64_t tested = 0;
  std::optional<Counterexample> counterexample;
};

inline nlohmann::json to_json(const VerifyReport& r) {
  nlohmann::json j;
  j["pass"] = r.pass;
  j["tested"] = r.tested;
  if (r.counterexample) {
    const auto& cx = *r.counterexample;
    j["counterexample"] = {{"a", cx.a}, {"b", cx.b}, {"c", cx.c}, {"expected", cx.expected}, {"got", cx.got}};
  } else {
    j["counterexample"] = nullptr;
  }
  return j;
}

// Largest MAC width whose addend space is enumerated in exhaustive mode.
inline constexpr int kExhaustiveAddendWidth = 4;

namespace detail {

struct Chunk {
  std::uint64_t tested = 0;
  std::optional<Counterexample> fail;
};

// Checks operand `a` values in [a_lo, a_hi) against every b (and addends).
inline Chunk verify_range(const Netlist& net, int width, bool mac, std::uint64_t a_lo,
                          std::uint64_t a_hi, std::uint64_t addend_seed) {
  Chunk out;
  const std::uint64_t b_end = std::uint64_t{1} << width;
  const bool all_addends = mac && width <= kExhaustiveAddendWidth;
  const std::uint64_t c_end = all_addends ? (std::uint64_t{1} << (2 * width)) : 1;
  for (std::uint64_t a = a_lo; a < a_hi; ++a) {
    std::mt19937_64 rng(addend_seed ^ (a * 0x9e3779b97f4a7c15ULL));
    for (std::uint64_t b = 0; b < b_end; ++b)
      for (std::uint64_t ci = 0; ci < c_end; ++ci) {
        const std::uint64_t c = !mac ? 0 : all_addends ? ci : (rng() & operand_mask(2 * width));
        const auto got = simulate(net, a, b, c);
        const auto expected = golden_product(width, a, b, c);
        ++out.tested;
        if (got != expected) {
          out.fail = Counterexample{a, b, c, expected, got};
          return out;
        }
      }
  }
  return out;
}

}  // namespace detail

// Functional check of a design against integer arithmetic. Exhaustive mode
// covers every operand pair (and every addend when the MAC is at most 4 bits
// wide, otherwise one random addend per pair); it can be split across
// `workers` threads. Failure is reported, never thrown.
inline VerifyReport verify(const DesignDoc& design, const VerifyMode& mode, unsigned workers = 1) {
  const auto& p = design.profile();
  const auto net = build_netlist(design);
  VerifyReport report;
  if (const auto* s = std::get_if<Sampled>(&mode)) {
    std::mt19937_64 rng(s->seed);
    for (std::uint64_t k = 0; k < s->count; ++k) {
      const std::uint64_t a = rng() & operand_mask(p.width);
      const std::uint64_t b = rng() & operand_mask(p.width);
      const std::uint64_t c = p.mac ? (rng() & operand_mask(2 * p.width)) : 0;
      const auto got = simulate(net, a, b, c);
      const auto expected = golden_product(p.width, a, b, c);
      ++report.tested;
      if (got != expected) {
        report.pass = false;
        report.counterexample = Counterexample{a, b, c, expected, got};
        break;
      }
    }
    return report;
  }
  if (p.width > 16) throw InvalidArgument("exhaustive verification is limited to 16-bit operands");
  const std::uint64_t a_end = std::uint64_t{1} << p.width;
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(a_end)));
  std::vector<detail::Chunk> chunks(workers);
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t lo = a_end * w / workers, hi = a_end * (w + 1) / workers;
    auto job = [&, w, lo, hi] { chunks[w] = detail::verify_range(net, p.width, p.mac, lo, hi, 0x5eed); };
    if (workers == 1) job();
    else threads.emplace_back(job);
  }
  for (auto& t : threads) t.join();
  for (const auto& ch : chunks) {
    report.tested += ch.tested;
    if (ch.fail && report.pass) {
      report.pass = false;
      report.counterexample = ch.fail;
    }
  }
  return report;
}

}  // namespace mulopt
