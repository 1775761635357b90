#pragma once

// Minimal reader for the structural Verilog subset the emitter produces:
// modules with scalar/vector ports, wire declarations (optionally with an
// initializer), continuous assigns of bitwise expressions, and named-port
// instances. It checks declare-before-use and can evaluate the top module,
// which gives an independent route from text back to numbers.

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mulopt::testutil {

struct VerilogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class VerilogModel {
 public:
  explicit VerilogModel(const std::string& text) {
    tokenize(strip_comments(text));
    parse();
  }

  const std::vector<std::string>& module_names() const { return order_; }
  int instance_count(const std::string& cell) const {
    int n = 0;
    for (const auto& [name, mod] : modules_)
      for (const auto& inst : mod.instances) n += inst.type == cell;
    return n;
  }
  bool has_port(const std::string& module, const std::string& port) const {
    const auto& m = modules_.at(module);
    return m.widths.count(port) && m.ports.count(port);
  }

  // Evaluates output `out` of module `top` for the given vector inputs.
  std::uint64_t eval(const std::string& top, const std::map<std::string, std::uint64_t>& inputs,
                     const std::string& out) const {
    const auto& m = modules_.at(top);
    std::map<std::string, std::uint64_t> env(inputs.begin(), inputs.end());
    run(m, env);
    return env.at(out);
  }

 private:
  struct Expr {
    std::vector<std::string> tokens;
  };
  struct Assign {
    std::string lhs;
    int bit = -1;
    Expr rhs;
  };
  struct Instance {
    std::string type, name;
    std::map<std::string, Expr> ports;
  };
  struct Module {
    std::set<std::string> ports;
    std::map<std::string, int> widths;  // declared signals
    std::vector<std::string> inputs, outputs;
    std::vector<Assign> assigns;
    std::vector<Instance> instances;
  };

  static std::string strip_comments(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '/' && i + 1 < s.size() && s[i + 1] == '/') {
        while (i < s.size() && s[i] != '\n') ++i;
      }
      if (i < s.size()) out += s[i];
    }
    return out;
  }

  void tokenize(const std::string& s) {
    for (std::size_t i = 0; i < s.size();) {
      const char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
        tokens_.push_back(s.substr(i, j - i));
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t j = i;
        while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '\'')) ++j;
        tokens_.push_back(s.substr(i, j - i));
        i = j;
      } else if (std::string("()[]{};:,.=&|^~+").find(c) != std::string::npos) {
        tokens_.emplace_back(1, c);
        ++i;
      } else {
        throw VerilogError(std::string("unexpected character '") + c + "'");
      }
    }
  }

  const std::string& peek() const {
    static const std::string eof = "<eof>";
    return pos_ < tokens_.size() ? tokens_[pos_] : eof;
  }
  std::string next() {
    if (pos_ >= tokens_.size()) throw VerilogError("unexpected end of input");
    return tokens_[pos_++];
  }
  void expect(const std::string& t) {
    const auto got = next();
    if (got != t) throw VerilogError("expected '" + t + "', got '" + got + "'");
  }
  static bool is_ident(const std::string& t) {
    return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_');
  }

  int parse_range() {
    if (peek() != "[") return 1;
    expect("[");
    const int hi = std::stoi(next());
    expect(":");
    const int lo = std::stoi(next());
    expect("]");
    if (lo != 0) throw VerilogError("only [N:0] ranges are supported");
    return hi + 1;
  }

  Expr parse_expr(Module& m, const std::set<std::string>& stop) {
    Expr e;
    int depth = 0;
    while (!(depth == 0 && stop.count(peek()))) {
      const auto t = next();
      if (t == "(") ++depth;
      if (t == ")") {
        if (--depth < 0) throw VerilogError("unbalanced ')'");
      }
      if (is_ident(t) && !m.widths.count(t)) throw VerilogError("use of undeclared '" + t + "'");
      e.tokens.push_back(t);
    }
    if (e.tokens.empty()) throw VerilogError("empty expression");
    return e;
  }

  void parse() {
    while (pos_ < tokens_.size()) {
      expect("module");
      const auto name = next();
      if (modules_.count(name)) throw VerilogError("duplicate module " + name);
      Module m;
      expect("(");
      while (peek() != ")") {
        const auto dir = next();
        if (dir != "input" && dir != "output") throw VerilogError("bad port direction " + dir);
        const int w = parse_range();
        const auto port = next();
        m.ports.insert(port);
        m.widths[port] = w;
        (dir == "input" ? m.inputs : m.outputs).push_back(port);
        if (peek() == ",") next();
      }
      expect(")");
      expect(";");
      while (peek() != "endmodule") {
        const auto kw = next();
        if (kw == "wire") {
          const int w = parse_range();
          while (true) {
            const auto id = next();
            if (!is_ident(id) || m.widths.count(id)) throw VerilogError("bad or duplicate wire " + id);
            m.widths[id] = w;
            if (peek() == "=") {
              next();
              m.assigns.push_back({id, -1, parse_expr(m, {";", ","})});
            }
            if (peek() == ",") {
              next();
              continue;
            }
            expect(";");
            break;
          }
        } else if (kw == "assign") {
          const auto lhs = next();
          if (!m.widths.count(lhs)) throw VerilogError("assign to undeclared " + lhs);
          int bit = -1;
          if (peek() == "[") {
            next();
            bit = std::stoi(next());
            expect("]");
          }
          expect("=");
          m.assigns.push_back({lhs, bit, parse_expr(m, {";"})});
          expect(";");
        } else if (modules_.count(kw)) {
          Instance inst{kw, next(), {}};
          expect("(");
          while (peek() != ")") {
            expect(".");
            const auto port = next();
            if (!modules_.at(kw).ports.count(port)) throw VerilogError("unknown port ." + port);
            expect("(");
            inst.ports[port] = parse_expr(m, {")"});
            expect(")");
            if (peek() == ",") next();
          }
          expect(")");
          expect(";");
          if (inst.ports.size() != modules_.at(kw).ports.size())
            throw VerilogError("instance " + inst.name + " leaves ports unconnected");
          m.instances.push_back(std::move(inst));
        } else {
          throw VerilogError("unexpected token '" + kw + "'");
        }
      }
      expect("endmodule");
      order_.push_back(name);
      modules_.emplace(name, std::move(m));
    }
  }

  // Recursive-descent evaluation of | ^ & + ~ ( ) and bit-selects.
  struct Evaluator {
    const std::vector<std::string>& t;
    const std::map<std::string, std::uint64_t>& env;
    std::size_t i = 0;
    const std::string& peek() const {
      static const std::string end;
      return i < t.size() ? t[i] : end;
    }
    std::uint64_t primary() {
      const auto tok = t.at(i++);
      if (tok == "(") {
        const auto v = sum();
        ++i;  // ')'
        return v;
      }
      if (tok == "~") return ~primary() & 1;
      if (tok.find('\'') != std::string::npos) return tok.back() == '1' ? 1 : 0;
      std::uint64_t v = env.at(tok);
      if (peek() == "[") {
        ++i;
        const int bit = std::stoi(t.at(i++));
        ++i;  // ']'
        v = (v >> bit) & 1;
      }
      return v;
    }
    std::uint64_t conj() {
      auto v = primary();
      while (peek() == "&") {
        ++i;
        v &= primary();
      }
      return v;
    }
    std::uint64_t exclusive() {
      auto v = conj();
      while (peek() == "^") {
        ++i;
        v ^= conj();
      }
      return v;
    }
    std::uint64_t disj() {
      auto v = exclusive();
      while (peek() == "|") {
        ++i;
        v |= exclusive();
      }
      return v;
    }
    std::uint64_t sum() {
      auto v = disj();
      while (peek() == "+") {
        ++i;
        v += disj();
      }
      return v;
    }
  };

  static std::uint64_t mask_of(int w) { return w >= 64 ? ~0ULL : ((1ULL << w) - 1); }

  // Emitted code is in dependency order, so one pass suffices.
  void run(const Module& m, std::map<std::string, std::uint64_t>& env) const {
    std::size_t ai = 0, ii = 0;
    // Interleave in declaration order is not tracked; iterate to a fixed point.
    for (int pass = 0; pass < 64; ++pass) {
      bool changed = false;
      for (ai = 0; ai < m.assigns.size(); ++ai) {
        const auto& a = m.assigns[ai];
        std::uint64_t v;
        try {
          Evaluator ev{a.rhs.tokens, env};
          v = ev.sum();
        } catch (const std::out_of_range&) {
          continue;  // operand not yet known
        }
        auto& slot = env[a.lhs];
        const auto old = slot;
        if (a.bit >= 0) slot = (slot & ~(1ULL << a.bit)) | ((v & 1) << a.bit);
        else slot = v & mask_of(m.widths.at(a.lhs));
        changed |= slot != old;
      }
      for (ii = 0; ii < m.instances.size(); ++ii) {
        const auto& inst = m.instances[ii];
        const auto& sub = modules_.at(inst.type);
        std::map<std::string, std::uint64_t> inner;
        bool ready = true;
        for (const auto& in : sub.inputs) {
          try {
            Evaluator ev{inst.ports.at(in).tokens, env};
            inner[in] = ev.sum() & 1;
          } catch (const std::out_of_range&) {
            ready = false;
          }
        }
        if (!ready) continue;
        run(sub, inner);
        for (const auto& out : sub.outputs) {
          const auto& target = inst.ports.at(out).tokens;
          if (target.size() != 1) throw VerilogError("output must connect to a plain wire");
          auto& slot = env[target[0]];
          const auto old = slot;
          slot = inner.at(out);
          changed |= slot != old;
        }
      }
      if (!changed && pass > 0) break;
    }
  }

  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
  std::map<std::string, Module> modules_;
  std::vector<std::string> order_;
};

}  // namespace mulopt::testutil
