// Copyright 2026 The unfab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Inlining and unrolling into a flat, bit-level function with classical
// values folded away, plus an interpreter for the flat form.

#pragma once

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "unfab/ir.hpp"
#include "unfab/statevector.hpp"
#include "unfab/text.hpp"

namespace unfab {

/// A function of built-in, width-1 statements only. Every quantum operand is
/// a single bit; conditions hold quantum bits and measured classical bits.
struct FlatFunction {
  FunctionDef fn;
  std::vector<VarId> inputs;        // conserved bits, then consumed bits
  std::vector<std::string> inputLabels;  // "a" or "a[k]"
  std::vector<VarId> conserved;     // subset of inputs, also outputs
  std::vector<VarId> conservedOut;  // final names of the conserved bits
  std::vector<VarId> outputs;       // produced bits (conserved excluded)
  std::vector<std::string> outputLabels;
  // Classical results: label -> known value or flat runtime variable.
  std::vector<std::pair<std::string, std::variant<std::int64_t, VarId>>> classicalOutputs;
  // Allocation hints: new0 result -> earlier new0 result whose wire it shares.
  std::map<VarId, VarId> shareHints;
  std::map<std::string, std::int64_t> census;  // executed operations by name
};

struct FlattenOptions {
  std::int64_t fuel = 1000000;
  std::map<std::string, std::int64_t> classicalArgs;
  // Provides the definition for a user call; defaults to exact program lookup.
  std::function<const FunctionDef*(const Operation&)> resolve;
};

namespace flat_detail {

struct Bin;

struct Value {
  enum class Kind { Bottom, Bits, Known, Runtime, Garbage };
  Kind kind = Kind::Bottom;
  std::vector<VarId> bits;
  std::int64_t value = 0;
  VarId runtime;
  std::shared_ptr<Bin> bin;

  static Value of_bits(std::vector<VarId> b) { Value v; v.kind = Kind::Bits; v.bits = std::move(b); return v; }
  static Value known(std::int64_t x) { Value v; v.kind = Kind::Known; v.value = x; return v; }
  static Value rt(VarId r) { Value v; v.kind = Kind::Runtime; v.runtime = std::move(r); return v; }
  static Value garbage(std::shared_ptr<Bin> b) { Value v; v.kind = Kind::Garbage; v.bin = std::move(b); return v; }
};

struct Bin {
  std::vector<Value> segs;
};

inline void flatten_bits(const Value& v, std::vector<VarId>& out) {
  if (v.kind == Value::Kind::Bits) out.insert(out.end(), v.bits.begin(), v.bits.end());
  if (v.kind == Value::Kind::Garbage && v.bin)
    for (const auto& s : v.bin->segs) flatten_bits(s, out);
}

struct Frame {
  const FunctionDef* fn = nullptr;
  std::map<VarId, Value> env;
  std::shared_ptr<Bin> bin;
  Condition outer;
};

class Inliner {
 public:
  Inliner(const Program& p, FlattenOptions opts) : p_(p), opts_(std::move(opts)) {
    if (!opts_.resolve)
      opts_.resolve = [this](const Operation& op) -> const FunctionDef* { return p_.find(op.key()); };
    fuel_ = opts_.fuel;
  }

  FlatFunction run(const std::string& entryKey) {
    const FunctionDef* f = p_.find(entryKey);
    if (!f) {
      auto [base, mode] = split_key(entryKey);
      f = opts_.resolve(make_call(base, mode));
    }
    if (!f) throw UnfabError("UnresolvedCallee", "no function named '" + entryKey + "'");
    out_.fn.name = f->name + "_flat";
    Frame fr;
    fr.fn = f;
    auto width_of = [&](const Param& p) -> std::int64_t {
      if (!p.width) return 1;
      if (p.width->isConst) return p.width->value;
      auto it = opts_.classicalArgs.find(p.width->var.substr(1));
      if (it == opts_.classicalArgs.end()) it = opts_.classicalArgs.find(p.width->var);
      if (it == opts_.classicalArgs.end())
        throw UnfabError("UnresolvedClassical", "width '" + p.width->var + "' of '" + p.name + "' needs --arg");
      return it->second;
    };
    auto label_bits = [&](const std::string& base, std::int64_t w) {
      std::vector<VarId> bs;
      if (w == 1) {
        bs.push_back(base);
        out_.inputLabels.push_back(base);
      } else {
        for (std::int64_t k = 0; k < w; ++k) {
          bs.push_back(base + "_" + std::to_string(k));
          out_.inputLabels.push_back(base + "[" + std::to_string(k) + "]");
        }
      }
      return bs;
    };
    for (const auto& p : f->bracketParams) {
      if (is_classical(p.name)) {
        auto it = opts_.classicalArgs.find(p.name.substr(1));
        if (it == opts_.classicalArgs.end()) it = opts_.classicalArgs.find(p.name);
        if (it == opts_.classicalArgs.end())
          throw UnfabError("UnresolvedClassical", "classical parameter '" + p.name + "' of '" + f->key() +
                                                      "' needs a value (--arg " + p.name.substr(1) + "=...)");
        fr.env[p.name] = Value::known(it->second);
        continue;
      }
      auto bs = label_bits(p.name, width_of(p));
      for (const auto& b : bs) {
        out_.inputs.push_back(b);
        out_.conserved.push_back(b);
        out_.fn.bracketParams.push_back(Param{b, std::nullopt});
        used_.insert(b);
      }
      fr.env[p.name] = Value::of_bits(bs);
    }
    for (const auto& p : f->consumedParams) {
      if (p.name == kBin) throw UnfabError("UnsupportedEntry", "entry function cannot consume a garbage bin");
      auto bs = label_bits(p.name, width_of(p));
      for (const auto& b : bs) {
        out_.inputs.push_back(b);
        out_.fn.consumedParams.push_back(Param{b, std::nullopt});
        used_.insert(b);
      }
      fr.env[p.name] = Value::of_bits(bs);
    }
    if (f->bin_out()) fr.bin = std::make_shared<Bin>();
    exec_body(fr);
    int qi = 0, ci = 0;
    for (const auto& r : f->returns) {
      const Value v = r == kBin ? Value::garbage(fr.bin) : lookup(fr, r);
      if (is_classical(r)) {
        std::string label = "$>" + std::to_string(ci++);
        if (v.kind == Value::Kind::Known) out_.classicalOutputs.push_back({label, v.value});
        else if (v.kind == Value::Kind::Runtime) out_.classicalOutputs.push_back({label, v.runtime});
        else throw UnfabError("UndefinedValue", "classical result '" + r + "' is undefined");
        continue;
      }
      std::vector<VarId> bs;
      flatten_bits(v, bs);
      if (v.kind == Value::Kind::Bottom) throw UnfabError("UndefinedValue", "result '" + r + "' is undefined");
      const bool g = r == kBin;
      const std::string base = g ? "%bin" : ">" + std::to_string(qi++);
      for (std::size_t k = 0; k < bs.size(); ++k) {
        out_.outputs.push_back(bs[k]);
        out_.outputLabels.push_back(bs.size() == 1 && !g ? base : base + "[" + std::to_string(k) + "]");
      }
    }
    out_.conservedOut = out_.conserved;
    out_.fn.returns = out_.outputs;
    out_.fn.renumber();
    return std::move(out_);
  }

 private:
  const Value& lookup(const Frame& fr, const VarId& v) const {
    auto it = fr.env.find(v);
    if (it == fr.env.end())
      throw InternalError("flatten: '" + v + "' is not bound in " + (fr.fn ? fr.fn->key() : std::string("?")));
    return it->second;
  }

  VarId fresh(const VarId& base) {
    std::string b;
    for (char c : base) if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') b += c;
    if (b.empty() || std::isdigit(static_cast<unsigned char>(b[0]))) b = "v" + b;
    VarId v;
    do v = b + "_" + std::to_string(counter_++); while (used_.count(v));
    used_.insert(v);
    return v;
  }
  VarId fresh_classical(const VarId& base) { return "$" + fresh(base); }

  void count(const std::string& name) { ++out_.census[name]; }

  Statement& emit(Statement s) {
    s.effect = builtin_effect(s.op);
    s.condition = normalize(s.condition);
    return out_.fn.add(std::move(s));
  }

  /// Returns nullopt when a classical literal is false.
  std::optional<Condition> condition_of(const Frame& fr, const Statement& s) {
    Condition c = fr.outer;
    for (const auto& l : s.condition) {
      const Value& v = lookup(fr, l.var);
      switch (v.kind) {
        case Value::Kind::Known:
          if ((v.value != 0) == l.negated) return std::nullopt;
          break;
        case Value::Kind::Runtime: c.push_back(Literal{v.runtime, l.negated}); break;
        case Value::Kind::Bits:
          if (v.bits.size() != 1)
            throw UnfabError("WidthMismatch", "condition on multi-qubit '" + l.var + "'", s.span);
          c.push_back(Literal{v.bits[0], l.negated});
          break;
        default: throw UnfabError("UndefinedValue", "condition on undefined '" + l.var + "'", s.span);
      }
    }
    c = normalize(c);
    if (contradictory(c)) return std::nullopt;
    return c;
  }

  std::int64_t classical_atom(const Frame& fr, const Atom& a, const Statement& s) {
    if (a.isConst) return a.value;
    const Value& v = lookup(fr, a.var);
    if (v.kind != Value::Kind::Known)
      throw UnfabError("UnresolvedClassical", "'" + a.var + "' is not known at compile time", s.span);
    return v.value;
  }

  const std::vector<VarId>& bits_of(const Frame& fr, const VarId& v, const Statement& s) {
    const Value& x = lookup(fr, v);
    if (x.kind != Value::Kind::Bits)
      throw UnfabError("UndefinedValue", "'" + v + "' is not a defined quantum value here", s.span);
    return x.bits;
  }

  void bind_dead(Frame& fr, const Statement& s) {
    for (const auto& v : s.produced()) fr.env[v] = Value{};
  }

  void exec_body(Frame& fr) {
    for (const auto& s : fr.fn->body) exec(fr, s);
  }

  void exec(Frame& fr, const Statement& s) {
    auto cond = condition_of(fr, s);
    if (!cond) {
      bind_dead(fr, s);
      return;
    }
    const Operation& op = s.op;
    if (op.is_user()) return call(fr, s, *cond);
    const bool back = op.mode.backwards();
    auto quantum_out = [&](std::size_t k) -> const VarId& { return s.producedQuantum.at(k); };
    auto set_garbage = [&]() {
      if (op.mode.produces_garbage()) fr.env[s.producedQuantum.back()] = Value::garbage(std::make_shared<Bin>());
    };
    switch (op.builtin) {
      case Builtin::Calc: {
        auto lk = [&](const VarId& v) -> std::optional<std::int64_t> {
          const Value& x = lookup(fr, v);
          if (x.kind == Value::Kind::Known) return x.value;
          return std::nullopt;
        };
        auto r = eval_expr(s.expr, lk);
        if (!r) throw UnfabError("UnresolvedClassical", "expression is not known at compile time", s.span);
        fr.env[s.producedClassical[0]] = Value::known(*r);
        return;
      }
      case Builtin::New: {
        Statement e;
        e.op = make_builtin(Builtin::New, op.param);
        e.condition = *cond;
        if (!back) {
          VarId n = fresh(quantum_out(0));
          e.producedQuantum = {n};
          emit(e);
          fr.env[quantum_out(0)] = Value::of_bits({n});
        } else {
          e.op.mode.adjoint = true;
          for (const auto& b : bits_of(fr, s.consumed[0], s)) {
            Statement u = e;
            u.consumed = {b};
            emit(u);
          }
        }
        set_garbage();
        return;
      }
      case Builtin::X:
      case Builtin::H: {
        const auto& in = bits_of(fr, s.consumed[0], s);
        std::vector<VarId> outb;
        for (const auto& b : in) {
          Statement e;
          e.op = make_builtin(op.builtin);
          e.consumed = {b};
          VarId n = fresh(quantum_out(0));
          e.producedQuantum = {n};
          e.condition = *cond;
          emit(e);
          outb.push_back(n);
        }
        fr.env[quantum_out(0)] = Value::of_bits(outb);
        set_garbage();
        return;
      }
      case Builtin::CX: {
        const auto ctl = bits_of(fr, s.conserved[0].var, s);
        const auto in = bits_of(fr, s.consumed[0], s);
        if (ctl.size() != in.size())
          throw UnfabError("WidthMismatch", "CX control and target widths differ", s.span);
        std::vector<VarId> outb;
        for (std::size_t k = 0; k < in.size(); ++k) {
          Statement e;
          e.op = make_builtin(Builtin::X);
          e.consumed = {in[k]};
          VarId n = fresh(quantum_out(0));
          e.producedQuantum = {n};
          e.condition = conjoin(*cond, {Literal{ctl[k], false}});
          if (contradictory(e.condition)) {
            // control conflicts with the clause: nothing happens
            outb.push_back(in[k]);
            continue;
          }
          emit(e);
          outb.push_back(n);
        }
        fr.env[quantum_out(0)] = Value::of_bits(outb);
        set_garbage();
        return;
      }
      case Builtin::Phase: {
        Statement e;
        e.op = make_builtin(Builtin::Phase, 0, back ? -op.angle : op.angle);
        e.condition = *cond;
        emit(e);
        set_garbage();
        return;
      }
      case Builtin::Measure: {
        const auto in = bits_of(fr, s.consumed[0], s);
        if (in.size() != 1) throw UnfabError("WidthMismatch", "measure of a multi-qubit value", s.span);
        Statement e;
        e.op = make_builtin(Builtin::Measure);
        e.consumed = in;
        VarId c = fresh_classical(s.producedClassical[0]);
        e.producedClassical = {c};
        emit(e);
        fr.env[s.producedClassical[0]] = Value::rt(c);
        return;
      }
      case Builtin::Forget: {
        Statement e;
        e.op = make_builtin(Builtin::Forget);
        for (const auto& v : s.consumed) {
          const auto& b = bits_of(fr, v, s);
          e.consumed.insert(e.consumed.end(), b.begin(), b.end());
        }
        e.condition = *cond;
        count("forget");
        emit(e);
        return;
      }
      case Builtin::Dispose: {
        if (!fr.bin) throw InternalError("dispose outside a garbage-mode function: " + fr.fn->key());
        if (!back) {
          fr.bin->segs.push_back(lookup(fr, s.consumed[0]));
        } else {
          if (fr.bin->segs.empty()) throw InternalError("garbage bin underflow in " + fr.fn->key());
          fr.env[s.producedQuantum[0]] = fr.bin->segs.back();
          fr.bin->segs.pop_back();
        }
        return;
      }
      case Builtin::Dup: {
        const auto src = bits_of(fr, s.conserved[0].var, s);
        if (!back) {
          std::vector<VarId> outb;
          for (const auto& a : src) {
            Statement n;
            n.op = make_builtin(Builtin::New, 0);
            VarId z = fresh(quantum_out(0));
            n.producedQuantum = {z};
            n.condition = *cond;
            emit(n);
            Statement x;
            x.op = make_builtin(Builtin::X);
            x.consumed = {z};
            VarId o = fresh(quantum_out(0));
            x.producedQuantum = {o};
            x.condition = conjoin(*cond, {Literal{a, false}});
            emit(x);
            outb.push_back(o);
          }
          fr.env[quantum_out(0)] = Value::of_bits(outb);
        } else {
          const auto tb = bits_of(fr, s.consumed[0], s);
          if (tb.size() != src.size()) throw UnfabError("WidthMismatch", "undup widths differ", s.span);
          for (std::size_t k = 0; k < tb.size(); ++k) {
            Statement x;
            x.op = make_builtin(Builtin::X);
            x.consumed = {tb[k]};
            VarId o = fresh(tb[k]);
            x.producedQuantum = {o};
            x.condition = conjoin(*cond, {Literal{src[k], false}});
            emit(x);
            Statement u;
            u.op = make_builtin(Builtin::New, 0);
            u.op.mode.adjoint = true;
            u.consumed = {o};
            u.condition = *cond;
            emit(u);
          }
        }
        set_garbage();
        return;
      }
      case Builtin::Select: {
        const Atom& ca = s.conserved[0];
        std::optional<std::int64_t> known;
        std::optional<Literal> ctl;
        if (ca.isConst) known = ca.value;
        else {
          const Value& v = lookup(fr, ca.var);
          if (v.kind == Value::Kind::Known) known = v.value;
          else if (v.kind == Value::Kind::Runtime) ctl = Literal{v.runtime, false};
          else if (v.kind == Value::Kind::Bits && v.bits.size() == 1) ctl = Literal{v.bits[0], false};
          else throw UnfabError("UndefinedValue", "select control '" + ca.var + "' is undefined", s.span);
        }
        if (!back) {
          if (known) {
            fr.env[quantum_out(0)] = lookup(fr, s.consumed[*known != 0 ? 1 : 0]);
          } else {
            const auto a0 = bits_of(fr, s.consumed[0], s);
            const auto a1 = bits_of(fr, s.consumed[1], s);
            if (a0.size() != a1.size()) throw UnfabError("WidthMismatch", "select branch widths differ", s.span);
            std::vector<VarId> outb;
            for (std::size_t k = 0; k < a0.size(); ++k) {
              Statement e;
              e.op = make_builtin(Builtin::Select);
              e.conserved = {Atom::of(ctl->var)};
              e.consumed = {a0[k], a1[k]};
              VarId o = fresh(quantum_out(0));
              e.producedQuantum = {o};
              e.condition = *cond;
              emit(e);
              outb.push_back(o);
            }
            fr.env[quantum_out(0)] = Value::of_bits(outb);
          }
        } else {
          const Value in = lookup(fr, s.consumed[0]);
          if (known) {
            const int act = *known != 0 ? 1 : 0;
            fr.env[quantum_out(act)] = in;
            fr.env[quantum_out(1 - act)] = Value{};
          } else {
            const auto a = bits_of(fr, s.consumed[0], s);
            std::vector<VarId> o0, o1;
            for (const auto& b : a) {
              Statement e;
              e.op = make_builtin(Builtin::Select);
              e.op.mode.adjoint = true;
              e.conserved = {Atom::of(ctl->var)};
              e.consumed = {b};
              VarId x0 = fresh(quantum_out(0)), x1 = fresh(quantum_out(1));
              e.producedQuantum = {x0, x1};
              e.condition = *cond;
              emit(e);
              o0.push_back(x0);
              o1.push_back(x1);
            }
            fr.env[quantum_out(0)] = Value::of_bits(o0);
            fr.env[quantum_out(1)] = Value::of_bits(o1);
          }
        }
        set_garbage();
        return;
      }
      case Builtin::Cat: {
        std::vector<std::int64_t> widths;
        for (const auto& a : s.conserved) widths.push_back(classical_atom(fr, a, s));
        if (!back) {
          std::vector<VarId> outb;
          if (s.consumed.size() < widths.size()) throw UnfabError("ArityMismatch", "too few cat operands", s.span);
          // A trailing garbage operand carries no qubits.
          for (std::size_t k = 0; k < widths.size(); ++k) {
            const auto& b = bits_of(fr, s.consumed[k], s);
            if (static_cast<std::int64_t>(b.size()) != widths[k])
              throw UnfabError("WidthMismatch", "cat operand " + std::to_string(k) + " has width " +
                                                    std::to_string(b.size()) + ", expected " + std::to_string(widths[k]),
                               s.span);
            outb.insert(outb.end(), b.begin(), b.end());
          }
          fr.env[quantum_out(0)] = Value::of_bits(outb);
        } else {
          const auto& in = bits_of(fr, s.consumed[0], s);
          std::int64_t total = 0;
          for (auto w : widths) total += w;
          if (total != static_cast<std::int64_t>(in.size()))
            throw UnfabError("WidthMismatch", "uncat of " + std::to_string(in.size()) + " qubits into " +
                                                  std::to_string(total), s.span);
          std::size_t off = 0;
          for (std::size_t k = 0; k < widths.size(); ++k) {
            std::vector<VarId> part(in.begin() + off, in.begin() + off + widths[k]);
            off += widths[k];
            fr.env[quantum_out(k)] = Value::of_bits(part);
          }
        }
        set_garbage();
        return;
      }
      case Builtin::None: break;
    }
    throw InternalError("flatten: unhandled operation " + op_name(op));
  }

  void call(Frame& fr, const Statement& s, const Condition& cond) {
    const FunctionDef* callee = opts_.resolve(s.op);
    if (!callee) throw UnfabError("UnresolvedCallee", "no definition for '" + op_name(s.op) + "'", s.span);
    if (--fuel_ < 0)
      throw UnfabError("FuelExhausted", "inlining exceeded the fuel bound of " + std::to_string(opts_.fuel) + " calls",
                       s.span);
    count(op_name(s.op));
    if (++depth_ > 100000) throw UnfabError("FuelExhausted", "recursion too deep", s.span);
    Frame cf;
    cf.fn = callee;
    cf.outer = cond;
    std::size_t ai = 0;
    for (const auto& p : callee->bracketParams) {
      if (ai >= s.conserved.size())
        throw UnfabError("ArityMismatch", "too few bracket arguments to '" + op_name(s.op) + "'", s.span);
      const Atom& a = s.conserved[ai++];
      if (a.isConst) cf.env[p.name] = Value::known(a.value);
      else cf.env[p.name] = lookup(fr, a.var);
    }
    std::size_t ci = 0;
    for (const auto& p : callee->consumedParams) {
      if (ci >= s.consumed.size())
        throw UnfabError("ArityMismatch", "too few consumed arguments to '" + op_name(s.op) + "'", s.span);
      Value v = lookup(fr, s.consumed[ci++]);
      if (p.name == kBin) {
        if (v.kind != Value::Kind::Garbage) throw InternalError("garbage bin argument is not garbage");
        cf.bin = v.bin;
      }
      cf.env[p.name] = v;
    }
    if (callee->bin_out()) cf.bin = std::make_shared<Bin>();
    exec_body(cf);
    std::size_t qc = 0, cc = 0;
    for (const auto& r : callee->returns) {
      Value v = r == kBin ? Value::garbage(cf.bin) : lookup(cf, r);
      if (is_classical(r)) {
        if (cc < s.producedClassical.size()) fr.env[s.producedClassical[cc]] = v;
        ++cc;
      } else {
        if (qc >= s.producedQuantum.size())
          throw UnfabError("ArityMismatch", "call to '" + op_name(s.op) + "' binds too few results", s.span);
        fr.env[s.producedQuantum[qc++]] = v;
      }
    }
    --depth_;
  }

  const Program& p_;
  FlattenOptions opts_;
  FlatFunction out_;
  std::set<VarId> used_;
  std::int64_t fuel_ = 0;
  int counter_ = 0;
  int depth_ = 0;
};

}  // namespace flat_detail

/// Inlines every user call reachable from `entry` and unrolls recursion,
/// evaluating classical values at compile time.
inline FlatFunction inline_unroll(const Program& p, const std::string& entry, FlattenOptions opts = {}) {
  return flat_detail::Inliner(p, std::move(opts)).run(entry);
}

// ---------------------------------------------------------------------------
// Flat interpreter

struct SimOutcome {
  StateVector state;  // wires: conserved inputs, then output labels
  std::vector<std::pair<std::string, std::int64_t>> classical;
};

namespace flat_detail {

class FlatSim {
 public:
  FlatSim(const FlatFunction& ff, SimConfig cfg) : ff_(ff), cfg_(cfg), rng_(cfg.seed) {}

  SimOutcome run(StateVector st) {
    s_ = std::move(st);
    for (const auto& in : ff_.inputs) {
      if (s_.wire(in) < 0) throw UnfabError("BadInput", "input state lacks wire '" + in + "'");
      name_[in] = in;
      ++ref_[in];
    }
    for (const auto& stmt : ff_.fn.body) exec(stmt);
    SimOutcome out;
    std::vector<std::string> order;
    std::map<std::string, std::string> relabel;
    for (std::size_t k = 0; k < ff_.conserved.size(); ++k) {
      const VarId& fin = k < ff_.conservedOut.size() ? ff_.conservedOut[k] : ff_.conserved[k];
      relabel[wire_of(fin)] = ff_.conserved[k];
      order.push_back(ff_.conserved[k]);
    }
    for (std::size_t k = 0; k < ff_.outputs.size(); ++k) {
      const std::string w = wire_of(ff_.outputs[k]);
      if (relabel.count(w)) throw UnfabError("AliasedOutput", "two outputs share wire " + w);
      relabel[w] = ff_.outputLabels[k];
      order.push_back(ff_.outputLabels[k]);
    }
    for (auto& l : s_.labels) {
      auto it = relabel.find(l);
      if (it == relabel.end()) throw UnfabError("Leak", "wire '" + l + "' is still allocated at the end");
      l = it->second;
    }
    out.state = s_.permuted(order);
    for (const auto& [label, v] : ff_.classicalOutputs) {
      if (std::holds_alternative<std::int64_t>(v)) out.classical.push_back({label, std::get<std::int64_t>(v)});
      else out.classical.push_back({label, cls_.at(std::get<VarId>(v))});
    }
    return out;
  }

 private:
  std::string wire_of(const VarId& v) const {
    auto it = name_.find(v);
    if (it == name_.end()) throw InternalError("flat sim: '" + v + "' is not live");
    return it->second;
  }
  int w(const VarId& v) const { return s_.wire_or_throw(wire_of(v)); }

  /// nullopt: a classical literal is false.
  std::optional<Controls> controls(const Condition& c) const {
    Controls cs;
    for (const auto& l : c) {
      if (is_classical(l.var)) {
        if ((cls_.at(l.var) != 0) == l.negated) return std::nullopt;
      } else {
        cs.push_back({w(l.var), !l.negated});
      }
    }
    return cs;
  }

  void rename(const VarId& from, const VarId& to) {
    name_[to] = wire_of(from);
    name_.erase(from);
  }
  void release(const VarId& v, bool value) {
    const std::string wl = wire_of(v);
    name_.erase(v);
    if (--ref_[wl] > 0) return;
    if (!s_.remove_wire(s_.wire_or_throw(wl), value, cfg_.tolerance))
      throw UnfabError("UnnewViolation", "deallocated qubit '" + v + "' is not |" + std::to_string(value) + ">");
  }
  std::string alloc(const VarId& v, bool one) {
    std::string wl = "#" + std::to_string(next_++);
    s_.add_wire(wl, one, cfg_.maxQubits);
    name_[v] = wl;
    ref_[wl] = 1;
    return wl;
  }

  void exec(const Statement& st) {
    auto csOpt = controls(st.condition);
    const bool active = csOpt.has_value();
    const Controls cs = csOpt.value_or(Controls{});
    const Operation& op = st.op;
    switch (op.builtin) {
      case Builtin::New:
        if (!op.mode.backwards()) {
          alloc(st.producedQuantum[0], false);
          if (op.param == 1 && active) s_.apply_x(w(st.producedQuantum[0]), cs);
        } else {
          if (op.param == 1 && active) s_.apply_x(w(st.consumed[0]), cs);
          release(st.consumed[0], false);
        }
        return;
      case Builtin::X:
        if (active) s_.apply_x(w(st.consumed[0]), cs);
        rename(st.consumed[0], st.producedQuantum[0]);
        return;
      case Builtin::H:
        if (active) s_.apply_h(w(st.consumed[0]), cs);
        rename(st.consumed[0], st.producedQuantum[0]);
        return;
      case Builtin::Phase:
        if (active) s_.apply_phase(op.angle * std::numbers::pi, cs);
        return;
      case Builtin::Measure: {
        const std::string wl = wire_of(st.consumed[0]);
        if (ref_[wl] != 1) throw InternalError("measuring an aliased wire");
        bool r = s_.measure(s_.wire_or_throw(wl), rng_, true);
        name_.erase(st.consumed[0]);
        ref_.erase(wl);
        cls_[st.producedClassical[0]] = r ? 1 : 0;
        return;
      }
      case Builtin::Forget: {
        std::vector<std::string> ws;
        for (const auto& v : st.consumed) ws.push_back(wire_of(v));
        auto r = forget_oracle(s_, ws, cfg_.tolerance);
        if (auto* f = std::get_if<ForgetOracleFailure>(&r))
          throw UnfabError("ForgetViolation", "forget is not physical here: " + f->message);
        s_ = std::get<StateVector>(r);
        for (const auto& v : st.consumed) {
          ref_.erase(wire_of(v));
          name_.erase(v);
        }
        return;
      }
      case Builtin::Select: {
        const VarId& c = st.conserved[0].var;
        if (!op.mode.backwards()) {
          const std::string w0 = wire_of(st.consumed[0]), w1 = wire_of(st.consumed[1]);
          if (w0 == w1) {
            name_.erase(st.consumed[0]);
            name_.erase(st.consumed[1]);
            name_[st.producedQuantum[0]] = w0;
            --ref_[w0];
            return;
          }
          const int i0 = s_.wire_or_throw(w0), i1 = s_.wire_or_throw(w1);
          if (active) {
            Controls c1 = cs;
            c1.push_back({i1, true});
            s_.apply_x(i0, c1);
            Controls c2 = cs;
            c2.push_back({i0, true});
            bool run = true;
            if (is_classical(c)) run = cls_.at(c) != 0;
            else c2.push_back({w(c), true});
            if (run) s_.apply_x(i1, c2);
          }
          rename(st.consumed[0], st.producedQuantum[0]);
          release(st.consumed[1], false);
        } else {
          const std::string wl = wire_of(st.consumed[0]);
          name_.erase(st.consumed[0]);
          name_[st.producedQuantum[0]] = wl;
          name_[st.producedQuantum[1]] = wl;
          ++ref_[wl];
        }
        return;
      }
      default: break;
    }
    throw InternalError("flat sim: unexpected operation " + op_name(op));
  }

  const FlatFunction& ff_;
  SimConfig cfg_;
  std::mt19937_64 rng_;
  StateVector s_;
  std::map<VarId, std::string> name_;  // live flat name -> wire label
  std::map<std::string, int> ref_;     // wire label -> live names
  std::map<VarId, std::int64_t> cls_;
  int next_ = 0;
};

}  // namespace flat_detail

/// Runs a flat function on `input`, whose wires are labeled by ff.inputs.
inline SimOutcome simulate(const FlatFunction& ff, const StateVector& input, SimConfig cfg = {}) {
  return flat_detail::FlatSim(ff, cfg).run(input);
}

/// For random inputs, the weight of each assignment of the conserved wires
/// must be unchanged.
inline bool check_conserved(const FlatFunction& ff, const std::vector<VarId>& conservedWires, int trials,
                            SimConfig cfg = {}) {
  std::mt19937_64 rng(cfg.seed);
  for (int t = 0; t < trials; ++t) {
    StateVector in = StateVector::random(ff.inputs, rng);
    SimOutcome out = simulate(ff, in, cfg);
    auto weights = [&](const StateVector& s) {
      std::vector<int> ws;
      for (const auto& c : conservedWires) ws.push_back(s.wire_or_throw(c));
      std::vector<double> m(std::size_t{1} << ws.size(), 0.0);
      for (std::size_t i = 0; i < s.amp.size(); ++i) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < ws.size(); ++j) if ((i >> ws[j]) & 1) k |= std::size_t{1} << j;
        m[k] += std::norm(s.amp[i]);
      }
      return m;
    };
    auto a = weights(in), b = weights(out.state);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (std::abs(std::sqrt(a[k]) - std::sqrt(b[k])) > std::sqrt(cfg.tolerance)) return false;
  }
  return true;
}

}  // namespace unfab
