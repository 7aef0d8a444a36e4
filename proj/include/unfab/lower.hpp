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

// Backend: control decomposition, register allocation, OpenQASM 2.0 text
// and a simulator for the resulting circuits.

#pragma once

#include <array>
#include <cctype>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "unfab/flatten.hpp"
#include "unfab/statevector.hpp"
#include "unfab/text.hpp"

namespace unfab {

// ---------------------------------------------------------------------------
// Alias hints

namespace lower_detail {

inline bool has_literal(const Condition& c, const Literal& l) {
  return std::find(c.begin(), c.end(), l) != c.end();
}

}  // namespace lower_detail

/// Finds selects whose two operands are built from fresh |0> qubits only
/// under mutually exclusive literals; such operands may share one qubit,
/// turning the select into aliasing.
inline std::map<VarId, VarId> alias_hints(const FunctionDef& f) {
  std::map<VarId, int> prod;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i)
    for (const auto& v : f.body[i].produced()) prod[v] = i;
  std::map<VarId, std::vector<int>> readers;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i)
    for (const auto& v : f.body[i].conserved_uses()) readers[v].push_back(i);

  // Root allocation of v's chain if every step runs only under `lit`.
  auto chain_root = [&](VarId v, const Literal& lit) -> std::optional<VarId> {
    for (int guard = 0; guard < 100000; ++guard) {
      for (int r : readers[v])
        if (!lower_detail::has_literal(f.body[r].condition, lit)) return std::nullopt;
      auto it = prod.find(v);
      if (it == prod.end()) return std::nullopt;
      const Statement& s = f.body[it->second];
      if (s.op.is(Builtin::New) && !s.op.mode.backwards() && s.op.param == 0) return v;
      if (!(s.op.is(Builtin::X) || s.op.is(Builtin::H)) || s.consumed.size() != 1) return std::nullopt;
      if (!lower_detail::has_literal(s.condition, lit)) return std::nullopt;
      v = s.consumed[0];
    }
    return std::nullopt;
  };

  std::map<VarId, VarId> hints;
  std::set<VarId> taken;
  for (const auto& s : f.body) {
    if (!s.op.is(Builtin::Select) || s.op.mode.backwards() || s.consumed.size() != 2) continue;
    const VarId& c = s.conserved[0].var;
    auto r0 = chain_root(s.consumed[0], Literal{c, true});
    auto r1 = chain_root(s.consumed[1], Literal{c, false});
    if (!r0 || !r1 || *r0 == *r1 || taken.count(*r0) || taken.count(*r1)) continue;
    VarId first = *r0, second = *r1;
    if (prod[second] < prod[first]) std::swap(first, second);
    hints[second] = first;
    taken.insert(first);
    taken.insert(second);
  }
  return hints;
}

// ---------------------------------------------------------------------------
// Control decomposition

namespace lower_detail {

class Decomposer {
 public:
  explicit Decomposer(const FlatFunction& in) : in_(in) {
    used_ = in.fn.all_vars();
    out_ = in;
    out_.fn.body.clear();
    if (out_.shareHints.empty()) out_.shareHints = alias_hints(in.fn);
    for (const auto& [a, b] : out_.shareHints) {
      hinted_.insert(a);
      hinted_.insert(b);
    }
    roots_ = select_roots(in.fn);
  }

  FlatFunction run() {
    for (const auto& s : in_.fn.body) lower(s);
    for (auto& v : out_.outputs) v = cur(v);
    out_.conservedOut.clear();
    for (const auto& v : in_.conservedOut.empty() ? in_.conserved : in_.conservedOut)
      out_.conservedOut.push_back(cur(v));
    for (auto& [label, v] : out_.classicalOutputs)
      if (std::holds_alternative<VarId>(v)) v = cur(std::get<VarId>(v));
    out_.fn.returns = out_.outputs;
    out_.fn.renumber();
    return std::move(out_);
  }

 private:
  // Each select operand's allocation root, for deciding if the pair is hinted.
  static std::map<VarId, VarId> select_roots(const FunctionDef& f) {
    std::map<VarId, const Statement*> prod;
    for (const auto& s : f.body)
      for (const auto& v : s.produced()) prod[v] = &s;
    std::map<VarId, VarId> r;
    for (const auto& s : f.body) {
      if (!s.op.is(Builtin::Select) || s.op.mode.backwards()) continue;
      for (const auto& v0 : s.consumed) {
        VarId v = v0;
        for (int g = 0; g < 100000; ++g) {
          auto it = prod.find(v);
          if (it == prod.end() || it->second->consumed.size() != 1 || it->second->op.is(Builtin::Select)) break;
          v = it->second->consumed[0];
        }
        r[v0] = v;
      }
    }
    return r;
  }

  VarId cur(const VarId& v) const {
    auto it = ren_.find(v);
    return it == ren_.end() ? v : it->second;
  }
  VarId fresh(const VarId& base) {
    std::string b;
    for (char c : base) {
      if (c == '_' && !b.empty() && std::isdigit(static_cast<unsigned char>(b.back()))) break;
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') b += c;
    }
    if (b.empty()) b = "q";
    const bool cls = !base.empty() && base[0] == '$';
    VarId v;
    do v = (cls ? "$" : "") + b + "_d" + std::to_string(n_++); while (used_.count(v));
    used_.insert(v);
    return v;
  }

  void push(Statement s) {
    s.effect = builtin_effect(s.op);
    s.condition = normalize(s.condition);
    out_.fn.add(std::move(s));
  }

  // Primitive gates on original (pre-rename) names; cc_ is the classical
  // condition of the statement being lowered.
  void x(const VarId& t, std::optional<VarId> ctl = std::nullopt) {
    Statement s;
    s.op = make_builtin(Builtin::X);
    s.consumed = {cur(t)};
    VarId n = fresh(t);
    s.producedQuantum = {n};
    s.condition = cc_;
    if (ctl) s.condition.push_back(Literal{cur(*ctl), false});
    push(s);
    ren_[t] = n;
  }
  void h(const VarId& t) {
    Statement s;
    s.op = make_builtin(Builtin::H);
    s.consumed = {cur(t)};
    VarId n = fresh(t);
    s.producedQuantum = {n};
    s.condition = cc_;
    push(s);
    ren_[t] = n;
  }
  void u1(const VarId& q, double angle) {
    Statement s;
    s.op = make_builtin(Builtin::Phase, 0, angle);
    s.condition = cc_;
    s.condition.push_back(Literal{cur(q), false});
    push(s);
  }
  void ccx(const VarId& a, const VarId& b, const VarId& c) {
    h(c);
    x(c, b);
    u1(c, -0.25);
    x(c, a);
    u1(c, 0.25);
    x(c, b);
    u1(c, -0.25);
    x(c, a);
    u1(b, 0.25);
    u1(c, 0.25);
    h(c);
    x(b, a);
    u1(a, 0.25);
    u1(b, -0.25);
    x(b, a);
  }
  void cu1(double angle, const VarId& a, const VarId& b) {
    u1(a, angle / 2);
    x(b, a);
    u1(b, -angle / 2);
    x(b, a);
    u1(b, angle / 2);
  }
  void ch(const VarId& a, const VarId& b) {
    h(b);
    u1(b, -0.5);
    x(b, a);
    h(b);
    u1(b, 0.25);
    x(b, a);
    u1(b, 0.25);
    h(b);
    u1(b, 0.5);
    x(b);
    u1(a, 0.5);
  }
  VarId new_ancilla() {
    Statement s;
    s.op = make_builtin(Builtin::New, 0);
    VarId n = fresh("anc");
    s.producedQuantum = {n};
    push(s);
    return n;
  }
  void free_ancilla(const VarId& a) {
    Statement s;
    s.op = make_builtin(Builtin::New, 0);
    s.op.mode.adjoint = true;
    s.consumed = {cur(a)};
    push(s);
  }

  /// Computes the conjunction of `cs` (size >= 2) into an ancilla with a
  /// chain of Toffolis; `undo` records the chain for uncomputation.
  VarId and_chain(const std::vector<VarId>& cs, std::vector<std::array<VarId, 3>>& undo) {
    VarId acc = cs[0];
    for (std::size_t k = 1; k < cs.size(); ++k) {
      VarId a = new_ancilla();
      ccx(acc, cs[k], a);
      undo.push_back({acc, cs[k], a});
      acc = a;
    }
    return acc;
  }
  void unchain(std::vector<std::array<VarId, 3>>& undo) {
    for (auto it = undo.rbegin(); it != undo.rend(); ++it) {
      ccx((*it)[0], (*it)[1], (*it)[2]);
      free_ancilla((*it)[2]);
    }
    undo.clear();
  }

  void mcx(const std::vector<VarId>& cs, const VarId& t) {
    if (cs.empty()) return x(t);
    if (cs.size() == 1) return x(t, cs[0]);
    if (cs.size() == 2) return ccx(cs[0], cs[1], t);
    std::vector<std::array<VarId, 3>> undo;
    std::vector<VarId> head(cs.begin(), cs.end() - 1);
    VarId a = and_chain(head, undo);
    ccx(a, cs.back(), t);
    unchain(undo);
  }
  void mch(const std::vector<VarId>& cs, const VarId& t) {
    if (cs.empty()) return h(t);
    if (cs.size() == 1) return ch(cs[0], t);
    std::vector<std::array<VarId, 3>> undo;
    VarId a = and_chain(cs, undo);
    ch(a, t);
    unchain(undo);
  }
  void mphase(const std::vector<VarId>& cs, double angle) {
    if (cs.empty()) return;  // global phase
    if (cs.size() == 1) return u1(cs[0], angle);
    if (cs.size() == 2) return cu1(angle, cs[0], cs[1]);
    std::vector<std::array<VarId, 3>> undo;
    std::vector<VarId> head(cs.begin(), cs.end() - 1);
    VarId a = and_chain(head, undo);
    cu1(angle, a, cs.back());
    unchain(undo);
  }

  /// Splits a condition into the classical part (kept as cc_) and quantum
  /// controls; negated controls are flipped around `body`.
  template <class F>
  void controlled(const Condition& cond, const std::vector<Literal>& extra, F body) {
    Condition all = cond;
    all.insert(all.end(), extra.begin(), extra.end());
    all = normalize(all);
    cc_.clear();
    // `v & !v` never fires; dropping it also keeps v off both sides of a gate.
    if (contradictory(all)) return;
    std::vector<VarId> qs, neg;
    for (const auto& l : all) {
      if (is_classical(l.var)) {
        cc_.push_back(Literal{cur(l.var), l.negated});
        continue;
      }
      qs.push_back(orig(l.var));
      if (l.negated) neg.push_back(orig(l.var));
    }
    const Condition saved = cc_;
    cc_.clear();
    for (const auto& q : neg) x(q);
    cc_ = saved;
    body(qs);
    cc_.clear();
    for (const auto& q : neg) x(q);
  }

  // Statement operands are in input names; ren_ is keyed by input names too.
  static VarId orig(const VarId& v) { return v; }

  // Physical wire of an input name. Distribute puts both halves on the
  // operand's wire; a select of two halves of one wire is only a rename.
  int wire(const VarId& v) {
    auto it = wire_.find(v);
    if (it != wire_.end()) return it->second;
    return wire_[v] = nextWire_++;
  }

  void track_wires(const Statement& s) {
    std::vector<VarId> out;
    for (const auto& v : s.producedQuantum) if (!is_garbage(v)) out.push_back(v);
    if (s.op.is(Builtin::Select) && s.op.mode.backwards()) {
      for (const auto& v : out) wire_[v] = wire(s.consumed[0]);
    } else if (s.op.is(Builtin::Select)) {
      wire_[out[0]] = wire(s.consumed[0]);
    } else if (s.consumed.size() == 1 && out.size() == 1) {
      wire_[out[0]] = wire(s.consumed[0]);
    } else {
      for (const auto& v : out) wire(v);
    }
  }

  void lower(const Statement& s0) {
    const Statement& s = s0;
    const bool sameWire = s.op.is(Builtin::Select) && !s.op.mode.backwards() && s.consumed.size() == 2 &&
                          wire(s.consumed[0]) == wire(s.consumed[1]);
    track_wires(s);
    lower_op(s, sameWire);
  }

  void lower_op(const Statement& s, bool sameWire) {
    const Operation& op = s.op;
    cc_.clear();
    switch (op.builtin) {
      case Builtin::New: {
        if (!op.mode.backwards()) {
          Statement n;
          n.op = make_builtin(Builtin::New, 0);
          n.producedQuantum = s.producedQuantum;
          push(n);
          if (op.param == 1) controlled(s.condition, {}, [&](const std::vector<VarId>& qs) { mcx(qs, s.producedQuantum[0]); });
        } else {
          const VarId t = s.consumed[0];
          if (op.param == 1) controlled(s.condition, {}, [&](const std::vector<VarId>& qs) { mcx(qs, t); });
          cc_.clear();
          free_ancilla(t);
        }
        return;
      }
      case Builtin::X:
      case Builtin::H: {
        const VarId t = s.consumed[0];
        controlled(s.condition, {}, [&](const std::vector<VarId>& qs) {
          if (op.is(Builtin::X)) mcx(qs, t); else mch(qs, t);
        });
        ren_[s.producedQuantum[0]] = cur(t);
        return;
      }
      case Builtin::Phase:
        controlled(s.condition, {}, [&](const std::vector<VarId>& qs) { mphase(qs, op.angle); });
        return;
      case Builtin::Select: {
        if (op.mode.backwards() || sameWire || hinted(s)) {
          Statement c = s;
          c.rename_uses([&](const VarId& v) { return cur(v); });
          push(c);
          return;
        }
        const VarId w0 = s.consumed[0], w1 = s.consumed[1];
        const VarId& ctl = s.conserved[0].var;
        controlled(s.condition, {Literal{w1, false}}, [&](const std::vector<VarId>& qs) { mcx(qs, w0); });
        controlled(s.condition, {Literal{w0, false}, Literal{ctl, false}},
                   [&](const std::vector<VarId>& qs) { mcx(qs, w1); });
        cc_.clear();
        free_ancilla(w1);
        ren_[s.producedQuantum[0]] = cur(w0);
        return;
      }
      case Builtin::Measure:
      case Builtin::Forget: {
        Statement c = s;
        c.rename_uses([&](const VarId& v) { return cur(v); });
        push(c);
        return;
      }
      default: break;
    }
    throw InternalError("decompose: unexpected operation " + op_name(op));
  }

  bool hinted(const Statement& s) const {
    auto root = [&](const VarId& v) {
      auto it = roots_.find(v);
      return it == roots_.end() ? v : it->second;
    };
    const VarId a = root(s.consumed[0]), b = root(s.consumed[1]);
    auto it = out_.shareHints.find(a);
    if (it != out_.shareHints.end() && it->second == b) return true;
    it = out_.shareHints.find(b);
    return it != out_.shareHints.end() && it->second == a;
  }

  const FlatFunction& in_;
  FlatFunction out_;
  std::set<VarId> used_;
  std::set<VarId> hinted_;
  std::map<VarId, VarId> roots_;
  std::map<VarId, VarId> ren_;
  std::map<VarId, int> wire_;
  int nextWire_ = 0;
  Condition cc_;
  int n_ = 0;
};

}  // namespace lower_detail

/// Rewrites a flat function so that every gate touches at most two qubits:
/// X under no or one positive control, H, and phase under one control.
/// Selects become merge gates unless their operands are alias-hinted.
inline FlatFunction decompose_controls(const FlatFunction& f) {
  return lower_detail::Decomposer(f).run();
}

// ---------------------------------------------------------------------------
// Circuits

struct Gate {
  std::string tag;               // x, h, cx, ccx, u1, measure
  std::vector<int> qubits;
  double angle = 0;              // u1 angle in units of pi
  int cbit = -1;                 // measure target
  std::vector<std::pair<int, bool>> cond;  // classical bits that must hold
  friend bool operator==(const Gate&, const Gate&) = default;
};

struct FlatCircuit {
  int numQubits = 0;
  int classicalBits = 0;
  std::vector<Gate> gates;
  // Interface, used to compare against the flat function.
  std::vector<std::pair<std::string, int>> inputs;   // input label -> qubit
  std::vector<std::pair<std::string, int>> outputs;  // output label -> qubit
  std::vector<std::pair<std::string, std::variant<std::int64_t, int>>> classicalOutputs;  // const or bit
};

namespace lower_detail {

class Allocator {
 public:
  explicit Allocator(const FlatFunction& f) : f_(f) {}

  FlatCircuit run() {
    for (const auto& v : f_.inputs) {
      const int q = c_.numQubits++;
      bind(v, q);
      c_.inputs.push_back({v, q});
    }
    for (const auto& s : f_.fn.body) step(s);
    for (std::size_t k = 0; k < f_.conserved.size(); ++k) {
      const VarId& fin = k < f_.conservedOut.size() ? f_.conservedOut[k] : f_.conserved[k];
      c_.outputs.push_back({f_.conserved[k], q_of(fin)});
    }
    for (std::size_t k = 0; k < f_.outputs.size(); ++k) c_.outputs.push_back({f_.outputLabels[k], q_of(f_.outputs[k])});
    for (const auto& [label, v] : f_.classicalOutputs) {
      if (std::holds_alternative<std::int64_t>(v)) c_.classicalOutputs.push_back({label, std::get<std::int64_t>(v)});
      else c_.classicalOutputs.push_back({label, bits_.at(std::get<VarId>(v))});
    }
    return std::move(c_);
  }

 private:
  int q_of(const VarId& v) const {
    auto it = live_.find(v);
    if (it == live_.end()) throw InternalError("allocator: '" + v + "' is not live");
    return it->second;
  }
  void bind(const VarId& v, int q) {
    live_[v] = q;
    ++ref_[q];
  }
  void unbind(const VarId& v) {
    const int q = q_of(v);
    live_.erase(v);
    if (--ref_[q] == 0) {
      ref_.erase(q);
      if (!retired_.count(q)) free_.insert(q);
    }
  }
  void move(const VarId& from, const VarId& to) {
    const int q = q_of(from);
    live_.erase(from);
    live_[to] = q;
  }
  int alloc() {
    if (!free_.empty()) {
      int q = *free_.begin();
      free_.erase(free_.begin());
      return q;
    }
    return c_.numQubits++;
  }

  void gate(std::string tag, std::vector<int> qs, const Statement& s, double angle = 0) {
    Gate g;
    g.tag = std::move(tag);
    g.qubits = std::move(qs);
    g.angle = angle;
    for (std::size_t i = 0; i < g.qubits.size(); ++i)
      for (std::size_t j = i + 1; j < g.qubits.size(); ++j)
        UNFAB_ASSERT(g.qubits[i] != g.qubits[j], "allocator: " + g.tag + " uses qubit " +
                                                     std::to_string(g.qubits[i]) + " twice");
    for (const auto& l : s.condition)
      if (is_classical(l.var)) g.cond.push_back({bits_.at(l.var), !l.negated});
    c_.gates.push_back(std::move(g));
  }

  std::vector<int> quantum_controls(const Statement& s) const {
    std::vector<int> r;
    for (const auto& l : s.condition) {
      if (is_classical(l.var)) continue;
      if (l.negated) throw InternalError("allocator: negated control survived decomposition");
      r.push_back(q_of(l.var));
    }
    return r;
  }

  void step(const Statement& s) {
    const Operation& op = s.op;
    switch (op.builtin) {
      case Builtin::New:
        if (!op.mode.backwards()) {
          const VarId& v = s.producedQuantum[0];
          auto h = f_.shareHints.find(v);
          int q;
          if (h != f_.shareHints.end() && rootWire_.count(h->second) && ref_.count(rootWire_[h->second])) {
            q = rootWire_[h->second];
          } else {
            q = alloc();
          }
          rootWire_[v] = q;
          bind(v, q);
          if (op.param == 1) gate("x", {q}, s);
        } else {
          unbind(s.consumed[0]);
        }
        return;
      case Builtin::X: {
        auto cs = quantum_controls(s);
        const int t = q_of(s.consumed[0]);
        if (cs.size() > 2) throw InternalError("allocator: X with more than two controls");
        if (cs.empty()) gate("x", {t}, s);
        else if (cs.size() == 1) gate("cx", {cs[0], t}, s);
        else gate("ccx", {cs[0], cs[1], t}, s);
        move(s.consumed[0], s.producedQuantum[0]);
        return;
      }
      case Builtin::H:
        if (!quantum_controls(s).empty()) throw InternalError("allocator: controlled H survived decomposition");
        gate("h", {q_of(s.consumed[0])}, s);
        move(s.consumed[0], s.producedQuantum[0]);
        return;
      case Builtin::Phase: {
        auto cs = quantum_controls(s);
        if (cs.empty()) return;
        if (cs.size() > 1) throw InternalError("allocator: multi-controlled phase survived decomposition");
        gate("u1", {cs[0]}, s, op.angle);
        return;
      }
      case Builtin::Measure: {
        const int q = q_of(s.consumed[0]);
        Gate g;
        g.tag = "measure";
        g.qubits = {q};
        g.cbit = c_.classicalBits++;
        c_.gates.push_back(g);
        bits_[s.producedClassical[0]] = g.cbit;
        retired_.insert(q);
        unbind(s.consumed[0]);
        return;
      }
      case Builtin::Select:
        if (!op.mode.backwards()) {
          const int q0 = q_of(s.consumed[0]), q1 = q_of(s.consumed[1]);
          if (q0 != q1) throw InternalError("allocator: select of distinct qubits survived decomposition");
          live_.erase(s.consumed[0]);
          live_.erase(s.consumed[1]);
          --ref_[q0];
          live_[s.producedQuantum[0]] = q0;
        } else {
          const int q = q_of(s.consumed[0]);
          live_.erase(s.consumed[0]);
          live_[s.producedQuantum[0]] = q;
          live_[s.producedQuantum[1]] = q;
          ++ref_[q];
        }
        return;
      case Builtin::Forget:
        throw UnfabError("UnsupportedForget", "cannot lower a forget; run uncomputation synthesis first", s.span);
      default: break;
    }
    throw InternalError("allocator: unexpected operation " + op_name(op));
  }

  const FlatFunction& f_;
  FlatCircuit c_;
  std::map<VarId, int> live_;
  std::map<int, int> ref_;
  std::set<int> free_;
  std::set<int> retired_;
  std::map<VarId, int> rootWire_;
  std::map<VarId, int> bits_;
};

}  // namespace lower_detail

/// Linear-scan allocation of a decomposed flat function onto qubit indices.
inline FlatCircuit allocate_registers(const FlatFunction& decomposed) {
  return lower_detail::Allocator(decomposed).run();
}

struct GateReport {
  int single = 0;
  int cx = 0;
  int total = 0;
  int qubits = 0;
};

inline GateReport gate_count(const FlatCircuit& c) {
  GateReport r;
  for (const auto& g : c.gates) {
    if (g.tag == "measure") continue;
    if (g.tag == "cx") ++r.cx;
    else if (g.tag == "ccx") throw InternalError("gate_count of an undecomposed circuit");
    else ++r.single;
  }
  r.total = r.single + r.cx;
  r.qubits = c.numQubits;
  return r;
}

inline std::string format_report(const GateReport& r) {
  std::ostringstream os;
  os << "single=" << r.single << "\ncx=" << r.cx << "\ngates=" << r.total << "\nqubits=" << r.qubits << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// OpenQASM 2.0

/// Classical conditions become `if(c==k)` over every value of the bits
/// measured so far; bit j of k is c[j].
inline std::string emit_qasm(const FlatCircuit& c) {
  std::ostringstream os;
  os << "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n";
  os << "qreg q[" << std::max(c.numQubits, 1) << "];\n";
  if (c.classicalBits > 0) os << "creg c[" << c.classicalBits << "];\n";
  for (const auto& [l, q] : c.inputs) os << "// input " << l << " q[" << q << "]\n";
  for (const auto& [l, q] : c.outputs) os << "// output " << l << " q[" << q << "]\n";
  for (const auto& [l, v] : c.classicalOutputs) {
    if (std::holds_alternative<int>(v)) os << "// classical " << l << " c[" << std::get<int>(v) << "]\n";
    else os << "// classical " << l << " " << std::get<std::int64_t>(v) << "\n";
  }
  int measured = 0;
  for (const auto& g : c.gates) {
    std::string body;
    auto q = [&](int i) { return "q[" + std::to_string(g.qubits.at(i)) + "]"; };
    if (g.tag == "measure") {
      os << "measure " << q(0) << " -> c[" << g.cbit << "];\n";
      measured = std::max(measured, g.cbit + 1);
      continue;
    }
    if (g.tag == "u1") body = "u1(" + text_detail::format_angle(g.angle) + "*pi) " + q(0);
    else if (g.tag == "cx") body = "cx " + q(0) + "," + q(1);
    else if (g.tag == "ccx") body = "ccx " + q(0) + "," + q(1) + "," + q(2);
    else body = g.tag + " " + q(0);
    if (g.cond.empty()) {
      os << body << ";\n";
      continue;
    }
    for (const auto& [bit, v] : g.cond)
      if (bit >= measured) throw InternalError("gate conditioned on a bit that is not measured yet");
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << measured); ++k) {
      bool ok = true;
      for (const auto& [bit, v] : g.cond) ok &= (((k >> bit) & 1) != 0) == v;
      if (ok) os << "if(c==" << k << ") " << body << ";\n";
    }
  }
  return os.str();
}

/// Reads the subset of OpenQASM 2.0 that emit_qasm writes. `if(c==k)`
/// fixes every classical bit. Interface comments restore inputs and outputs.
inline FlatCircuit parse_qasm(const std::string& text) {
  FlatCircuit c;
  std::string body;
  {
    std::istringstream ls(text);
    std::string line;
    auto index = [](const std::string& t) { return std::stoi(t.substr(t.find('[') + 1)); };
    while (std::getline(ls, line)) {
      const auto cm = line.find("//");
      if (cm == std::string::npos) {
        body += line + "\n";
        continue;
      }
      std::istringstream ws(line.substr(cm + 2));
      std::string kind, label, where;
      if (ws >> kind >> label >> where) {
        if (kind == "input") c.inputs.push_back({label, index(where)});
        else if (kind == "output") c.outputs.push_back({label, index(where)});
        else if (kind == "classical" && where.rfind("c[", 0) == 0) c.classicalOutputs.push_back({label, index(where)});
        else if (kind == "classical") c.classicalOutputs.push_back({label, std::int64_t{std::stoll(where)}});
      }
      body += line.substr(0, cm) + "\n";
    }
  }
  std::istringstream is(body);
  std::string stmt;
  int lineNo = 0;
  auto fail = [&](const std::string& m) {
    throw UnfabError("QasmSyntax", "qasm statement " + std::to_string(lineNo) + ": " + m);
  };
  auto trim = [](std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    return s;
  };
  auto qubit = [&](const std::string& a) {
    std::string t = trim(a);
    if (t.rfind("q[", 0) != 0 || t.back() != ']') fail("bad qubit operand '" + t + "'");
    int i = std::stoi(t.substr(2, t.size() - 3));
    if (i < 0 || i >= c.numQubits) fail("qubit index out of range");
    return i;
  };
  while (std::getline(is, stmt, ';')) {
    ++lineNo;
    stmt = trim(stmt);
    if (stmt.empty()) continue;
    if (stmt.rfind("OPENQASM", 0) == 0 || stmt.rfind("include", 0) == 0) continue;
    if (stmt.rfind("qreg", 0) == 0) {
      c.numQubits = std::stoi(stmt.substr(stmt.find('[') + 1));
      continue;
    }
    if (stmt.rfind("creg", 0) == 0) {
      c.classicalBits = std::stoi(stmt.substr(stmt.find('[') + 1));
      continue;
    }
    Gate g;
    if (stmt.rfind("if(", 0) == 0) {
      auto close = stmt.find(')');
      auto eq = stmt.find("==");
      if (close == std::string::npos || eq == std::string::npos) fail("bad if");
      std::uint64_t k = std::stoull(stmt.substr(eq + 2, close - eq - 2));
      for (int b = 0; b < c.classicalBits; ++b) g.cond.push_back({b, ((k >> b) & 1) != 0});
      stmt = trim(stmt.substr(close + 1));
    }
    if (stmt.rfind("measure", 0) == 0) {
      auto arrow = stmt.find("->");
      if (arrow == std::string::npos) fail("bad measure");
      g.tag = "measure";
      g.qubits = {qubit(stmt.substr(7, arrow - 7))};
      std::string cb = trim(stmt.substr(arrow + 2));
      g.cbit = std::stoi(cb.substr(cb.find('[') + 1));
      c.gates.push_back(g);
      continue;
    }
    std::string name = stmt.substr(0, stmt.find_first_of(" (\t"));
    std::string rest = stmt.substr(name.size());
    if (name == "u1") {
      auto l = rest.find('('), r = rest.find(')');
      std::string a = rest.substr(l + 1, r - l - 1);
      auto star = a.find("*pi");
      if (star == std::string::npos) fail("u1 angle must be written as r*pi");
      g.angle = std::stod(a.substr(0, star));
      rest = rest.substr(r + 1);
    }
    std::vector<std::string> ops;
    std::stringstream rs(rest);
    std::string part;
    while (std::getline(rs, part, ',')) ops.push_back(part);
    const std::map<std::string, std::size_t> arity = {{"x", 1}, {"h", 1}, {"u1", 1}, {"cx", 2}, {"ccx", 3}};
    auto it = arity.find(name);
    if (it == arity.end()) fail("unsupported gate '" + name + "'");
    if (ops.size() != it->second) fail("wrong operand count for " + name);
    g.tag = name;
    for (const auto& o : ops) g.qubits.push_back(qubit(o));
    c.gates.push_back(g);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Circuit simulation

/// Runs `c` on `input` (wires named by c.inputs labels). Qubits that are not
/// outputs must end in a basis state and are dropped; measured bits feed
/// classical outputs.
inline SimOutcome simulate(const FlatCircuit& c, const StateVector& input, SimConfig cfg = {}) {
  if (c.numQubits > cfg.maxQubits)
    throw UnfabError("BudgetExceeded", "circuit needs " + std::to_string(c.numQubits) + " qubits, budget is " +
                                           std::to_string(cfg.maxQubits));
  std::vector<std::string> order;
  for (const auto& [l, q] : c.inputs) order.push_back(l);
  StateVector s = input.permuted(order);
  std::vector<int> wireOf(c.numQubits, -1);
  for (std::size_t k = 0; k < c.inputs.size(); ++k) wireOf[c.inputs[k].second] = static_cast<int>(k);
  for (int q = 0; q < c.numQubits; ++q)
    if (wireOf[q] < 0) {
      s.add_wire("#" + std::to_string(q), false, cfg.maxQubits);
      wireOf[q] = s.num_wires() - 1;
    }
  std::vector<int> bits(c.classicalBits, 0);
  std::mt19937_64 rng(cfg.seed);
  for (const auto& g : c.gates) {
    bool on = true;
    for (const auto& [b, v] : g.cond) on &= (bits.at(b) != 0) == v;
    if (!on) continue;
    auto w = [&](int i) { return wireOf.at(g.qubits.at(i)); };
    if (g.tag == "x") s.apply_x(w(0));
    else if (g.tag == "h") s.apply_h(w(0));
    else if (g.tag == "cx") s.apply_x(w(1), {{w(0), true}});
    else if (g.tag == "ccx") s.apply_x(w(2), {{w(0), true}, {w(1), true}});
    else if (g.tag == "u1") s.apply_phase(g.angle * std::numbers::pi, {{w(0), true}});
    else if (g.tag == "measure") bits.at(g.cbit) = s.measure(w(0), rng, false) ? 1 : 0;
    else throw InternalError("circuit simulation: unknown gate " + g.tag);
  }
  // relabel outputs, drop junk
  std::vector<std::string> outLabels;
  std::set<int> outQ;
  for (const auto& [l, q] : c.outputs)
    if (!outQ.insert(q).second) throw UnfabError("AliasedOutput", "two outputs on qubit " + std::to_string(q));
  std::vector<std::string> junk;
  for (int q = 0; q < c.numQubits; ++q)
    if (!outQ.count(q)) {
      s.labels[wireOf[q]] = "#junk" + std::to_string(q);
      junk.push_back(s.labels[wireOf[q]]);
    }
  for (const auto& [l, q] : c.outputs) {
    s.labels[wireOf[q]] = l;
    outLabels.push_back(l);
  }
  for (const auto& j : junk) {
    const int w = s.wire_or_throw(j);
    if (std::sqrt(s.weight_off(w, false)) <= cfg.tolerance) s.project_out(w, false);
    else if (std::sqrt(s.weight_off(w, true)) <= cfg.tolerance) s.project_out(w, true);
    else throw UnfabError("Leak", "qubit " + j.substr(5) + " is not in a basis state at the end");
  }
  SimOutcome out;
  out.state = s.permuted(outLabels);
  for (const auto& [l, v] : c.classicalOutputs) {
    if (std::holds_alternative<std::int64_t>(v)) out.classical.push_back({l, std::get<std::int64_t>(v)});
    else out.classical.push_back({l, bits.at(std::get<int>(v))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver

struct LowerResult {
  FlatFunction flat;
  FlatFunction decomposed;
  FlatCircuit circuit;
};

inline LowerResult lower_flat(FlatFunction flat) {
  LowerResult r;
  r.decomposed = decompose_controls(flat);
  r.circuit = allocate_registers(r.decomposed);
  r.flat = std::move(flat);
  return r;
}

inline LowerResult lower(const Program& explicitProgram, const std::string& entry, FlattenOptions opts = {}) {
  return lower_flat(inline_unroll(explicitProgram, entry, std::move(opts)));
}

}  // namespace unfab
