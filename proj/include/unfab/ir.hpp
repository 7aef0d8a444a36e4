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

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "unfab/diag.hpp"

namespace unfab {

enum class Effect : std::uint8_t { Pure = 0, Quantum = 1, Measure = 2 };

inline char effect_char(Effect e) {
  switch (e) {
    case Effect::Pure: return 'p';
    case Effect::Quantum: return 'q';
    case Effect::Measure: return 'm';
  }
  return '?';
}

inline Effect max_effect(Effect a, Effect b) { return a < b ? b : a; }

// Variables are plain strings; the leading sigil carries the kind.
using VarId = std::string;

enum class VarKind { Quantum, Classical, Garbage };

inline VarKind kind_of(const VarId& v) {
  if (!v.empty() && v[0] == '$') return VarKind::Classical;
  if (!v.empty() && v[0] == '%') return VarKind::Garbage;
  return VarKind::Quantum;
}
inline bool is_quantum(const VarId& v) { return kind_of(v) == VarKind::Quantum; }
inline bool is_classical(const VarId& v) { return kind_of(v) == VarKind::Classical; }
inline bool is_garbage(const VarId& v) { return kind_of(v) == VarKind::Garbage; }

// The implicit garbage bin of a garbage-mode function.
inline const VarId kBin = "%bin";

/// Classical operand: integer literal or classical variable. The same type
/// holds quantum conserved operands (var set, quantum sigil).
struct Atom {
  bool isConst = false;
  std::int64_t value = 0;
  VarId var;

  static Atom lit(std::int64_t v) { Atom a; a.isConst = true; a.value = v; return a; }
  static Atom of(VarId v) { Atom a; a.var = std::move(v); return a; }
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Tiny pure integer expression language for classical statements and widths.
struct Expr {
  enum class Kind { Const, Var, Neg, Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, Not };
  Kind kind = Kind::Const;
  std::int64_t value = 0;
  VarId var;
  std::vector<Expr> kids;

  static Expr constant(std::int64_t v) { Expr e; e.value = v; return e; }
  static Expr variable(VarId v) { Expr e; e.kind = Kind::Var; e.var = std::move(v); return e; }
  static Expr binary(Kind k, Expr a, Expr b) {
    Expr e; e.kind = k; e.kids.push_back(std::move(a)); e.kids.push_back(std::move(b)); return e;
  }
  static Expr unary(Kind k, Expr a) { Expr e; e.kind = k; e.kids.push_back(std::move(a)); return e; }
  friend bool operator==(const Expr&, const Expr&) = default;

  void collect_vars(std::vector<VarId>& out) const {
    if (kind == Kind::Var) out.push_back(var);
    for (const auto& k : kids) k.collect_vars(out);
  }
  template <class F>
  void rename(const F& f) {
    if (kind == Kind::Var) var = f(var);
    for (auto& k : kids) k.rename(f);
  }
};

/// Evaluates e with `lookup` returning std::nullopt for unknown variables.
template <class Lookup>
std::optional<std::int64_t> eval_expr(const Expr& e, const Lookup& lookup) {
  using K = Expr::Kind;
  switch (e.kind) {
    case K::Const: return e.value;
    case K::Var: return lookup(e.var);
    default: break;
  }
  std::vector<std::int64_t> v;
  for (const auto& k : e.kids) {
    auto r = eval_expr(k, lookup);
    if (!r) return std::nullopt;
    v.push_back(*r);
  }
  switch (e.kind) {
    case K::Neg: return -v[0];
    case K::Not: return v[0] == 0 ? 1 : 0;
    case K::Add: return v[0] + v[1];
    case K::Sub: return v[0] - v[1];
    case K::Mul: return v[0] * v[1];
    case K::Eq: return v[0] == v[1] ? 1 : 0;
    case K::Ne: return v[0] != v[1] ? 1 : 0;
    case K::Lt: return v[0] < v[1] ? 1 : 0;
    case K::Le: return v[0] <= v[1] ? 1 : 0;
    case K::Gt: return v[0] > v[1] ? 1 : 0;
    case K::Ge: return v[0] >= v[1] ? 1 : 0;
    default: return std::nullopt;
  }
}

struct Literal {
  VarId var;
  bool negated = false;
  friend bool operator==(const Literal&, const Literal&) = default;
  friend auto operator<=>(const Literal&, const Literal&) = default;
  Literal negate() const { return Literal{var, !negated}; }
};

using Condition = std::vector<Literal>;

/// Sorted, deduplicated form, so equivalence is equality and implication is
/// inclusion.
inline Condition normalize(Condition c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}
inline bool implies(const Condition& stronger, const Condition& weaker) {
  return std::includes(stronger.begin(), stronger.end(), weaker.begin(), weaker.end());
}
inline Condition conjoin(Condition a, const Condition& b) {
  a.insert(a.end(), b.begin(), b.end());
  return normalize(std::move(a));
}
inline bool contradictory(const Condition& c) {
  for (std::size_t i = 0; i + 1 < c.size(); ++i)
    if (c[i].var == c[i + 1].var && c[i].negated != c[i + 1].negated) return true;
  return false;
}

/// Mode flags shared by operations and function keys.
///
/// Garbage mode is applied on top of an optionally adjointed base, and may
/// itself be adjointed: f, f^adj, f^G, f^G^adj, f^adj^G, f^adj^G^adj.
struct Mode {
  bool adjoint = false;    // inner adjoint (the only one when !garbage)
  bool garbage = false;
  bool gAdjoint = false;   // adjoint of the garbage-mode variant
  bool classicalOnly = false;
  friend bool operator==(const Mode&, const Mode&) = default;
  friend auto operator<=>(const Mode&, const Mode&) = default;

  Mode dagger() const {
    Mode m = *this;
    if (garbage) m.gAdjoint = !m.gAdjoint; else m.adjoint = !m.adjoint;
    return m;
  }
  /// Garbage-producing variant; only defined when !garbage.
  Mode with_garbage() const {
    Mode m = *this;
    m.garbage = true;
    m.gAdjoint = false;
    return m;
  }
  bool produces_garbage() const { return garbage && !gAdjoint; }
  bool consumes_garbage() const { return garbage && gAdjoint; }
  /// Net direction: does this mode run the base computation backwards?
  bool backwards() const { return adjoint != gAdjoint; }

  std::string suffix() const {
    std::string s;
    if (adjoint) s += "^adj";
    if (garbage) s += "^G";
    if (gAdjoint) s += "^adj";
    if (classicalOnly) s += "^O";
    return s;
  }
};

/// Splits a function key such as `f^adj^G` into base name and mode.
inline std::pair<std::string, Mode> split_key(const std::string& key) {
  const auto pos = key.find('^');
  std::pair<std::string, Mode> r{key.substr(0, pos), Mode{}};
  if (pos == std::string::npos) return r;
  std::size_t k = pos;
  while (k < key.size()) {
    std::size_t e = key.find('^', k + 1);
    const std::string part = key.substr(k + 1, e == std::string::npos ? std::string::npos : e - k - 1);
    if (part == "adj") r.second = r.second.dagger();
    else if (part == "G" && !r.second.garbage) r.second = r.second.with_garbage();
    else if (part == "O") r.second.classicalOnly = true;
    else throw UnfabError("BadKey", "unknown mode suffix '^" + part + "' in '" + key + "'");
    k = e == std::string::npos ? key.size() : e;
  }
  return r;
}

/// Built-in operation tags.
enum class Builtin {
  None,  // user function
  New, X, H, CX, Phase, Measure, Forget, Dispose, Dup, Select, Cat, Calc
};

struct Operation {
  std::string target;     // built-in base name or user function name
  Builtin builtin = Builtin::None;
  Mode mode;
  std::int64_t param = 0; // allocation value for new, arity for cat
  double angle = 0;       // phase angle in units of pi
  friend bool operator==(const Operation&, const Operation&) = default;

  Operation dagger() const { Operation o = *this; o.mode = o.mode.dagger(); return o; }
  bool is(Builtin b) const { return builtin == b; }
  bool is_user() const { return builtin == Builtin::None; }
  /// Key of the callee definition for user calls.
  std::string key() const { return target + mode.suffix(); }
};

inline Operation make_builtin(Builtin b, std::int64_t param = 0, double angle = 0) {
  static const std::map<Builtin, std::string> names = {
      {Builtin::New, "new"},         {Builtin::X, "X"},
      {Builtin::H, "H"},             {Builtin::CX, "CX"},
      {Builtin::Phase, "phase"},     {Builtin::Measure, "measure"},
      {Builtin::Forget, "forget"},   {Builtin::Dispose, "dispose"},
      {Builtin::Dup, "dup"},         {Builtin::Select, "select"},
      {Builtin::Cat, "cat"},         {Builtin::Calc, "calc"}};
  Operation o;
  o.builtin = b;
  o.target = names.at(b);
  o.param = param;
  o.angle = angle;
  return o;
}
inline Operation make_call(std::string name, Mode m = {}) {
  Operation o;
  o.target = std::move(name);
  o.mode = m;
  return o;
}

struct Statement {
  int id = -1;
  SourceSpan span;
  int pairTag = -1;  // links compute/uncompute pairs created by synthesis
  std::vector<VarId> producedClassical;
  std::vector<VarId> producedQuantum;  // quantum and garbage results
  Effect effect = Effect::Pure;
  Operation op;
  std::vector<Atom> conserved;
  std::vector<VarId> consumed;
  Condition condition;
  Expr expr;  // only for Builtin::Calc

  std::vector<VarId> produced() const {
    std::vector<VarId> r = producedClassical;
    r.insert(r.end(), producedQuantum.begin(), producedQuantum.end());
    return r;
  }
  /// Variables read without being consumed: conserved operands, expression
  /// operands and condition literals.
  std::vector<VarId> conserved_uses() const {
    std::vector<VarId> r;
    for (const auto& a : conserved) if (!a.isConst) r.push_back(a.var);
    if (op.is(Builtin::Calc)) expr.collect_vars(r);
    for (const auto& l : condition) r.push_back(l.var);
    return r;
  }
  std::vector<VarId> quantum_conserved() const {
    std::vector<VarId> r;
    for (const auto& a : conserved) if (!a.isConst && !is_classical(a.var)) r.push_back(a.var);
    return r;
  }
  bool has_classical_out() const { return !producedClassical.empty(); }
  bool produces_garbage() const {
    return !producedQuantum.empty() && is_garbage(producedQuantum.back());
  }

  template <class F>
  void rename_uses(const F& f) {
    for (auto& a : conserved) if (!a.isConst) a.var = f(a.var);
    for (auto& v : consumed) v = f(v);
    for (auto& l : condition) l.var = f(l.var);
    expr.rename(f);
    condition = normalize(std::move(condition));
  }
  template <class F>
  void rename_all(const F& f) {
    rename_uses(f);
    for (auto& v : producedClassical) v = f(v);
    for (auto& v : producedQuantum) v = f(v);
  }

  /// Structural equality ignoring ids, spans and tags.
  bool same_as(const Statement& o) const {
    return producedClassical == o.producedClassical && producedQuantum == o.producedQuantum &&
           effect == o.effect && op == o.op && conserved == o.conserved &&
           consumed == o.consumed && condition == o.condition && expr == o.expr;
  }
};

struct Param {
  VarId name;
  std::optional<Atom> width;  // quantum width annotation; default 1
  friend bool operator==(const Param&, const Param&) = default;
};

struct FunctionDef {
  std::string name;  // base name; mode carries derived-variant flags
  Mode mode;
  std::vector<Param> bracketParams;   // classical inputs and conserved quantum
  std::vector<Param> consumedParams;  // may contain kBin
  std::vector<Statement> body;
  std::vector<VarId> returns;         // classical and quantum; may contain kBin
  // Widths of returned quantum values when known (set by adjoint synthesis so
  // that a second adjoint restores the parameter annotations). Not printed.
  std::map<VarId, Atom> returnWidths;
  std::optional<Effect> declaredEffect;
  SourceSpan span;
  int nextId = 0;

  std::string key() const { return name + mode.suffix(); }

  std::vector<VarId> classical_in() const {
    std::vector<VarId> r;
    for (const auto& p : bracketParams) if (is_classical(p.name)) r.push_back(p.name);
    return r;
  }
  std::vector<VarId> conserved_params() const {
    std::vector<VarId> r;
    for (const auto& p : bracketParams) if (!is_classical(p.name)) r.push_back(p.name);
    return r;
  }
  std::vector<VarId> consumed_params() const {
    std::vector<VarId> r;
    for (const auto& p : consumedParams) r.push_back(p.name);
    return r;
  }
  std::vector<VarId> returned_classical() const {
    std::vector<VarId> r;
    for (const auto& v : returns) if (is_classical(v)) r.push_back(v);
    return r;
  }
  std::vector<VarId> returned_quantum() const {
    std::vector<VarId> r;
    for (const auto& v : returns) if (!is_classical(v)) r.push_back(v);
    return r;
  }
  bool bin_out() const { return std::find(returns.begin(), returns.end(), kBin) != returns.end(); }
  bool bin_in() const {
    for (const auto& p : consumedParams) if (p.name == kBin) return true;
    return false;
  }

  int fresh_id() { return nextId++; }
  Statement& add(Statement s) {
    s.id = fresh_id();
    body.push_back(std::move(s));
    return body.back();
  }
  int index_of(int id) const {
    for (std::size_t i = 0; i < body.size(); ++i) if (body[i].id == id) return static_cast<int>(i);
    return -1;
  }
  /// Re-numbers statement ids to positions.
  void renumber() {
    for (std::size_t i = 0; i < body.size(); ++i) body[i].id = static_cast<int>(i);
    nextId = static_cast<int>(body.size());
  }

  /// All variable names mentioned anywhere.
  std::set<VarId> all_vars() const {
    std::set<VarId> r;
    for (const auto& p : bracketParams) r.insert(p.name);
    for (const auto& p : consumedParams) r.insert(p.name);
    for (const auto& s : body) {
      for (const auto& v : s.produced()) r.insert(v);
      for (const auto& v : s.consumed) r.insert(v);
      for (const auto& v : s.conserved_uses()) r.insert(v);
    }
    for (const auto& v : returns) r.insert(v);
    return r;
  }

  bool same_as(const FunctionDef& o) const {
    if (name != o.name || mode != o.mode || bracketParams != o.bracketParams ||
        consumedParams != o.consumedParams || returns != o.returns ||
        declaredEffect != o.declaredEffect || body.size() != o.body.size())
      return false;
    for (std::size_t i = 0; i < body.size(); ++i)
      if (!body[i].same_as(o.body[i])) return false;
    return true;
  }
};

struct Program {
  std::vector<FunctionDef> functions;

  const FunctionDef* find(const std::string& key) const {
    for (const auto& f : functions) if (f.key() == key) return &f;
    return nullptr;
  }
  FunctionDef* find(const std::string& key) {
    for (auto& f : functions) if (f.key() == key) return &f;
    return nullptr;
  }
  const FunctionDef& at(const std::string& key) const {
    if (auto* f = find(key)) return *f;
    throw UnfabError("UnresolvedCallee", "no function named '" + key + "'");
  }
  void put(FunctionDef f) {
    if (auto* g = find(f.key())) *g = std::move(f);
    else functions.push_back(std::move(f));
  }
  bool same_as(const Program& o) const {
    if (functions.size() != o.functions.size()) return false;
    for (std::size_t i = 0; i < functions.size(); ++i)
      if (!functions[i].same_as(o.functions[i])) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Signatures

/// Shape of an operation as seen from a call site.
struct Signature {
  int classicalIn = 0;     // -1: any number of atoms (cat)
  int conservedQ = 0;
  int consumed = 0;
  int producedQ = 0;       // excluding garbage
  int producedC = 0;
  Effect effect = Effect::Pure;
  bool garbageOut = false;
  bool garbageIn = false;
};

inline bool is_classical_builtin(Builtin b) { return b == Builtin::Calc; }

/// Signature of a built-in; widths of multi-qubit operands are not tracked here.
inline Signature builtin_signature(const Operation& op) {
  Signature s;
  const bool adj = op.mode.backwards();
  auto swap_io = [&] {
    if (adj) std::swap(s.consumed, s.producedQ);
  };
  switch (op.builtin) {
    case Builtin::New: s.producedQ = 1; swap_io(); break;
    case Builtin::X: s.consumed = 1; s.producedQ = 1; break;
    case Builtin::H: s.consumed = 1; s.producedQ = 1; s.effect = Effect::Quantum; break;
    case Builtin::CX: s.conservedQ = 1; s.consumed = 1; s.producedQ = 1; break;
    case Builtin::Phase: s.effect = Effect::Quantum; break;
    case Builtin::Measure: s.consumed = 1; s.producedC = 1; s.effect = Effect::Measure; break;
    case Builtin::Forget: s.consumed = -1; break;
    case Builtin::Dispose: s.consumed = 1; swap_io(); break;
    case Builtin::Dup: s.conservedQ = 1; s.producedQ = 1; swap_io(); break;
    case Builtin::Select:
      s.conservedQ = 1;
      s.consumed = 2;
      s.producedQ = 1;
      swap_io();
      break;
    case Builtin::Cat:
      s.classicalIn = static_cast<int>(op.param);
      s.consumed = static_cast<int>(op.param);
      s.producedQ = 1;
      swap_io();
      break;
    case Builtin::Calc: s.producedC = 1; s.classicalIn = -1; break;
    case Builtin::None: break;
  }
  if (op.mode.classicalOnly) {
    s.conservedQ = s.consumed = s.producedQ = 0;
    s.effect = Effect::Pure;
  }
  s.garbageOut = op.mode.produces_garbage();
  s.garbageIn = op.mode.consumes_garbage();
  return s;
}

/// Signature of a call to user function `base` in mode `m`.
inline Signature user_signature(const FunctionDef& base, const Mode& m, Effect eff) {
  Signature s;
  s.classicalIn = static_cast<int>(base.classical_in().size());
  s.conservedQ = static_cast<int>(base.conserved_params().size());
  int consumed = 0, produced = 0;
  for (const auto& p : base.consumedParams) if (p.name != kBin) ++consumed;
  for (const auto& v : base.returns) if (is_quantum(v)) ++produced;
  s.consumed = consumed;
  s.producedQ = produced;
  s.producedC = static_cast<int>(base.returned_classical().size());
  s.effect = eff;
  if (m.backwards()) std::swap(s.consumed, s.producedQ);
  if (m.classicalOnly) {
    s.conservedQ = s.consumed = s.producedQ = 0;
    s.effect = Effect::Pure;
  }
  s.garbageOut = m.produces_garbage();
  s.garbageIn = m.consumes_garbage();
  return s;
}

/// Declared effect of a built-in operation.
inline Effect builtin_effect(const Operation& op) { return builtin_signature(op).effect; }

// ---------------------------------------------------------------------------
// Statement construction

/// Builds a statement for a built-in `op` (or a user call with `userEffect`),
/// checking operand counts and kinds against the signature. `produced` lists
/// classical results first, then quantum and garbage results.
inline Statement make_statement(const Operation& op, const std::vector<Atom>& conserved,
                                const std::vector<VarId>& consumed, const std::vector<VarId>& produced,
                                const Condition& condition = {}, Effect userEffect = Effect::Pure) {
  Statement s;
  s.op = op;
  s.conserved = conserved;
  s.consumed = consumed;
  s.condition = normalize(condition);
  for (const auto& v : produced) (is_classical(v) ? s.producedClassical : s.producedQuantum).push_back(v);
  if (op.is_user()) {
    s.effect = op.mode.classicalOnly ? Effect::Pure : userEffect;
    return s;
  }
  const Signature sig = builtin_signature(op);
  s.effect = sig.effect;
  auto fail = [&](const std::string& m) { throw UnfabError("KindMismatch", op.target + ": " + m); };
  int cq = 0, cc = 0;
  for (const auto& a : conserved) {
    if (a.isConst || is_classical(a.var)) ++cc;
    else if (is_garbage(a.var)) fail("garbage variable '" + a.var + "' used as a conserved operand");
    else ++cq;
  }
  if (cq != sig.conservedQ) fail("expected " + std::to_string(sig.conservedQ) + " conserved quantum operands");
  if (sig.classicalIn >= 0 && cc != sig.classicalIn && !op.is(Builtin::Calc))
    fail("expected " + std::to_string(sig.classicalIn) + " classical operands");
  int gIn = 0, gOut = 0;
  for (const auto& v : consumed) {
    if (is_classical(v)) fail("classical variable '" + v + "' cannot be consumed");
    if (is_garbage(v) && v != kBin) ++gIn;
  }
  for (const auto& v : s.producedQuantum) if (is_garbage(v) && v != kBin) ++gOut;
  const bool disposal = op.is(Builtin::Dispose);
  if (!disposal && gIn != (sig.garbageIn ? 1 : 0)) fail("garbage operand in a non-garbage position");
  if (!disposal && gOut != (sig.garbageOut ? 1 : 0)) fail("garbage result in a non-garbage position");
  const int qIn = static_cast<int>(consumed.size()) - gIn;
  const int qOut = static_cast<int>(s.producedQuantum.size()) - gOut;
  if (sig.consumed >= 0 && !disposal && qIn != sig.consumed)
    fail("expected " + std::to_string(sig.consumed) + " consumed operands");
  if (!disposal && qOut != sig.producedQ) fail("expected " + std::to_string(sig.producedQ) + " quantum results");
  if (static_cast<int>(s.producedClassical.size()) != sig.producedC)
    fail("expected " + std::to_string(sig.producedC) + " classical results");
  return s;
}

// ---------------------------------------------------------------------------
// Fresh names

/// Appends primes to `base` until the name is unused.
inline VarId fresh_prime(const VarId& base, std::set<VarId>& used) {
  VarId v = base + "'";
  while (used.count(v)) v += "'";
  used.insert(v);
  return v;
}
inline VarId fresh_garbage(std::set<VarId>& used) {
  for (int k = 0;; ++k) {
    VarId v = "%g" + std::to_string(k);
    if (!used.count(v)) { used.insert(v); return v; }
  }
}

}  // namespace unfab
