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

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "unfab/ir.hpp"
#include "unfab/text.hpp"

namespace unfab {

namespace verify_detail {

inline Diagnostic diag(const FunctionDef& f, int stmt, std::string code, std::string msg,
                       VarId var = {}) {
  Diagnostic d;
  d.code = std::move(code);
  d.message = std::move(msg);
  d.function = f.key();
  d.stmt = stmt;
  d.var = std::move(var);
  if (stmt >= 0 && stmt < static_cast<int>(f.body.size())) d.span = f.body[stmt].span;
  else d.span = f.span;
  return d;
}

}  // namespace verify_detail

/// Scope discipline: single definition, single consumption, conserved uses
/// between production and consumption, no leaked quantum values.
inline Diagnostics structural_check(const FunctionDef& f) {
  using verify_detail::diag;
  Diagnostics out;
  std::set<VarId> defined, consumed, conservedParams;
  auto define = [&](const VarId& v, int stmt) {
    if (!defined.insert(v).second)
      out.push_back(diag(f, stmt, "Redefinition", "variable '" + v + "' is defined twice", v));
  };
  for (const auto& p : f.bracketParams) {
    define(p.name, -1);
    if (is_garbage(p.name))
      out.push_back(diag(f, -1, "KindMismatch", "garbage variable '" + p.name + "' cannot be conserved", p.name));
    if (!is_classical(p.name)) conservedParams.insert(p.name);
  }
  for (const auto& p : f.consumedParams) {
    if (is_classical(p.name))
      out.push_back(diag(f, -1, "KindMismatch", "classical parameter '" + p.name + "' in consumed list", p.name));
    define(p.name, -1);
  }
  auto use = [&](const VarId& v, int i) {
    if (!defined.count(v))
      out.push_back(diag(f, i, "UseBeforeDef", "'" + v + "' is used before it is defined", v));
    else if (consumed.count(v))
      out.push_back(diag(f, i, "UseAfterConsume", "'" + v + "' is used after it was consumed", v));
  };
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i) {
    const Statement& s = f.body[i];
    for (const auto& v : s.conserved_uses()) {
      if (is_garbage(v))
        out.push_back(diag(f, i, "KindMismatch", "garbage variable '" + v + "' used as a conserved operand", v));
      use(v, i);
    }
    if (contradictory(s.condition))
      out.push_back(diag(f, i, "ContradictoryCondition", "condition contains a literal and its negation"));
    const bool popsBin = s.op.is(Builtin::Dispose) && s.op.mode.backwards();
    const bool pushesBin = s.op.is(Builtin::Dispose) && !s.op.mode.backwards();
    if ((popsBin && !f.bin_in()) || (pushesBin && !f.bin_out()))
      out.push_back(diag(f, i, "BinMisuse", "dispose outside a garbage-mode function"));
    for (const auto& v : s.consumed) {
      if (is_classical(v)) {
        out.push_back(diag(f, i, "KindMismatch", "classical variable '" + v + "' cannot be consumed", v));
        continue;
      }
      if (v == kBin) {
        out.push_back(diag(f, i, "BinMisuse", "the garbage bin is not an operand", v));
        continue;
      }
      if (!defined.count(v)) {
        out.push_back(diag(f, i, "UseBeforeDef", "'" + v + "' is consumed before it is defined", v));
      } else if (consumed.count(v)) {
        out.push_back(diag(f, i, "DoubleConsume", "'" + v + "' is consumed twice", v));
      } else if (conservedParams.count(v)) {
        out.push_back(diag(f, i, "ConsumeConserved", "conserved parameter '" + v + "' is consumed", v));
      }
      consumed.insert(v);
    }
    for (const auto& v : s.produced()) {
      if (v == kBin) out.push_back(diag(f, i, "BinMisuse", "the garbage bin is not an operand", v));
      define(v, i);
    }
  }
  for (const auto& v : f.returns) {
    if (v == kBin) continue;
    if (!defined.count(v)) {
      out.push_back(diag(f, -1, "UseBeforeDef", "returned variable '" + v + "' is undefined", v));
      continue;
    }
    if (is_classical(v)) continue;
    if (conservedParams.count(v)) {
      out.push_back(diag(f, -1, "ReturnConserved", "conserved parameter '" + v + "' is returned", v));
      continue;
    }
    if (consumed.count(v)) {
      out.push_back(diag(f, -1, "DoubleConsume", "returned variable '" + v + "' was already consumed", v));
    }
    consumed.insert(v);
  }
  for (const auto& v : defined) {
    if (is_classical(v) || v == kBin || conservedParams.count(v)) continue;
    if (!consumed.count(v))
      out.push_back(diag(f, -1, "NotConsumed", "quantum variable '" + v + "' is never consumed", v));
  }
  return out;
}

/// Callee definition for a user call: an explicit definition of the exact
/// mode key wins over the base definition.
struct CalleeRef {
  const FunctionDef* def = nullptr;
  bool exact = false;
};

inline CalleeRef resolve_callee(const Program& p, const Operation& op) {
  if (auto* f = p.find(op.key())) return {f, true};
  Mode plain;
  if (auto* f = p.find(op.target + plain.suffix())) return {f, false};
  return {};
}

/// Least effects of all functions, as a fixpoint over the call graph.
inline std::map<std::string, Effect> effects_of(const Program& p) {
  std::map<std::string, Effect> eff;
  for (const auto& f : p.functions) eff[f.key()] = Effect::Pure;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& f : p.functions) {
      Effect e = Effect::Pure;
      for (const auto& s : f.body) {
        Effect se;
        if (s.op.is_user()) {
          CalleeRef c = resolve_callee(p, s.op);
          if (!c.def)
            throw UnfabError("UnresolvedCallee", "call to unknown function '" + s.op.key() + "'", s.span);
          se = s.op.mode.classicalOnly ? Effect::Pure : eff[c.def->key()];
        } else {
          se = builtin_effect(s.op);
        }
        e = max_effect(e, se);
      }
      if (e != eff[f.key()]) {
        eff[f.key()] = e;
        changed = true;
      }
    }
  }
  return eff;
}

inline Effect effect_of(const FunctionDef& f, const Program& p) {
  Program q = p;
  q.put(f);
  return effects_of(q).at(f.key());
}

/// Effect an operation is expected to carry at a call site.
inline Effect call_effect(const Program& p, const std::map<std::string, Effect>& eff,
                          const Operation& op) {
  if (!op.is_user()) return builtin_effect(op);
  if (op.mode.classicalOnly) return Effect::Pure;
  CalleeRef c = resolve_callee(p, op);
  if (!c.def) throw UnfabError("UnresolvedCallee", "call to unknown function '" + op.key() + "'");
  auto it = eff.find(c.def->key());
  return it == eff.end() ? Effect::Pure : it->second;
}

inline Signature call_signature(const Program& p, const std::map<std::string, Effect>& eff,
                                const Operation& op) {
  if (!op.is_user()) return builtin_signature(op);
  CalleeRef c = resolve_callee(p, op);
  if (!c.def) throw UnfabError("UnresolvedCallee", "call to unknown function '" + op.key() + "'");
  Effect e = call_effect(p, eff, op);
  if (!c.exact) return user_signature(*c.def, op.mode, e);
  Mode none;
  none.classicalOnly = op.mode.classicalOnly;
  Signature s = user_signature(*c.def, none, e);
  s.garbageOut = op.mode.produces_garbage();
  s.garbageIn = op.mode.consumes_garbage();
  return s;
}

/// Call targets resolve and operand lists match the callee shape.
inline Diagnostics check_signatures(const FunctionDef& f, const Program& p,
                                    const std::map<std::string, Effect>& eff) {
  using verify_detail::diag;
  Diagnostics out;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i) {
    const Statement& s = f.body[i];
    if (s.op.is_user() && !resolve_callee(p, s.op).def) {
      out.push_back(diag(f, i, "UnresolvedCallee", "call to unknown function '" + s.op.key() + "'"));
      continue;
    }
    if (s.op.is(Builtin::Calc)) continue;
    Signature sig = call_signature(p, eff, s.op);
    auto bad = [&](const std::string& m) {
      out.push_back(diag(f, i, "ArityMismatch", op_name(s.op) + ": " + m));
    };
    // bracket operands: classical atoms first, then quantum
    int nClassical = 0, nQuantum = 0;
    bool order = true;
    for (const auto& a : s.conserved) {
      bool cl = a.isConst || is_classical(a.var);
      if (cl) { ++nClassical; if (nQuantum) order = false; } else { ++nQuantum; }
    }
    if (s.op.is(Builtin::Select)) {
      if (s.conserved.size() != 1 || (s.conserved[0].isConst))
        bad("expects exactly one control variable");
    } else if (!s.op.mode.classicalOnly || s.op.is_user()) {
      if (!order) bad("classical operands must precede quantum operands");
      if (sig.classicalIn >= 0 && nClassical != sig.classicalIn)
        bad("expects " + std::to_string(sig.classicalIn) + " classical operands, got " + std::to_string(nClassical));
      if (nQuantum != sig.conservedQ)
        bad("expects " + std::to_string(sig.conservedQ) + " conserved operands, got " + std::to_string(nQuantum));
    }
    int consumed = static_cast<int>(s.consumed.size());
    if (sig.garbageIn) {
      if (s.consumed.empty() || !is_garbage(s.consumed.back())) bad("expects a trailing garbage operand");
      else --consumed;
    }
    if (sig.consumed >= 0 && consumed != sig.consumed)
      bad("expects " + std::to_string(sig.consumed) + " consumed operands, got " + std::to_string(consumed));
    if (sig.consumed < 0 && consumed < 1) bad("expects at least one consumed operand");
    int produced = static_cast<int>(s.producedQuantum.size());
    if (sig.garbageOut) {
      if (s.producedQuantum.empty() || !is_garbage(s.producedQuantum.back())) bad("expects a trailing garbage result");
      else --produced;
    }
    if (produced != sig.producedQ)
      bad("expects " + std::to_string(sig.producedQ) + " quantum results, got " + std::to_string(produced));
    int pc = static_cast<int>(s.producedClassical.size());
    if (pc != sig.producedC && pc != 0)
      bad("expects " + std::to_string(sig.producedC) + " classical results, got " + std::to_string(pc));
    for (std::size_t k = 0; k < s.consumed.size(); ++k) {
      bool last = k + 1 == s.consumed.size();
      if (is_garbage(s.consumed[k]) && !(last && sig.garbageIn) && !s.op.is(Builtin::Dispose))
        out.push_back(diag(f, i, "KindMismatch", "garbage '" + s.consumed[k] + "' in a non-garbage position", s.consumed[k]));
    }
    for (std::size_t k = 0; k < s.producedQuantum.size(); ++k) {
      bool last = k + 1 == s.producedQuantum.size();
      if (is_garbage(s.producedQuantum[k]) && !(last && sig.garbageOut) && !s.op.is(Builtin::Dispose))
        out.push_back(diag(f, i, "KindMismatch", "garbage '" + s.producedQuantum[k] + "' in a non-garbage position", s.producedQuantum[k]));
    }
  }
  return out;
}

/// Statement annotations match operation effects; controlled statements do
/// not measure; the declared function effect bounds its body.
inline Diagnostics check_effects(const FunctionDef& f, const Program& p,
                                 const std::map<std::string, Effect>& eff) {
  using verify_detail::diag;
  Diagnostics out;
  Effect maxE = Effect::Pure;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i) {
    const Statement& s = f.body[i];
    if (s.op.is_user() && !resolve_callee(p, s.op).def) continue;
    Effect expect = call_effect(p, eff, s.op);
    maxE = max_effect(maxE, expect);
    if (s.effect != expect) {
      out.push_back(diag(f, i, "EffectMismatch",
                         "annotation :=" + std::string(1, effect_char(s.effect)) + " but '" +
                             op_name(s.op) + "' has effect " + effect_char(expect)));
    }
    if (!s.condition.empty() && expect == Effect::Measure)
      out.push_back(diag(f, i, "ControlledMeasure", "measuring statements cannot be controlled"));
  }
  if (f.declaredEffect && *f.declaredEffect < maxE)
    out.push_back(diag(f, -1, "EffectMismatch",
                       std::string("declared effect ") + effect_char(*f.declaredEffect) +
                           " is weaker than the body's effect " + effect_char(maxE)));
  return out;
}

// ---------------------------------------------------------------------------
// Conditions

struct DefSite {
  int stmt = -1;  // -1: parameter
  int index = 0;  // position in the produced list
};

inline std::map<VarId, DefSite> producer_map(const FunctionDef& f) {
  std::map<VarId, DefSite> m;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i) {
    const auto outs = f.body[i].produced();
    for (int k = 0; k < static_cast<int>(outs.size()); ++k) m[outs[k]] = {i, k};
  }
  return m;
}

inline std::map<VarId, int> consumer_map(const FunctionDef& f) {
  std::map<VarId, int> m;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i)
    for (const auto& v : f.body[i].consumed) m[v] = i;
  return m;
}

/// The branch literal a select/distribute attaches to operand `k` of its
/// branch side (0: negated control, 1: control). Garbage operands sit
/// outside the branches.
inline std::optional<Literal> branch_literal(const Statement& s, int k) {
  if (!s.op.is(Builtin::Select) || s.conserved.empty() || s.conserved[0].isConst) return std::nullopt;
  if (k < 0 || k > 1) return std::nullopt;
  return Literal{s.conserved[0].var, k == 0};
}

/// Condition under which a variable exists: its producer's clause, plus the
/// branch literal when produced by distribute.
inline Condition var_context(const FunctionDef& f, const std::map<VarId, DefSite>& prod, const VarId& v) {
  auto it = prod.find(v);
  if (it == prod.end() || it->second.stmt < 0) return {};
  const Statement& s = f.body[it->second.stmt];
  Condition c = s.condition;
  if (s.op.is(Builtin::Select) && s.op.mode.backwards()) {
    int k = it->second.index - static_cast<int>(s.producedClassical.size());
    if (auto l = branch_literal(s, k)) c = conjoin(c, {*l});
  }
  return c;
}

inline Diagnostics check_conditions(const FunctionDef& f) {
  using verify_detail::diag;
  Diagnostics out;
  auto prod = producer_map(f);
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i) {
    const Statement& s = f.body[i];
    const bool merging = s.op.is(Builtin::Select) && !s.op.mode.backwards();
    for (int k = 0; k < static_cast<int>(s.consumed.size()); ++k) {
      const VarId& v = s.consumed[k];
      Condition want = s.condition;
      if (merging) if (auto l = branch_literal(s, k)) want = conjoin(want, {*l});
      Condition have = var_context(f, prod, v);
      if (have != want)
        out.push_back(diag(f, i, "ConditionMismatch",
                           "'" + v + "' exists under [" + condition_str(have) +
                               "] but is consumed under [" + condition_str(want) + "]", v));
    }
    for (const auto& v : s.conserved_uses()) {
      Condition have = var_context(f, prod, v);
      if (!implies(s.condition, have))
        out.push_back(diag(f, i, "ConditionMismatch",
                           "'" + v + "' exists under [" + condition_str(have) +
                               "] which the clause [" + condition_str(s.condition) + "] does not imply", v));
    }
  }
  for (const auto& v : f.returns) {
    if (v == kBin) continue;
    Condition have = var_context(f, prod, v);
    if (!have.empty())
      out.push_back(diag(f, -1, "ConditionMismatch",
                         "returned variable '" + v + "' only exists under [" + condition_str(have) + "]", v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forgettability

struct ForgettableWitness {
  VarId var;
  int producer = -1;
  std::vector<VarId> dependencies;
  std::vector<std::pair<VarId, int>> chain;
};

struct ForgetFailure {
  std::string reason;  // NoProducer, QuantumProducer, ProducerAfterPoint, ConditionNotImplied
  VarId var;           // the variable where the recursion failed
  int stmt = -1;
  std::string message;
};

using ForgetResult = std::variant<ForgettableWitness, ForgetFailure>;

/// Variables in scope immediately before statement `point`.
inline std::set<VarId> scope_before(const FunctionDef& f, int point) {
  std::set<VarId> s;
  for (const auto& p : f.bracketParams) s.insert(p.name);
  for (const auto& p : f.consumedParams) s.insert(p.name);
  for (int i = 0; i < point && i < static_cast<int>(f.body.size()); ++i) {
    for (const auto& v : f.body[i].consumed) s.erase(v);
    for (const auto& v : f.body[i].produced()) s.insert(v);
  }
  return s;
}

/// Quantum dependencies of a statement: conserved and consumed operands and
/// quantum condition literals.
inline std::vector<VarId> quantum_dependencies(const Statement& s) {
  std::vector<VarId> r;
  for (const auto& v : s.quantum_conserved()) r.push_back(v);
  for (const auto& v : s.consumed) if (is_quantum(v)) r.push_back(v);
  for (const auto& l : s.condition) if (is_quantum(l.var)) r.push_back(l.var);
  std::vector<VarId> u;
  for (const auto& v : r) if (std::find(u.begin(), u.end(), v) == u.end()) u.push_back(v);
  return u;
}

inline ForgetResult forgettable_at(const FunctionDef& f, const VarId& x, int point) {
  const std::set<VarId> scope = scope_before(f, point);
  const auto prod = producer_map(f);
  const Condition& at = f.body.at(point).condition;
  std::map<VarId, ForgetResult> memo;
  std::function<ForgetResult(const VarId&)> go = [&](const VarId& v) -> ForgetResult {
    if (auto it = memo.find(v); it != memo.end()) return it->second;
    auto fail = [&](std::string reason, int stmt, std::string msg) -> ForgetResult {
      ForgetFailure ff{std::move(reason), v, stmt, std::move(msg)};
      memo[v] = ff;
      return ff;
    };
    auto it = prod.find(v);
    if (it == prod.end()) {
      bool isParam = false;
      for (const auto& p : f.consumedParams) isParam |= p.name == v;
      return fail("NoProducer", -1,
                  "'" + v + "' has no producing statement" + (isParam ? " (it is a consumed parameter)" : ""));
    }
    const int ps = it->second.stmt;
    const Statement& S = f.body[ps];
    if (ps >= point)
      return fail("ProducerAfterPoint", ps, "'" + v + "' is produced after the forget point");
    if (S.effect >= Effect::Quantum)
      return fail("QuantumProducer", ps,
                  "'" + v + "' is produced by `" + print_statement(S) + "`, which has a quantum effect");
    if (!implies(at, S.condition))
      return fail("ConditionNotImplied", ps,
                  "the producer of '" + v + "' runs under [" + condition_str(S.condition) +
                      "], not implied by [" + condition_str(at) + "]");
    ForgettableWitness w;
    w.var = v;
    w.producer = ps;
    w.chain.push_back({v, ps});
    memo[v] = w;  // provisional entry; SSA makes the dependency graph acyclic
    for (const auto& d : quantum_dependencies(S)) {
      w.dependencies.push_back(d);
      if (scope.count(d)) continue;
      ForgetResult r = go(d);
      if (auto* ff = std::get_if<ForgetFailure>(&r)) {
        memo[v] = *ff;
        return *ff;
      }
      for (const auto& c : std::get<ForgettableWitness>(r).chain)
        if (std::find(w.chain.begin(), w.chain.end(), c) == w.chain.end()) w.chain.push_back(c);
    }
    memo[v] = w;
    return w;
  };
  return go(x);
}

inline Diagnostics check_well_forgotten(const FunctionDef& f) {
  Diagnostics out;
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i) {
    const Statement& s = f.body[i];
    if (!s.op.is(Builtin::Forget)) continue;
    for (const auto& x : s.consumed) {
      ForgetResult r = forgettable_at(f, x, i);
      if (auto* ff = std::get_if<ForgetFailure>(&r)) {
        Diagnostic d = verify_detail::diag(f, i, "NotForgettable", "'" + x + "' is not forgettable: " + ff->message, x);
        d.reason = ff->reason;
        out.push_back(d);
      }
    }
  }
  return out;
}

/// All checks for one function. Later checks are skipped when the structure
/// is broken.
inline Diagnostics verify_function(const FunctionDef& f, const Program& p,
                                   const std::map<std::string, Effect>& eff) {
  Diagnostics out = structural_check(f);
  if (!out.empty()) return out;
  auto add = [&](Diagnostics d) { out.insert(out.end(), d.begin(), d.end()); };
  add(check_signatures(f, p, eff));
  add(check_effects(f, p, eff));
  if (!out.empty()) return out;
  add(check_conditions(f));
  if (!out.empty()) return out;
  add(check_well_forgotten(f));
  return out;
}

inline Diagnostics verify_program(const Program& p) {
  Diagnostics out;
  std::map<std::string, Effect> eff;
  try {
    eff = effects_of(p);
  } catch (const UnfabError& e) {
    out.push_back(e.diagnostic());
    return out;
  }
  for (const auto& f : p.functions) {
    Diagnostics d = verify_function(f, p, eff);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

}  // namespace unfab
