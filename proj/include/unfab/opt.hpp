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

// Constant propagation, classical CSE and dead code elimination.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "unfab/ir.hpp"
#include "unfab/uncomp.hpp"

namespace unfab {

using ClassicalEnv = std::map<VarId, std::int64_t>;

namespace opt_detail {

inline void rename_everywhere(FunctionDef& f, const VarId& from, const VarId& to) {
  auto ren = [&](const VarId& v) { return v == from ? to : v; };
  for (auto& s : f.body) s.rename_uses(ren);
  for (auto& r : f.returns) r = ren(r);
}

inline bool uses_var(const FunctionDef& f, const VarId& v) {
  for (const auto& s : f.body) {
    for (const auto& u : s.conserved_uses()) if (u == v) return true;
    for (const auto& u : s.consumed) if (u == v) return true;
  }
  for (const auto& r : f.returns) if (r == v) return true;
  return false;
}

}  // namespace opt_detail

/// Folds classical expressions and conditions on known classical values.
/// `known` seeds values of classical parameters.
inline FunctionDef constant_propagate(const FunctionDef& f, const ClassicalEnv& known = {}) {
  FunctionDef g = f;
  ClassicalEnv env = known;
  auto lookup = [&](const VarId& v) -> std::optional<std::int64_t> {
    auto it = env.find(v);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  std::vector<Statement> out;
  std::map<VarId, VarId> alias;  // renames from resolved select/distribute
  auto resolve = [&](const VarId& v) {
    VarId r = v;
    for (auto it = alias.find(r); it != alias.end(); it = alias.find(r)) r = it->second;
    return r;
  };
  for (Statement s : g.body) {
    s.rename_uses([&](const VarId& v) { return resolve(v); });
    // conditions
    bool dead = false;
    Condition kept;
    for (const auto& l : s.condition) {
      if (is_classical(l.var)) {
        if (auto v = lookup(l.var)) {
          bool truth = (*v != 0) != l.negated;
          if (!truth) dead = true;
          continue;
        }
      }
      kept.push_back(l);
    }
    if (dead) continue;  // produced values are absent; their consumers are dead as well
    s.condition = normalize(kept);
    if (s.op.is(Builtin::Calc)) {
      if (auto v = eval_expr(s.expr, lookup)) {
        s.expr = Expr::constant(*v);
        env[s.producedClassical[0]] = *v;
      }
    } else if (s.op.is(Builtin::Select) && !s.conserved.empty() && !s.op.mode.garbage) {
      const Atom& c = s.conserved[0];
      std::optional<std::int64_t> v = c.isConst ? std::optional<std::int64_t>(c.value)
                                                : (is_classical(c.var) ? lookup(c.var) : std::nullopt);
      if (v) {
        const int branch = *v != 0 ? 1 : 0;
        if (!s.op.mode.backwards()) {
          alias[s.producedQuantum[0]] = s.consumed[branch];
        } else {
          alias[s.producedQuantum[branch]] = s.consumed[0];
        }
        continue;
      }
    }
    for (auto& a : s.conserved)
      if (!a.isConst && is_classical(a.var))
        if (auto v = lookup(a.var); v && !s.op.is(Builtin::Calc)) a = Atom::lit(*v);
    out.push_back(std::move(s));
  }
  g.body = std::move(out);
  for (auto& r : g.returns) r = resolve(r);
  return g;
}

/// Merges classical statements computing the same value under the same
/// condition. Quantum statements are never merged.
inline FunctionDef common_subexpr_eliminate(const FunctionDef& f) {
  FunctionDef g = f;
  std::vector<Statement> out;
  std::map<VarId, VarId> ren;
  auto r = [&](const VarId& v) {
    auto it = ren.find(v);
    return it == ren.end() ? v : it->second;
  };
  for (Statement s : g.body) {
    s.rename_uses(r);
    const bool classical = s.producedQuantum.empty() && s.consumed.empty() && s.quantum_conserved().empty() &&
                           (s.op.is(Builtin::Calc) || s.op.mode.classicalOnly) && !s.producedClassical.empty();
    if (classical) {
      bool merged = false;
      for (const auto& prev : out) {
        if (prev.op == s.op && prev.conserved == s.conserved && prev.expr == s.expr &&
            prev.condition == s.condition && prev.producedClassical.size() == s.producedClassical.size() &&
            prev.producedQuantum.empty() && prev.consumed.empty()) {
          for (std::size_t k = 0; k < s.producedClassical.size(); ++k)
            ren[s.producedClassical[k]] = prev.producedClassical[k];
          merged = true;
          break;
        }
      }
      if (merged) continue;
    }
    out.push_back(std::move(s));
  }
  g.body = std::move(out);
  for (auto& v : g.returns) v = r(v);
  return g;
}

/// Removes unused classical statements and allocation pairs that do nothing.
inline FunctionDef dead_code_eliminate(const FunctionDef& f) {
  FunctionDef g = f;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = static_cast<int>(g.body.size()) - 1; i >= 0; --i) {
      const Statement& s = g.body[i];
      const bool classical = s.producedQuantum.empty() && s.consumed.empty() &&
                             s.quantum_conserved().empty() &&
                             (s.op.is(Builtin::Calc) || s.op.mode.classicalOnly);
      if (classical) {
        bool used = false;
        for (const auto& v : s.producedClassical) used |= opt_detail::uses_var(g, v);
        if (!used) {
          g.body.erase(g.body.begin() + i);
          changed = true;
        }
        continue;
      }
      // t := new_v ... unnew_v(t) with no use of t in between
      if (s.op.is(Builtin::New) && !s.op.mode.backwards() && !s.op.mode.garbage && s.producedQuantum.size() == 1) {
        const VarId t = s.producedQuantum[0];
        int ci = -1;
        bool otherUse = false;
        for (int k = 0; k < static_cast<int>(g.body.size()); ++k) {
          if (k == i) continue;
          const Statement& u = g.body[k];
          for (const auto& c : u.consumed) if (c == t) ci = k;
          for (const auto& c : u.conserved_uses()) otherUse |= c == t;
        }
        if (ci >= 0 && !otherUse) {
          const Statement& u = g.body[ci];
          if (u.op.is(Builtin::New) && u.op.mode.backwards() && !u.op.mode.garbage && u.op.param == s.op.param &&
              u.condition == s.condition) {
            g.body.erase(g.body.begin() + std::max(i, ci));
            g.body.erase(g.body.begin() + std::min(i, ci));
            changed = true;
            break;
          }
        }
      }
    }
    FunctionDef h = cancel_dup_pairs(g);
    if (h.body.size() != g.body.size()) {
      g = std::move(h);
      changed = true;
    }
  }
  return g;
}

/// Moves classical statements to the front, keeping their order, as far as
/// their inputs allow. Statements that need a measured value stay put.
inline FunctionDef hoist_classical(const FunctionDef& f) {
  std::set<VarId> ready;
  for (const auto& p : f.bracketParams) if (is_classical(p.name)) ready.insert(p.name);
  std::vector<Statement> front, rest;
  for (const auto& s : f.body) {
    const bool classical = s.producedQuantum.empty() && s.consumed.empty() && s.quantum_conserved().empty() &&
                           (s.op.is(Builtin::Calc) || s.op.mode.classicalOnly);
    bool ok = classical;
    if (ok) {
      for (const auto& v : s.conserved_uses()) ok &= !is_classical(v) || ready.count(v) > 0;
      for (const auto& l : s.condition) ok &= ready.count(l.var) > 0;
    }
    if (ok) {
      for (const auto& v : s.producedClassical) ready.insert(v);
      front.push_back(s);
    } else {
      rest.push_back(s);
    }
  }
  FunctionDef g = f;
  g.body = std::move(front);
  g.body.insert(g.body.end(), rest.begin(), rest.end());
  return g;
}

struct SimplifyResult {
  FunctionDef fn;
  int rounds = 0;
  bool converged = true;
};

/// constant-prop, CSE and DCE to a fixpoint, at most `maxRounds` rounds.
inline SimplifyResult simplify(const FunctionDef& f, const ClassicalEnv& known = {}, int maxRounds = 20) {
  SimplifyResult r;
  r.fn = f;
  for (r.rounds = 0; r.rounds < maxRounds; ++r.rounds) {
    FunctionDef g = dead_code_eliminate(common_subexpr_eliminate(constant_propagate(r.fn, known)));
    if (g.same_as(r.fn)) return r;
    r.fn = std::move(g);
  }
  r.converged = false;
  return r;
}

}  // namespace unfab
