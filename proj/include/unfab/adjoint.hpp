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

// Classical projection (f^O) and adjoint synthesis (f^adj).

#pragma once

#include <set>
#include <string>
#include <vector>

#include "unfab/ir.hpp"

namespace unfab {

namespace adjoint_detail {

inline void require_measure_free(const FunctionDef& f, Effect effect, const char* what) {
  if (effect >= Effect::Measure)
    throw UnfabError("MeasureInAdjoint", std::string(what) + " of '" + f.key() + "' is undefined: it measures",
                     f.span);
}

/// Keeps only classical literals of a condition.
inline Condition classical_part(const Condition& c) {
  Condition r;
  for (const auto& l : c) if (is_classical(l.var)) r.push_back(l);
  return r;
}

}  // namespace adjoint_detail

/// A statement's classical computation alone.
inline Statement make_classical(const Statement& s) {
  Statement o;
  o.id = s.id;
  o.span = s.span;
  o.producedClassical = s.producedClassical;
  o.op = s.op;
  o.effect = Effect::Pure;
  o.condition = adjoint_detail::classical_part(s.condition);
  if (s.op.is(Builtin::Calc)) {
    o.expr = s.expr;
    o.conserved = s.conserved;
    return o;
  }
  o.op.mode.classicalOnly = true;
  o.op.mode.garbage = o.op.mode.gAdjoint = false;
  for (const auto& a : s.conserved) if (a.isConst || is_classical(a.var)) o.conserved.push_back(a);
  return o;
}

/// Inverse of one quantum statement; classical results are dropped.
inline Statement make_adjoint(const Statement& s) {
  Statement o;
  o.id = s.id;
  o.span = s.span;
  o.pairTag = s.pairTag;
  o.effect = s.effect;
  o.op = s.op.dagger();
  o.conserved = s.conserved;
  o.condition = s.condition;
  o.consumed = s.producedQuantum;
  o.producedQuantum = s.consumed;
  return o;
}

inline FunctionDef synthesize_classical(const FunctionDef& f, Effect effect) {
  adjoint_detail::require_measure_free(f, effect, "classical projection");
  FunctionDef o;
  o.name = f.name;
  o.mode = f.mode;
  o.mode.adjoint = o.mode.garbage = o.mode.gAdjoint = false;
  o.mode.classicalOnly = true;
  o.span = f.span;
  o.declaredEffect = Effect::Pure;
  for (const auto& p : f.bracketParams) if (is_classical(p.name)) o.bracketParams.push_back(p);
  for (const auto& s : f.body) if (s.has_classical_out()) o.add(make_classical(s));
  o.returns = f.returned_classical();
  return o;
}

namespace adjoint_detail {

inline bool is_pure_classical(const Statement& s) {
  return s.producedQuantum.empty() && s.consumed.empty() && s.quantum_conserved().empty() &&
         (s.op.is(Builtin::Calc) || s.op.mode.classicalOnly);
}

/// Toggles the adjoint marker on an intermediate variable name.
inline VarId toggle(const VarId& v) {
  if (!v.empty() && v.back() == '~') return v.substr(0, v.size() - 1);
  return v + "~";
}

}  // namespace adjoint_detail

inline FunctionDef synthesize_adjoint(const FunctionDef& f, Effect effect) {
  adjoint_detail::require_measure_free(f, effect, "adjoint");
  for (const auto& s : f.body)
    if (s.op.is(Builtin::Forget))
      throw UnfabError("ForgetInAdjoint", "adjoint of '" + f.key() + "' needs uncomputation synthesis first", s.span);
  FunctionDef o;
  o.name = f.name;
  o.mode = f.mode.dagger();
  o.span = f.span;
  o.declaredEffect = f.declaredEffect;
  o.bracketParams = f.bracketParams;
  for (const auto& v : f.returns) {
    if (is_classical(v)) continue;
    Param p{v, std::nullopt};
    if (auto it = f.returnWidths.find(v); it != f.returnWidths.end()) p.width = it->second;
    o.consumedParams.push_back(p);
  }
  for (const auto& v : f.returned_classical()) o.returns.push_back(v);
  for (const auto& p : f.consumedParams) {
    o.returns.push_back(p.name);
    if (p.width) o.returnWidths[p.name] = *p.width;
  }

  std::set<VarId> keep;
  for (const auto& p : f.bracketParams) keep.insert(p.name);
  for (const auto& p : f.consumedParams) keep.insert(p.name);
  for (const auto& v : f.returns) keep.insert(v);
  auto ren = [&](const VarId& v) {
    if (keep.count(v) || is_classical(v) || v == kBin) return v;
    return adjoint_detail::toggle(v);
  };
  for (const auto& s : f.body)
    if (s.has_classical_out()) o.add(make_classical(s));
  for (auto it = f.body.rbegin(); it != f.body.rend(); ++it) {
    if (adjoint_detail::is_pure_classical(*it)) continue;
    Statement a = make_adjoint(*it);
    a.rename_all(ren);
    o.add(std::move(a));
  }
  return o;
}

}  // namespace unfab
