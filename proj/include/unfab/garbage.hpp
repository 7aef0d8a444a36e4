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

// Garbage connection, propagation and uncomputation erasure.

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "unfab/ir.hpp"
#include "unfab/text.hpp"

namespace unfab {

inline Statement make_dispose(const VarId& v, const Condition& c) {
  Statement s;
  s.op = make_builtin(Builtin::Dispose);
  s.consumed = {v};
  s.condition = c;
  return s;
}

inline Statement make_dup(const VarId& out, const VarId& src, const Condition& c) {
  Statement s;
  s.op = make_builtin(Builtin::Dup);
  s.conserved = {Atom::of(src)};
  s.producedQuantum = {out};
  s.condition = c;
  return s;
}

inline Statement make_undup(const VarId& src, const VarId& copy, const Condition& c) {
  Statement s = make_dup(VarId{}, src, c);
  s.producedQuantum.clear();
  s.op.mode.adjoint = true;
  s.consumed = {copy};
  return s;
}

/// Links compute statement `cId` and its inverse `uId` through a fresh
/// garbage variable.
inline void connect_garbage(FunctionDef& f, int cId, int uId, std::set<VarId>& used) {
  int ci = f.index_of(cId), ui = f.index_of(uId);
  UNFAB_ASSERT(ci >= 0 && ui >= 0, "connect_garbage: unknown statement");
  Statement& C = f.body[ci];
  Statement& U = f.body[ui];
  if (C.op.mode.garbage || U.op.mode.garbage)
    throw UnfabError("AlreadyGarbage", "statement `" + print_statement(C) + "` is already in garbage mode", C.span);
  if (!(U.op == C.op.dagger()))
    throw UnfabError("NotAdjointPair", "`" + print_statement(U) + "` is not the inverse of `" +
                                           print_statement(C) + "`", U.span);
  C.op.mode = C.op.mode.with_garbage();
  U.op = C.op.dagger();
  VarId g = fresh_garbage(used);
  C.producedQuantum.push_back(g);
  U.consumed.push_back(g);
}

inline void connect_garbage(FunctionDef& f, int cId, int uId) {
  std::set<VarId> used = f.all_vars();
  connect_garbage(f, cId, uId, used);
}

/// Statements with no quantum operands or results are left alone.
inline bool is_classical_statement(const Statement& s) {
  return s.producedQuantum.empty() && s.consumed.empty() && s.quantum_conserved().empty() &&
         (s.op.is(Builtin::Calc) || s.op.mode.classicalOnly);
}

/// Switches `sId` to garbage mode and throws its garbage away right after it.
inline void propagate_garbage(FunctionDef& f, int sId, std::set<VarId>& used) {
  int i = f.index_of(sId);
  UNFAB_ASSERT(i >= 0, "propagate_garbage: unknown statement");
  Statement& S = f.body[i];
  if (S.produces_garbage()) return;
  UNFAB_ASSERT(!S.op.mode.garbage, "propagate_garbage on a garbage-consuming statement");
  S.op.mode = S.op.mode.with_garbage();
  VarId g = fresh_garbage(used);
  S.producedQuantum.push_back(g);
  Statement d = make_dispose(g, S.condition);
  d.id = f.fresh_id();
  d.span = S.span;
  f.body.insert(f.body.begin() + i + 1, d);
}

inline void propagate_garbage(FunctionDef& f, int sId) {
  std::set<VarId> used = f.all_vars();
  propagate_garbage(f, sId, used);
}

/// Renames garbage variables to %g0, %g1, ... in order of first appearance.
inline void renumber_garbage(FunctionDef& f) {
  std::vector<VarId> order;
  std::set<VarId> seen;
  for (const auto& s : f.body) {
    for (const auto& v : s.produced())
      if (is_garbage(v) && v != kBin && seen.insert(v).second) order.push_back(v);
    for (const auto& v : s.consumed)
      if (is_garbage(v) && v != kBin && seen.insert(v).second) order.push_back(v);
  }
  for (const auto& p : f.consumedParams)
    if (is_garbage(p.name) && p.name != kBin && seen.insert(p.name).second) order.push_back(p.name);
  std::map<VarId, VarId> ren;
  for (std::size_t k = 0; k < order.size(); ++k) ren[order[k]] = "%g" + std::to_string(k);
  auto f1 = [&](const VarId& v) {
    auto it = ren.find(v);
    return it == ren.end() ? v : it->second;
  };
  for (auto& s : f.body) s.rename_all(f1);
  for (auto& p : f.consumedParams) p.name = f1(p.name);
  for (auto& v : f.returns) v = f1(v);
}

struct EraseResult {
  FunctionDef fn;
  Diagnostics diagnostics;  // pairing mismatches
};

/// Builds the garbage-mode variant f^G: every uncomputation (a statement that
/// consumes garbage) is removed and replaced by dispose; all other calls are
/// switched to garbage mode.
inline EraseResult erase_uncomputation(const FunctionDef& f, Effect effect) {
  if (effect >= Effect::Quantum)
    throw InternalError("assertion failed: erase_uncomputation needs effect < q, '" + f.key() + "' has effect " +
                        std::string(1, effect_char(effect)));
  UNFAB_ASSERT(!f.mode.garbage, "erase_uncomputation of a garbage-mode function");
  EraseResult res;
  FunctionDef& g = res.fn;
  g = f;
  g.mode = f.mode.with_garbage();
  g.returns.push_back(kBin);
  std::set<VarId> used = g.all_vars();
  auto mismatch = [&](const Statement& s, const std::string& m) {
    Diagnostic d;
    d.code = "PairMismatch";
    d.message = m;
    d.function = f.key();
    d.span = s.span;
    res.diagnostics.push_back(d);
  };
  for (std::size_t i = 0; i < g.body.size(); ++i) {
    Statement S = g.body[i];
    if (S.produces_garbage()) {
      const VarId gv = S.producedQuantum.back();
      int ui = -1;
      for (std::size_t k = 0; k < g.body.size(); ++k) {
        const auto& c = g.body[k].consumed;
        if (std::find(c.begin(), c.end(), gv) != c.end()) ui = static_cast<int>(k);
      }
      if (ui < 0 || g.body[ui].op.is(Builtin::Dispose)) {
        // already thrown away, nothing to erase
        continue;
      }
      Statement U = g.body[ui];
      if (S.pairTag >= 0 && U.pairTag >= 0 && S.pairTag != U.pairTag)
        mismatch(U, "garbage links statements with different pair tags");
      std::vector<VarId> sIn, uOut;
      for (const auto& v : S.consumed) if (!is_garbage(v)) sIn.push_back(v);
      for (const auto& v : U.producedQuantum) if (!is_garbage(v)) uOut.push_back(v);
      if (sIn.size() != uOut.size())
        mismatch(U, "uncomputation produces " + std::to_string(uOut.size()) +
                        " values for a computation consuming " + std::to_string(sIn.size()));
      std::size_t n = std::min(sIn.size(), uOut.size());
      int si = static_cast<int>(i);
      for (std::size_t k = 0; k < n; ++k) {
        Statement d = make_dup(uOut[k], sIn[k], S.condition);
        d.id = g.fresh_id();
        d.span = S.span;
        g.body.insert(g.body.begin() + si, d);
        ++si;
        if (ui >= si - 1) ++ui;
      }
      std::vector<Statement> disposes;
      for (const auto& v : U.consumed) {
        if (is_garbage(v)) continue;
        Statement d = make_dispose(v, U.condition);
        d.id = g.fresh_id();
        d.span = U.span;
        disposes.push_back(d);
      }
      g.body.erase(g.body.begin() + ui);
      g.body.insert(g.body.begin() + ui, disposes.begin(), disposes.end());
      si = g.index_of(S.id);
      Statement dg = make_dispose(gv, S.condition);
      dg.id = g.fresh_id();
      dg.span = S.span;
      g.body.insert(g.body.begin() + si + 1, dg);
      i = static_cast<std::size_t>(si);
    } else if (!S.op.is(Builtin::Dispose) && !is_classical_statement(S)) {
      propagate_garbage(g, S.id, used);
    }
  }
  renumber_garbage(g);
  return res;
}

}  // namespace unfab
