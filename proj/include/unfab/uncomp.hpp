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

// Uncomputation synthesis: replaces every forget with explicit inverse
// statements, extending lifetimes with dup/undup where needed.

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "unfab/garbage.hpp"
#include "unfab/ir.hpp"
#include "unfab/verify.hpp"

namespace unfab {

struct SynthState {
  std::set<VarId> alive;
  std::set<int> undone;
  std::set<VarId> extended;
  std::vector<std::pair<int, int>> pairTags;  // (compute id, uncompute id)
};

struct SynthOptions {
  bool connectGarbage = true;  // false: naive mode, plain inverse calls only
};

struct SynthResult {
  FunctionDef fn;
  SynthState state;
};

class UncompSynth {
 public:
  UncompSynth(const FunctionDef& f, SynthOptions opts) : f_(f), opts_(opts) {
    used_ = f_.all_vars();
    for (const auto& p : f_.bracketParams) if (!is_classical(p.name)) params_.insert(p.name);
    for (const auto& p : f_.consumedParams) params_.insert(p.name);
  }

  SynthResult run() {
    for (const auto& p : f_.bracketParams) if (!is_classical(p.name)) st_.alive.insert(p.name);
    for (const auto& v : f_.returns) if (!is_classical(v)) st_.alive.insert(v);
    std::vector<int> ids;
    for (const auto& s : f_.body) ids.push_back(s.id);
    std::reverse(ids.begin(), ids.end());
    for (int id : ids) {
      const int i = f_.index_of(id);
      if (i < 0) continue;
      if (f_.body[i].op.is(Builtin::Forget)) {
        const std::vector<VarId> xs = f_.body[i].consumed;
        for (const auto& x : xs) ensure_uncomputed(id, x);
        f_.body.erase(f_.body.begin() + f_.index_of(id));
        continue;
      }
      Statement& S0 = f_.body[i];
      const std::vector<VarId> before = S0.consumed;
      for (std::size_t k = 0; k < before.size(); ++k) {
        const VarId x = before[k];
        if (!st_.extended.count(x)) continue;
        const int si = f_.index_of(id);
        Condition c = f_.body[si].condition;
        const Statement& S = f_.body[si];
        if (S.op.is(Builtin::Select) && !S.op.mode.backwards())
          if (auto l = branch_literal(S, static_cast<int>(k))) c = conjoin(c, {*l});
        VarId x2 = fresh_prime(x, used_);
        insert_at(si, make_dup(x2, x, c), f_.body[si].span);
        Statement& Sm = f_.body[f_.index_of(id)];
        Sm.consumed[k] = x2;
      }
      const Statement& S = f_.body[f_.index_of(id)];
      for (const auto& v : S.produced()) st_.alive.erase(v);
      for (const auto& v : S.consumed) if (!is_classical(v)) st_.alive.insert(v);
      for (const auto& v : before) if (!is_classical(v)) st_.alive.insert(v);
    }
    return {f_, st_};
  }

  /// Makes sure x is recomputable right after S and uncomputed later.
  void ensure_uncomputed(int sId, const VarId& x) {
    if (params_.count(x))
      throw InternalError("assertion failed: cannot uncompute parameter '" + x + "' of " + f_.key());
    const int ci = producer(x);
    if (ci < 0) throw InternalError("assertion failed: '" + x + "' has no producer in " + f_.key());
    const Statement& C = f_.body[ci];
    if (C.effect >= Effect::Quantum)
      throw InternalError("assertion failed: producer of '" + x + "' has effect " +
                          std::string(1, effect_char(C.effect)) + " in " + f_.key());
    if (st_.undone.count(C.id)) return;
    st_.undone.insert(C.id);
    undo_statement(sId, C.id);
  }

  void undo_statement(int sId, int cId) {
    {
      const Statement& C = f_.body[f_.index_of(cId)];
      std::vector<VarId> need;
      for (const auto& v : C.quantum_conserved()) if (!st_.alive.count(v)) need.push_back(v);
      for (const auto& l : C.condition)
        if (is_quantum(l.var) && !st_.alive.count(l.var)) need.push_back(l.var);
      for (const auto& v : C.consumed) if (is_quantum(v)) need.push_back(v);
      std::vector<VarId> uniq;
      for (const auto& v : need) if (std::find(uniq.begin(), uniq.end(), v) == uniq.end()) uniq.push_back(v);
      for (const auto& v : uniq) ensure_uncomputed(sId, v);
    }
    const Statement C = f_.body[f_.index_of(cId)];
    Statement U;
    U.op = C.op.dagger();
    U.conserved = C.conserved;
    U.condition = C.condition;
    U.effect = Effect::Pure;
    for (const auto& v : C.producedQuantum) U.consumed.push_back(v);
    std::vector<VarId> xs, xps;
    for (const auto& v : C.consumed) {
      VarId v2 = fresh_prime(v, used_);
      xs.push_back(v);
      xps.push_back(v2);
      U.producedQuantum.push_back(v2);
    }
    const int tag = static_cast<int>(st_.pairTags.size());
    U.pairTag = tag;
    const int uId = insert_at(f_.index_of(sId) + 1, U, C.span);
    f_.body[f_.index_of(cId)].pairTag = tag;
    st_.pairTags.push_back({cId, uId});
    if (opts_.connectGarbage) connect_garbage(f_, cId, uId, used_);
    for (std::size_t k = 0; k < xs.size(); ++k)
      insert_at(f_.index_of(uId) + 1, make_undup(xs[k], xps[k], U.condition), C.span);
    for (const auto& y : C.producedQuantum) {
      if (is_garbage(y) || !st_.alive.count(y)) continue;
      VarId y2 = fresh_prime(y, used_);
      const int dId = insert_at(f_.index_of(uId), make_dup(y2, y, U.condition), C.span);
      const int from = f_.index_of(sId) + 1;
      auto ren = [&](const VarId& v) { return v == y ? y2 : v; };
      for (int k = from; k < static_cast<int>(f_.body.size()); ++k) {
        Statement& s = f_.body[k];
        if (s.id == dId || s.id == uId) continue;
        s.rename_uses(ren);
      }
      for (auto& r : f_.returns) r = ren(r);
    }
    for (const auto& y : C.producedQuantum)
      if (!is_garbage(y) && !st_.alive.count(y)) st_.extended.insert(y);
  }

 private:
  int producer(const VarId& x) const {
    for (int i = 0; i < static_cast<int>(f_.body.size()); ++i) {
      const auto& p = f_.body[i].producedQuantum;
      if (std::find(p.begin(), p.end(), x) != p.end()) return i;
    }
    return -1;
  }
  int insert_at(int pos, Statement s, const SourceSpan& span) {
    s.id = f_.fresh_id();
    s.span = span;
    s.effect = Effect::Pure;
    f_.body.insert(f_.body.begin() + pos, s);
    return s.id;
  }

  FunctionDef f_;
  SynthOptions opts_;
  SynthState st_;
  std::set<VarId> used_;
  std::set<VarId> params_;
};

inline SynthResult synthesize_uncomputation_state(const FunctionDef& f, SynthOptions opts = {}) {
  return UncompSynth(f, opts).run();
}

inline FunctionDef synthesize_uncomputation(const FunctionDef& f, SynthOptions opts = {}) {
  return UncompSynth(f, opts).run().fn;
}

// ---------------------------------------------------------------------------
// dup/undup cancellation

namespace uncomp_detail {

inline bool is_fwd_dup(const Statement& s) { return s.op.is(Builtin::Dup) && !s.op.mode.backwards(); }
inline bool is_undup(const Statement& s) { return s.op.is(Builtin::Dup) && s.op.mode.backwards(); }

/// Follows dup chains back to the variable whose basis value is copied.
inline VarId dup_root(const FunctionDef& f, VarId v) {
  for (int guard = 0; guard < 1000; ++guard) {
    const Statement* p = nullptr;
    for (const auto& s : f.body) {
      if (!s.producedQuantum.empty() && s.producedQuantum[0] == v) { p = &s; break; }
    }
    if (!p || !is_fwd_dup(*p) || p->conserved.empty() || p->conserved[0].isConst) return v;
    v = p->conserved[0].var;
  }
  return v;
}

/// One step up the dup chain; returns v when it is not a dup result.
inline VarId dup_root_step(const FunctionDef& f, const VarId& v) {
  for (const auto& s : f.body)
    if (!s.producedQuantum.empty() && s.producedQuantum[0] == v) {
      if (is_fwd_dup(s) && !s.conserved.empty() && !s.conserved[0].isConst) return s.conserved[0].var;
      return v;
    }
  return v;
}

inline int consumer_of(const FunctionDef& f, const VarId& v) {
  for (int i = 0; i < static_cast<int>(f.body.size()); ++i)
    for (const auto& c : f.body[i].consumed) if (c == v) return i;
  return -1;
}

/// One cancellation step; returns true if something was removed.
inline bool cancel_one(FunctionDef& f) {
  for (int di = 0; di < static_cast<int>(f.body.size()); ++di) {
    const Statement& D = f.body[di];
    if (!is_fwd_dup(D) || D.conserved.empty() || D.conserved[0].isConst) continue;
    const VarId t = D.producedQuantum[0];
    const VarId s = D.conserved[0].var;
    const int ui = consumer_of(f, t);
    if (ui < 0) continue;
    const Statement& U = f.body[ui];
    if (!is_undup(U) || U.conserved.empty() || U.conserved[0].isConst) continue;
    if (U.consumed.empty() || U.consumed[0] != t) continue;
    if (U.condition != D.condition) continue;
    // garbage linking: dup^G pairs with its own dup^G^adj only
    const bool dG = D.produces_garbage();
    int disposeIdx = -1;
    if (dG) {
      if (!U.op.mode.consumes_garbage() || U.consumed.size() < 2 ||
          U.consumed.back() != D.producedQuantum.back())
        continue;
    } else if (U.op.mode.consumes_garbage()) {
      continue;
    } else if (U.produces_garbage()) {
      disposeIdx = consumer_of(f, U.producedQuantum.back());
      if (disposeIdx < 0 || !f.body[disposeIdx].op.is(Builtin::Dispose)) continue;
    }
    if (dup_root(f, s) != dup_root(f, U.conserved[0].var)) continue;
    // Other uses of t are redirected to a copy of the same value that is
    // still alive at U: s itself or a variable further up its dup chain.
    bool otherUses = false;
    for (int k = di + 1; k < ui; ++k)
      for (const auto& v : f.body[k].conserved_uses()) otherUses |= v == t;
    VarId target = s;
    if (otherUses) {
      bool found = false;
      for (VarId cand = s;;) {
        const int sc = consumer_of(f, cand);
        if (sc < 0 || sc > ui) { target = cand; found = true; break; }
        const VarId up = dup_root_step(f, cand);
        if (up == cand) break;
        cand = up;
      }
      if (!found) continue;
    }
    std::vector<int> kill = {di, ui};
    if (disposeIdx >= 0) kill.push_back(disposeIdx);
    auto ren = [&](const VarId& v) { return v == t ? target : v; };
    for (int k = 0; k < static_cast<int>(f.body.size()); ++k)
      if (std::find(kill.begin(), kill.end(), k) == kill.end()) f.body[k].rename_uses(ren);
    std::sort(kill.rbegin(), kill.rend());
    for (int k : kill) f.body.erase(f.body.begin() + k);
    return true;
  }
  return false;
}

}  // namespace uncomp_detail

/// Removes `t := dup[s] ... undup[s'](t)` pairs where s and s' copy the same
/// value, replacing conserved uses of t by s. Iterates to a fixpoint.
inline FunctionDef cancel_dup_pairs(const FunctionDef& f) {
  FunctionDef g = f;
  while (uncomp_detail::cancel_one(g)) {}
  return g;
}

}  // namespace unfab
