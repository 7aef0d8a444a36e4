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

// Derived-function cache and the source-to-explicit pipeline.

#pragma once

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "unfab/adjoint.hpp"
#include "unfab/garbage.hpp"
#include "unfab/opt.hpp"
#include "unfab/text.hpp"
#include "unfab/uncomp.hpp"
#include "unfab/verify.hpp"

namespace unfab {

struct PipelineOptions {
  // Naive mode: uncomputation uses plain adjoint calls, never garbage mode.
  bool naive = false;
  bool simplify = true;
};

/// Builds derived variants of source functions on demand and caches them by
/// key. All variants come from the source program; nothing is re-parsed.
/// References returned by get() live as long as the Deriver.
class Deriver {
 public:
  Deriver(const Program& src, PipelineOptions opts = {}) : src_(src), opts_(opts), eff_(effects_of(src)) {}

  const FunctionDef& get(const std::string& base, const Mode& m) {
    const std::string key = base + m.suffix();
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (building_.count(key)) throw InternalError("derivation of '" + key + "' depends on itself");
    building_.insert(key);
    FunctionDef f = derive(base, m);
    building_.erase(key);
    UNFAB_ASSERT(f.key() == key, "derived '" + f.key() + "' for key '" + key + "'");
    return cache_.emplace(key, std::move(f)).first->second;
  }
  const FunctionDef& get(const std::string& key) {
    auto [b, m] = split_key(key);
    return get(b, m);
  }

  Effect effect(const std::string& base) const {
    auto it = eff_.find(base);
    if (it == eff_.end()) throw UnfabError("UnresolvedCallee", "no function named '" + base + "'");
    return it->second;
  }

  /// Entry plus every variant reachable from it, in discovery order.
  Program materialize(const std::string& entryKey) {
    Program out;
    std::deque<std::string> work{entryKey};
    std::set<std::string> seen{entryKey};
    while (!work.empty()) {
      const std::string k = work.front();
      work.pop_front();
      const FunctionDef& f = get(k);
      out.put(f);
      for (const auto& s : f.body) {
        if (!s.op.is_user()) continue;
        const std::string ck = s.op.key();
        if (seen.insert(ck).second) work.push_back(ck);
      }
    }
    return out;
  }

 private:
  const FunctionDef& source(const std::string& base) const { return src_.at(base); }

  FunctionDef finish(FunctionDef f) const {
    if (opts_.simplify) f = simplify(f).fn;
    // Adjoints compute classical values first; doing the same here makes
    // adjoint an exact involution on pipeline output.
    return hoist_classical(f);
  }

  FunctionDef derive(const std::string& base, const Mode& m) {
    const Effect e = effect(base);
    if (m.classicalOnly) {
      FunctionDef f = synthesize_classical(source(base), e);
      f.mode = m;
      return f;
    }
    if (m.garbage) {
      if (opts_.naive) throw InternalError("garbage mode requested in naive mode: " + base + m.suffix());
      if (m.gAdjoint) {
        Mode inner = m;
        inner.gAdjoint = false;
        return synthesize_adjoint(get(base, inner), e);
      }
      Mode inner;
      inner.adjoint = m.adjoint;
      EraseResult r = erase_uncomputation(get(base, inner), e);
      if (!r.diagnostics.empty())
        throw InternalError("erase of '" + base + m.suffix() + "': " + r.diagnostics.front().message);
      FunctionDef g = finish(cancel_dup_pairs(r.fn));
      renumber_garbage(g);
      return g;
    }
    if (m.adjoint) return synthesize_adjoint(get(base, Mode{}), e);
    SynthOptions so;
    so.connectGarbage = !opts_.naive;
    return finish(cancel_dup_pairs(synthesize_uncomputation(source(base), so)));
  }

  Program src_;
  PipelineOptions opts_;
  std::map<std::string, Effect> eff_;
  // Node-based so references handed out by get() stay valid.
  std::map<std::string, FunctionDef> cache_;
  std::set<std::string> building_;
};

/// Convenience: materialized explicit program for `entryKey`.
inline Program run_pipeline(const Program& src, const std::string& entryKey, PipelineOptions opts = {}) {
  Deriver d(src, opts);
  return d.materialize(entryKey);
}

// ---------------------------------------------------------------------------
// Source census

/// Dynamic count of user calls (any mode) and forgets executed by the source
/// program, where each call runs the source body of its base. Conditions on
/// known classical values are honoured; quantum conditions count as taken.
class SourceCensus {
 public:
  SourceCensus(const Program& p, std::int64_t fuel = 1000000) : p_(p), fuel_(fuel) {}

  std::map<std::string, std::int64_t> run(const std::string& base, const std::map<std::string, std::int64_t>& args) {
    std::map<VarId, std::int64_t> env;
    const FunctionDef& f = p_.at(base);
    for (const auto& v : f.classical_in()) {
      auto it = args.find(v.substr(1));
      if (it == args.end()) it = args.find(v);
      if (it == args.end()) throw UnfabError("UnresolvedClassical", "classical parameter '" + v + "' needs a value");
      env[v] = it->second;
    }
    counts_.clear();
    exec(f, env);
    return counts_;
  }

  static std::int64_t total(const std::map<std::string, std::int64_t>& c) {
    std::int64_t t = 0;
    for (const auto& [k, v] : c) t += v;
    return t;
  }

 private:
  void exec(const FunctionDef& f, std::map<VarId, std::int64_t>& env) {
    auto lk = [&](const VarId& v) -> std::optional<std::int64_t> {
      auto it = env.find(v);
      if (it == env.end()) return std::nullopt;
      return it->second;
    };
    for (const auto& s : f.body) {
      bool dead = false;
      for (const auto& l : s.condition)
        if (is_classical(l.var))
          if (auto v = lk(l.var); v && (*v != 0) == l.negated) dead = true;
      if (dead) continue;
      if (s.op.is(Builtin::Calc)) {
        if (auto v = eval_expr(s.expr, lk)) env[s.producedClassical[0]] = *v;
        continue;
      }
      if (s.op.is(Builtin::Forget)) {
        ++counts_["forget"];
        continue;
      }
      if (!s.op.is_user()) continue;
      if (--fuel_ < 0) throw UnfabError("FuelExhausted", "source census exceeded its fuel bound", s.span);
      ++counts_[op_name(s.op)];
      const FunctionDef& g = p_.at(s.op.target);
      std::map<VarId, std::int64_t> inner;
      std::size_t k = 0;
      for (const auto& prm : g.bracketParams) {
        if (k >= s.conserved.size()) break;
        const Atom& a = s.conserved[k++];
        if (!is_classical(prm.name)) continue;
        if (a.isConst) inner[prm.name] = a.value;
        else if (auto v = lk(a.var)) inner[prm.name] = *v;
        else throw UnfabError("UnresolvedClassical", "'" + a.var + "' is not known", s.span);
      }
      exec(g, inner);
    }
  }

  const Program& p_;
  std::int64_t fuel_;
  std::map<std::string, std::int64_t> counts_;
};

}  // namespace unfab
