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

// Shared fixtures, the random program generator and semantic comparisons
// used by the unit tests and the acceptance binary.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "unfab/bench.hpp"
#include "unfab/lower.hpp"
#include "unfab/pipeline.hpp"
#include "unfab/text.hpp"
#include "unfab/verify.hpp"

#ifndef UNFAB_PROGRAMS_DIR
#define UNFAB_PROGRAMS_DIR "programs"
#endif
#ifndef UNFAB_GOLDEN_DIR
#define UNFAB_GOLDEN_DIR "tests/golden"
#endif

namespace unfab::testing {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnfabError("IoError", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Program load_fixture(const std::string& name) {
  const std::string path = std::string(UNFAB_PROGRAMS_DIR) + "/" + name;
  return parse_program(read_text(path), path);
}

inline FunctionDef load_golden(const std::string& name) {
  const std::string path = std::string(UNFAB_GOLDEN_DIR) + "/" + name;
  return parse_function(read_text(path), path);
}

using Args = std::map<std::string, std::int64_t>;

struct CorpusEntry {
  std::string name;
  Program src;
  std::string entry;
  Args args;
};

/// Resolves plain keys from the source and derived keys through the pipeline,
/// so a source body that calls f^adj can still be run directly.
struct MixedResolver {
  const Program* src;
  std::shared_ptr<Deriver> d;
  const FunctionDef* operator()(const Operation& op) const {
    if (const FunctionDef* f = src->find(op.key())) return f;
    return &d->get(op.key());
  }
};

inline FlattenOptions options_for(const Args& args, std::int64_t fuel = 1000000) {
  FlattenOptions fo;
  fo.classicalArgs = args;
  fo.fuel = fuel;
  return fo;
}

/// Flattens the source itself; forget statements run through forget_oracle.
inline FlatFunction flatten_source(const Program& src, const std::string& entry, const Args& args) {
  FlattenOptions fo = options_for(args);
  fo.resolve = MixedResolver{&src, std::make_shared<Deriver>(src)};
  return inline_unroll(src, entry, fo);
}

inline FlatFunction flatten_pipeline(const Program& src, const std::string& entry, const Args& args,
                                     PipelineOptions po = {}) {
  return inline_unroll(run_pipeline(src, entry, po), entry, options_for(args));
}

// ---------------------------------------------------------------------------
// Random well-forgotten programs

/// Pure random functions over conserved inputs a.., consumed inputs y.. and
/// temporaries. Temporaries that are not returned are forgotten. Candidates
/// are filtered by the verifier, so acceptance is decided by the system under
/// test and soundness is checked separately against the oracle.
class ProgramGen {
 public:
  explicit ProgramGen(std::uint64_t seed) : rng_(seed) {}

  std::string candidate(const std::string& name) {
    vars_.clear();
    lines_.clear();
    temps_.clear();
    ys_.clear();
    const int nc = pick(1, 3), ny = pick(0, 2);
    std::vector<std::string> cons;
    for (int i = 0; i < nc; ++i) cons.push_back(std::string(1, char('a' + i)));
    for (int i = 0; i < ny; ++i) ys_.push_back(std::string(1, char('y' + i)));
    conserved_ = cons;
    for (const auto& v : cons) vars_.insert(v);
    for (const auto& v : ys_) vars_.insert(v);
    const int steps = pick(2, 6);
    for (int s = 0; s < steps; ++s) step();
    // Returns: every consumed input plus a random subset of temporaries.
    std::vector<std::string> rets = ys_, forgets;
    for (const auto& t : temps_) (coin(0.3) ? rets : forgets).push_back(t);
    std::shuffle(forgets.begin(), forgets.end(), rng_);
    for (const auto& t : forgets) lines_.push_back(":=p forget(" + t + ")");
    std::ostringstream os;
    os << name << "[" << join(cons) << "]";
    os << "(" << join(ys0()) << ")";
    os << " :=p {\n";
    for (const auto& l : lines_) os << "  " << l << "\n";
    os << "} > " << join(rets) << "\n";
    return os.str();
  }

  /// First accepted candidate; returns the parsed program.
  Program next(const std::string& name, int maxQubits = 8) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const std::string text = candidate(name);
      Program p = parse_program(text);
      if (!verify_program(p).empty()) continue;
      try {
        LowerResult lr = lower(run_pipeline(p, name), name);
        if (lr.circuit.numQubits > maxQubits) continue;
      } catch (const UnfabError&) {
        continue;
      }
      return p;
    }
    throw InternalError("program generator found no accepted candidate");
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <class V>
  const std::string& any(const V& v) { return v[pick(0, static_cast<int>(v.size()) - 1)]; }

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  }
  std::vector<std::string> ys0() const {
    std::vector<std::string> r;
    for (std::size_t i = 0; i < ys_.size(); ++i) r.push_back(std::string(1, char('y' + i)));
    return r;
  }
  std::string prime(const std::string& v) {
    std::string w = v + "'";
    while (vars_.count(w)) w += "'";
    vars_.insert(w);
    return w;
  }
  std::string fresh_temp() {
    std::string t = "t" + std::to_string(nextTemp_++);
    vars_.insert(t);
    return t;
  }
  std::vector<std::string> readable() const {
    std::vector<std::string> r = conserved_;
    r.insert(r.end(), temps_.begin(), temps_.end());
    r.insert(r.end(), ys_.begin(), ys_.end());
    return r;
  }
  void replace(std::vector<std::string>& v, const std::string& from, const std::string& to) {
    for (auto& x : v) if (x == from) x = to;
  }

  void step() {
    const int kind = pick(0, 5);
    const auto rd = readable();
    if (kind == 0 || temps_.empty()) {
      // t := dup[v]
      const std::string v = any(rd), t = fresh_temp();
      lines_.push_back(t + " :=p dup[" + v + "]");
      temps_.push_back(t);
    } else if (kind == 1) {
      // t' := CX[u](t)
      const std::string t = any(temps_);
      std::vector<std::string> us;
      for (const auto& u : rd) if (u != t) us.push_back(u);
      if (us.empty()) return;
      const std::string u = any(us), t2 = prime(t);
      lines_.push_back(t2 + " :=p CX[" + u + "](" + t + ")");
      replace(temps_, t, t2);
    } else if (kind == 2) {
      const std::string t = any(temps_), t2 = prime(t);
      lines_.push_back(t2 + " :=p X(" + t + ")");
      replace(temps_, t, t2);
    } else if (kind == 3 && !ys_.empty()) {
      // y' := CX[u](y) or X(y)
      const std::string y = any(ys_), y2 = prime(y);
      std::vector<std::string> us;
      for (const auto& u : rd) if (u != y) us.push_back(u);
      if (us.empty() || coin(0.3)) lines_.push_back(y2 + " :=p X(" + y + ")");
      else lines_.push_back(y2 + " :=p CX[" + any(us) + "](" + y + ")");
      replace(ys_, y, y2);
    } else if (kind == 4) {
      // Conditional copy merged by select, with control x.
      const std::string x = any(rd);
      std::vector<std::string> srcs;
      for (const auto& u : rd) if (u != x) srcs.push_back(u);
      if (srcs.empty()) return;
      const std::string r0 = fresh_temp(), r1 = fresh_temp(), r = fresh_temp();
      lines_.push_back(r0 + " :=p dup[" + any(srcs) + "] if !" + x);
      lines_.push_back(r1 + " :=p dup[" + any(srcs) + "] if " + x);
      lines_.push_back(r + " :=p select[" + x + "](" + r0 + ", " + r1 + ")");
      temps_.push_back(r);
    } else {
      // Fresh |0> that is then flipped under a control.
      const std::string t = fresh_temp(), t2 = prime(t);
      lines_.push_back(t + " :=p new0");
      lines_.push_back(t2 + " :=p CX[" + any(rd) + "](" + t + ")");
      temps_.push_back(t2);
    }
  }

  std::mt19937_64 rng_;
  std::set<std::string> vars_;
  std::vector<std::string> lines_, temps_, ys_, conserved_;
  int nextTemp_ = 0;
};

// ---------------------------------------------------------------------------
// Corpus

/// Fixture functions that accept random inputs; teleport measures and is
/// checked on its own.
inline std::vector<CorpusEntry> fixture_corpus() {
  std::vector<CorpusEntry> c;
  auto add = [&](const std::string& file, const std::string& entry, Args args = {}) {
    c.push_back({file + ":" + entry, load_fixture(file), entry, std::move(args)});
  };
  add("maj.uir", "maj");
  add("epr.uir", "EPR");
  add("epr_alloc.uir", "EPR");
  add("dup.uir", "copy");
  add("slow_id.uir", "slow_id");
  add("cx_controlled.uir", "CNOT");
  add("z.uir", "Z");
  add("extract.uir", "extract", {{"n", 3}, {"i", 1}});
  add("extract.uir", "extract", {{"n", 4}, {"i", 0}});
  add("iterate.uir", "f");
  add("iterate.uir", "Iterate", {{"n", 1}});
  add("iterate.uir", "Iterate", {{"n", 3}});
  add("etareti.uir", "Etareti", {{"n", 2}});
  add("etareti.uir", "Etareti", {{"n", 3}});
  return c;
}

inline std::vector<CorpusEntry> random_corpus(int count, std::uint64_t seed) {
  std::vector<CorpusEntry> c;
  ProgramGen gen(seed);
  for (int i = 0; i < count; ++i) {
    const std::string name = "rnd" + std::to_string(i);
    c.push_back({name, gen.next(name), name, {}});
  }
  return c;
}

// ---------------------------------------------------------------------------
// Semantic comparisons

/// Pipeline versus the forget-oracle path on `trials` random input states.
/// Returns an empty string on agreement, otherwise a description.
inline std::string oracle_mismatch(const CorpusEntry& e, int trials, std::uint64_t seed, SimConfig cfg = {}) {
  const FlatFunction src = flatten_source(e.src, e.entry, e.args);
  const FlatFunction pip = flatten_pipeline(e.src, e.entry, e.args);
  if (src.inputs != pip.inputs) return "input wires differ";
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    const StateVector in = StateVector::random(src.inputs, rng);
    const SimOutcome a = simulate(src, in, cfg);
    const SimOutcome b = simulate(pip, in, cfg);
    if (a.state.labels.size() != b.state.labels.size()) return "output wires differ";
    if (!equiv_up_to_phase(a.state, b.state, 1e-9)) return "states differ on trial " + std::to_string(t);
    if (a.classical != b.classical) return "classical outputs differ on trial " + std::to_string(t);
  }
  return {};
}

/// Program with `first` followed by `second` on the outputs of `first`,
/// wrapped as a function named `harness` with the interface of `base`.
inline Program compose_harness(const Program& explicitProgram, const FunctionDef& base, const std::string& first,
                               const std::string& second, bool garbage) {
  Program p = explicitProgram;
  FunctionDef h;
  h.name = "harness";
  h.bracketParams = base.bracketParams;
  h.consumedParams = base.consumedParams;
  std::vector<Atom> brk;
  for (const auto& prm : base.bracketParams) brk.push_back(Atom::of(prm.name));
  std::vector<VarId> ins, mids, outs;
  for (const auto& prm : base.consumedParams) ins.push_back(prm.name);
  for (std::size_t k = 0; k < base.returned_quantum().size(); ++k) mids.push_back("m" + std::to_string(k));
  if (garbage) mids.push_back("%g");
  for (std::size_t k = 0; k < ins.size(); ++k) outs.push_back("o" + std::to_string(k));
  auto [b1, m1] = split_key(first);
  auto [b2, m2] = split_key(second);
  h.add(make_statement(make_call(b1, m1), brk, ins, mids));
  h.add(make_statement(make_call(b2, m2), brk, mids, outs));
  h.returns = outs;
  p.put(h);
  return p;
}

/// Runs `harness` on random inputs and checks it acts as the identity.
inline bool harness_is_identity(const Program& withHarness, const Args& args, int trials, std::uint64_t seed,
                                double tol = 1e-9) {
  const FlatFunction ff = inline_unroll(withHarness, "harness", options_for(args));
  std::mt19937_64 rng(seed);
  const std::size_t nc = ff.conserved.size();
  for (int t = 0; t < trials; ++t) {
    const StateVector in = StateVector::random(ff.inputs, rng);
    SimOutcome out = simulate(ff, in);
    if (out.state.labels.size() != in.labels.size()) return false;
    for (std::size_t k = nc; k < out.state.labels.size(); ++k) out.state.labels[k] = ff.inputs[k];
    if (!equiv_up_to_phase(in, out.state, tol)) return false;
  }
  return true;
}

/// f^adj after f, as the identity on random states.
inline bool adjoint_identity(const CorpusEntry& e, int trials, std::uint64_t seed) {
  Deriver d(e.src);
  auto [base, m] = split_key(e.entry);
  Program ex = d.materialize(e.entry);
  Program adj = d.materialize(base + m.dagger().suffix());
  for (const auto& f : adj.functions) ex.put(f);
  Program h = compose_harness(ex, e.src.at(base), e.entry, base + m.dagger().suffix(), false);
  return harness_is_identity(h, e.args, trials, seed);
}

/// f^G^adj after f^G, as the identity on random states.
inline bool garbage_round_trip(const CorpusEntry& e, int trials, std::uint64_t seed) {
  Deriver d(e.src);
  Program ex = d.materialize(e.entry + "^G");
  for (const auto& f : d.materialize(e.entry + "^G^adj").functions) ex.put(f);
  Program h = compose_harness(ex, e.src.at(e.entry), e.entry + "^G", e.entry + "^G^adj", true);
  return harness_is_identity(h, e.args, trials, seed);
}

/// Basis index of a state that must be a computational basis state.
inline std::optional<std::size_t> basis_index(const StateVector& s, double tol = 1e-12) {
  std::optional<std::size_t> r;
  for (std::size_t i = 0; i < s.amp.size(); ++i) {
    if (std::abs(s.amp[i]) <= tol) continue;
    if (r || std::abs(std::abs(s.amp[i]) - 1) > tol) return std::nullopt;
    r = i;
  }
  return r;
}

/// On every basis input, f^G's non-garbage outputs equal f's outputs.
inline std::string garbage_outputs_mismatch(const CorpusEntry& e) {
  Deriver d(e.src);
  const FlatFunction f = inline_unroll(d.materialize(e.entry), e.entry, options_for(e.args));
  const FlatFunction g = inline_unroll(d.materialize(e.entry + "^G"), e.entry + "^G", options_for(e.args));
  if (f.inputs != g.inputs) return "input wires differ";
  const std::size_t n = f.inputs.size();
  for (std::size_t i = 0; i < (std::size_t{1} << n); ++i) {
    std::string bits;
    for (std::size_t k = 0; k < n; ++k) bits += ((i >> k) & 1) ? '1' : '0';
    const StateVector in = StateVector::basis(f.inputs, bits);
    const SimOutcome a = simulate(f, in), b = simulate(g, in);
    auto ia = basis_index(a.state), ib = basis_index(b.state);
    if (!ia || !ib) return "output is not a basis state for input " + bits;
    for (int w = 0; w < a.state.num_wires(); ++w) {
      const int v = b.state.wire(a.state.labels[w]);
      if (v < 0) return "wire " + a.state.labels[w] + " missing from the garbage variant";
      if (((*ia >> w) & 1) != ((*ib >> v) & 1)) return "output " + a.state.labels[w] + " differs on input " + bits;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Structural equality modulo fresh names

/// True when b is a consistent renaming of a's non-parameter variables.
inline bool alpha_equal(const FunctionDef& a, const FunctionDef& b, std::string* why = nullptr) {
  auto fail = [&](std::string m) {
    if (why) *why = std::move(m);
    return false;
  };
  if (a.name != b.name || a.mode != b.mode) return fail("different keys");
  if (a.bracketParams != b.bracketParams || a.consumedParams != b.consumedParams) return fail("different parameters");
  if (a.body.size() != b.body.size())
    return fail(std::to_string(a.body.size()) + " statements versus " + std::to_string(b.body.size()));
  std::map<VarId, VarId> fwd, bwd;
  for (const auto& p : a.bracketParams) fwd[p.name] = bwd[p.name] = p.name;
  for (const auto& p : a.consumedParams) fwd[p.name] = bwd[p.name] = p.name;
  fwd[kBin] = bwd[kBin] = kBin;
  auto match = [&](const VarId& x, const VarId& y) {
    if (kind_of(x) != kind_of(y)) return false;
    auto i = fwd.find(x);
    auto j = bwd.find(y);
    if (i == fwd.end() && j == bwd.end()) {
      fwd[x] = y;
      bwd[y] = x;
      return true;
    }
    return i != fwd.end() && j != bwd.end() && i->second == y && j->second == x;
  };
  auto match_all = [&](const std::vector<VarId>& xs, const std::vector<VarId>& ys) {
    if (xs.size() != ys.size()) return false;
    for (std::size_t k = 0; k < xs.size(); ++k) if (!match(xs[k], ys[k])) return false;
    return true;
  };
  for (std::size_t i = 0; i < a.body.size(); ++i) {
    const Statement &s = a.body[i], &t = b.body[i];
    const std::string at = "statement " + std::to_string(i) + ": `" + print_statement(s) + "` versus `" +
                           print_statement(t) + "`";
    if (!(s.op == t.op) || s.effect != t.effect || s.conserved.size() != t.conserved.size() ||
        s.condition.size() != t.condition.size())
      return fail(at);
    for (std::size_t k = 0; k < s.conserved.size(); ++k) {
      const Atom &x = s.conserved[k], &y = t.conserved[k];
      if (x.isConst != y.isConst || (x.isConst && x.value != y.value) || (!x.isConst && !match(x.var, y.var)))
        return fail(at);
    }
    if (!match_all(s.consumed, t.consumed)) return fail(at);
    // Conditions are sorted by name, so compare them as sets after mapping.
    std::set<std::pair<VarId, bool>> cs, ct;
    for (const auto& l : s.condition) {
      auto it = fwd.find(l.var);
      if (it == fwd.end()) return fail(at);
      cs.insert({it->second, l.negated});
    }
    for (const auto& l : t.condition) ct.insert({l.var, l.negated});
    if (cs != ct) return fail(at);
    if (!match_all(s.producedClassical, t.producedClassical) || !match_all(s.producedQuantum, t.producedQuantum))
      return fail(at);
  }
  if (!match_all(a.returns, b.returns)) return fail("different returns");
  return true;
}

// ---------------------------------------------------------------------------
// Structural audit of synthesized code

/// Single consumption, conserved-use validity (structural_check) and
/// compute/uncompute bracketing: every garbage value a statement produces is
/// consumed once, later, either by a dispose with the same condition or by
/// the adjoint of its producer with the same condition and conserved operands.
inline std::vector<std::string> audit(const FunctionDef& f) {
  std::vector<std::string> issues;
  for (const auto& d : structural_check(f)) issues.push_back(f.key() + ": " + d.code + " " + d.message);
  for (std::size_t i = 0; i < f.body.size(); ++i) {
    const Statement& s = f.body[i];
    if (s.op.is(Builtin::Forget)) issues.push_back(f.key() + ": forget survives synthesis");
    if (!s.produces_garbage()) continue;
    const VarId g = s.producedQuantum.back();
    if (g == kBin) continue;
    int uses = 0;
    for (std::size_t j = 0; j < f.body.size(); ++j) {
      const Statement& u = f.body[j];
      if (std::find(u.consumed.begin(), u.consumed.end(), g) == u.consumed.end()) continue;
      ++uses;
      if (j <= i) issues.push_back(f.key() + ": " + g + " consumed before it is produced");
      if (u.condition != s.condition) issues.push_back(f.key() + ": " + g + " pair conditions differ");
      // Values popped from a bin pair with whatever consumes them.
      if (u.op.is(Builtin::Dispose) || s.op.is(Builtin::Dispose)) continue;
      if (!(u.op == s.op.dagger())) issues.push_back(f.key() + ": " + g + " consumed by a non-adjoint statement");
      if (u.conserved != s.conserved) issues.push_back(f.key() + ": " + g + " pair conserved operands differ");
    }
    for (const auto& r : f.returns) if (r == g) ++uses;
    if (uses != 1) issues.push_back(f.key() + ": " + g + " has " + std::to_string(uses) + " consumers");
  }
  return issues;
}

inline std::vector<std::string> audit_pipeline(const CorpusEntry& e) {
  std::vector<std::string> issues;
  Program ex = run_pipeline(e.src, e.entry);
  for (const auto& f : ex.functions)
    for (auto& s : audit(f)) issues.push_back(std::move(s));
  return issues;
}

}  // namespace unfab::testing
