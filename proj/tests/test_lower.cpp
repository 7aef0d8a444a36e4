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


#include <gtest/gtest.h>

#include "support.hpp"

using namespace unfab;
using namespace unfab::testing;

namespace {

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const UnfabError& e) {
    return e.diagnostic().code;
  }
  return "";
}

LowerResult lower_entry(const CorpusEntry& e) {
  return lower(run_pipeline(e.src, e.entry), e.entry, options_for(e.args));
}

std::vector<CorpusEntry> corpus() {
  std::vector<CorpusEntry> c = fixture_corpus();
  for (auto& e : random_corpus(15, 12)) c.push_back(std::move(e));
  return c;
}

/// Peak number of distinct live wires in a flat function. Names produced by
/// distribute share the wire of their operand.
int live_peak(const FlatFunction& f) {
  std::map<VarId, int> group;
  int next = 0;
  for (const auto& v : f.inputs) group[v] = next++;
  auto count = [&] {
    std::set<int> g;
    for (const auto& [v, k] : group) g.insert(k);
    return static_cast<int>(g.size());
  };
  int peak = count();
  for (const auto& s : f.fn.body) {
    if (s.op.is(Builtin::Select) && s.op.mode.backwards()) {
      const int g = group.at(s.consumed[0]);
      group.erase(s.consumed[0]);
      for (const auto& v : s.producedQuantum) if (!is_garbage(v)) group[v] = g;
    } else if (s.op.is(Builtin::Select) && !s.op.mode.backwards()) {
      const int g = group.at(s.consumed[0]);
      for (const auto& v : s.consumed) group.erase(v);
      group[s.producedQuantum[0]] = g;
    } else {
      std::vector<int> freed;
      for (const auto& v : s.consumed) {
        if (auto it = group.find(v); it != group.end()) {
          freed.push_back(it->second);
          group.erase(it);
        }
      }
      std::size_t k = 0;
      for (const auto& v : s.producedQuantum) {
        if (is_garbage(v)) continue;
        group[v] = k < freed.size() ? freed[k++] : next++;
      }
      peak = std::max(peak, count() + static_cast<int>(freed.size() - std::min(freed.size(), k)));
    }
    peak = std::max(peak, count());
  }
  return peak;
}

bool same_semantics(const FlatFunction& ff, const FlatCircuit& c, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int t = 0; t < trials; ++t) {
    const StateVector in = StateVector::random(ff.inputs, rng);
    const SimOutcome a = simulate(ff, in), b = simulate(c, in);
    if (a.state.labels.size() != b.state.labels.size()) return false;
    if (!equiv_up_to_phase(a.state, b.state, 1e-9) || a.classical != b.classical) return false;
  }
  return true;
}

}  // namespace

TEST(inline_unroll, maj_interface) {
  const FlatFunction ff = flatten_pipeline(load_fixture("maj.uir"), "maj", {});
  EXPECT_EQ(ff.inputs, (std::vector<VarId>{"a", "b", "c"}));
  EXPECT_EQ(ff.conserved, ff.inputs);
  EXPECT_EQ(ff.outputLabels, std::vector<std::string>{">0"});
  for (const auto& s : ff.fn.body) EXPECT_FALSE(s.op.is_user()) << print_statement(s);
}

TEST(inline_unroll, splits_registers) {
  const FlatFunction ff = flatten_pipeline(load_fixture("extract.uir"), "extract", {{"n", 3}, {"i", 1}});
  EXPECT_EQ(ff.inputLabels, (std::vector<std::string>{"a[0]", "a[1]", "a[2]"}));
  EXPECT_EQ(ff.outputs.size(), 3u);
  EXPECT_TRUE(ff.conserved.empty());
  // a[1] is extracted: the permutation is a relabeling
  const SimOutcome out = simulate(ff, StateVector::basis(ff.inputs, "010"));
  ASSERT_EQ(out.state.labels.size(), 3u);
  EXPECT_EQ(basis_index(out.state).value_or(99), std::size_t{1} << 2);
}

TEST(inline_unroll, errors) {
  const Program it = load_fixture("iterate.uir");
  EXPECT_EQ(error_code([&] { inline_unroll(run_pipeline(it, "Iterate"), "Iterate", options_for({{"n", 60}}, 50)); }),
            "FuelExhausted");
  EXPECT_EQ(error_code([&] { inline_unroll(run_pipeline(it, "Iterate"), "Iterate", {}); }), "UnresolvedClassical");
  EXPECT_EQ(error_code([&] { inline_unroll(it, "nope", {}); }), "UnresolvedCallee");
}

TEST(inline_unroll, census_counts_calls) {
  const FlatFunction ff = flatten_pipeline(load_fixture("iterate.uir"), "Iterate", {{"n", 4}});
  EXPECT_EQ(ff.census.at("f"), 1);
  EXPECT_EQ(ff.census.at("Iterate^G"), 4);
  EXPECT_FALSE(ff.census.count("forget"));
}

TEST(decompose_controls, two_qubit_gates_and_same_semantics) {
  for (const auto& e : corpus()) {
    const LowerResult lr = lower_entry(e);
    for (const auto& g : lr.circuit.gates) {
      EXPECT_NE(g.tag, "ccx") << e.name;
      EXPECT_LE(g.qubits.size(), 2u) << e.name;
      EXPECT_LE(g.cond.size(), 1u) << e.name;
    }
    std::mt19937_64 rng(4);
    for (int t = 0; t < 8; ++t) {
      const StateVector in = StateVector::random(lr.flat.inputs, rng);
      EXPECT_TRUE(equiv_up_to_phase(simulate(lr.flat, in).state, simulate(lr.decomposed, in).state, 1e-9)) << e.name;
    }
  }
}

TEST(allocate_registers, within_live_peak) {
  for (const auto& e : corpus()) {
    const LowerResult lr = lower_entry(e);
    EXPECT_LE(lr.circuit.numQubits, live_peak(lr.decomposed)) << e.name;
    EXPECT_GE(lr.circuit.numQubits, static_cast<int>(lr.flat.inputs.size())) << e.name;
  }
}

TEST(allocate_registers, semantics_match_ir) {
  for (const auto& e : corpus()) EXPECT_TRUE(same_semantics(lower_entry(e).flat, lower_entry(e).circuit, 16, 6)) << e.name;
}

TEST(gate_count, maj_report) {
  const Program src = load_fixture("maj.uir");
  const GateReport r = gate_count(lower(run_pipeline(src, "maj"), "maj").circuit);
  EXPECT_EQ(format_report(r), "single=20\ncx=16\ngates=36\nqubits=5\n");
}

TEST(gate_count, rejects_undecomposed) {
  FlatCircuit c;
  c.numQubits = 3;
  Gate g;
  g.tag = "ccx";
  g.qubits = {0, 1, 2};
  c.gates = {g};
  EXPECT_THROW(gate_count(c), InternalError);
}

TEST(qasm, round_trip_and_conformance) {
  for (const auto& e : corpus()) {
    const LowerResult lr = lower_entry(e);
    const std::string text = emit_qasm(lr.circuit);
    const FlatCircuit back = parse_qasm(text);
    EXPECT_EQ(back.numQubits, std::max(lr.circuit.numQubits, 1)) << e.name;
    EXPECT_EQ(back.gates, lr.circuit.gates) << e.name;
    EXPECT_EQ(back.inputs, lr.circuit.inputs) << e.name;
    EXPECT_EQ(back.outputs, lr.circuit.outputs) << e.name;
    EXPECT_EQ(emit_qasm(back), text) << e.name;
    EXPECT_TRUE(same_semantics(lr.flat, back, 16, 2)) << e.name;
  }
}

TEST(qasm, byte_deterministic) {
  for (const auto& e : corpus()) EXPECT_EQ(emit_qasm(lower_entry(e).circuit), emit_qasm(lower_entry(e).circuit)) << e.name;
}

TEST(qasm, teleport_classical_control) {
  const Program src = load_fixture("teleport.uir");
  const LowerResult lr = lower(run_pipeline(src, "teleport"), "teleport");
  const std::string text = emit_qasm(lr.circuit);
  EXPECT_NE(text.find("measure q["), std::string::npos);
  EXPECT_NE(text.find("if(c=="), std::string::npos);
  // `if(c==k)` reads back as a condition on every classical bit
  const FlatCircuit back = parse_qasm(text);
  EXPECT_EQ(emit_qasm(back), text);
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    StateVector in = StateVector::random(lr.flat.inputs, rng);
    SimConfig cfg;
    cfg.seed = seed;
    SimOutcome out = simulate(back, in, cfg);
    ASSERT_EQ(out.state.num_wires(), 1);
    out.state.labels = in.labels;
    EXPECT_TRUE(equiv_up_to_phase(in, out.state, 1e-9)) << seed;
  }
}

TEST(qasm, rejects_unknown_gates) {
  EXPECT_EQ(error_code([] { parse_qasm("OPENQASM 2.0;\nqreg q[2];\nswap q[0],q[1];\n"); }), "QasmSyntax");
  EXPECT_EQ(error_code([] { parse_qasm("OPENQASM 2.0;\nqreg q[1];\nx q[3];\n"); }), "QasmSyntax");
}
