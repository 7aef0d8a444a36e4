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

const double kHalf = 0.5;
const double kRoot = 1 / std::numbers::sqrt2;

StateVector ket(const std::vector<std::string>& labels, const std::map<std::string, cplx>& terms) {
  StateVector s = StateVector::zero(labels);
  s.amp.assign(s.amp.size(), cplx(0, 0));
  for (const auto& [bits, a] : terms) {
    std::size_t i = 0;
    for (std::size_t k = 0; k < bits.size(); ++k) if (bits[k] == '1') i |= std::size_t{1} << k;
    s.amp[i] = a;
  }
  return s;
}

FlatCircuit two_qubits(std::vector<Gate> gates) {
  FlatCircuit c;
  c.numQubits = 2;
  c.inputs = {{"q0", 0}, {"q1", 1}};
  c.outputs = c.inputs;
  c.gates = std::move(gates);
  return c;
}

Gate g1(const std::string& tag, int q, double angle = 0) {
  Gate g;
  g.tag = tag;
  g.qubits = {q};
  g.angle = angle;
  return g;
}

Gate cx(int c, int t) {
  Gate g;
  g.tag = "cx";
  g.qubits = {c, t};
  return g;
}

FlatFunction flat(const std::string& text, const std::string& entry, const Args& args = {}) {
  Program p = parse_program(text);
  return inline_unroll(p, entry, options_for(args));
}

std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const UnfabError& e) {
    return e.diagnostic().code;
  }
  return "";
}

}  // namespace

TEST(simulate, background_computation_trace) {
  const std::vector<std::string> q = {"q0", "q1"};
  const std::vector<Gate> gates = {g1("h", 0), g1("x", 1), cx(0, 1), g1("u1", 0, 1.0)};
  const std::vector<StateVector> expect = {
      ket(q, {{"00", kRoot}, {"10", kRoot}}),
      ket(q, {{"01", kRoot}, {"11", kRoot}}),
      ket(q, {{"01", kRoot}, {"10", kRoot}}),
      ket(q, {{"01", kRoot}, {"10", -kRoot}}),
  };
  for (std::size_t k = 1; k <= gates.size(); ++k) {
    const FlatCircuit c = two_qubits({gates.begin(), gates.begin() + k});
    const SimOutcome out = simulate(c, StateVector::basis(q, "00"));
    EXPECT_TRUE(equal_exact(expect[k - 1], out.state, 1e-12)) << "step " << k << "\n" << out.state.to_string();
  }
}

TEST(simulate, background_uncomputation_trace) {
  const std::vector<std::string> q = {"q0", "q1"};
  const std::vector<Gate> gates = {g1("x", 1), cx(1, 0), g1("x", 1)};
  const std::vector<StateVector> expect = {
      ket(q, {{"00", kRoot}, {"11", -kRoot}}),
      ket(q, {{"00", kRoot}, {"01", -kRoot}}),
      ket(q, {{"01", kRoot}, {"00", -kRoot}}),
  };
  const StateVector start = ket(q, {{"01", kRoot}, {"10", -kRoot}});
  for (std::size_t k = 1; k <= gates.size(); ++k) {
    const SimOutcome out = simulate(two_qubits({gates.begin(), gates.begin() + k}), start);
    EXPECT_TRUE(equal_exact(expect[k - 1], out.state, 1e-12)) << "step " << k << "\n" << out.state.to_string();
  }
  // qubit 0 is back to |0>
  const SimOutcome out = simulate(two_qubits(gates), start);
  EXPECT_LT(out.state.weight_off(0, false), 1e-24);
}

TEST(simulate, background_trace_through_ir) {
  const FlatFunction ff = flat(
      "k(p, q) :=q {\n  p' :=q H(p)\n  q' :=p X(q)\n  q'' :=p CX[p'](q')\n  :=q phase_pi if p'\n} > p', q''\n", "k");
  const SimOutcome out = simulate(ff, StateVector::basis(ff.inputs, "00"));
  EXPECT_TRUE(equal_exact(ket({">0", ">1"}, {{"01", kRoot}, {"10", -kRoot}}), out.state, 1e-12))
      << out.state.to_string();
}

TEST(simulate, hadamard_measurement_frequency) {
  std::mt19937_64 rng(2024);
  int zeros = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    StateVector s = StateVector::zero({"q"});
    s.apply_h(0);
    zeros += !s.measure(0, rng, false);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / n, 0.5, 0.05);
}

TEST(simulate, hadamard_measurement_through_ir) {
  const FlatFunction ff = flat("m() :=m {\n  a :=p new0\n  a' :=q H(a)\n  $r :=m measure(a')\n} > $r\n", "m");
  int ones = 0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    SimConfig cfg;
    cfg.seed = seed;
    const SimOutcome out = simulate(ff, StateVector::zero({}), cfg);
    ASSERT_EQ(out.classical.size(), 1u);
    ones += out.classical[0].second;
  }
  EXPECT_NEAR(ones / 2000.0, 0.5, 0.05);
}

TEST(simulate, epr_bell_state) {
  for (const char* file : {"epr.uir", "epr_alloc.uir"}) {
    const Program src = load_fixture(file);
    const FlatFunction ff = flatten_pipeline(src, "EPR", {});
    const SimOutcome out = simulate(ff, StateVector::zero(ff.inputs));
    EXPECT_TRUE(equal_exact(ket({">0", ">1"}, {{"00", kRoot}, {"11", kRoot}}), out.state)) << file;
  }
}

TEST(simulate, maj_matches_forget_example) {
  const Program src = load_fixture("maj.uir");
  const std::vector<std::string> abc = {"a", "b", "c"};
  const StateVector in = ket(abc, {{"001", kHalf}, {"011", -kHalf}, {"101", kHalf}, {"111", -kHalf}});
  const StateVector expect =
      ket({"a", "b", "c", ">0"}, {{"0010", kHalf}, {"0111", -kHalf}, {"1011", kHalf}, {"1111", -kHalf}});
  EXPECT_TRUE(equal_exact(expect, simulate(flatten_source(src, "maj", {}), in).state));
  EXPECT_TRUE(equal_exact(expect, simulate(flatten_pipeline(src, "maj", {}), in).state));
}

TEST(simulate, teleport_moves_the_state) {
  const Program src = load_fixture("teleport.uir");
  const FlatFunction ff = flatten_pipeline(src, "teleport", {});
  ASSERT_EQ(ff.inputs.size(), 1u);
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    StateVector in = StateVector::random(ff.inputs, rng);
    SimConfig cfg;
    cfg.seed = seed;
    SimOutcome out = simulate(ff, in, cfg);
    ASSERT_EQ(out.state.num_wires(), 1);
    out.state.labels = in.labels;
    EXPECT_TRUE(equiv_up_to_phase(in, out.state, 1e-9)) << "seed " << seed;
  }
}

TEST(simulate, unitarity_on_measure_free_corpus) {
  std::vector<CorpusEntry> c = fixture_corpus();
  for (auto& e : random_corpus(10, 40)) c.push_back(std::move(e));
  std::mt19937_64 rng(1);
  for (const auto& e : c) {
    const FlatFunction ff = flatten_pipeline(e.src, e.entry, e.args);
    for (int t = 0; t < 8; ++t) {
      const SimOutcome out = simulate(ff, StateVector::random(ff.inputs, rng));
      EXPECT_NEAR(out.state.norm(), 1.0, 1e-9) << e.name;
    }
  }
}

TEST(simulate, unnew_violation_and_budget) {
  const FlatFunction ff = flat("k(y) :=p {\n  :=p unnew0(y)\n} >\n", "k");
  EXPECT_EQ(error_code([&] { simulate(ff, StateVector::basis(ff.inputs, "1")); }), "UnnewViolation");
  EXPECT_NO_THROW(simulate(ff, StateVector::basis(ff.inputs, "0")));
  const FlatFunction maj = flatten_pipeline(load_fixture("maj.uir"), "maj", {});
  SimConfig small;
  small.maxQubits = 3;
  EXPECT_EQ(error_code([&] { simulate(maj, StateVector::zero(maj.inputs), small); }), "BudgetExceeded");
}

TEST(forget_oracle, maj_intermediate_state) {
  const StateVector s = ket({"a", "b", "c", "x", "r"},
                            {{"00100", kHalf}, {"01111", -kHalf}, {"10111", kHalf}, {"11101", -kHalf}});
  auto r = forget_oracle(s, {"x"});
  ASSERT_TRUE(std::holds_alternative<StateVector>(r));
  const StateVector expect =
      ket({"a", "b", "c", "r"}, {{"0010", kHalf}, {"0111", -kHalf}, {"1011", kHalf}, {"1111", -kHalf}});
  EXPECT_TRUE(equal_exact(expect, std::get<StateVector>(r), 1e-12));
}

TEST(forget_oracle, unentangled_zero_wire) {
  std::mt19937_64 rng(5);
  StateVector s = StateVector::random({"a", "b"}, rng);
  StateVector t = s;
  t.add_wire("z");
  auto r = forget_oracle(t, {"z"});
  ASSERT_TRUE(std::holds_alternative<StateVector>(r));
  EXPECT_TRUE(equal_exact(s, std::get<StateVector>(r), 1e-15));
  EXPECT_NEAR(std::get<StateVector>(r).norm(), 1.0, 1e-12);
}

TEST(forget_oracle, bad_superposition_fails) {
  const StateVector s = ket({"a'"}, {{"0", kRoot}, {"1", kRoot}});
  EXPECT_TRUE(std::holds_alternative<ForgetOracleFailure>(forget_oracle(s, {"a'"})));
  const FlatFunction ff = flatten_source(load_fixture("bad.uir"), "BAD", {});
  EXPECT_EQ(error_code([&] { simulate(ff, StateVector::zero({})); }), "ForgetViolation");
}

TEST(forget_oracle, never_fails_on_accepted_corpus) {
  std::vector<CorpusEntry> c = fixture_corpus();
  for (auto& e : random_corpus(20, 61)) c.push_back(std::move(e));
  for (const auto& e : c) {
    const FlatFunction ff = flatten_source(e.src, e.entry, e.args);
    ASSERT_LE(ff.inputs.size(), 10u);
    for (std::size_t i = 0; i < (std::size_t{1} << ff.inputs.size()); ++i) {
      std::string bits;
      for (std::size_t k = 0; k < ff.inputs.size(); ++k) bits += ((i >> k) & 1) ? '1' : '0';
      EXPECT_NO_THROW(simulate(ff, StateVector::basis(ff.inputs, bits))) << e.name << " " << bits;
    }
  }
}

TEST(equiv_up_to_phase, basic_cases) {
  std::mt19937_64 rng(8);
  const StateVector s = StateVector::random({"a", "b"}, rng);
  StateVector t = s;
  for (auto& a : t.amp) a *= std::polar(1.0, std::numbers::pi / 7);
  EXPECT_TRUE(equiv_up_to_phase(s, t));
  EXPECT_FALSE(equal_exact(s, t));
  EXPECT_FALSE(equiv_up_to_phase(StateVector::basis({"a", "b"}, "00"), StateVector::basis({"a", "b"}, "01")));
  EXPECT_THROW(equiv_up_to_phase(StateVector::zero({"a"}), StateVector::zero({"b"})), UnfabError);
}

TEST(check_conserved, controls_and_false_claims) {
  const FlatFunction c = flat("k[a](y) :=p {\n  y' :=p CX[a](y)\n} > y'\n", "k");
  EXPECT_TRUE(check_conserved(c, {"a"}, 100));
  FlatFunction h = flat("k(a) :=q {\n  a' :=q H(a)\n} > a'\n", "k");
  h.conserved = {"a"};
  h.conservedOut = h.outputs;
  h.outputs.clear();
  h.outputLabels.clear();
  EXPECT_FALSE(check_conserved(h, {"a"}, 20));
}

TEST(check_conserved, builtins_respect_their_conserved_operands) {
  const char* cases[] = {
      "k[a] :=p {\n  b :=p dup[a]\n} > b\n",
      "k[a](y) :=p {\n  y' :=p CX[a](y)\n} > y'\n",
      "k[a](y) :=q {\n  y' :=q H(y) if a\n} > y'\n",
      "k[a] :=q {\n  :=q phase_pi if a\n} >\n",
      "k[a](y) :=p {\n  y0, y1 :=p distribute[a](y)\n  y1' :=p X(y1) if a\n  y' :=p select[a](y0, y1')\n} > y'\n",
      "k[a, b](y) :=p {\n  y' :=p X(y) if a & !b\n} > y'\n",
  };
  for (const char* text : cases) {
    const FlatFunction ff = flat(text, "k");
    EXPECT_TRUE(check_conserved(ff, ff.conserved, 100)) << text;
  }
}
