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

TEST(parse_program, maj_shape) {
  Program p = load_fixture("maj.uir");
  const FunctionDef& f = p.at("maj");
  ASSERT_EQ(f.body.size(), 6u);
  EXPECT_EQ(f.conserved_params(), (std::vector<VarId>{"a", "b", "c"}));
  EXPECT_EQ(f.body[2].condition, (Condition{{"x", true}}));
  EXPECT_EQ(f.body[3].condition, (Condition{{"x", false}}));
  EXPECT_TRUE(f.body[5].op.is(Builtin::Forget));
  EXPECT_EQ(f.returns, std::vector<VarId>{"r"});
}

TEST(parse_program, round_trips_every_fixture) {
  for (const char* name : {"maj.uir", "epr.uir", "epr_alloc.uir", "dup.uir", "slow_id.uir", "cx_controlled.uir",
                           "z.uir", "bad.uir", "hard.uir", "extract.uir", "teleport.uir", "iterate.uir",
                           "etareti.uir"}) {
    Program p = load_fixture(name);
    Program q = parse_program(print_program(p));
    EXPECT_TRUE(q.same_as(p)) << name;
    EXPECT_EQ(print_program(q), print_program(p)) << name;
  }
}

TEST(parse_program, round_trips_derived_code) {
  Program p = load_fixture("etareti.uir");
  Program e = run_pipeline(p, "Etareti");
  Program q = parse_program(print_program(e));
  EXPECT_TRUE(q.same_as(e));
}

TEST(parse_program, round_trips_random_programs) {
  for (const auto& e : random_corpus(30, 5)) {
    Program q = parse_program(print_program(e.src));
    EXPECT_TRUE(q.same_as(e.src)) << print_program(e.src);
  }
}

TEST(parse_program, mode_suffixes) {
  FunctionDef f = parse_function("k[a](x) :=p {\n  y, %g0 :=p CX^adj^G[a](x)\n  :=p dispose(%g0)\n} > y, %bin");
  const Operation& op = f.body[0].op;
  EXPECT_TRUE(op.mode.adjoint);
  EXPECT_TRUE(op.mode.garbage);
  EXPECT_FALSE(op.mode.gAdjoint);
  EXPECT_TRUE(f.bin_out());
}

TEST(parse_program, undup_and_distribute_are_adjoints) {
  FunctionDef f = parse_function(
      "k[a, c](x) :=p {\n  x0, x1 :=p distribute[c](x)\n  :=p undup[a](x1) if c\n  x1' :=p dup[a] if c\n"
      "  x' :=p select[c](x0, x1')\n} > x'");
  EXPECT_TRUE(f.body[0].op.is(Builtin::Select));
  EXPECT_TRUE(f.body[0].op.mode.backwards());
  EXPECT_TRUE(f.body[1].op.is(Builtin::Dup));
  EXPECT_TRUE(f.body[1].op.mode.backwards());
}

TEST(parse_program, widths_and_classical_statements) {
  Program p = load_fixture("extract.uir");
  const FunctionDef& f = p.at("extract");
  ASSERT_EQ(f.consumedParams.size(), 1u);
  ASSERT_TRUE(f.consumedParams[0].width.has_value());
  EXPECT_EQ(f.consumedParams[0].width->var, "$n");
  EXPECT_TRUE(f.body[0].op.is(Builtin::Calc));
  EXPECT_EQ(f.body[0].producedClassical, std::vector<VarId>{"$j"});
}

TEST(parse_program, syntax_errors_carry_spans) {
  try {
    parse_program("f(a) :=p {\n  b :=p X(a\n} > b\n", "bad.uir");
    FAIL() << "expected a syntax error";
  } catch (const UnfabError& e) {
    EXPECT_EQ(e.code(), "SyntaxError");
    EXPECT_EQ(e.span().line, 2);
    EXPECT_EQ(e.span().file, "bad.uir");
  }
  // Unknown names parse as user calls and fail resolution during verification.
  EXPECT_TRUE(has_code(verify_program(parse_program("f(a) :=p {\n  b :=p frobnicate(a)\n} > b\n")),
                       "UnresolvedCallee"));
  EXPECT_THROW(parse_program("f(a) :=p {\n  b := X(a)\n} > b\n"), UnfabError);
}

TEST(print_program, stable_text) {
  const std::string text =
      "maj[a, b, c]() :=p {\n"
      "  t :=p dup[a]\n"
      "  x :=p CX[b](t)\n"
      "  r0 :=p dup[b] if !x\n"
      "  r1 :=p dup[c] if x\n"
      "  r :=p select[x](r0, r1)\n"
      "  :=p forget(x)\n"
      "} > r\n";
  EXPECT_EQ(print_program(load_fixture("maj.uir")), text);
}
