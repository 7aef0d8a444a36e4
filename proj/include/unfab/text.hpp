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

// Textual form of programs (.uir files).
//
//   maj[a, b, c] := {
//     t :=p dup[a]
//     x :=p CX[b](t)
//     r0 :=p dup[b] if !x
//     r1 :=p dup[c] if x
//     r :=p select[x](r0, r1)
//     :=p forget(x)
//   } > r
//
// Quantum variables are bare, classical ones start with `$`, garbage with `%`.
// Statements are separated by newlines or `;`; `#` starts a line comment.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "unfab/ir.hpp"

namespace unfab {

namespace text_detail {

enum class Tok { Ident, Number, Assign, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Effect effect = Effect::Pure;
  bool hasEffect = false;
  int line = 0, col = 0, endCol = 0;
};

inline bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

class Lexer {
 public:
  Lexer(std::string_view src, std::string file) : src_(src), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (c == '\n') {
        advance();
        t.kind = Tok::Punct;
        t.text = "\n";
      } else if (c == '$' || c == '%' || ident_start(c)) {
        std::string s;
        if (c == '$' || c == '%') { s += c; advance(); }
        if (pos_ >= src_.size() || !ident_start(src_[pos_])) error("expected identifier after sigil");
        while (pos_ < src_.size() && ident_char(src_[pos_])) { s += src_[pos_]; advance(); }
        while (pos_ < src_.size() && (src_[pos_] == '\'' || src_[pos_] == '~')) {
          s += src_[pos_];
          advance();
        }
        t.kind = Tok::Ident;
        t.text = s;
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() &&
                  std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        std::string s;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                src_[pos_] == 'e' || src_[pos_] == 'E' ||
                ((src_[pos_] == '-' || src_[pos_] == '+') && !s.empty() &&
                 (s.back() == 'e' || s.back() == 'E')))) {
          s += src_[pos_];
          advance();
        }
        t.kind = Tok::Number;
        t.text = s;
      } else if (c == ':' && peek(1) == '=') {
        advance();
        advance();
        t.kind = Tok::Assign;
        t.text = ":=";
        char e = peek(0);
        if ((e == 'p' || e == 'q' || e == 'm') && !ident_char(peek(1)) && peek(1) != '\'') {
          advance();
          t.hasEffect = true;
          t.effect = e == 'p' ? Effect::Pure : e == 'q' ? Effect::Quantum : Effect::Measure;
        }
      } else {
        static const char* two[] = {"==", "!=", "<=", ">="};
        t.kind = Tok::Punct;
        for (const char* op : two) {
          if (c == op[0] && peek(1) == op[1]) {
            t.text = op;
            advance();
            advance();
            break;
          }
        }
        if (t.text.empty()) {
          if (std::string_view("[](){},;><=!&^+-*:").find(c) == std::string_view::npos)
            error(std::string("unexpected character '") + c + "'");
          t.text = std::string(1, c);
          advance();
        }
      }
      t.endCol = col_;
      out.push_back(t);
    }
  }

 private:
  char peek(std::size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }
  void advance() {
    if (src_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
    ++pos_;
  }
  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else {
        break;
      }
    }
  }
  [[noreturn]] void error(const std::string& msg) const {
    SourceSpan sp{file_, line_, col_, line_, col_};
    throw UnfabError("SyntaxError", msg, sp);
  }

  std::string_view src_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

inline bool parse_int(const std::string& s, std::int64_t& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

/// Resolves a base operation name; returns false for user functions.
inline bool resolve_builtin(const std::string& name, Operation& op) {
  auto digits = [&](std::size_t from, std::int64_t& n) {
    if (from >= name.size()) return false;
    return parse_int(name.substr(from), n);
  };
  std::int64_t n = 0;
  if (name == "X") { op = make_builtin(Builtin::X); return true; }
  if (name == "H") { op = make_builtin(Builtin::H); return true; }
  if (name == "CX") { op = make_builtin(Builtin::CX); return true; }
  if (name == "measure") { op = make_builtin(Builtin::Measure); return true; }
  if (name == "forget") { op = make_builtin(Builtin::Forget); return true; }
  if (name == "dispose") { op = make_builtin(Builtin::Dispose); return true; }
  if (name == "dup") { op = make_builtin(Builtin::Dup); return true; }
  if (name == "undup") { op = make_builtin(Builtin::Dup); op.mode.adjoint = true; return true; }
  if (name == "select") { op = make_builtin(Builtin::Select); return true; }
  if (name == "distribute") {
    op = make_builtin(Builtin::Select);
    op.mode.adjoint = true;
    return true;
  }
  if (name == "phase" || name == "phase_pi") {
    op = make_builtin(Builtin::Phase, 0, name == "phase_pi" ? 1.0 : 0.0);
    return true;
  }
  if (name.rfind("unnew", 0) == 0 && digits(5, n)) {
    if (n != 0 && n != 1) throw UnfabError("UnknownBuiltin", "allocation value must be 0 or 1: " + name);
    op = make_builtin(Builtin::New, n);
    op.mode.adjoint = true;
    return true;
  }
  if (name.rfind("new", 0) == 0 && digits(3, n)) {
    if (n != 0 && n != 1) throw UnfabError("UnknownBuiltin", "allocation value must be 0 or 1: " + name);
    op = make_builtin(Builtin::New, n);
    return true;
  }
  if (name.rfind("uncat", 0) == 0 && digits(5, n)) {
    if (n < 1) throw UnfabError("UnknownBuiltin", "bad arity: " + name);
    op = make_builtin(Builtin::Cat, n);
    op.mode.adjoint = true;
    return true;
  }
  if (name.rfind("cat", 0) == 0 && digits(3, n)) {
    if (n < 1) throw UnfabError("UnknownBuiltin", "bad arity: " + name);
    op = make_builtin(Builtin::Cat, n);
    return true;
  }
  return false;
}

inline std::string format_angle(double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", a);
  // shortest representation that reads back exactly
  for (int prec = 1; prec <= 17; ++prec) {
    char b2[64];
    std::snprintf(b2, sizeof b2, "%.*g", prec, a);
    if (std::strtod(b2, nullptr) == a) return b2;
  }
  return buf;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string file) : t_(std::move(toks)), file_(std::move(file)) {}

  Program program() {
    Program p;
    skip_newlines();
    while (cur().kind != Tok::End) {
      FunctionDef f = function();
      if (p.find(f.key())) fail(f.span, "duplicate function '" + f.key() + "'");
      p.functions.push_back(std::move(f));
      skip_newlines();
    }
    return p;
  }

 private:
  const Token& cur() const { return t_[i_]; }
  const Token& next() { return t_[i_++]; }
  bool is_punct(const char* p) const { return cur().kind == Tok::Punct && cur().text == p; }
  bool accept(const char* p) {
    if (is_punct(p)) { ++i_; return true; }
    return false;
  }
  void expect(const char* p) {
    if (!accept(p)) fail_here(std::string("expected '") + (std::string(p) == "\n" ? "newline" : p) + "'");
  }
  void skip_newlines() { while (is_punct("\n")) ++i_; }
  SourceSpan span_of(const Token& a) const { return SourceSpan{file_, a.line, a.col, a.line, a.endCol}; }
  [[noreturn]] void fail(const SourceSpan& sp, const std::string& msg) const {
    throw UnfabError("SyntaxError", msg, sp);
  }
  [[noreturn]] void fail_here(const std::string& msg) const {
    std::string got = cur().kind == Tok::End ? "end of input" : cur().text == "\n" ? "newline" : "'" + cur().text + "'";
    fail(span_of(cur()), msg + ", got " + got);
  }
  std::string ident() {
    if (cur().kind != Tok::Ident) fail_here("expected identifier");
    return next().text;
  }

  Mode suffixes(Mode m) {
    while (accept("^")) {
      std::string s = ident();
      if (s == "adj") m = m.dagger();
      else if (s == "G") {
        if (m.garbage) fail(span_of(t_[i_ - 1]), "operation already in garbage mode");
        m = m.with_garbage();
      } else if (s == "O") m.classicalOnly = true;
      else fail(span_of(t_[i_ - 1]), "unknown mode suffix '^" + s + "'");
    }
    return m;
  }

  Atom atom() {
    bool neg = accept("-");
    if (cur().kind == Tok::Number) {
      std::int64_t v;
      if (!parse_int(cur().text, v)) fail_here("expected integer");
      ++i_;
      return Atom::lit(neg ? -v : v);
    }
    if (neg) fail_here("expected integer after '-'");
    return Atom::of(ident());
  }

  std::vector<Param> params(const char* close) {
    std::vector<Param> ps;
    if (accept(close)) return ps;
    do {
      Param p;
      p.name = ident();
      if (accept(":")) p.width = atom();
      ps.push_back(std::move(p));
    } while (accept(","));
    expect(close);
    return ps;
  }

  FunctionDef function() {
    FunctionDef f;
    const Token& start = cur();
    f.name = ident();
    if (f.name[0] == '$' || f.name[0] == '%') fail(span_of(start), "function names take no sigil");
    f.mode = suffixes(Mode{});
    f.span = span_of(start);
    if (accept("[")) f.bracketParams = params("]");
    if (accept("(")) f.consumedParams = params(")");
    if (cur().kind != Tok::Assign) fail_here("expected ':='");
    if (cur().hasEffect) f.declaredEffect = cur().effect;
    ++i_;
    expect("{");
    while (true) {
      while (is_punct("\n") || is_punct(";")) ++i_;
      if (accept("}")) break;
      if (cur().kind == Tok::End) fail_here("unterminated function body");
      f.add(statement());
      if (!is_punct("\n") && !is_punct(";") && !is_punct("}")) fail_here("expected end of statement");
    }
    const Token& gt = cur();
    expect(">");
    if (cur().kind == Tok::Ident && cur().line == gt.line) {
      do f.returns.push_back(ident());
      while (accept(","));
    }
    return f;
  }

  // expression grammar: cmp > add > mul > unary > primary
  Expr expr() {
    Expr a = additive();
    using K = Expr::Kind;
    static const std::pair<const char*, K> cmps[] = {{"==", K::Eq}, {"!=", K::Ne}, {"<=", K::Le},
                                                     {">=", K::Ge}, {"<", K::Lt},  {">", K::Gt}};
    for (auto& [s, k] : cmps) {
      if (accept(s)) return Expr::binary(k, std::move(a), additive());
    }
    return a;
  }
  Expr additive() {
    Expr a = multiplicative();
    while (true) {
      if (accept("+")) a = Expr::binary(Expr::Kind::Add, std::move(a), multiplicative());
      else if (accept("-")) a = Expr::binary(Expr::Kind::Sub, std::move(a), multiplicative());
      else return a;
    }
  }
  Expr multiplicative() {
    Expr a = unary();
    while (accept("*")) a = Expr::binary(Expr::Kind::Mul, std::move(a), unary());
    return a;
  }
  Expr unary() {
    if (accept("-")) return Expr::unary(Expr::Kind::Neg, unary());
    if (accept("!")) return Expr::unary(Expr::Kind::Not, unary());
    if (accept("(")) {
      Expr e = expr();
      expect(")");
      return e;
    }
    if (cur().kind == Tok::Number) {
      std::int64_t v;
      if (!parse_int(cur().text, v)) fail_here("expected integer");
      ++i_;
      return Expr::constant(v);
    }
    const Token& t = cur();
    std::string v = ident();
    if (!is_classical(v)) fail(span_of(t), "expressions may only read classical variables");
    return Expr::variable(v);
  }

  bool starts_expr() const {
    const Token& t = cur();
    if (t.kind == Tok::Number) return true;
    if (t.kind == Tok::Ident) return is_classical(t.text);
    return t.kind == Tok::Punct && (t.text == "(" || t.text == "-" || t.text == "!");
  }

  Statement statement() {
    Statement s;
    const Token& start = cur();
    std::vector<std::string> outs;
    if (cur().kind == Tok::Ident) {
      do outs.push_back(ident());
      while (accept(","));
    }
    if (cur().kind != Tok::Assign) fail_here("expected ':=' in statement");
    if (!cur().hasEffect) fail_here("statements need an effect annotation (:=p, :=q or :=m)");
    s.effect = cur().effect;
    ++i_;
    bool seenQuantum = false;
    for (auto& o : outs) {
      if (is_classical(o)) {
        if (seenQuantum) fail(span_of(start), "classical results must precede quantum results");
        s.producedClassical.push_back(o);
      } else {
        seenQuantum = true;
        s.producedQuantum.push_back(o);
      }
    }
    if (starts_expr()) {
      s.op = make_builtin(Builtin::Calc);
      s.expr = expr();
    } else {
      const Token& opTok = cur();
      std::string name = ident();
      if (name[0] == '$' || name[0] == '%') fail(span_of(opTok), "operation names take no sigil");
      Operation op;
      if (!resolve_builtin(name, op)) op = make_call(name);
      if (op.is(Builtin::Phase) && name == "phase") {
        expect("<");
        bool neg = accept("-");
        if (cur().kind != Tok::Number) fail_here("expected phase angle");
        op.angle = std::strtod(cur().text.c_str(), nullptr) * (neg ? -1 : 1);
        ++i_;
        expect(">");
      }
      op.mode = suffixes(op.mode);
      s.op = op;
      if (accept("[")) {
        if (!accept("]")) {
          do s.conserved.push_back(atom());
          while (accept(","));
          expect("]");
        }
      }
      if (accept("(")) {
        if (!accept(")")) {
          do s.consumed.push_back(ident());
          while (accept(","));
          expect(")");
        }
      }
    }
    if (cur().kind == Tok::Ident && cur().text == "if") {
      ++i_;
      do {
        Literal l;
        l.negated = accept("!");
        l.var = ident();
        s.condition.push_back(l);
      } while (accept("&"));
      s.condition = normalize(std::move(s.condition));
    }
    const Token& last = t_[i_ - 1];
    s.span = SourceSpan{file_, start.line, start.col, last.line, last.endCol};
    check_kinds(s);
    return s;
  }

  void check_kinds(const Statement& s) const {
    auto bad = [&](const std::string& m) { throw UnfabError("KindMismatch", m, s.span); };
    for (const auto& v : s.consumed)
      if (is_classical(v)) bad("classical variable '" + v + "' cannot be consumed");
    for (const auto& l : s.condition)
      if (is_garbage(l.var)) bad("garbage variable '" + l.var + "' in condition");
    const Operation& op = s.op;
    if (op.is(Builtin::Calc)) {
      if (s.producedClassical.size() != 1 || !s.producedQuantum.empty())
        bad("a classical expression defines exactly one classical variable");
      return;
    }
    if (op.is(Builtin::Measure) && !op.mode.backwards()) {
      if (!s.producedQuantum.empty()) bad("measure produces classical results only");
    } else if (op.is_user() || op.mode.classicalOnly) {
      // checked against the callee signature by the verifier
    } else if (!s.producedClassical.empty()) {
      bad("built-in '" + op.target + "' has no classical results");
    }
    if (!op.is_user() && !op.is(Builtin::Dispose)) {
      for (const auto& v : s.producedQuantum)
        if (is_garbage(v) && !op.mode.produces_garbage())
          bad("garbage variable '" + v + "' produced outside garbage mode");
      for (const auto& v : s.consumed)
        if (is_garbage(v) && !op.mode.consumes_garbage())
          bad("garbage variable '" + v + "' consumed outside garbage mode");
    }
  }

  std::vector<Token> t_;
  std::string file_;
  std::size_t i_ = 0;
};

inline int precedence(Expr::Kind k) {
  using K = Expr::Kind;
  switch (k) {
    case K::Eq: case K::Ne: case K::Lt: case K::Le: case K::Gt: case K::Ge: return 1;
    case K::Add: case K::Sub: return 2;
    case K::Mul: return 3;
    case K::Neg: case K::Not: return 4;
    default: return 5;
  }
}

inline void print_expr(std::ostream& os, const Expr& e, int ctx) {
  using K = Expr::Kind;
  int p = precedence(e.kind);
  bool paren = p < ctx;
  if (paren) os << '(';
  switch (e.kind) {
    case K::Const: os << e.value; break;
    case K::Var: os << e.var; break;
    case K::Neg: os << '-'; print_expr(os, e.kids[0], 4); break;
    case K::Not: os << '!'; print_expr(os, e.kids[0], 4); break;
    default: {
      static const std::map<K, const char*> sym = {{K::Add, "+"}, {K::Sub, "-"}, {K::Mul, "*"},
                                                   {K::Eq, "=="}, {K::Ne, "!="}, {K::Lt, "<"},
                                                   {K::Le, "<="}, {K::Gt, ">"}, {K::Ge, ">="}};
      print_expr(os, e.kids[0], p);
      os << ' ' << sym.at(e.kind) << ' ';
      print_expr(os, e.kids[1], p + 1);
    }
  }
  if (paren) os << ')';
}

}  // namespace text_detail

/// Canonical spelling of an operation, e.g. `undup`, `CX^G^adj`, `phase_pi`.
inline std::string op_name(const Operation& op) {
  std::string base;
  bool folded = false;  // inner adjoint folded into the base name
  const bool adj = op.mode.adjoint;
  switch (op.builtin) {
    case Builtin::New: base = (adj ? "unnew" : "new") + std::to_string(op.param); folded = true; break;
    case Builtin::Dup: base = adj ? "undup" : "dup"; folded = true; break;
    case Builtin::Select: base = adj ? "distribute" : "select"; folded = true; break;
    case Builtin::Cat: base = (adj ? "uncat" : "cat") + std::to_string(op.param); folded = true; break;
    case Builtin::Phase:
      base = op.angle == 1.0 ? "phase_pi" : "phase<" + text_detail::format_angle(op.angle) + ">";
      break;
    default: base = op.target; break;
  }
  if (adj && !folded) base += "^adj";
  if (op.mode.garbage) base += "^G";
  if (op.mode.gAdjoint) base += "^adj";
  if (op.mode.classicalOnly) base += "^O";
  return base;
}

inline std::string atom_str(const Atom& a) { return a.isConst ? std::to_string(a.value) : a.var; }

inline std::string condition_str(const Condition& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += " & ";
    if (c[i].negated) s += '!';
    s += c[i].var;
  }
  return s;
}

inline std::string print_statement(const Statement& s) {
  std::ostringstream os;
  auto outs = s.produced();
  for (std::size_t i = 0; i < outs.size(); ++i) os << (i ? ", " : "") << outs[i];
  if (!outs.empty()) os << ' ';
  os << ":=" << effect_char(s.effect) << ' ';
  if (s.op.is(Builtin::Calc)) {
    text_detail::print_expr(os, s.expr, 0);
  } else {
    os << op_name(s.op);
    if (!s.conserved.empty()) {
      os << '[';
      for (std::size_t i = 0; i < s.conserved.size(); ++i) os << (i ? ", " : "") << atom_str(s.conserved[i]);
      os << ']';
    }
    if (!s.consumed.empty()) {
      os << '(';
      for (std::size_t i = 0; i < s.consumed.size(); ++i) os << (i ? ", " : "") << s.consumed[i];
      os << ')';
    }
  }
  if (!s.condition.empty()) os << " if " << condition_str(s.condition);
  return os.str();
}

inline std::string print_params(const std::vector<Param>& ps) {
  std::string s;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (i) s += ", ";
    s += ps[i].name;
    if (ps[i].width) s += ":" + atom_str(*ps[i].width);
  }
  return s;
}

inline std::string print_function(const FunctionDef& f) {
  std::ostringstream os;
  os << f.key();
  if (!f.bracketParams.empty()) os << '[' << print_params(f.bracketParams) << ']';
  os << '(' << print_params(f.consumedParams) << ')';
  os << " :=";
  if (f.declaredEffect) os << effect_char(*f.declaredEffect);
  os << " {\n";
  for (const auto& s : f.body) os << "  " << print_statement(s) << '\n';
  os << "} >";
  for (std::size_t i = 0; i < f.returns.size(); ++i) os << (i ? ", " : " ") << f.returns[i];
  os << '\n';
  return os.str();
}

inline std::string print_program(const Program& p) {
  std::string s;
  for (std::size_t i = 0; i < p.functions.size(); ++i) {
    if (i) s += '\n';
    s += print_function(p.functions[i]);
  }
  return s;
}

inline Program parse_program(std::string_view text, const std::string& file = "") {
  text_detail::Lexer lx(text, file);
  text_detail::Parser ps(lx.run(), file);
  return ps.program();
}

inline FunctionDef parse_function(std::string_view text, const std::string& file = "") {
  Program p = parse_program(text, file);
  if (p.functions.size() != 1) throw UnfabError("SyntaxError", "expected exactly one function");
  return std::move(p.functions.front());
}

}  // namespace unfab
