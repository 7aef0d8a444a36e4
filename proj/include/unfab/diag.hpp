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

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace unfab {

struct SourceSpan {
  std::string file;
  int line = 0, col = 0, endLine = 0, endCol = 0;
  bool known() const { return line > 0; }
};

struct Diagnostic {
  std::string code;  // e.g. DoubleConsume, NotForgettable
  std::string message;
  std::string function;
  int stmt = -1;     // statement position in the body, -1 if not applicable
  std::string var;
  std::string reason;  // finer-grained cause, e.g. QuantumProducer
  SourceSpan span;
};

using Diagnostics = std::vector<Diagnostic>;

inline bool has_code(const Diagnostics& ds, const std::string& code) {
  for (const auto& d : ds) if (d.code == code) return true;
  return false;
}

/// Human-readable form: `file:line:col: error[Code]: message`.
inline std::string render(const Diagnostic& d) {
  std::ostringstream os;
  if (d.span.known()) {
    os << (d.span.file.empty() ? "<input>" : d.span.file) << ':' << d.span.line << ':'
       << d.span.col << ": ";
  }
  os << "error[" << d.code << "]: " << d.message;
  if (!d.function.empty()) os << " (in " << d.function;
  if (!d.function.empty() && d.stmt >= 0) os << ", statement " << d.stmt;
  if (!d.function.empty()) os << ')';
  return os.str();
}

/// Line-oriented key=value record.
inline std::string render_machine(const Diagnostic& d) {
  std::ostringstream os;
  os << "code=" << d.code << " function=" << d.function << " stmt=" << d.stmt
     << " var=" << d.var;
  if (!d.reason.empty()) os << " reason=" << d.reason;
  os << " line=" << d.span.line << " col=" << d.span.col;
  return os.str();
}

/// User-facing failure with a diagnostic code (exit status 1 in the CLI).
class UnfabError : public std::runtime_error {
 public:
  UnfabError(std::string code, const std::string& msg, SourceSpan span = {})
      : std::runtime_error(msg), code_(std::move(code)), span_(std::move(span)) {}
  const std::string& code() const { return code_; }
  const SourceSpan& span() const { return span_; }
  Diagnostic diagnostic() const {
    Diagnostic d;
    d.code = code_;
    d.message = what();
    d.span = span_;
    return d;
  }

 private:
  std::string code_;
  SourceSpan span_;
};

/// Violated pass precondition (exit status 2 in the CLI).
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

#define UNFAB_ASSERT(cond, msg)                                             \
  do {                                                                      \
    if (!(cond)) throw ::unfab::InternalError(std::string("assertion failed: ") + (msg)); \
  } while (0)

}  // namespace unfab
