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

// unfab command-line driver. Exit status: 0 success, 1 diagnostics or user
// error, 2 internal assertion.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unfab/bench.hpp"
#include "unfab/lower.hpp"
#include "unfab/pipeline.hpp"
#include "unfab/text.hpp"
#include "unfab/verify.hpp"

#ifndef UNFAB_PROGRAMS_DIR
#define UNFAB_PROGRAMS_DIR "programs"
#endif

namespace {

using namespace unfab;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnfabError("IoError", "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UnfabError("IoError", "cannot write '" + path + "'");
  out << text;
}

Program load(const std::string& path) { return parse_program(read_file(path), path); }

/// Parses and verifies; prints diagnostics and returns false on any.
bool load_checked(const std::string& path, Program& p) {
  p = load(path);
  const Diagnostics ds = verify_program(p);
  for (const auto& d : ds) std::cerr << render(d) << "\n";
  return ds.empty();
}

std::map<std::string, std::int64_t> parse_args(const std::vector<std::string>& kvs) {
  std::map<std::string, std::int64_t> r;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UnfabError("BadArgument", "--arg expects NAME=VALUE, got '" + kv + "'");
    std::string k = kv.substr(0, eq);
    if (!k.empty() && k[0] == '$') k.erase(0, 1);
    std::int64_t v = 0;
    if (!text_detail::parse_int(kv.substr(eq + 1), v))
      throw UnfabError("BadArgument", "--arg value must be an integer: '" + kv + "'");
    r[k] = v;
  }
  return r;
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      int n = std::stoi(s);
      return {n, n};
    }
    return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw UnfabError("BadArgument", "--n expects N or LO..HI, got '" + s + "'");
  }
}

struct Common {
  std::string file;
  std::string entry;
  std::string output;
  std::vector<std::string> args;
  std::int64_t fuel = 1000000;
  bool naive = false;
};

FlattenOptions flatten_options(const Common& c) {
  FlattenOptions fo;
  fo.fuel = c.fuel;
  fo.classicalArgs = parse_args(c.args);
  return fo;
}

PipelineOptions pipeline_options(const Common& c) {
  PipelineOptions po;
  po.naive = c.naive;
  return po;
}

std::string require_entry(const Common& c) {
  if (c.entry.empty()) throw UnfabError("BadArgument", "--entry is required");
  return c.entry;
}

int cmd_check(const Common& c) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  std::cout << c.file << ": ok (" << p.functions.size() << " functions)\n";
  return 0;
}

int cmd_synth(const Common& c, bool raw) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  if (!c.entry.empty()) {
    write_output(c.output, print_program(run_pipeline(p, c.entry, pipeline_options(c))));
    return 0;
  }
  Program out;
  SynthOptions so;
  so.connectGarbage = !c.naive;
  for (const auto& f : p.functions) {
    FunctionDef u = synthesize_uncomputation(f, so);
    out.put(raw ? u : cancel_dup_pairs(u));
  }
  write_output(c.output, print_program(out));
  return 0;
}

int cmd_adjoint(const Common& c) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  Deriver d(p, pipeline_options(c));
  auto [base, m] = split_key(require_entry(c));
  write_output(c.output, print_function(d.get(base, m.dagger())));
  return 0;
}

int cmd_erase(const Common& c) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  Deriver d(p, pipeline_options(c));
  auto [base, m] = split_key(require_entry(c));
  if (m.garbage || m.classicalOnly) throw UnfabError("BadArgument", "erase expects a plain or adjoint key");
  EraseResult r = erase_uncomputation(d.get(base, m), d.effect(base));
  for (const auto& dg : r.diagnostics) std::cerr << render(dg) << "\n";
  if (!r.diagnostics.empty()) return 1;
  write_output(c.output, print_function(cancel_dup_pairs(r.fn)));
  return 0;
}

int cmd_simplify(const Common& c) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  ClassicalEnv env;
  for (const auto& [k, v] : parse_args(c.args)) env["$" + k] = v;
  Program out;
  for (const auto& f : p.functions) {
    if (!c.entry.empty() && f.key() != c.entry) continue;
    out.put(simplify(f, env).fn);
  }
  if (out.functions.empty()) throw UnfabError("UnresolvedCallee", "no function named '" + c.entry + "'");
  write_output(c.output, print_program(out));
  return 0;
}

int cmd_lower(const Common& c, const std::string& emit) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  const std::string entry = require_entry(c);
  LowerResult lr = lower(run_pipeline(p, entry, pipeline_options(c)), entry, flatten_options(c));
  if (emit == "qasm") write_output(c.output, emit_qasm(lr.circuit));
  else write_output(c.output, format_report(gate_count(lr.circuit)));
  return 0;
}

int cmd_simulate(const Common& c, const std::string& input, std::uint64_t seed, const std::string& backend) {
  Program p;
  if (!load_checked(c.file, p)) return 1;
  const std::string entry = require_entry(c);
  LowerResult lr = lower(run_pipeline(p, entry, pipeline_options(c)), entry, flatten_options(c));
  SimConfig cfg;
  cfg.seed = seed;
  // Bits follow the input wire order; the header line names the output wires.
  const StateVector in = StateVector::basis(lr.flat.inputs, input);
  const SimOutcome out = backend == "circuit" ? simulate(lr.circuit, in, cfg) : simulate(lr.flat, in, cfg);
  std::ostringstream os;
  os << "# wires:";
  for (const auto& l : out.state.labels) os << " " << l;
  os << "\n" << out.state.to_string();
  for (const auto& [l, v] : out.classical) os << l << " = " << v << "\n";
  write_output(c.output, os.str());
  return 0;
}

int cmd_bench(const Common& c, const std::string& family, const std::string& range, const std::string& dir) {
  std::string entry;
  if (family == "iterate") entry = "Iterate";
  else if (family == "etareti") entry = "Etareti";
  else throw UnfabError("BadArgument", "unknown benchmark family '" + family + "'");
  const std::string path = c.file.empty() ? (std::filesystem::path(dir) / (family + ".uir")).string() : c.file;
  Program p;
  if (!load_checked(path, p)) return 1;
  auto [lo, hi] = parse_range(range);
  write_output(c.output, format_csv(bench_scaling(p, entry, c.naive, lo, hi, c.fuel)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unfab: uncomputation synthesis and lowering for a quantum SSA IR"};
  app.set_config("--config", "", "TOML file with flag values");
  app.require_subcommand(1);

  Common c;
  auto add_common = [&](CLI::App* s, bool withFile = true) {
    if (withFile) s->add_option("file", c.file, "Input .uir program")->required();
    s->add_option("--entry", c.entry, "Function key, e.g. maj or f^adj");
    s->add_option("-o,--output", c.output, "Output file (default stdout)");
    s->add_flag("--naive", c.naive, "Uncompute with plain adjoint calls, no garbage mode");
  };
  auto add_flatten = [&](CLI::App* s) {
    s->add_option("--arg", c.args, "Classical argument NAME=VALUE (repeatable)");
    s->add_option("--fuel", c.fuel, "Inlining and unrolling budget in statements");
  };

  auto* check = app.add_subcommand("check", "Parse and verify");
  check->add_option("file", c.file, "Input .uir program")->required();

  bool raw = false;
  auto* synth = app.add_subcommand("synth-uncomp", "Synthesize explicit uncomputation");
  add_common(synth);
  synth->add_flag("--raw", raw, "Skip dup/undup cancellation");

  auto* adjoint = app.add_subcommand("adjoint", "Print the adjoint of --entry");
  add_common(adjoint);

  auto* erase = app.add_subcommand("erase", "Garbage-mode variant of --entry");
  add_common(erase);

  auto* simp = app.add_subcommand("simplify", "Constant propagation, CSE and dead-code elimination");
  add_common(simp);
  simp->add_option("--arg", c.args, "Known classical value NAME=VALUE (repeatable)");

  std::string emit = "report";
  auto* lowerCmd = app.add_subcommand("lower", "Lower --entry to a circuit");
  add_common(lowerCmd);
  add_flatten(lowerCmd);
  lowerCmd->add_option("--emit", emit, "qasm or report")->check(CLI::IsMember({"qasm", "report"}));

  std::string input, backend = "ir";
  std::uint64_t seed = 0;
  auto* sim = app.add_subcommand("simulate", "Simulate --entry on a basis input");
  add_common(sim);
  add_flatten(sim);
  sim->add_option("--input", input, "Input bits, one per input wire")->required();
  sim->add_option("--seed", seed, "Measurement sampling seed");
  sim->add_option("--backend", backend, "ir or circuit")->check(CLI::IsMember({"ir", "circuit"}));

  std::string family, range = "1..10", mode = "pipeline", dir = UNFAB_PROGRAMS_DIR;
  auto* bench = app.add_subcommand("bench", "Gate counts and call census over n");
  bench->add_option("family", family, "iterate or etareti")->required();
  bench->add_option("--n", range, "N or LO..HI");
  bench->add_option("--mode", mode, "pipeline or naive")->check(CLI::IsMember({"pipeline", "naive"}));
  bench->add_option("--file", c.file, "Override the bundled fixture");
  bench->add_option("--programs", dir, "Directory holding the family fixtures");
  bench->add_option("--fuel", c.fuel, "Inlining and unrolling budget in statements");
  bench->add_option("-o,--output", c.output, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*check) return cmd_check(c);
    if (*synth) return cmd_synth(c, raw);
    if (*adjoint) return cmd_adjoint(c);
    if (*erase) return cmd_erase(c);
    if (*simp) return cmd_simplify(c);
    if (*lowerCmd) return cmd_lower(c, emit);
    if (*sim) return cmd_simulate(c, input, seed, backend);
    if (*bench) {
      c.naive = mode == "naive";
      return cmd_bench(c, family, range, dir);
    }
  } catch (const UnfabError& e) {
    std::cerr << render(e.diagnostic()) << "\n";
    return 1;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
