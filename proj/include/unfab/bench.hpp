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

// Scaling harness for the recursive benchmark families.

#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "unfab/lower.hpp"
#include "unfab/pipeline.hpp"

namespace unfab {

struct BenchRow {
  int n = 0;
  GateReport gates;
  std::map<std::string, std::int64_t> census;        // pipeline output, dynamic
  std::map<std::string, std::int64_t> sourceCensus;  // source program, dynamic
  std::string error;                                 // set when the row failed
};

inline std::string census_str(const std::map<std::string, std::int64_t>& c) {
  std::string s;
  for (const auto& [k, v] : c) s += (s.empty() ? "" : ";") + k + "=" + std::to_string(v);
  return s;
}

/// One row per n in [lo, hi]. `entry` takes a classical parameter `$n`.
/// Fuel exhaustion is recorded in the row instead of aborting the sweep.
inline std::vector<BenchRow> bench_scaling(const Program& src, const std::string& entry, bool naive, int lo, int hi,
                                           std::int64_t fuel = 1000000) {
  PipelineOptions po;
  po.naive = naive;
  const Program explicitProgram = run_pipeline(src, entry, po);
  std::vector<BenchRow> rows;
  for (int n = lo; n <= hi; ++n) {
    BenchRow r;
    r.n = n;
    try {
      FlattenOptions fo;
      fo.fuel = fuel;
      fo.classicalArgs["n"] = n;
      LowerResult lr = lower(explicitProgram, entry, fo);
      r.gates = gate_count(lr.circuit);
      r.census = lr.flat.census;
      r.sourceCensus = SourceCensus(src, fuel).run(entry, {{"n", n}});
    } catch (const UnfabError& e) {
      r.error = e.code();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::string format_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "n,single,cx,gates,qubits,callCensus\n";
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      os << r.n << ",,,,," << r.error << "\n";
      continue;
    }
    os << r.n << "," << r.gates.single << "," << r.gates.cx << "," << r.gates.total << "," << r.gates.qubits << ","
       << census_str(r.census) << "\n";
  }
  return os.str();
}

}  // namespace unfab
