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

// Dense statevector over labeled wires. Bit i of an amplitude index is the
// value of wire i; printed labels list wire 0 first.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "unfab/diag.hpp"

namespace unfab {

using cplx = std::complex<double>;

struct SimConfig {
  int maxQubits = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;
};

/// (wire, required value) pairs.
using Controls = std::vector<std::pair<int, bool>>;

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class StateVector {
 public:
  std::vector<std::string> labels;
  std::vector<cplx> amp{cplx(1, 0)};

  static StateVector basis(const std::vector<std::string>& ls, const std::string& bits) {
    if (bits.size() != ls.size())
      throw UnfabError("BadInput", "input has " + std::to_string(bits.size()) + " bits, expected " +
                                       std::to_string(ls.size()));
    StateVector s;
    s.labels = ls;
    s.amp.assign(std::size_t{1} << ls.size(), cplx(0, 0));
    std::size_t idx = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] != '0' && bits[i] != '1') throw UnfabError("BadInput", "input bits must be 0 or 1");
      if (bits[i] == '1') idx |= std::size_t{1} << i;
    }
    s.amp[idx] = 1;
    return s;
  }
  static StateVector zero(const std::vector<std::string>& ls) { return basis(ls, std::string(ls.size(), '0')); }

  /// Haar-ish random state: normalized complex Gaussian amplitudes.
  static StateVector random(const std::vector<std::string>& ls, std::mt19937_64& rng) {
    StateVector s;
    s.labels = ls;
    s.amp.resize(std::size_t{1} << ls.size());
    std::normal_distribution<double> nd;
    for (auto& a : s.amp) a = cplx(nd(rng), nd(rng));
    s.normalize();
    return s;
  }

  int num_wires() const { return static_cast<int>(labels.size()); }
  int wire(const std::string& l) const {
    for (int i = 0; i < num_wires(); ++i) if (labels[i] == l) return i;
    return -1;
  }
  int wire_or_throw(const std::string& l) const {
    int w = wire(l);
    if (w < 0) throw InternalError("no wire labeled '" + l + "'");
    return w;
  }

  double norm() const {
    double n = 0;
    for (const auto& a : amp) n += std::norm(a);
    return std::sqrt(n);
  }
  void normalize() {
    double n = norm();
    if (n > 0) for (auto& a : amp) a /= n;
  }

  void add_wire(const std::string& l, bool one = false, int maxQubits = 30) {
    if (num_wires() + 1 > maxQubits)
      throw UnfabError("BudgetExceeded", "simulation needs more than " + std::to_string(maxQubits) + " qubits");
    const std::size_t n = amp.size();
    std::vector<cplx> out(2 * n, cplx(0, 0));
    for (std::size_t i = 0; i < n; ++i) out[i + (one ? n : 0)] = amp[i];
    amp = std::move(out);
    labels.push_back(l);
  }

  /// Weight of the component where wire w has value !v.
  double weight_off(int w, bool v) const {
    const std::size_t bit = std::size_t{1} << w;
    double p = 0;
    for (std::size_t i = 0; i < amp.size(); ++i)
      if (((i & bit) != 0) != v) p += std::norm(amp[i]);
    return p;
  }

  /// Drops wire w, asserting it holds |v>. Returns false if it does not.
  bool remove_wire(int w, bool v, double tol) {
    if (std::sqrt(weight_off(w, v)) > tol) return false;
    project_out(w, v);
    return true;
  }

  void project_out(int w, bool v) {
    const std::size_t bit = std::size_t{1} << w;
    std::vector<cplx> out(amp.size() / 2);
    for (std::size_t i = 0; i < amp.size(); ++i) {
      if (((i & bit) != 0) != v) continue;
      const std::size_t lo = i & (bit - 1);
      const std::size_t hi = (i >> (w + 1)) << w;
      out[lo | hi] = amp[i];
    }
    amp = std::move(out);
    labels.erase(labels.begin() + w);
  }

  bool controls_hold(std::size_t i, const Controls& cs) const {
    for (const auto& [w, v] : cs)
      if (((i >> w) & 1) != static_cast<std::size_t>(v)) return false;
    return true;
  }

  void apply_x(int w, const Controls& cs = {}) {
    const std::size_t bit = std::size_t{1} << w;
    for (std::size_t i = 0; i < amp.size(); ++i)
      if (!(i & bit) && controls_hold(i, cs)) std::swap(amp[i], amp[i | bit]);
  }
  void apply_h(int w, const Controls& cs = {}) {
    const std::size_t bit = std::size_t{1} << w;
    const double r = 1 / std::numbers::sqrt2;
    for (std::size_t i = 0; i < amp.size(); ++i) {
      if ((i & bit) || !controls_hold(i, cs)) continue;
      cplx a = amp[i], b = amp[i | bit];
      amp[i] = r * (a + b);
      amp[i | bit] = r * (a - b);
    }
  }
  /// Multiplies every amplitude satisfying the controls by e^{i theta}.
  void apply_phase(double theta, const Controls& cs = {}) {
    const cplx f = std::polar(1.0, theta);
    for (std::size_t i = 0; i < amp.size(); ++i)
      if (controls_hold(i, cs)) amp[i] *= f;
  }

  /// Measures wire w in the computational basis; collapses and renormalizes.
  bool measure(int w, std::mt19937_64& rng, bool remove) {
    const double p1 = weight_off(w, false);
    const bool r = uniform01(rng) < p1;
    const std::size_t bit = std::size_t{1} << w;
    for (std::size_t i = 0; i < amp.size(); ++i)
      if (((i & bit) != 0) != r) amp[i] = 0;
    normalize();
    if (remove) project_out(w, r);
    return r;
  }

  /// Copy with wires reordered to `order` (a permutation of labels).
  StateVector permuted(const std::vector<std::string>& order) const {
    if (order.size() != labels.size()) throw UnfabError("WireMismatch", "wire sets differ");
    std::vector<int> src;
    for (const auto& l : order) {
      int w = wire(l);
      if (w < 0) throw UnfabError("WireMismatch", "wire '" + l + "' missing");
      src.push_back(w);
    }
    StateVector s;
    s.labels = order;
    s.amp.assign(amp.size(), cplx(0, 0));
    for (std::size_t i = 0; i < amp.size(); ++i) {
      std::size_t j = 0;
      for (std::size_t k = 0; k < src.size(); ++k)
        if ((i >> src[k]) & 1) j |= std::size_t{1} << k;
      s.amp[j] = amp[i];
    }
    return s;
  }

  std::string bit_label(std::size_t i) const {
    std::string s;
    for (int k = 0; k < num_wires(); ++k) s += ((i >> k) & 1) ? '1' : '0';
    return s;
  }

  /// Nonzero amplitudes as `label: re+im i`, sorted by label.
  std::string to_string(double tol = 1e-12) const {
    std::vector<std::pair<std::string, cplx>> rows;
    for (std::size_t i = 0; i < amp.size(); ++i)
      if (std::abs(amp[i]) > tol) rows.push_back({bit_label(i), amp[i]});
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::ostringstream os;
    os << std::setprecision(6) << std::fixed;
    for (const auto& [l, a] : rows) {
      double re = std::abs(a.real()) < 5e-7 ? 0.0 : a.real();
      double im = std::abs(a.imag()) < 5e-7 ? 0.0 : a.imag();
      os << l << ": " << re << (im < 0 ? "-" : "+") << std::abs(im) << "i\n";
    }
    return os.str();
  }
};

/// |<a|b>| >= 1 - tol, after aligning b's wires to a's.
inline bool equiv_up_to_phase(const StateVector& a, const StateVector& b, double tol = 1e-9) {
  StateVector bb = b.permuted(a.labels);
  cplx ip(0, 0);
  for (std::size_t i = 0; i < a.amp.size(); ++i) ip += std::conj(a.amp[i]) * bb.amp[i];
  return std::abs(ip) >= 1 - tol;
}

/// Exact amplitude comparison (basis-state checks).
inline bool equal_exact(const StateVector& a, const StateVector& b, double tol = 1e-12) {
  StateVector bb = b.permuted(a.labels);
  for (std::size_t i = 0; i < a.amp.size(); ++i)
    if (std::abs(a.amp[i] - bb.amp[i]) > tol) return false;
  return true;
}

struct ForgetOracleFailure {
  std::string message;
};

/// Erases `xs` from the basis labels. Fails when some assignment of the
/// remaining wires has nonzero amplitude for two different values of xs.
inline std::variant<StateVector, ForgetOracleFailure> forget_oracle(const StateVector& s,
                                                                    const std::vector<std::string>& xs,
                                                                    double tol = 1e-9) {
  std::vector<int> ws;
  for (const auto& x : xs) {
    int w = s.wire(x);
    if (w < 0) throw UnfabError("WireMismatch", "forget of unknown wire '" + x + "'");
    ws.push_back(w);
  }
  std::vector<std::string> rest;
  std::vector<int> restW;
  for (int i = 0; i < s.num_wires(); ++i)
    if (std::find(ws.begin(), ws.end(), i) == ws.end()) {
      rest.push_back(s.labels[i]);
      restW.push_back(i);
    }
  StateVector out;
  out.labels = rest;
  out.amp.assign(std::size_t{1} << rest.size(), cplx(0, 0));
  std::vector<std::optional<std::size_t>> seen(out.amp.size());
  for (std::size_t i = 0; i < s.amp.size(); ++i) {
    if (std::abs(s.amp[i]) <= tol) continue;
    std::size_t r = 0, x = 0;
    for (std::size_t k = 0; k < restW.size(); ++k) if ((i >> restW[k]) & 1) r |= std::size_t{1} << k;
    for (std::size_t k = 0; k < ws.size(); ++k) if ((i >> ws[k]) & 1) x |= std::size_t{1} << k;
    if (seen[r] && *seen[r] != x) {
      return ForgetOracleFailure{"basis state |" + out.bit_label(r) + "> of the remaining wires carries two values of the forgotten wires"};
    }
    seen[r] = x;
    out.amp[r] = s.amp[i];
  }
  return out;
}

}  // namespace unfab
