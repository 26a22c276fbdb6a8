/*
 * Copyright 2026 The richbll Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RICHBLL_VERIFY_SUITE_HPP_
#define RICHBLL_VERIFY_SUITE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace richbll {

struct GateResult {
  std::string name;
  bool hard = true;  // informational gates never fail a suite
  bool passed = false;
  std::string summary;
  nlohmann::json measured;
  double seconds = 0.0;
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  /// Mutation hook: scales L(0, 0) by (1 + perturbation) in the factored route
  /// of the equivalence gate. Zero in normal runs.
  double factor_perturbation = 0.0;
};

/// Kernel-space vs factored predictive covariance on 100 random instances.
GateResult check_equivalence(const SuiteOptions& opts);

/// Smallest eigenvalue of S^B - S^BLL on the same instances.
GateResult check_psd_dominance(const SuiteOptions& opts);

/// gram_btb floor, subsample determinism, and predictive_cov symmetry / diagonal sign.
GateResult check_transform_invariants(const SuiteOptions& opts);
GateResult check_posterior_invariants(const SuiteOptions& opts);

/// Spectral error of the least-squares map against a 64x larger reference sample.
GateResult check_projection_rate(const SuiteOptions& opts);

/// Subsampled posterior error vs k, and its sensitivity to doubling N.
GateResult check_subsample_rate(const SuiteOptions& opts);

/// Sketched hidden Gram error vs q, and sketched B^T B at q = 8r.
GateResult check_sketch_fidelity(const SuiteOptions& opts);

/// Central finite differences against param_gradient on three architectures.
GateResult check_gradients(const SuiteOptions& opts);

/// Informational: empirical subsampling error against both concentration bounds.
GateResult check_alternative_bound(const SuiteOptions& opts);

struct SuiteReport {
  std::uint64_t seed = 0;
  std::vector<GateResult> gates;

  bool hard_gates_passed() const;
  const GateResult& gate(const std::string& name) const;
  nlohmann::json to_json() const;
};

SuiteReport run_verify_suite(const SuiteOptions& opts = {});

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);

}  // namespace richbll

#endif  // RICHBLL_VERIFY_SUITE_HPP_
