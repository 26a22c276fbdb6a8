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


#include "doctest.h"
#include "richbll/verify_suite.hpp"

#include <cmath>

using namespace richbll;

TEST_CASE("slope and median helpers") {
  CHECK(loglog_slope({1.0, 2.0, 4.0}, {8.0, 4.0, 2.0}) == doctest::Approx(-1.0));
  CHECK(loglog_slope({10.0, 1000.0}, {1.0, 10.0}) == doctest::Approx(0.5));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS(median({}));
  CHECK_THROWS(loglog_slope({1.0}, {1.0}));
}

TEST_CASE("exact gates") {
  const SuiteOptions opts;
  CHECK(check_equivalence(opts).passed);
  CHECK(check_psd_dominance(opts).passed);
  CHECK(check_transform_invariants(opts).passed);
  CHECK(check_posterior_invariants(opts).passed);
  CHECK(check_gradients(opts).passed);
}

TEST_CASE("a perturbed factor fails the equivalence gate") {
  SuiteOptions opts;
  opts.factor_perturbation = 1e-3;
  const GateResult g = check_equivalence(opts);
  CHECK_FALSE(g.passed);
  CHECK(g.measured["max_relative_gap"].get<double>() > 1e-4);
}

TEST_CASE("suite report") {
  SuiteReport r;
  r.gates.push_back({"a", true, true, "", {}, 0.0});
  r.gates.push_back({"b", false, false, "", {}, 0.0});
  CHECK(r.hard_gates_passed());
  r.gates.push_back({"c", true, false, "", {}, 0.0});
  CHECK_FALSE(r.hard_gates_passed());
  CHECK(r.gate("c").hard);
  CHECK_THROWS_AS(r.gate("missing"), std::out_of_range);
  CHECK(r.to_json()["gates"].size() == 3);
}
