/*
 Copyright 2026 The fthjb Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fthjb/keyvalue.hpp"
#include "fthjb/mca.hpp"

namespace fthjb {

using Overrides = KeyValues;

/// Suggested solver settings shipped with each built-in problem.
struct CatalogEntry {
    std::string name;
    std::string summary;
    std::vector<std::size_t> schedule;
    double cross_tol = 1e-5;
    double round_tol = 1e-5;
    std::size_t max_rank = 10;
    std::vector<std::string> override_keys;
};

const std::vector<CatalogEntry>& problem_catalog();
const CatalogEntry& catalog_entry(const std::string& name);

/// Built-in problem with overrides applied. Common keys: beta, u_lb, u_ub,
/// controls (points per control dimension, 0 for a box), target (on/off),
/// and lower.<state>, upper.<state>, boundary.<state>, boundary (all
/// states). Problem keys are listed in the catalog. Unknown names or keys
/// throw ConfigError.
ProblemSpec make_problem(const std::string& name, const Overrides& overrides = {});

struct Dynamics {
    std::vector<double> drift;
    std::vector<double> diffusion;
};

Dynamics eval_dynamics(const ProblemSpec& spec, std::span<const double> x, std::span<const double> u);

}  // namespace fthjb
