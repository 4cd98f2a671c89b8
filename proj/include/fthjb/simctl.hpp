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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fthjb/dpsolve.hpp"
#include "fthjb/funtrain.hpp"
#include "fthjb/mca.hpp"

namespace fthjb {

enum class TerminalFlag { target, exited, horizon };

std::string to_string(TerminalFlag f);

struct Trajectory {
    std::vector<double> times;
    /// One row per sample; the final row may lie outside the box on exit.
    std::vector<std::vector<double>> states;
    /// Control applied from each sample; the final row repeats the last one.
    std::vector<std::vector<double>> controls;
    TerminalFlag flag = TerminalFlag::horizon;
};

/// Feedback control at an arbitrary in-box state. On grid nodes this is the
/// nodal Bellman argmin; elsewhere the stencil is built at x itself and the
/// value function is interpolated at the neighbors.
std::vector<double> policy_eval(const FunctionTrain& value, const ProblemSpec& spec, const Discretization& disc,
                                std::span<const double> x, const OptimizerConfig& opt = {});

/// Half the smallest holding time over a seeded sample of states and
/// controls.
double default_dt(const ProblemSpec& spec, const Discretization& disc, std::uint64_t seed = 0,
                  std::size_t samples = 256);

/// Euler-Maruyama closed loop. Noise is drawn from std::mt19937_64 seeded
/// with `seed`, mapped to doubles with 53-bit resolution and made Gaussian
/// with the Box-Muller transform, so paths are identical across platforms.
Trajectory simulate(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& value,
                    std::span<const double> x0, double dt, double horizon, std::uint64_t seed,
                    const OptimizerConfig& opt = {});

/// Independent trajectories in parallel; trajectory i uses seed + i.
std::vector<Trajectory> simulate_many(const ProblemSpec& spec, const Discretization& disc,
                                      const FunctionTrain& value, const std::vector<std::vector<double>>& x0s,
                                      double dt, double horizon, std::uint64_t seed,
                                      const OptimizerConfig& opt = {});

/// Columns t, states, controls; the terminal flag goes in a trailing
/// "# terminal=<flag>" line.
void write_trajectory_csv(std::ostream& out, const ProblemSpec& spec, const Trajectory& traj);

}  // namespace fthjb
