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
#include <optional>
#include <string>
#include <vector>

#include "fthjb/dpsolve.hpp"
#include "fthjb/keyvalue.hpp"
#include "fthjb/problems.hpp"

namespace fthjb {

enum class SolverChoice { ftvi, ftpi, oneway, vgrid };

SolverChoice parse_solver(const std::string& s);
std::string to_string(SolverChoice s);

/// Contents of a solve configuration file.
struct RunConfig {
    std::string config_path;
    std::string problem;
    Overrides overrides;
    SolverChoice solver = SolverChoice::ftpi;
    /// Level solver for `oneway`.
    SolverKind inner = SolverKind::ftpi;
    std::vector<std::size_t> schedule;
    SolverConfig solver_cfg;
    std::string out_dir = ".";

    /// Builds the problem named in the configuration.
    ProblemSpec make_spec() const;
};

/// Recognized keys: problem, solver (ftvi|ftpi|oneway|vgrid), inner_solver,
/// schedule, cross_tol, round_tol, kickrank, init_ranks, max_rank,
/// max_sweeps, n_fp, delta_max, max_iters, seed, record_time, out,
/// vgrid_pre, vgrid_coarse, omega and override.<key> for problem overrides.
/// Missing solver settings fall back to the catalog entry of the problem.
RunConfig parse_run_config(const KeyValues& kv, const std::string& source = "<config>");
RunConfig load_run_config(const std::string& path);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// Writes value.ft, diagnostics.csv and summary.txt into cfg.out_dir.
int cmd_solve(const RunConfig& cfg, std::ostream& log);

struct SimulateOptions {
    std::string value_path;
    std::string problem_path;
    std::string x0_path;
    std::string out_dir = ".";
    double horizon = 20.0;
    /// Non-positive means default_dt.
    double dt = 0.0;
    std::uint64_t seed = 0;
};

/// Initial conditions, one comma-separated state per line.
std::vector<std::vector<double>> read_x0_csv(const std::string& path);

int cmd_simulate(const SimulateOptions& opt, std::ostream& log);
int cmd_inspect(const std::string& path, std::ostream& out);

/// Entry point of the command-line tool.
int run_cli(int argc, char** argv);

}  // namespace fthjb
