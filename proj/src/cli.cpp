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

#include "fthjb/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include "fthjb/simctl.hpp"

namespace fthjb {

namespace fs = std::filesystem;

SolverChoice parse_solver(const std::string& s) {
    if (s == "ftvi") return SolverChoice::ftvi;
    if (s == "ftpi") return SolverChoice::ftpi;
    if (s == "oneway") return SolverChoice::oneway;
    if (s == "vgrid") return SolverChoice::vgrid;
    throw ConfigError(fmt::format("unknown solver '{}'", s));
}

std::string to_string(SolverChoice s) {
    switch (s) {
        case SolverChoice::ftvi: return "ftvi";
        case SolverChoice::ftpi: return "ftpi";
        case SolverChoice::oneway: return "oneway";
        case SolverChoice::vgrid: return "vgrid";
    }
    return "unknown";
}

ProblemSpec RunConfig::make_spec() const { return make_problem(problem, overrides); }

RunConfig parse_run_config(const KeyValues& kv, const std::string& source) {
    static const std::vector<std::string> known = {
        "problem", "solver", "inner_solver", "schedule", "cross_tol", "round_tol", "kickrank",
        "init_ranks", "max_rank", "max_sweeps", "n_fp", "delta_max", "max_iters", "seed",
        "record_time", "out", "vgrid_pre", "vgrid_coarse", "omega"};
    const std::string prefix = "override.";
    RunConfig cfg;
    cfg.config_path = source;
    for (const auto& [k, v] : kv) {
        if (k.rfind(prefix, 0) == 0) {
            cfg.overrides[k.substr(prefix.size())] = v;
        } else if (std::find(known.begin(), known.end(), k) == known.end()) {
            throw ConfigError(fmt::format("{}: unknown key '{}'", source, k));
        }
    }
    auto it = kv.find("problem");
    if (it == kv.end()) throw ConfigError(fmt::format("{}: missing key 'problem'", source));
    cfg.problem = it->second;
    const CatalogEntry& entry = catalog_entry(cfg.problem);
    auto has = [&](const char* k) { return kv.count(k) != 0; };
    auto get = [&](const char* k) { return kv.at(k); };

    if (has("solver")) cfg.solver = parse_solver(get("solver"));
    if (has("inner_solver")) {
        const auto inner = parse_solver(get("inner_solver"));
        if (inner == SolverChoice::oneway) throw ConfigError("inner_solver cannot be oneway");
        cfg.inner = inner == SolverChoice::ftvi ? SolverKind::ftvi
                    : inner == SolverChoice::vgrid ? SolverKind::vgrid
                                                   : SolverKind::ftpi;
    }
    cfg.schedule = has("schedule") ? parse_size_list("schedule", get("schedule")) : entry.schedule;
    if (cfg.schedule.empty()) throw ConfigError("schedule is empty");
    for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
        if (cfg.schedule[i] < 2) throw ConfigError("schedule entries must be at least 2");
        if (i > 0 && cfg.schedule[i] <= cfg.schedule[i - 1]) {
            throw ConfigError("schedule must be strictly increasing");
        }
    }
    auto& sc = cfg.solver_cfg;
    auto& cc = sc.cross;
    cc.cross_tol = has("cross_tol") ? parse_double("cross_tol", get("cross_tol")) : entry.cross_tol;
    cc.round_tol = has("round_tol") ? parse_double("round_tol", get("round_tol")) : entry.round_tol;
    if (!(cc.cross_tol > 0.0) || !(cc.round_tol > 0.0)) throw ConfigError("tolerances must be positive");
    cc.max_rank = has("max_rank") ? parse_size("max_rank", get("max_rank")) : entry.max_rank;
    if (has("kickrank")) cc.kickrank = parse_size("kickrank", get("kickrank"));
    if (has("init_ranks")) cc.init_ranks = parse_size_list("init_ranks", get("init_ranks"));
    if (has("max_sweeps")) cc.max_sweeps = parse_size("max_sweeps", get("max_sweeps"));
    if (has("seed")) cc.seed = parse_u64("seed", get("seed"));
    if (has("n_fp")) sc.n_fp = parse_size("n_fp", get("n_fp"));
    if (has("delta_max")) sc.delta_max = parse_double("delta_max", get("delta_max"));
    if (has("max_iters")) sc.max_iters = parse_size("max_iters", get("max_iters"));
    if (has("record_time")) sc.record_time = parse_bool("record_time", get("record_time"));
    if (has("vgrid_pre")) sc.vgrid_pre = parse_size("vgrid_pre", get("vgrid_pre"));
    if (has("vgrid_coarse")) sc.vgrid_coarse = parse_size("vgrid_coarse", get("vgrid_coarse"));
    if (has("omega")) sc.omega = parse_double("omega", get("omega"));
    if (has("out")) cfg.out_dir = get("out");
    return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_key_values(path), path); }

namespace {

SolverKind level_kind(const RunConfig& cfg) {
    switch (cfg.solver) {
        case SolverChoice::ftvi: return SolverKind::ftvi;
        case SolverChoice::ftpi: return SolverKind::ftpi;
        case SolverChoice::vgrid: return SolverKind::vgrid;
        case SolverChoice::oneway: return cfg.inner;
    }
    return SolverKind::ftpi;
}

std::uintmax_t file_bytes(const std::string& path) { return fs::file_size(path); }

void check_compatible(const ProblemSpec& spec, const FunctionTrain& f) {
    if (f.dim() != spec.dim) {
        throw ConfigError(fmt::format("value function has {} dimensions, problem {} has {}", f.dim(), spec.name,
                                      spec.dim));
    }
    for (std::size_t i = 0; i < spec.dim; ++i) {
        const auto& g = f.core(i).grid();
        const double tol = 1e-9 * (spec.upper[i] - spec.lower[i]);
        if (std::abs(g.lower() - spec.lower[i]) > tol || std::abs(g.upper() - spec.upper[i]) > tol) {
            throw ConfigError(fmt::format("grid of dimension {} does not span the problem box", i));
        }
    }
}

}  // namespace

int cmd_solve(const RunConfig& cfg, std::ostream& log) {
    try {
        const ProblemSpec spec = cfg.make_spec();
        cfg.solver_cfg.cross.validate(spec.dim);
        fs::create_directories(cfg.out_dir);
        const auto start = std::chrono::steady_clock::now();
        FunctionTrain value = FunctionTrain::zero({NodalGrid1D::uniform(0.0, 1.0, 2)});
        std::vector<SolveDiagnostics> levels;
        bool converged = false;
        if (cfg.schedule.size() == 1 && cfg.solver != SolverChoice::oneway) {
            const auto disc = Discretization::uniform(spec, cfg.schedule.front());
            SolveResult r = cfg.solver == SolverChoice::ftvi   ? ftvi(spec, disc, cfg.solver_cfg)
                            : cfg.solver == SolverChoice::ftpi ? ftpi(spec, disc, cfg.solver_cfg)
                                                               : ftpi_vgrid(spec, disc, cfg.solver_cfg);
            value = std::move(r.value);
            converged = r.diagnostics.converged;
            levels.push_back(std::move(r.diagnostics));
        } else {
            MultigridResult r = oneway_multigrid(spec, cfg.schedule, cfg.solver_cfg, level_kind(cfg));
            value = std::move(r.value);
            converged = r.converged;
            levels = std::move(r.levels);
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const std::string value_path = (fs::path(cfg.out_dir) / "value.ft").string();
        save_ft(value_path, value);
        {
            std::ofstream diag(fs::path(cfg.out_dir) / "diagnostics.csv", std::ios::binary);
            SolveDiagnostics::write_csv_header(diag);
            for (const auto& l : levels) l.write_csv_rows(diag);
            if (!diag) throw std::runtime_error("cannot write diagnostics.csv");
        }
        bool capped = false;
        std::size_t iters = 0;
        for (const auto& l : levels) {
            capped = capped || l.rank_capped;
            iters += l.records.size();
        }
        std::ofstream summary(fs::path(cfg.out_dir) / "summary.txt", std::ios::binary);
        fmt::print(summary, "problem = {}\n", spec.name);
        fmt::print(summary, "solver = {}\n", to_string(cfg.solver));
        fmt::print(summary, "schedule = {}\n", fmt::join(cfg.schedule, ","));
        fmt::print(summary, "converged = {}\n", converged);
        fmt::print(summary, "rank_capped = {}\n", capped);
        fmt::print(summary, "iterations = {}\n", iters);
        fmt::print(summary, "ranks = {}\n", fmt::join(value.ranks(), ","));
        fmt::print(summary, "max_rank = {}\n", value.max_rank());
        fmt::print(summary, "value_bytes = {}\n", file_bytes(value_path));
        fmt::print(summary, "wall_seconds = {:.3f}\n", wall);
        if (!summary) throw std::runtime_error("cannot write summary.txt");
        fmt::print(log, "{}: {} iterations, ranks [{}], {} bytes, {:.2f} s, {}\n", spec.name, iters,
                   fmt::join(value.ranks(), ","), file_bytes(value_path), wall,
                   converged ? "converged" : "NOT converged");
        return converged ? kExitOk : kExitNotConverged;
    } catch (const std::exception& e) {
        fmt::print(log, "error: {}\n", e.what());
        return kExitError;
    }
}

std::vector<std::vector<double>> read_x0_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open {}", path));
    std::vector<std::vector<double>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_double_list(fmt::format("{}:{}", path, lineno), line));
    }
    return out;
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& log) {
    try {
        const RunConfig cfg = load_run_config(opt.problem_path);
        const ProblemSpec spec = cfg.make_spec();
        const FunctionTrain value = load_ft(opt.value_path);
        check_compatible(spec, value);
        const auto x0s = read_x0_csv(opt.x0_path);
        if (x0s.empty()) return kExitOk;
        for (const auto& x : x0s) {
            if (x.size() != spec.dim) throw ConfigError("initial condition has the wrong dimension");
        }
        const Discretization disc(value.grids());
        const double dt = opt.dt > 0.0 ? opt.dt : default_dt(spec, disc, opt.seed);
        const auto trajs = simulate_many(spec, disc, value, x0s, dt, opt.horizon, opt.seed, cfg.solver_cfg.optimizer);
        fs::create_directories(opt.out_dir);
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            const auto path = fs::path(opt.out_dir) / fmt::format("trajectory_{:03d}.csv", i);
            std::ofstream out(path, std::ios::binary);
            write_trajectory_csv(out, spec, trajs[i]);
            if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
            fmt::print(log, "{}: {} steps, {}\n", path.string(), trajs[i].times.size() - 1, to_string(trajs[i].flag));
        }
        return kExitOk;
    } catch (const std::exception& e) {
        fmt::print(log, "error: {}\n", e.what());
        return kExitError;
    }
}

int cmd_inspect(const std::string& path, std::ostream& out) {
    try {
        const FunctionTrain f = load_ft(path);
        std::vector<std::size_t> n;
        for (std::size_t i = 0; i < f.dim(); ++i) n.push_back(f.core(i).nodes());
        fmt::print(out, "d = {}\n", f.dim());
        fmt::print(out, "n = {}\n", fmt::join(n, ","));
        fmt::print(out, "ranks = {}\n", fmt::join(f.ranks(), ","));
        fmt::print(out, "bytes = {}\n", file_bytes(path));
        fmt::print(out, "norm = {:.17g}\n", ft_norm(f));
        return kExitOk;
    } catch (const std::exception& e) {
        fmt::print(std::cerr, "error: {}\n", e.what());
        return kExitError;
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Function-train dynamic programming for stochastic optimal control"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> solve_seed;
    auto* solve = app.add_subcommand("solve", "Solve a problem described by a configuration file");
    solve->add_option("--config", config_path, "Configuration file")->required();
    solve->add_option("--out", out_dir, "Output directory");
    solve->add_option("--seed", solve_seed, "Random seed for cross approximation");

    SimulateOptions sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate the closed loop from stored values");
    simulate_cmd->add_option("--value", sim.value_path, "value.ft file")->required();
    simulate_cmd->add_option("--problem", sim.problem_path, "Configuration file of the problem")->required();
    simulate_cmd->add_option("--x0", sim.x0_path, "CSV of initial states")->required();
    simulate_cmd->add_option("--out", sim.out_dir, "Output directory");
    simulate_cmd->add_option("--horizon", sim.horizon, "Time horizon");
    simulate_cmd->add_option("--dt", sim.dt, "Time step (default: half the smallest holding time)");
    simulate_cmd->add_option("--seed", sim.seed, "Noise seed");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "Print the shape, ranks and norm of a value.ft file");
    inspect->add_option("file", inspect_path, "value.ft file")->required();

    auto* problems = app.add_subcommand("problems", "List the built-in problems");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    if (solve->parsed()) {
        RunConfig cfg;
        try {
            cfg = load_run_config(config_path);
        } catch (const std::exception& e) {
            fmt::print(std::cerr, "error: {}\n", e.what());
            return kExitError;
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (solve_seed) cfg.solver_cfg.cross.seed = *solve_seed;
        return cmd_solve(cfg, std::cerr);
    }
    if (simulate_cmd->parsed()) return cmd_simulate(sim, std::cerr);
    if (inspect->parsed()) return cmd_inspect(inspect_path, std::cout);
    if (problems->parsed()) {
        for (const auto& e : problem_catalog()) {
            fmt::print("{:<12} {}\n", e.name, e.summary);
            fmt::print("{:<12} schedule {}, tolerance {:g}, max rank {}\n", "", fmt::join(e.schedule, ","),
                       e.cross_tol, e.max_rank);
            if (!e.override_keys.empty()) fmt::print("{:<12} keys {}\n", "", fmt::join(e.override_keys, ", "));
        }
        return kExitOk;
    }
    return kExitError;
}

}  // namespace fthjb
