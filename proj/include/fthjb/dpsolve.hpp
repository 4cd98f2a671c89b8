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
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "fthjb/crossadapt.hpp"
#include "fthjb/funtrain.hpp"
#include "fthjb/mca.hpp"

namespace fthjb {

/// Control minimization settings for box control spaces.
struct OptimizerConfig {
    std::size_t max_steps = 100;
    /// Stop when the projected step is below this fraction of the box width.
    double step_tol = 1e-10;
    /// Finite-difference step as a fraction of the box width.
    double fd_step = 1e-6;
};

struct MinResult {
    double value = 0.0;
    std::vector<double> control;
};

/// Thrown when no start of the control search produced a finite value.
class OptimizerError : public std::runtime_error {
public:
    explicit OptimizerError(std::vector<double> x);
    const std::vector<double>& state() const { return x_; }

private:
    std::vector<double> x_;
};

/// Minimizes `f` over the control space: enumeration for finite sets,
/// projected quasi-Newton from the 3^du lattice of lower/middle/upper
/// starts for boxes. Ties go to the lexicographically smallest control.
MinResult minimize_controls(const ControlSpace& space, const OptimizerConfig& opt,
                            const std::function<double(std::span<const double>)>& f);

/// Bellman right-hand sides at the nodes of one grid for a fixed value
/// function. Neighbor values of a node are computed once in set_state and
/// reused for every control. One instance per thread.
class NodeBellman {
public:
    NodeBellman(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& value,
                OptimizerConfig opt = {});

    void set_state(std::span<const std::size_t> index);
    bool terminal() const { return builder_.state_terminal(); }
    double terminal_value() const { return builder_.state_terminal_value(); }
    std::span<const double> state() const { return builder_.state_point(); }

    /// g(x,u) dt + gamma * E[v(next)], terminal moves paying psi.
    double rhs(std::span<const double> u);
    /// gamma * E[v(next)] with terminal moves contributing zero; the stencil
    /// used is available through stencil().
    double homogeneous_expectation(std::span<const double> u);
    MinResult minimize();
    const TransitionStencil& stencil() const { return stencil_; }

private:
    double expectation(bool homogeneous) const;

    const ProblemSpec& spec_;
    const FunctionTrain& value_;
    OptimizerConfig opt_;
    StencilBuilder builder_;
    AxisNeighborEvaluator eval_;
    TransitionStencil stencil_;
    double center_ = 0.0;
    std::vector<double> neighbor_;
};

/// Thread-safe facade over NodeBellman for one-off queries.
class BellmanContext {
public:
    BellmanContext(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& value,
                   OptimizerConfig opt = {});

    double rhs(std::span<const std::size_t> index, std::span<const double> u) const;
    MinResult min(std::span<const std::size_t> index) const;

    const ProblemSpec& spec() const { return spec_; }
    const Discretization& discretization() const { return disc_; }
    const FunctionTrain& value() const { return value_; }
    const OptimizerConfig& optimizer() const { return opt_; }

private:
    const ProblemSpec& spec_;
    const Discretization& disc_;
    const FunctionTrain& value_;
    OptimizerConfig opt_;
};

/// Policy defined implicitly as the argmin of the Bellman right-hand side
/// under a fixed value function, cached per node.
class ImplicitPolicy {
public:
    ImplicitPolicy(const ProblemSpec& spec, const Discretization& disc, FunctionTrain value,
                   OptimizerConfig opt = {});

    std::vector<double> control(std::span<const std::size_t> index) const;
    std::size_t cached_nodes() const;
    const Discretization& discretization() const { return disc_; }
    const FunctionTrain& value() const { return value_; }

private:
    const ProblemSpec& spec_;
    const Discretization& disc_;
    FunctionTrain value_;
    OptimizerConfig opt_;
    std::vector<std::uint64_t> strides_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::uint64_t, std::vector<double>> cache_;
};

struct IterationRecord {
    std::size_t iter = 0;
    std::size_t level_n = 0;
    double norm = 0.0;
    double delta = 0.0;
    std::size_t max_rank = 0;
    double mean_rank = 0.0;
    std::size_t unique_evals = 0;
    double frac_evals = 0.0;
    double wall_ms = 0.0;
};

struct SolveDiagnostics {
    std::vector<IterationRecord> records;
    bool converged = false;
    /// Some rank adaptation ended at max_rank.
    bool rank_capped = false;

    static void write_csv_header(std::ostream& out);
    void write_csv_rows(std::ostream& out) const;
};

struct SolverConfig {
    CrossConfig cross;
    /// Stop when ||v_k - v_{k-1}||^2 < delta_max. Non-positive means
    /// 1e-6 times the box volume.
    double delta_max = 0.0;
    std::size_t max_iters = 1000;
    std::size_t n_fp = 10;
    OptimizerConfig optimizer;
    /// Fill wall_ms; off by default so diagnostics are reproducible.
    bool record_time = false;
    /// V-grid settings.
    std::size_t vgrid_pre = 2;
    std::size_t vgrid_coarse = 10;
    double omega = 1.0;
    /// Called after each iteration.
    std::function<void(const IterationRecord&)> on_iteration;
};

struct SolveResult {
    FunctionTrain value;
    SolveDiagnostics diagnostics;
};

double box_volume(const ProblemSpec& spec);
double resolved_delta_max(const SolverConfig& cfg, const ProblemSpec& spec);

/// FT value iteration from `init` (default: zero function of rank 1).
SolveResult ftvi(const ProblemSpec& spec, const Discretization& disc, const SolverConfig& cfg,
                 std::optional<FunctionTrain> init = std::nullopt);

/// Optimistic policy iteration with cfg.n_fp policy-fixed sub-iterations.
SolveResult ftpi(const ProblemSpec& spec, const Discretization& disc, const SolverConfig& cfg,
                 std::optional<FunctionTrain> init = std::nullopt);

/// One application of the policy-fixed operator T_mu to v, rank adapted.
RankAdaptResult apply_policy(const ProblemSpec& spec, const Discretization& disc,
                             const ImplicitPolicy& policy, const FunctionTrain& v,
                             const CrossConfig& cfg, const OptimizerConfig& opt = {});

/// Restriction to every other node (fine grids must have odd node counts).
FunctionTrain prolong(const FunctionTrain& fine);
/// Refinement onto grids containing the current nodes.
FunctionTrain interp(const FunctionTrain& coarse, const std::vector<NodalGrid1D>& fine);
/// Cores evaluated at the nodes of arbitrary grids inside the same box.
FunctionTrain resample(const FunctionTrain& f, const std::vector<NodalGrid1D>& grids);

struct VgridResult {
    FunctionTrain value;
    /// L2 norm of the fine residual T_mu(v) - v formed in the last cycle,
    /// before the coarse correction.
    double residual_norm = 0.0;
    std::size_t unique_evals = 0;
    bool rank_capped = false;
};

struct VgridConfig {
    std::size_t pre_smooth = 2;
    std::size_t coarse_iters = 10;
    double omega = 1.0;
    std::size_t cycles = 1;
    /// Scale the restricted residual by the ratio of coarse to fine holding
    /// times so that the coarse error equation approximates the fine one.
    bool scale_residual = true;
};

/// Two-level correction scheme for the policy-fixed equation on `fine`.
/// The coarse grid must be the every-other-node subgrid.
VgridResult vgrid_two_level(const ProblemSpec& spec, const Discretization& fine,
                            const Discretization& coarse, const ImplicitPolicy& policy,
                            FunctionTrain v, const VgridConfig& vcfg, const CrossConfig& cfg,
                            const OptimizerConfig& opt = {});

/// Optimistic policy iteration whose policy evaluation is one V-cycle.
SolveResult ftpi_vgrid(const ProblemSpec& spec, const Discretization& disc, const SolverConfig& cfg,
                       std::optional<FunctionTrain> init = std::nullopt);

enum class SolverKind { ftvi, ftpi, vgrid };

struct MultigridResult {
    FunctionTrain value;
    std::vector<SolveDiagnostics> levels;
    bool converged = false;
};

/// Solves coarse to fine, warm starting each level from the previous one.
MultigridResult oneway_multigrid(const ProblemSpec& spec, const std::vector<std::size_t>& schedule,
                                 const SolverConfig& cfg, SolverKind kind);

}  // namespace fthjb
