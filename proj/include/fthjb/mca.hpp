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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fthjb/funtrain.hpp"

namespace fthjb {

enum class Boundary { absorbing, reflecting, periodic };

std::string to_string(Boundary b);
/// Parses "absorbing", "reflecting" or "periodic"; throws ParameterError.
Boundary parse_boundary(const std::string& s);

/// Either a finite list of control vectors or a box.
struct ControlSpace {
    std::vector<std::vector<double>> finite;
    std::vector<double> lower;
    std::vector<double> upper;

    bool is_finite() const { return !finite.empty(); }
    std::size_t dim() const { return is_finite() ? finite.front().size() : lower.size(); }
    bool contains(std::span<const double> u, double tol = 1e-12) const;

    static ControlSpace box(std::vector<double> lower, std::vector<double> upper);
    static ControlSpace set(std::vector<std::vector<double>> points);
    /// Tensor lattice with `per_dim` equispaced points on each side of a box,
    /// in lexicographic order.
    static ControlSpace lattice(const std::vector<double>& lower, const std::vector<double>& upper,
                                std::size_t per_dim);
};

using DriftFn = std::function<void(std::span<const double> x, std::span<const double> u, std::span<double> b)>;
using DiffusionFn = std::function<void(std::span<const double> x, std::span<double> a)>;
using StageCostFn = std::function<double(std::span<const double> x, std::span<const double> u)>;
using StateFn = std::function<double(std::span<const double> x)>;
using PredicateFn = std::function<bool(std::span<const double> x)>;

/// Continuous problem: dx = B(x,u) dt + D dw with diagonal covariance
/// A = diag(A_ii(x)), discounted by exp(-beta t).
struct ProblemSpec {
    std::string name;
    std::vector<std::string> state_names;
    std::vector<std::string> control_names;
    std::size_t dim = 0;
    std::size_t control_dim = 0;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<Boundary> boundary;
    DriftFn drift;
    DiffusionFn diffusion;
    StageCostFn stage_cost;
    StateFn terminal_cost;
    /// Optional region where the process stops and pays terminal_cost.
    PredicateFn target;
    double beta = 0.1;
    ControlSpace controls;

    /// Throws ParameterError on inconsistent fields.
    void validate() const;
    bool in_target(std::span<const double> x) const { return target && target(x); }
};

/// Tensor-product grid with uniform spacing per dimension.
class Discretization {
public:
    explicit Discretization(std::vector<NodalGrid1D> grids);
    static Discretization uniform(const ProblemSpec& spec, std::span<const std::size_t> n);
    static Discretization uniform(const ProblemSpec& spec, std::size_t n);

    std::size_t dim() const { return grids_.size(); }
    const NodalGrid1D& grid(std::size_t i) const { return grids_[i]; }
    const std::vector<NodalGrid1D>& grids() const { return grids_; }
    std::vector<std::size_t> shape() const;
    double step(std::size_t i) const { return steps_[i]; }
    std::span<const double> steps() const { return steps_; }
    double min_step() const { return hmin_; }
    double num_nodes() const;
    void point(std::span<const std::size_t> index, std::span<double> x) const;

private:
    std::vector<NodalGrid1D> grids_;
    std::vector<double> steps_;
    double hmin_ = 0.0;
};

/// Dynamics with zero drift and zero diffusion at a state.
class DegenerateDynamicsError : public std::runtime_error {
public:
    DegenerateDynamicsError(std::vector<double> x);
    const std::vector<double>& state() const { return x_; }

private:
    std::vector<double> x_;
};

enum class MoveKind { node, folded, terminal };

struct StencilMove {
    std::size_t dim = 0;
    int dir = 0;
    double prob = 0.0;
    MoveKind kind = MoveKind::node;
    /// Destination node along `dim` (node moves).
    std::size_t node = 0;
    /// Value paid on entering a terminal state.
    double terminal_value = 0.0;
};

/// Upwind transition data at one (state, control). Moves are ordered
/// (dim 0, -), (dim 0, +), (dim 1, -), ... Folded moves carry zero
/// probability; their mass is included in self_prob.
struct TransitionStencil {
    std::vector<std::size_t> center;
    bool terminal = false;
    double terminal_value = 0.0;
    std::vector<StencilMove> moves;
    double self_prob = 0.0;
    double dt = 0.0;
    double gamma = 0.0;
    double cost = 0.0;
};

/// True when the node lies on an absorbing face or in the target region.
bool is_terminal_node(const ProblemSpec& spec, const Discretization& disc,
                      std::span<const std::size_t> index, std::span<const double> x);

/// Reusable stencil assembly with scratch buffers. Not thread-safe; use one
/// builder per thread.
class StencilBuilder {
public:
    StencilBuilder(const ProblemSpec& spec, const Discretization& disc);

    /// Fixes the state; evaluates the diffusion once and the terminal test.
    void set_state(std::span<const std::size_t> index);
    bool state_terminal() const { return terminal_; }
    double state_terminal_value() const { return terminal_value_; }
    std::span<const double> state_point() const { return x_; }
    /// Moves of the current state with kinds and destinations filled in
    /// and probabilities unset.
    const TransitionStencil& state_moves() const { return template_; }

    /// Stencil of the current state under control u; one drift evaluation.
    void build(std::span<const double> u, TransitionStencil& out);

    /// Stencil at an arbitrary in-box point. Neighbors are x +- h_i e_i;
    /// `points[m]` receives the coordinates of move m for node moves.
    void build_at(std::span<const double> x, std::span<const double> u, TransitionStencil& out,
                  std::vector<std::vector<double>>& points);

    const ProblemSpec& spec() const { return spec_; }
    const Discretization& discretization() const { return disc_; }

private:
    void weights(std::span<const double> x, std::span<const double> u, TransitionStencil& out);

    const ProblemSpec& spec_;
    const Discretization& disc_;
    std::vector<std::size_t> index_;
    std::vector<double> x_;
    std::vector<double> a_;
    std::vector<double> b_;
    std::vector<double> y_;
    bool terminal_ = false;
    double terminal_value_ = 0.0;
    TransitionStencil template_;
};

TransitionStencil build_stencil(const ProblemSpec& spec, const Discretization& disc,
                                std::span<const std::size_t> index, std::span<const double> u);

struct ConsistencyReport {
    std::vector<double> drift;            // B(x,u)
    std::vector<double> diffusion;        // A_ii(x)
    std::vector<double> mean_rate;        // E[dxi] / dt
    std::vector<double> second_moment;    // E[dxi_i^2] / dt
    std::vector<double> covariance;       // (E[dxi_i^2] - E[dxi_i]^2) / dt
    std::vector<double> residual;         // second_moment - A_ii
    std::vector<double> residual_bound;   // |B_i| h_i
    double dt = 0.0;
};

/// Moments of the chain increment at an interior node.
ConsistencyReport consistency_check(const ProblemSpec& spec, const Discretization& disc,
                                    std::span<const std::size_t> index, std::span<const double> u);

}  // namespace fthjb
