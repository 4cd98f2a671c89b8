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
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "fthjb/funtrain.hpp"

namespace fthjb {

using MultiIndex = std::vector<std::size_t>;

/// Black-box function of a grid node, given by per-dimension node indices.
/// Must be safe to call concurrently.
using NodeFunction = std::function<double(std::span<const std::size_t>)>;

/// A black-box evaluation returned a non-finite value.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(MultiIndex index, double value);
    const MultiIndex& index() const { return index_; }
    double value() const { return value_; }

private:
    MultiIndex index_;
    double value_;
};

struct EvalCounter {
    std::size_t unique_states_evaluated = 0;
    std::size_t total_evaluations = 0;
};

/// Memoizing wrapper around a NodeFunction. Missing values of a batch are
/// evaluated in parallel and inserted in batch order, so the cache contents
/// never depend on the thread count.
class CachedFunction {
public:
    CachedFunction(NodeFunction f, std::vector<std::size_t> shape);

    void evaluate(std::span<const MultiIndex> points, std::vector<double>& values);
    double operator()(std::span<const std::size_t> index);

    const EvalCounter& counter() const { return counter_; }
    const std::vector<std::size_t>& shape() const { return shape_; }
    /// Total number of grid nodes, as a double (may exceed 2^53 in principle).
    double grid_size() const;

private:
    std::uint64_t key(std::span<const std::size_t> index) const;

    NodeFunction f_;
    std::vector<std::size_t> shape_;
    std::vector<std::uint64_t> strides_;
    std::unordered_map<std::uint64_t, double> cache_;
    EvalCounter counter_;
};

struct CrossConfig {
    double cross_tol = 1e-6;
    double round_tol = 1e-6;
    std::size_t kickrank = 2;
    /// Interior ranks r_1..r_{d-1}, or the full chain r_0..r_d. Empty means
    /// all interior ranks start at 2.
    std::vector<std::size_t> init_ranks;
    std::size_t max_rank = 10;
    /// Cap on half-sweeps (one left-to-right or right-to-left pass each).
    std::size_t max_sweeps = 10;
    std::uint64_t seed = 42;

    /// Throws ParameterError when a field is out of range.
    void validate(std::size_t d) const;
    /// Full rank chain [1, r_1, ..., r_{d-1}, 1].
    std::vector<std::size_t> rank_chain(std::size_t d) const;
};

/// Interpolation index sets. left[k] holds r_k indices over dimensions
/// [0, k); right[k] holds r_k indices over dimensions [k, d).
struct CrossPivots {
    std::vector<std::vector<MultiIndex>> left;
    std::vector<std::vector<MultiIndex>> right;
};

struct CrossResult {
    FunctionTrain ft;
    CrossPivots pivots;
    std::size_t sweeps = 0;
    bool converged = false;
    /// Relative max-abs prediction change measured at the last half-sweep.
    double change = 0.0;
};

/// Largest rank of each bond that the grid can support:
/// min(prod_{j<k} n_j, prod_{j>=k} n_j), entry k for k in [0, d].
std::vector<std::size_t> feasible_rank_caps(const std::vector<NodalGrid1D>& grids);

/// Row indices of a nearly maximal-volume r x r submatrix of the tall
/// matrix a (m x r, m >= r). Entries of a * a(rows)^{-1} end up bounded by
/// tol in magnitude.
std::vector<std::size_t> maxvol(const Eigen::MatrixXd& a, double tol = 1.05,
                                std::size_t max_iters = 100);

/// Alternating maxvol cross interpolation on the nodal grid. Ranks above the
/// feasible caps are lowered. When warm is given, its right index sets seed
/// the first sweep and are extended at random if the ranks grew.
CrossResult cross_approx(CachedFunction& f, const std::vector<NodalGrid1D>& grids,
                         std::vector<std::size_t> ranks, double cross_tol,
                         std::size_t max_sweeps = 10, std::uint64_t seed = 42,
                         const CrossPivots* warm = nullptr);

FunctionTrain cross_approx(const NodeFunction& f, const std::vector<NodalGrid1D>& grids,
                           std::vector<std::size_t> ranks, double cross_tol,
                           EvalCounter* counter = nullptr, std::size_t max_sweeps = 10,
                           std::uint64_t seed = 42);

struct RankAdaptResult {
    FunctionTrain ft;
    /// Cross converged and no rank is held at max_rank.
    bool converged = false;
    /// Some rank was still growing when it reached max_rank.
    bool rank_capped = false;
    EvalCounter counter;
    std::size_t cross_calls = 0;
    /// Rank estimates used for the last cross approximation.
    std::vector<std::size_t> estimate;
};

/// Cross approximation followed by rounding, kicking every rank that the
/// rounding did not reduce until all ranks drop below their estimates.
/// Ranks stuck at max_rank end the loop with converged = false.
RankAdaptResult ft_rankadapt(CachedFunction& f, const CrossConfig& cfg,
                             const std::vector<NodalGrid1D>& grids);
RankAdaptResult ft_rankadapt(const NodeFunction& f, const CrossConfig& cfg,
                             const std::vector<NodalGrid1D>& grids);

}  // namespace fthjb
