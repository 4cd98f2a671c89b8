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
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fthjb {

/// Thrown when a function is evaluated outside its box.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Thrown when two objects that must share grids/ranks do not.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for invalid numerical parameters (tolerances, counts).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Strictly increasing node set of one coordinate. The first and last nodes
/// are the bounds of that coordinate.
class NodalGrid1D {
public:
    explicit NodalGrid1D(std::vector<double> nodes);

    /// n equispaced nodes on [lower, upper], endpoints included.
    static NodalGrid1D uniform(double lower, double upper, std::size_t n);

    std::size_t size() const { return nodes_.size(); }
    double lower() const { return nodes_.front(); }
    double upper() const { return nodes_.back(); }
    double node(std::size_t k) const { return nodes_[k]; }
    std::span<const double> nodes() const { return nodes_; }

    /// Position of x as (left node index, weight of the right node).
    /// Nodes themselves map to weight exactly 0 (or the last node to the
    /// last cell with weight exactly 1).
    struct Cell {
        std::size_t left;
        double weight;
    };
    Cell locate(double x) const;

    /// Index k with node(k) == x up to rel_tol * local spacing, or npos.
    std::size_t find_node(double x, double rel_tol = 1e-12) const;

    /// Tridiagonal L2 mass matrix of the hat basis: diagonal and
    /// superdiagonal (length n-1).
    void mass_matrix(std::vector<double>& diag, std::vector<double>& upper) const;

    friend bool operator==(const NodalGrid1D&, const NodalGrid1D&) = default;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<double> nodes_;
};

/// Piecewise-linear function on a nodal grid.
class UnivariateNodal {
public:
    UnivariateNodal(NodalGrid1D grid, std::vector<double> coeffs);

    double operator()(double x) const;
    const NodalGrid1D& grid() const { return grid_; }
    std::span<const double> coeffs() const { return coeffs_; }

private:
    NodalGrid1D grid_;
    std::vector<double> coeffs_;
};

/// One core: an r_left x r_right array of univariate nodal functions
/// sharing a grid. Coefficients are stored row-major as
/// [r_left][r_right][n], so entry (a, b) is a contiguous run of n values.
class FtCore {
public:
    FtCore(NodalGrid1D grid, std::size_t r_left, std::size_t r_right,
           std::vector<double> coeffs);
    /// Zero-filled core.
    FtCore(NodalGrid1D grid, std::size_t r_left, std::size_t r_right);

    const NodalGrid1D& grid() const { return grid_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nodes() const { return grid_.size(); }

    double& at(std::size_t a, std::size_t b, std::size_t l) {
        return coeffs_[(a * cols_ + b) * grid_.size() + l];
    }
    double at(std::size_t a, std::size_t b, std::size_t l) const {
        return coeffs_[(a * cols_ + b) * grid_.size() + l];
    }
    std::span<const double> fiber(std::size_t a, std::size_t b) const {
        return {coeffs_.data() + (a * cols_ + b) * grid_.size(), grid_.size()};
    }
    std::span<const double> coeffs() const { return coeffs_; }
    std::span<double> coeffs() { return coeffs_; }

    UnivariateNodal entry(std::size_t a, std::size_t b) const;

    /// out (rows x cols, row-major) = core matrix at position x.
    void eval_matrix(double x, std::span<double> out) const;

private:
    NodalGrid1D grid_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> coeffs_;
};

/// Function train f(x) = F_1(x_1) F_2(x_2) ... F_d(x_d) with nodal cores.
/// Immutable after construction; all arithmetic returns new values.
class FunctionTrain {
public:
    explicit FunctionTrain(std::vector<FtCore> cores);

    static FunctionTrain constant(std::vector<NodalGrid1D> grids, double value);
    static FunctionTrain zero(std::vector<NodalGrid1D> grids) {
        return constant(std::move(grids), 0.0);
    }

    std::size_t dim() const { return cores_.size(); }
    const FtCore& core(std::size_t i) const { return cores_[i]; }
    std::span<const FtCore> cores() const { return cores_; }
    /// [r_0, ..., r_d] with r_0 = r_d = 1.
    std::vector<std::size_t> ranks() const;
    std::size_t max_rank() const;
    double mean_rank() const;
    std::vector<NodalGrid1D> grids() const;
    /// Number of stored coefficients.
    std::size_t num_params() const;

    /// Evaluation at an arbitrary point of the box. Throws DomainError
    /// outside the box.
    double operator()(std::span<const double> x) const;
    double operator()(std::initializer_list<double> x) const {
        return (*this)(std::span<const double>(x.begin(), x.size()));
    }

    /// Evaluation at a grid node given by per-dimension node indices.
    double at_node(std::span<const std::size_t> index) const;

private:
    std::vector<FtCore> cores_;
};

/// Sum; interior ranks add.
FunctionTrain ft_add(const FunctionTrain& f, const FunctionTrain& g);
/// c * f with unchanged ranks.
FunctionTrain ft_scale(const FunctionTrain& f, double c);
/// f - g, same ranks as ft_add.
FunctionTrain ft_sub(const FunctionTrain& f, const FunctionTrain& g);
/// L2 inner product over the box, exact for piecewise-linear cores.
double ft_inner(const FunctionTrain& f, const FunctionTrain& g);
/// sqrt(ft_inner(f, f)), evaluated through an orthogonalization sweep.
double ft_norm(const FunctionTrain& f);
/// Recompression with ||f - result|| <= eps ||f|| in L2.
FunctionTrain ft_round(const FunctionTrain& f, double eps);

/// Evaluates a train at the center node of an axis stencil and at every
/// node that differs from the center in exactly one coordinate, reusing
/// prefix/suffix products. Buffers are kept between calls.
class AxisNeighborEvaluator {
public:
    explicit AxisNeighborEvaluator(const FunctionTrain& f);

    void set_center(std::span<const std::size_t> index);
    double center() const { return center_value_; }
    /// Value at the center with coordinate `dim` replaced by node `node`.
    double along(std::size_t dim, std::size_t node) const;

private:
    const FunctionTrain* f_;
    std::vector<std::size_t> index_;
    // prefix_[k] = F_1 ... F_k (row vector, length r_k), suffix_[k] =
    // F_{k+1} ... F_d (column vector, length r_k).
    std::vector<std::vector<double>> prefix_;
    std::vector<std::vector<double>> suffix_;
    double center_value_ = 0.0;
};

// Binary serialization: "FTRN", u32 version, u64 d, per dimension u64 n and
// n float64 nodes, d+1 u64 ranks, then each core's coefficients in storage
// order. All little-endian.
inline constexpr std::uint32_t kFtFormatVersion = 1;

void write_ft(std::ostream& out, const FunctionTrain& f);
FunctionTrain read_ft(std::istream& in);
void save_ft(const std::string& path, const FunctionTrain& f);
FunctionTrain load_ft(const std::string& path);

/// Thrown on malformed serialized data.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace fthjb
