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

#include "fthjb/funtrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/core.h>

namespace fthjb {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// NodalGrid1D
// ---------------------------------------------------------------------------

NodalGrid1D::NodalGrid1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) {
        throw ShapeError("nodal grid needs at least two nodes");
    }
    for (std::size_t k = 0; k + 1 < nodes_.size(); ++k) {
        if (!(nodes_[k] < nodes_[k + 1])) {
            throw ShapeError("nodal grid must be strictly increasing");
        }
    }
}

NodalGrid1D NodalGrid1D::uniform(double lower, double upper, std::size_t n) {
    if (n < 2 || !(lower < upper)) {
        throw ShapeError(fmt::format("invalid uniform grid [{}, {}] with {} nodes", lower, upper, n));
    }
    std::vector<double> nodes(n);
    const double step = (upper - lower) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
        nodes[k] = lower + step * static_cast<double>(k);
    }
    nodes.back() = upper;
    return NodalGrid1D(std::move(nodes));
}

NodalGrid1D::Cell NodalGrid1D::locate(double x) const {
    if (!(x >= lower() && x <= upper())) {
        throw DomainError(fmt::format("point {} outside [{}, {}]", x, lower(), upper()));
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    if (it == nodes_.end()) {
        return {nodes_.size() - 2, 1.0};
    }
    const std::size_t right = static_cast<std::size_t>(it - nodes_.begin());
    const std::size_t left = right - 1;
    const double w = (x - nodes_[left]) / (nodes_[right] - nodes_[left]);
    return {left, w};
}

std::size_t NodalGrid1D::find_node(double x, double rel_tol) const {
    if (x < lower() || x > upper()) {
        return npos;
    }
    const Cell c = locate(x);
    const double spacing = nodes_[c.left + 1] - nodes_[c.left];
    if (std::abs(x - nodes_[c.left]) <= rel_tol * spacing) {
        return c.left;
    }
    if (std::abs(nodes_[c.left + 1] - x) <= rel_tol * spacing) {
        return c.left + 1;
    }
    return npos;
}

void NodalGrid1D::mass_matrix(std::vector<double>& diag, std::vector<double>& upper) const {
    const std::size_t n = nodes_.size();
    diag.assign(n, 0.0);
    upper.assign(n - 1, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double h = nodes_[k + 1] - nodes_[k];
        diag[k] += h / 3.0;
        diag[k + 1] += h / 3.0;
        upper[k] = h / 6.0;
    }
}

// ---------------------------------------------------------------------------
// UnivariateNodal / FtCore
// ---------------------------------------------------------------------------

UnivariateNodal::UnivariateNodal(NodalGrid1D grid, std::vector<double> coeffs)
    : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != grid_.size()) {
        throw ShapeError("coefficient count does not match grid size");
    }
}

double UnivariateNodal::operator()(double x) const {
    const auto c = grid_.locate(x);
    if (c.weight == 0.0) {
        return coeffs_[c.left];
    }
    if (c.weight == 1.0) {
        return coeffs_[c.left + 1];
    }
    return (1.0 - c.weight) * coeffs_[c.left] + c.weight * coeffs_[c.left + 1];
}

FtCore::FtCore(NodalGrid1D grid, std::size_t r_left, std::size_t r_right,
               std::vector<double> coeffs)
    : grid_(std::move(grid)), rows_(r_left), cols_(r_right), coeffs_(std::move(coeffs)) {
    if (rows_ == 0 || cols_ == 0) {
        throw ShapeError("core ranks must be positive");
    }
    if (coeffs_.size() != rows_ * cols_ * grid_.size()) {
        throw ShapeError(fmt::format("core coefficient block has {} entries, expected {}",
                                     coeffs_.size(), rows_ * cols_ * grid_.size()));
    }
}

FtCore::FtCore(NodalGrid1D grid, std::size_t r_left, std::size_t r_right)
    : FtCore(grid, r_left, r_right, std::vector<double>(r_left * r_right * grid.size(), 0.0)) {}

UnivariateNodal FtCore::entry(std::size_t a, std::size_t b) const {
    auto f = fiber(a, b);
    return UnivariateNodal(grid_, std::vector<double>(f.begin(), f.end()));
}

void FtCore::eval_matrix(double x, std::span<double> out) const {
    const auto c = grid_.locate(x);
    const std::size_t n = grid_.size();
    const double w = c.weight;
    for (std::size_t ab = 0; ab < rows_ * cols_; ++ab) {
        const double* f = coeffs_.data() + ab * n;
        if (w == 0.0) {
            out[ab] = f[c.left];
        } else if (w == 1.0) {
            out[ab] = f[c.left + 1];
        } else {
            out[ab] = (1.0 - w) * f[c.left] + w * f[c.left + 1];
        }
    }
}

// ---------------------------------------------------------------------------
// FunctionTrain
// ---------------------------------------------------------------------------

FunctionTrain::FunctionTrain(std::vector<FtCore> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) {
        throw ShapeError("function train needs at least one core");
    }
    if (cores_.front().rows() != 1 || cores_.back().cols() != 1) {
        throw ShapeError("boundary ranks must be 1");
    }
    for (std::size_t k = 0; k + 1 < cores_.size(); ++k) {
        if (cores_[k].cols() != cores_[k + 1].rows()) {
            throw ShapeError(fmt::format("rank mismatch between cores {} and {}", k, k + 1));
        }
    }
}

FunctionTrain FunctionTrain::constant(std::vector<NodalGrid1D> grids, double value) {
    std::vector<FtCore> cores;
    cores.reserve(grids.size());
    for (std::size_t k = 0; k < grids.size(); ++k) {
        const double c = (k == 0) ? value : 1.0;
        const std::size_t n = grids[k].size();
        cores.emplace_back(std::move(grids[k]), 1, 1, std::vector<double>(n, c));
    }
    return FunctionTrain(std::move(cores));
}

std::vector<std::size_t> FunctionTrain::ranks() const {
    std::vector<std::size_t> r(cores_.size() + 1);
    r[0] = 1;
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        r[k + 1] = cores_[k].cols();
    }
    return r;
}

std::size_t FunctionTrain::max_rank() const {
    std::size_t m = 1;
    for (const auto& c : cores_) {
        m = std::max(m, c.cols());
    }
    return m;
}

double FunctionTrain::mean_rank() const {
    if (cores_.size() < 2) {
        return 1.0;
    }
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < cores_.size(); ++k) {
        s += static_cast<double>(cores_[k].cols());
    }
    return s / static_cast<double>(cores_.size() - 1);
}

std::vector<NodalGrid1D> FunctionTrain::grids() const {
    std::vector<NodalGrid1D> g;
    g.reserve(cores_.size());
    for (const auto& c : cores_) {
        g.push_back(c.grid());
    }
    return g;
}

std::size_t FunctionTrain::num_params() const {
    std::size_t s = 0;
    for (const auto& c : cores_) {
        s += c.coeffs().size();
    }
    return s;
}

double FunctionTrain::operator()(std::span<const double> x) const {
    if (x.size() != cores_.size()) {
        throw ShapeError(fmt::format("point has {} coordinates, train has {}", x.size(), cores_.size()));
    }
    std::vector<double> v{1.0};
    std::vector<double> mat;
    std::vector<double> next;
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        const auto& core = cores_[k];
        mat.resize(core.rows() * core.cols());
        core.eval_matrix(x[k], mat);
        next.assign(core.cols(), 0.0);
        for (std::size_t a = 0; a < core.rows(); ++a) {
            const double va = v[a];
            const double* row = mat.data() + a * core.cols();
            for (std::size_t b = 0; b < core.cols(); ++b) {
                next[b] += va * row[b];
            }
        }
        v.swap(next);
    }
    return v[0];
}

double FunctionTrain::at_node(std::span<const std::size_t> index) const {
    if (index.size() != cores_.size()) {
        throw ShapeError("node index has wrong dimension");
    }
    std::vector<double> v{1.0};
    std::vector<double> next;
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        const auto& core = cores_[k];
        const std::size_t n = core.nodes();
        const std::size_t l = index[k];
        if (l >= n) {
            throw DomainError(fmt::format("node index {} out of range {}", l, n));
        }
        next.assign(core.cols(), 0.0);
        const double* c = core.coeffs().data();
        for (std::size_t a = 0; a < core.rows(); ++a) {
            const double va = v[a];
            for (std::size_t b = 0; b < core.cols(); ++b) {
                next[b] += va * c[(a * core.cols() + b) * n + l];
            }
        }
        v.swap(next);
    }
    return v[0];
}

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

namespace {

void require_same_grids(const FunctionTrain& f, const FunctionTrain& g) {
    if (f.dim() != g.dim()) {
        throw ShapeError(fmt::format("dimension mismatch: {} vs {}", f.dim(), g.dim()));
    }
    for (std::size_t k = 0; k < f.dim(); ++k) {
        if (!(f.core(k).grid() == g.core(k).grid())) {
            throw ShapeError(fmt::format("grid mismatch in dimension {}", k));
        }
    }
}

}  // namespace

FunctionTrain ft_add(const FunctionTrain& f, const FunctionTrain& g) {
    require_same_grids(f, g);
    const std::size_t d = f.dim();
    if (d == 1) {
        const auto& cf = f.core(0);
        const auto& cg = g.core(0);
        std::vector<double> c(cf.coeffs().begin(), cf.coeffs().end());
        for (std::size_t l = 0; l < c.size(); ++l) {
            c[l] += cg.coeffs()[l];
        }
        return FunctionTrain({FtCore(cf.grid(), 1, 1, std::move(c))});
    }
    std::vector<FtCore> cores;
    cores.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto& cf = f.core(k);
        const auto& cg = g.core(k);
        const std::size_t n = cf.nodes();
        // First core concatenates columns, last core rows, interior cores
        // are block diagonal.
        const std::size_t rows = (k == 0) ? 1 : cf.rows() + cg.rows();
        const std::size_t cols = (k == d - 1) ? 1 : cf.cols() + cg.cols();
        const std::size_t g_row0 = (k == 0) ? 0 : cf.rows();
        const std::size_t g_col0 = (k == d - 1) ? 0 : cf.cols();
        FtCore out(cf.grid(), rows, cols);
        for (std::size_t a = 0; a < cf.rows(); ++a) {
            for (std::size_t b = 0; b < cf.cols(); ++b) {
                auto src = cf.fiber(a, b);
                std::copy(src.begin(), src.end(), out.coeffs().begin() + (a * cols + b) * n);
            }
        }
        for (std::size_t a = 0; a < cg.rows(); ++a) {
            for (std::size_t b = 0; b < cg.cols(); ++b) {
                auto src = cg.fiber(a, b);
                std::copy(src.begin(), src.end(),
                          out.coeffs().begin() + ((g_row0 + a) * cols + g_col0 + b) * n);
            }
        }
        cores.push_back(std::move(out));
    }
    return FunctionTrain(std::move(cores));
}

FunctionTrain ft_scale(const FunctionTrain& f, double c) {
    std::vector<FtCore> cores(f.cores().begin(), f.cores().end());
    for (auto& v : cores.front().coeffs()) {
        v *= c;
    }
    return FunctionTrain(std::move(cores));
}

FunctionTrain ft_sub(const FunctionTrain& f, const FunctionTrain& g) {
    return ft_add(f, ft_scale(g, -1.0));
}

double ft_inner(const FunctionTrain& f, const FunctionTrain& g) {
    require_same_grids(f, g);
    // W[a][c] accumulates the contraction over the leading dimensions.
    std::vector<double> w{1.0};
    std::size_t wf = 1, wg = 1;
    std::vector<double> diag, upper, mg, y;
    for (std::size_t k = 0; k < f.dim(); ++k) {
        const auto& cf = f.core(k);
        const auto& cg = g.core(k);
        const std::size_t n = cf.nodes();
        cf.grid().mass_matrix(diag, upper);
        // mg = M applied to every fiber of g's core.
        mg.assign(cg.coeffs().size(), 0.0);
        for (std::size_t cd = 0; cd < cg.rows() * cg.cols(); ++cd) {
            const double* src = cg.coeffs().data() + cd * n;
            double* dst = mg.data() + cd * n;
            for (std::size_t l = 0; l < n; ++l) {
                double s = diag[l] * src[l];
                if (l > 0) s += upper[l - 1] * src[l - 1];
                if (l + 1 < n) s += upper[l] * src[l + 1];
                dst[l] = s;
            }
        }
        // y[b][c][l] = sum_a w[a][c] * F[a][b][l]
        const std::size_t rb = cf.cols(), rc = cg.rows(), rd = cg.cols();
        y.assign(rb * rc * n, 0.0);
        for (std::size_t a = 0; a < wf; ++a) {
            for (std::size_t c = 0; c < rc; ++c) {
                const double wac = w[a * wg + c];
                if (wac == 0.0) continue;
                for (std::size_t b = 0; b < rb; ++b) {
                    const double* src = cf.coeffs().data() + (a * rb + b) * n;
                    double* dst = y.data() + (b * rc + c) * n;
                    for (std::size_t l = 0; l < n; ++l) dst[l] += wac * src[l];
                }
            }
        }
        // w'[b][d] = sum_c sum_l y[b][c][l] * mg[c][d][l]
        std::vector<double> next(rb * rd, 0.0);
        for (std::size_t b = 0; b < rb; ++b) {
            for (std::size_t c = 0; c < rc; ++c) {
                const double* yv = y.data() + (b * rc + c) * n;
                for (std::size_t dd = 0; dd < rd; ++dd) {
                    const double* mv = mg.data() + (c * rd + dd) * n;
                    double s = 0.0;
                    for (std::size_t l = 0; l < n; ++l) s += yv[l] * mv[l];
                    next[b * rd + dd] += s;
                }
            }
        }
        w.swap(next);
        wf = rb;
        wg = rd;
    }
    return w[0];
}

// ---------------------------------------------------------------------------
// Rounding
// ---------------------------------------------------------------------------

namespace {

// Cholesky factor of the tridiagonal mass matrix M = L L^T, with L lower
// bidiagonal: diagonal d, subdiagonal e.
struct MassFactor {
    std::vector<double> d;
    std::vector<double> e;

    explicit MassFactor(const NodalGrid1D& grid) {
        std::vector<double> diag, upper;
        grid.mass_matrix(diag, upper);
        const std::size_t n = diag.size();
        d.resize(n);
        e.resize(n - 1);
        d[0] = std::sqrt(diag[0]);
        for (std::size_t l = 0; l + 1 < n; ++l) {
            e[l] = upper[l] / d[l];
            d[l + 1] = std::sqrt(diag[l + 1] - e[l] * e[l]);
        }
    }

    // c <- L^T c
    void apply_lt(double* c, std::size_t n) const {
        for (std::size_t l = 0; l < n; ++l) {
            c[l] = d[l] * c[l] + (l + 1 < n ? e[l] * c[l + 1] : 0.0);
        }
    }
    // c <- L^{-T} c
    void solve_lt(double* c, std::size_t n) const {
        c[n - 1] /= d[n - 1];
        for (std::size_t l = n - 1; l-- > 0;) {
            c[l] = (c[l] - e[l] * c[l + 1]) / d[l];
        }
    }
};

// Core as a 3-tensor T[a][l][b] held in an Eigen matrix through unfoldings.
// Left unfolding: row a*n + l, column b. Right unfolding: row a, column
// l*rb + b. Both are views of the same data ordering (a, l, b).
struct Tensor3 {
    std::size_t ra = 0, n = 0, rb = 0;
    std::vector<double> data;  // (a, l, b) row-major

    double& operator()(std::size_t a, std::size_t l, std::size_t b) { return data[(a * n + l) * rb + b]; }

    Matrix left_unfold() const {
        Matrix m(ra * n, rb);
        for (std::size_t i = 0; i < ra * n; ++i)
            for (std::size_t b = 0; b < rb; ++b) m(i, b) = data[i * rb + b];
        return m;
    }
    Matrix right_unfold() const {
        Matrix m(ra, n * rb);
        for (std::size_t a = 0; a < ra; ++a)
            for (std::size_t j = 0; j < n * rb; ++j) m(a, j) = data[a * n * rb + j];
        return m;
    }
    static Tensor3 from_left(const Matrix& m, std::size_t ra, std::size_t n) {
        Tensor3 t{ra, n, static_cast<std::size_t>(m.cols()), {}};
        t.data.resize(ra * n * t.rb);
        for (std::size_t i = 0; i < ra * n; ++i)
            for (std::size_t b = 0; b < t.rb; ++b) t.data[i * t.rb + b] = m(i, b);
        return t;
    }
    static Tensor3 from_right(const Matrix& m, std::size_t n, std::size_t rb) {
        Tensor3 t{static_cast<std::size_t>(m.rows()), n, rb, {}};
        t.data.resize(t.ra * n * rb);
        for (std::size_t a = 0; a < t.ra; ++a)
            for (std::size_t j = 0; j < n * rb; ++j) t.data[a * n * rb + j] = m(a, j);
        return t;
    }
};

Tensor3 weighted_tensor(const FtCore& core, const MassFactor& mf) {
    const std::size_t n = core.nodes();
    Tensor3 t{core.rows(), n, core.cols(), std::vector<double>(core.coeffs().size())};
    std::vector<double> fib(n);
    for (std::size_t a = 0; a < core.rows(); ++a) {
        for (std::size_t b = 0; b < core.cols(); ++b) {
            auto src = core.fiber(a, b);
            std::copy(src.begin(), src.end(), fib.begin());
            mf.apply_lt(fib.data(), n);
            for (std::size_t l = 0; l < n; ++l) t(a, l, b) = fib[l];
        }
    }
    return t;
}

FtCore unweighted_core(const Tensor3& t, const NodalGrid1D& grid, const MassFactor& mf) {
    FtCore core(grid, t.ra, t.rb);
    const std::size_t n = t.n;
    std::vector<double> fib(n);
    for (std::size_t a = 0; a < t.ra; ++a) {
        for (std::size_t b = 0; b < t.rb; ++b) {
            for (std::size_t l = 0; l < n; ++l) fib[l] = t.data[(a * n + l) * t.rb + b];
            mf.solve_lt(fib.data(), n);
            for (std::size_t l = 0; l < n; ++l) core.at(a, b, l) = fib[l];
        }
    }
    return core;
}

// Right-to-left orthogonalization: cores 1..d-1 get orthonormal right
// unfoldings and the norm moves into core 0.
void orthogonalize_right(std::vector<Tensor3>& t) {
    for (std::size_t k = t.size() - 1; k > 0; --k) {
        Matrix m = t[k].right_unfold();  // ra x (n rb)
        Eigen::HouseholderQR<Matrix> qr(m.transpose());
        const Eigen::Index rnew = std::min<Eigen::Index>(m.rows(), m.cols());
        Matrix q = qr.householderQ() * Matrix::Identity(m.cols(), rnew);
        Matrix r = qr.matrixQR().topRows(rnew).triangularView<Eigen::Upper>();
        // m = r^T q^T
        t[k] = Tensor3::from_right(q.transpose(), t[k].n, t[k].rb);
        Matrix prev = t[k - 1].left_unfold() * r.transpose();
        t[k - 1] = Tensor3::from_left(prev, t[k - 1].ra, t[k - 1].n);
    }
}

double frobenius(const Tensor3& t) {
    return Eigen::Map<const Eigen::VectorXd>(t.data.data(), static_cast<Eigen::Index>(t.data.size())).norm();
}

}  // namespace

double ft_norm(const FunctionTrain& f) {
    // Computed from the orthogonalized train rather than ft_inner(f, f), so
    // norms of small differences of large functions keep their accuracy.
    std::vector<Tensor3> t;
    t.reserve(f.dim());
    for (std::size_t k = 0; k < f.dim(); ++k) {
        t.push_back(weighted_tensor(f.core(k), MassFactor(f.core(k).grid())));
    }
    orthogonalize_right(t);
    return frobenius(t[0]);
}

FunctionTrain ft_round(const FunctionTrain& f, double eps) {
    if (!(eps > 0.0)) {
        throw ParameterError(fmt::format("rounding tolerance must be positive, got {}", eps));
    }
    const std::size_t d = f.dim();
    if (d == 1) {
        return f;
    }
    // Work in coordinates where the L2 norm of the function equals the
    // Frobenius norm of the coefficient train: c~ = L^T c with M = L L^T.
    std::vector<MassFactor> factors;
    std::vector<Tensor3> t;
    factors.reserve(d);
    t.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        factors.emplace_back(f.core(k).grid());
        t.push_back(weighted_tensor(f.core(k), factors.back()));
    }

    orthogonalize_right(t);
    const double norm = frobenius(t[0]);
    const double delta = eps * norm / std::sqrt(static_cast<double>(d - 1));

    // Left-to-right truncation.
    for (std::size_t k = 0; k + 1 < d; ++k) {
        Matrix m = t[k].left_unfold();
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        Eigen::Index keep = s.size();
        double tail2 = 0.0;
        while (keep > 1) {
            const double next = tail2 + s(keep - 1) * s(keep - 1);
            if (std::sqrt(next) > delta) break;
            tail2 = next;
            --keep;
        }
        Matrix u = svd.matrixU().leftCols(keep);
        Matrix sv = s.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();
        t[k] = Tensor3::from_left(u, t[k].ra, t[k].n);
        Matrix next = sv * t[k + 1].right_unfold();
        t[k + 1] = Tensor3::from_right(next, t[k + 1].n, t[k + 1].rb);
    }

    std::vector<FtCore> cores;
    cores.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        cores.push_back(unweighted_core(t[k], f.core(k).grid(), factors[k]));
    }
    return FunctionTrain(std::move(cores));
}

// ---------------------------------------------------------------------------
// AxisNeighborEvaluator
// ---------------------------------------------------------------------------

AxisNeighborEvaluator::AxisNeighborEvaluator(const FunctionTrain& f)
    : f_(&f), index_(f.dim()), prefix_(f.dim() + 1), suffix_(f.dim() + 1) {
    const auto r = f.ranks();
    for (std::size_t k = 0; k <= f.dim(); ++k) {
        prefix_[k].assign(r[k], 0.0);
        suffix_[k].assign(r[k], 0.0);
    }
    prefix_[0][0] = 1.0;
    suffix_[f.dim()][0] = 1.0;
}

void AxisNeighborEvaluator::set_center(std::span<const std::size_t> index) {
    const std::size_t d = f_->dim();
    std::copy(index.begin(), index.end(), index_.begin());
    for (std::size_t k = 0; k < d; ++k) {
        const auto& core = f_->core(k);
        const std::size_t n = core.nodes();
        const std::size_t l = index_[k];
        const double* c = core.coeffs().data();
        auto& out = prefix_[k + 1];
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t a = 0; a < core.rows(); ++a) {
            const double va = prefix_[k][a];
            for (std::size_t b = 0; b < core.cols(); ++b) out[b] += va * c[(a * core.cols() + b) * n + l];
        }
    }
    for (std::size_t k = d; k-- > 0;) {
        const auto& core = f_->core(k);
        const std::size_t n = core.nodes();
        const std::size_t l = index_[k];
        const double* c = core.coeffs().data();
        auto& out = suffix_[k];
        for (std::size_t a = 0; a < core.rows(); ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < core.cols(); ++b) s += c[(a * core.cols() + b) * n + l] * suffix_[k + 1][b];
            out[a] = s;
        }
    }
    center_value_ = prefix_[d][0];
}

double AxisNeighborEvaluator::along(std::size_t dim, std::size_t node) const {
    const auto& core = f_->core(dim);
    const std::size_t n = core.nodes();
    const double* c = core.coeffs().data();
    double s = 0.0;
    for (std::size_t a = 0; a < core.rows(); ++a) {
        const double va = prefix_[dim][a];
        if (va == 0.0) continue;
        double t = 0.0;
        for (std::size_t b = 0; b < core.cols(); ++b) t += c[(a * core.cols() + b) * n + node] * suffix_[dim + 1][b];
        s += va * t;
    }
    return s;
}

}  // namespace fthjb
