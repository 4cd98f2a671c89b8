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

#include "fthjb/crossadapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <set>

#include <fmt/core.h>
#include <fmt/ranges.h>

#include "fthjb/parallel.hpp"

namespace fthjb {

EvaluationError::EvaluationError(MultiIndex index, double value)
    : std::runtime_error(fmt::format("non-finite value {} at node [{}]", value, fmt::join(index, ", "))),
      index_(std::move(index)),
      value_(value) {}

// ---------------------------------------------------------------------------
// CachedFunction
// ---------------------------------------------------------------------------

CachedFunction::CachedFunction(NodeFunction f, std::vector<std::size_t> shape)
    : f_(std::move(f)), shape_(std::move(shape)), strides_(shape_.size()) {
    std::uint64_t s = 1;
    for (std::size_t k = shape_.size(); k-- > 0;) {
        strides_[k] = s;
        if (shape_[k] != 0 && s > std::numeric_limits<std::uint64_t>::max() / shape_[k]) {
            throw ShapeError("grid too large for 64-bit node keys");
        }
        s *= shape_[k];
    }
}

double CachedFunction::grid_size() const {
    double s = 1.0;
    for (auto n : shape_) s *= static_cast<double>(n);
    return s;
}

std::uint64_t CachedFunction::key(std::span<const std::size_t> index) const {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < index.size(); ++i) k += strides_[i] * index[i];
    return k;
}

void CachedFunction::evaluate(std::span<const MultiIndex> points, std::vector<double>& values) {
    values.assign(points.size(), 0.0);
    counter_.total_evaluations += points.size();
    std::vector<std::size_t> missing;
    std::vector<std::uint64_t> keys(points.size());
    {
        std::set<std::uint64_t> pending;
        for (std::size_t i = 0; i < points.size(); ++i) {
            keys[i] = key(points[i]);
            auto it = cache_.find(keys[i]);
            if (it != cache_.end()) {
                values[i] = it->second;
            } else if (pending.insert(keys[i]).second) {
                missing.push_back(i);
            }
        }
    }
    std::vector<double> fresh(missing.size());
    parallel_for(missing.size(), [&](std::size_t j) { fresh[j] = f_(points[missing[j]]); });
    for (std::size_t j = 0; j < missing.size(); ++j) {
        if (!std::isfinite(fresh[j])) {
            throw EvaluationError(points[missing[j]], fresh[j]);
        }
        cache_.emplace(keys[missing[j]], fresh[j]);
    }
    counter_.unique_states_evaluated += missing.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
        values[i] = cache_.at(keys[i]);
    }
}

double CachedFunction::operator()(std::span<const std::size_t> index) {
    MultiIndex p(index.begin(), index.end());
    std::vector<double> v;
    evaluate(std::span<const MultiIndex>(&p, 1), v);
    return v[0];
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void CrossConfig::validate(std::size_t d) const {
    if (!(cross_tol > 0.0)) throw ParameterError("cross_tol must be positive");
    if (!(round_tol > 0.0)) throw ParameterError("round_tol must be positive");
    if (kickrank < 1) throw ParameterError("kickrank must be at least 1");
    if (max_rank < 1) throw ParameterError("max_rank must be at least 1");
    if (max_sweeps < 2) throw ParameterError("max_sweeps must be at least 2");
    const auto r = rank_chain(d);
    for (std::size_t k = 1; k < d; ++k) {
        if (r[k] < 1) throw ParameterError("initial ranks must be positive");
        if (r[k] > max_rank) {
            throw ParameterError(fmt::format("initial rank {} exceeds max_rank {}", r[k], max_rank));
        }
    }
}

std::vector<std::size_t> CrossConfig::rank_chain(std::size_t d) const {
    std::vector<std::size_t> r(d + 1, std::min<std::size_t>(2, max_rank));
    r.front() = r.back() = 1;
    if (init_ranks.size() == d + 1) {
        r = init_ranks;
        r.front() = r.back() = 1;
    } else if (init_ranks.size() + 1 == d) {
        for (std::size_t k = 1; k < d; ++k) r[k] = init_ranks[k - 1];
    } else if (!init_ranks.empty()) {
        throw ParameterError(fmt::format("init_ranks has {} entries for dimension {}", init_ranks.size(), d));
    }
    return r;
}

std::vector<std::size_t> feasible_rank_caps(const std::vector<NodalGrid1D>& grids) {
    const std::size_t d = grids.size();
    const std::size_t big = std::numeric_limits<std::size_t>::max() / 4;
    std::vector<std::size_t> left(d + 1, 1), right(d + 1, 1);
    for (std::size_t k = 0; k < d; ++k) left[k + 1] = std::min(big, left[k] * grids[k].size());
    for (std::size_t k = d; k-- > 0;) right[k] = std::min(big, right[k + 1] * grids[k].size());
    std::vector<std::size_t> caps(d + 1);
    for (std::size_t k = 0; k <= d; ++k) caps[k] = std::min(left[k], right[k]);
    return caps;
}

// ---------------------------------------------------------------------------
// Cross approximation
// ---------------------------------------------------------------------------

namespace {

using Eigen::MatrixXd;

// Portable bounded draw (std distributions differ between libraries).
std::size_t draw(std::mt19937_64& rng, std::size_t bound) {
    return static_cast<std::size_t>(rng() % bound);
}

// Picks `count` distinct candidates (a, b) with a < na, b < nb, keeping
// every entry of `keep` first.
std::vector<std::pair<std::size_t, std::size_t>> pick_pairs(std::mt19937_64& rng, std::size_t na,
                                                            std::size_t nb, std::size_t count,
                                                            std::vector<std::pair<std::size_t, std::size_t>> keep) {
    std::set<std::pair<std::size_t, std::size_t>> seen(keep.begin(), keep.end());
    if (keep.size() > count) keep.resize(count);
    const std::size_t total = na * nb;
    if (count * 2 > total) {
        // Dense case: shuffle the remaining candidates.
        std::vector<std::pair<std::size_t, std::size_t>> rest;
        for (std::size_t a = 0; a < na; ++a)
            for (std::size_t b = 0; b < nb; ++b)
                if (!seen.count({a, b})) rest.emplace_back(a, b);
        for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[draw(rng, i)]);
        for (std::size_t i = 0; keep.size() < count && i < rest.size(); ++i) keep.push_back(rest[i]);
        return keep;
    }
    while (keep.size() < count) {
        const std::size_t c = draw(rng, total);
        std::pair<std::size_t, std::size_t> p{c / nb, c % nb};
        if (seen.insert(p).second) keep.push_back(p);
    }
    return keep;
}

// Builds nested right index sets for `ranks`, reusing the entries of
// `warm` that are still valid.
std::vector<std::vector<MultiIndex>> initial_right_sets(const std::vector<NodalGrid1D>& grids,
                                                        const std::vector<std::size_t>& ranks,
                                                        std::mt19937_64& rng,
                                                        const CrossPivots* warm) {
    const std::size_t d = grids.size();
    std::vector<std::vector<MultiIndex>> right(d + 1);
    right[d] = {MultiIndex{}};
    for (std::size_t k = d - 1; k >= 1; --k) {
        const auto& next = right[k + 1];
        std::vector<std::pair<std::size_t, std::size_t>> keep;
        if (warm && warm->right.size() == d + 1) {
            for (const auto& idx : warm->right[k]) {
                MultiIndex tail(idx.begin() + 1, idx.end());
                auto it = std::find(next.begin(), next.end(), tail);
                if (it != next.end()) {
                    keep.emplace_back(idx[0], static_cast<std::size_t>(it - next.begin()));
                }
            }
        }
        const auto picks = pick_pairs(rng, grids[k].size(), next.size(), ranks[k], std::move(keep));
        right[k].reserve(picks.size());
        for (auto [l, b] : picks) {
            MultiIndex idx;
            idx.reserve(d - k);
            idx.push_back(l);
            idx.insert(idx.end(), next[b].begin(), next[b].end());
            right[k].push_back(std::move(idx));
        }
    }
    return right;
}

// Fiber values f(left[k][a], l, right[k+1][b]) in (a, l, b) order.
std::vector<double> fiber_values(CachedFunction& f, const std::vector<MultiIndex>& left,
                                 std::size_t n, const std::vector<MultiIndex>& right,
                                 std::vector<MultiIndex>& points) {
    points.clear();
    points.reserve(left.size() * n * right.size());
    for (const auto& li : left) {
        for (std::size_t l = 0; l < n; ++l) {
            for (const auto& ri : right) {
                MultiIndex p;
                p.reserve(li.size() + 1 + ri.size());
                p.insert(p.end(), li.begin(), li.end());
                p.push_back(l);
                p.insert(p.end(), ri.begin(), ri.end());
                points.push_back(std::move(p));
            }
        }
    }
    std::vector<double> values;
    f.evaluate(points, values);
    return values;
}

// Tensor in (a, l, b) order to core storage [a][b][l].
FtCore to_core(const NodalGrid1D& grid, std::size_t ra, std::size_t rb, const double* alb) {
    const std::size_t n = grid.size();
    FtCore core(grid, ra, rb);
    for (std::size_t a = 0; a < ra; ++a)
        for (std::size_t l = 0; l < n; ++l)
            for (std::size_t b = 0; b < rb; ++b) core.at(a, b, l) = alb[(a * n + l) * rb + b];
    return core;
}

// Q * Q(rows)^{-1} for a tall orthonormal-column matrix.
MatrixXd interpolation_basis(const MatrixXd& q, const std::vector<std::size_t>& rows) {
    const Eigen::Index r = q.cols();
    MatrixXd sub(r, r);
    for (Eigen::Index j = 0; j < r; ++j) sub.row(j) = q.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]));
    Eigen::FullPivLU<MatrixXd> lu(sub.transpose());
    MatrixXd out = lu.solve(q.transpose()).transpose();
    // Exact identity on the pivot rows.
    for (Eigen::Index j = 0; j < r; ++j) {
        out.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)])).setZero();
        out(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]), j) = 1.0;
    }
    return out;
}

MatrixXd orthonormal_columns(const MatrixXd& m) {
    Eigen::HouseholderQR<MatrixXd> qr(m);
    return qr.householderQ() * MatrixXd::Identity(m.rows(), m.cols());
}

double prediction_change(const FunctionTrain* prev, const std::vector<MultiIndex>& points,
                         const std::vector<double>& values, double& scale) {
    double diff = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        scale = std::max(scale, std::abs(values[i]));
        if (prev) diff = std::max(diff, std::abs(prev->at_node(points[i]) - values[i]));
    }
    return diff;
}

}  // namespace

CrossResult cross_approx(CachedFunction& f, const std::vector<NodalGrid1D>& grids,
                         std::vector<std::size_t> ranks, double cross_tol, std::size_t max_sweeps,
                         std::uint64_t seed, const CrossPivots* warm) {
    const std::size_t d = grids.size();
    if (d == 0 || ranks.size() != d + 1 || f.shape().size() != d) {
        throw ShapeError("rank chain or function shape does not match the grids");
    }
    if (ranks.front() != 1 || ranks.back() != 1) {
        throw ShapeError("boundary ranks must be 1");
    }
    if (!(cross_tol > 0.0)) {
        throw ParameterError("cross tolerance must be positive");
    }
    for (std::size_t k = 0; k < d; ++k) {
        if (f.shape()[k] != grids[k].size()) throw ShapeError("function shape does not match grids");
    }
    const auto caps = feasible_rank_caps(grids);
    for (std::size_t k = 1; k < d; ++k) ranks[k] = std::max<std::size_t>(1, std::min(ranks[k], caps[k]));

    CrossResult out{FunctionTrain::zero(grids), {}, 0, false, 0.0};
    if (d == 1) {
        std::vector<MultiIndex> points;
        const auto v = fiber_values(f, {MultiIndex{}}, grids[0].size(), {MultiIndex{}}, points);
        out.ft = FunctionTrain({to_core(grids[0], 1, 1, v.data())});
        out.pivots.left = {{MultiIndex{}}, {}};
        out.pivots.right = {{}, {MultiIndex{}}};
        out.converged = true;
        out.sweeps = 1;
        return out;
    }

    std::mt19937_64 rng(seed);
    CrossPivots piv;
    piv.right = initial_right_sets(grids, ranks, rng, warm);
    piv.left.assign(d + 1, {});
    piv.left[0] = {MultiIndex{}};
    piv.right[0] = {MultiIndex{}};

    std::vector<FtCore> cores;
    for (std::size_t k = 0; k < d; ++k) cores.emplace_back(grids[k], ranks[k], ranks[k + 1]);
    std::optional<FunctionTrain> prev;
    std::vector<MultiIndex> points;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        const bool forward = (sweep % 2 == 0);
        double diff = 0.0, scale = 0.0;
        if (forward) {
            for (std::size_t k = 0; k < d; ++k) {
                const std::size_t ra = ranks[k], rb = ranks[k + 1], n = grids[k].size();
                const auto v = fiber_values(f, piv.left[k], n, piv.right[k + 1], points);
                diff = std::max(diff, prediction_change(prev ? &*prev : nullptr, points, v, scale));
                if (k + 1 == d) {
                    cores[k] = to_core(grids[k], ra, rb, v.data());
                    break;
                }
                MatrixXd c = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    v.data(), static_cast<Eigen::Index>(ra * n), static_cast<Eigen::Index>(rb));
                const MatrixXd q = orthonormal_columns(c);
                const auto rows = maxvol(q);
                const MatrixXd basis = interpolation_basis(q, rows);
                std::vector<double> alb(ra * n * rb);
                for (std::size_t i = 0; i < ra * n; ++i)
                    for (std::size_t b = 0; b < rb; ++b) alb[i * rb + b] = basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
                cores[k] = to_core(grids[k], ra, rb, alb.data());
                piv.left[k + 1].clear();
                for (auto row : rows) {
                    MultiIndex idx = piv.left[k][row / n];
                    idx.push_back(row % n);
                    piv.left[k + 1].push_back(std::move(idx));
                }
            }
        } else {
            for (std::size_t k = d; k-- > 0;) {
                const std::size_t ra = ranks[k], rb = ranks[k + 1], n = grids[k].size();
                const auto v = fiber_values(f, piv.left[k], n, piv.right[k + 1], points);
                diff = std::max(diff, prediction_change(prev ? &*prev : nullptr, points, v, scale));
                if (k == 0) {
                    cores[k] = to_core(grids[k], ra, rb, v.data());
                    break;
                }
                // Right unfolding ra x (n rb) is the row-major view of v.
                MatrixXd ct = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                                  v.data(), static_cast<Eigen::Index>(ra), static_cast<Eigen::Index>(n * rb))
                                  .transpose();
                const MatrixXd q = orthonormal_columns(ct);
                const auto cols = maxvol(q);
                const MatrixXd basis = interpolation_basis(q, cols);  // (n rb) x ra
                std::vector<double> alb(ra * n * rb);
                for (std::size_t a = 0; a < ra; ++a)
                    for (std::size_t j = 0; j < n * rb; ++j) alb[a * n * rb + j] = basis(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a));
                cores[k] = to_core(grids[k], ra, rb, alb.data());
                piv.right[k].clear();
                for (auto col : cols) {
                    MultiIndex idx{col / rb};
                    const auto& tail = piv.right[k + 1][col % rb];
                    idx.insert(idx.end(), tail.begin(), tail.end());
                    piv.right[k].push_back(std::move(idx));
                }
            }
        }
        FunctionTrain current(cores);
        out.sweeps = sweep + 1;
        if (prev) {
            out.change = (scale > 0.0) ? diff / scale : diff;
            if (out.change <= cross_tol) {
                out.converged = true;
                prev = std::move(current);
                break;
            }
        }
        prev = std::move(current);
    }
    out.ft = std::move(*prev);
    out.pivots = std::move(piv);
    return out;
}

FunctionTrain cross_approx(const NodeFunction& f, const std::vector<NodalGrid1D>& grids,
                           std::vector<std::size_t> ranks, double cross_tol, EvalCounter* counter,
                           std::size_t max_sweeps, std::uint64_t seed) {
    std::vector<std::size_t> shape;
    for (const auto& g : grids) shape.push_back(g.size());
    CachedFunction cached(f, shape);
    auto res = cross_approx(cached, grids, std::move(ranks), cross_tol, max_sweeps, seed);
    if (counter) *counter = cached.counter();
    return std::move(res.ft);
}

// ---------------------------------------------------------------------------
// Rank adaptation
// ---------------------------------------------------------------------------

RankAdaptResult ft_rankadapt(CachedFunction& f, const CrossConfig& cfg,
                             const std::vector<NodalGrid1D>& grids) {
    const std::size_t d = grids.size();
    cfg.validate(d);
    const auto caps = feasible_rank_caps(grids);
    auto ranks = cfg.rank_chain(d);
    for (std::size_t k = 1; k < d; ++k) ranks[k] = std::min({ranks[k], caps[k], cfg.max_rank});

    std::optional<CrossPivots> warm;
    std::size_t calls = 0;
    while (true) {
        auto cross = cross_approx(f, grids, ranks, cfg.cross_tol, cfg.max_sweeps, cfg.seed + calls,
                                  warm ? &*warm : nullptr);
        ++calls;
        FunctionTrain rounded = ft_round(cross.ft, cfg.round_tol);
        const auto got = rounded.ranks();
        bool kicked = false;
        bool stuck = false;
        auto next = ranks;
        for (std::size_t k = 1; k < d; ++k) {
            if (got[k] < ranks[k] || ranks[k] >= caps[k]) continue;
            if (ranks[k] >= cfg.max_rank) {
                stuck = true;
                continue;
            }
            next[k] = std::min({ranks[k] + cfg.kickrank, caps[k], cfg.max_rank});
            kicked = true;
        }
        if (!kicked) {
            RankAdaptResult res{std::move(rounded), !stuck && cross.converged, stuck, f.counter(), calls, ranks};
            return res;
        }
        warm = std::move(cross.pivots);
        ranks = std::move(next);
    }
}

RankAdaptResult ft_rankadapt(const NodeFunction& f, const CrossConfig& cfg,
                             const std::vector<NodalGrid1D>& grids) {
    std::vector<std::size_t> shape;
    for (const auto& g : grids) shape.push_back(g.size());
    CachedFunction cached(f, shape);
    return ft_rankadapt(cached, cfg, grids);
}

}  // namespace fthjb
