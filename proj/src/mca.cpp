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

#include "fthjb/mca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>
#include <fmt/ranges.h>

namespace fthjb {

std::string to_string(Boundary b) {
    switch (b) {
        case Boundary::absorbing: return "absorbing";
        case Boundary::reflecting: return "reflecting";
        case Boundary::periodic: return "periodic";
    }
    return "unknown";
}

Boundary parse_boundary(const std::string& s) {
    if (s == "absorbing") return Boundary::absorbing;
    if (s == "reflecting") return Boundary::reflecting;
    if (s == "periodic") return Boundary::periodic;
    throw ParameterError(fmt::format("unknown boundary type '{}'", s));
}

// ---------------------------------------------------------------------------
// ControlSpace / ProblemSpec
// ---------------------------------------------------------------------------

bool ControlSpace::contains(std::span<const double> u, double tol) const {
    if (u.size() != dim()) return false;
    if (is_finite()) {
        for (const auto& p : finite) {
            bool same = true;
            for (std::size_t j = 0; j < u.size(); ++j) same = same && std::abs(p[j] - u[j]) <= tol;
            if (same) return true;
        }
        return false;
    }
    for (std::size_t j = 0; j < u.size(); ++j) {
        if (u[j] < lower[j] - tol || u[j] > upper[j] + tol) return false;
    }
    return true;
}

ControlSpace ControlSpace::box(std::vector<double> lower, std::vector<double> upper) {
    ControlSpace c;
    c.lower = std::move(lower);
    c.upper = std::move(upper);
    return c;
}

ControlSpace ControlSpace::set(std::vector<std::vector<double>> points) {
    ControlSpace c;
    c.finite = std::move(points);
    return c;
}

ControlSpace ControlSpace::lattice(const std::vector<double>& lower, const std::vector<double>& upper,
                                   std::size_t per_dim) {
    if (per_dim < 1 || lower.size() != upper.size() || lower.empty()) {
        throw ParameterError("invalid control lattice");
    }
    const std::size_t du = lower.size();
    std::size_t total = 1;
    for (std::size_t j = 0; j < du; ++j) total *= per_dim;
    std::vector<std::vector<double>> pts;
    pts.reserve(total);
    std::vector<std::size_t> idx(du, 0);
    for (std::size_t c = 0; c < total; ++c) {
        std::vector<double> u(du);
        for (std::size_t j = 0; j < du; ++j) {
            u[j] = per_dim == 1 ? 0.5 * (lower[j] + upper[j])
                                : lower[j] + (upper[j] - lower[j]) * static_cast<double>(idx[j]) /
                                                 static_cast<double>(per_dim - 1);
        }
        pts.push_back(std::move(u));
        for (std::size_t j = du; j-- > 0;) {
            if (++idx[j] < per_dim) break;
            idx[j] = 0;
        }
    }
    return set(std::move(pts));
}

void ProblemSpec::validate() const {
    if (dim == 0) throw ParameterError("problem dimension must be positive");
    if (lower.size() != dim || upper.size() != dim || boundary.size() != dim) {
        throw ParameterError("bounds and boundary tags must have one entry per dimension");
    }
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(lower[i] < upper[i])) {
            throw ParameterError(fmt::format("bounds of dimension {} are not ordered", i));
        }
    }
    if (!(beta > 0.0)) throw ParameterError("discount rate beta must be positive");
    if (!drift || !diffusion || !stage_cost || !terminal_cost) {
        throw ParameterError("problem is missing a dynamics or cost function");
    }
    if (controls.dim() != control_dim || control_dim == 0) {
        throw ParameterError("control space dimension does not match control_dim");
    }
    if (controls.is_finite()) {
        for (const auto& u : controls.finite) {
            if (u.size() != control_dim) throw ParameterError("control set entries have mixed sizes");
        }
    } else {
        for (std::size_t j = 0; j < control_dim; ++j) {
            if (!(controls.lower[j] <= controls.upper[j])) {
                throw ParameterError(fmt::format("control bounds of component {} are not ordered", j));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

Discretization::Discretization(std::vector<NodalGrid1D> grids) : grids_(std::move(grids)) {
    if (grids_.empty()) throw ShapeError("discretization needs at least one dimension");
    hmin_ = std::numeric_limits<double>::infinity();
    for (const auto& g : grids_) {
        const double h = (g.upper() - g.lower()) / static_cast<double>(g.size() - 1);
        for (std::size_t k = 0; k + 1 < g.size(); ++k) {
            if (std::abs(g.node(k + 1) - g.node(k) - h) > 1e-9 * h) {
                throw ShapeError("discretization grids must be uniform");
            }
        }
        steps_.push_back(h);
        hmin_ = std::min(hmin_, h);
    }
}

Discretization Discretization::uniform(const ProblemSpec& spec, std::span<const std::size_t> n) {
    if (n.size() != spec.dim) throw ShapeError("one node count per dimension is required");
    std::vector<NodalGrid1D> grids;
    for (std::size_t i = 0; i < spec.dim; ++i) grids.push_back(NodalGrid1D::uniform(spec.lower[i], spec.upper[i], n[i]));
    return Discretization(std::move(grids));
}

Discretization Discretization::uniform(const ProblemSpec& spec, std::size_t n) {
    std::vector<std::size_t> counts(spec.dim, n);
    return uniform(spec, counts);
}

std::vector<std::size_t> Discretization::shape() const {
    std::vector<std::size_t> s;
    for (const auto& g : grids_) s.push_back(g.size());
    return s;
}

double Discretization::num_nodes() const {
    double s = 1.0;
    for (const auto& g : grids_) s *= static_cast<double>(g.size());
    return s;
}

void Discretization::point(std::span<const std::size_t> index, std::span<double> x) const {
    for (std::size_t i = 0; i < grids_.size(); ++i) x[i] = grids_[i].node(index[i]);
}

DegenerateDynamicsError::DegenerateDynamicsError(std::vector<double> x)
    : std::runtime_error(fmt::format("zero drift and diffusion at state [{}]", fmt::join(x, ", "))),
      x_(std::move(x)) {}

// ---------------------------------------------------------------------------
// Stencils
// ---------------------------------------------------------------------------

bool is_terminal_node(const ProblemSpec& spec, const Discretization& disc,
                      std::span<const std::size_t> index, std::span<const double> x) {
    for (std::size_t i = 0; i < disc.dim(); ++i) {
        if (spec.boundary[i] == Boundary::absorbing && (index[i] == 0 || index[i] + 1 == disc.grid(i).size())) {
            return true;
        }
    }
    return spec.in_target(x);
}

StencilBuilder::StencilBuilder(const ProblemSpec& spec, const Discretization& disc)
    : spec_(spec), disc_(disc), index_(disc.dim()), x_(disc.dim()), a_(disc.dim()), b_(disc.dim()), y_(disc.dim()) {
    if (spec.dim != disc.dim()) throw ShapeError("problem and discretization dimensions differ");
}

void StencilBuilder::set_state(std::span<const std::size_t> index) {
    const std::size_t d = disc_.dim();
    std::copy(index.begin(), index.end(), index_.begin());
    disc_.point(index_, x_);
    terminal_ = is_terminal_node(spec_, disc_, index_, x_);
    terminal_value_ = terminal_ ? spec_.terminal_cost(x_) : 0.0;
    auto& t = template_;
    t.center.assign(index_.begin(), index_.end());
    t.terminal = terminal_;
    t.terminal_value = terminal_value_;
    t.moves.assign(2 * d, StencilMove{});
    t.self_prob = terminal_ ? 1.0 : 0.0;
    t.dt = t.gamma = t.cost = 0.0;
    if (terminal_) return;
    spec_.diffusion(x_, a_);
    // Neighbor classification depends on the state only.
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t n = disc_.grid(i).size();
        for (int s = 0; s < 2; ++s) {
            StencilMove& m = t.moves[2 * i + static_cast<std::size_t>(s)];
            m.dim = i;
            m.dir = s == 0 ? -1 : 1;
            const std::size_t l = index_[i];
            const bool off = (s == 0 && l == 0) || (s == 1 && l + 1 == n);
            std::size_t dest = s == 0 ? l - 1 : l + 1;
            if (off) {
                if (spec_.boundary[i] == Boundary::reflecting) {
                    m.kind = MoveKind::folded;
                    continue;
                }
                if (spec_.boundary[i] == Boundary::periodic) {
                    // First and last nodes are the same point.
                    dest = s == 0 ? n - 2 : 1;
                } else {
                    dest = l;
                }
            }
            m.node = dest;
            std::copy(x_.begin(), x_.end(), y_.begin());
            y_[i] = disc_.grid(i).node(dest);
            const bool face = spec_.boundary[i] == Boundary::absorbing && (off || dest == 0 || dest + 1 == n);
            if (face || spec_.in_target(y_)) {
                m.kind = MoveKind::terminal;
                m.terminal_value = spec_.terminal_cost(y_);
            }
        }
    }
}

void StencilBuilder::weights(std::span<const double> x, std::span<const double> u, TransitionStencil& out) {
    const std::size_t d = disc_.dim();
    spec_.drift(x, u, b_);
    const double h = disc_.min_step();
    double qh = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double r = h / disc_.step(i);
        const double q1 = r * r * a_[i] / 2.0;
        const double wm = h * r * std::max(-b_[i], 0.0) + q1;
        const double wp = h * r * std::max(b_[i], 0.0) + q1;
        out.moves[2 * i].prob = wm;
        out.moves[2 * i + 1].prob = wp;
        qh += wm + wp;
    }
    if (!(qh > 0.0)) {
        throw DegenerateDynamicsError(std::vector<double>(x.begin(), x.end()));
    }
    out.self_prob = 0.0;
    for (auto& m : out.moves) {
        m.prob /= qh;
        if (m.kind == MoveKind::folded) {
            out.self_prob += m.prob;
            m.prob = 0.0;
        }
    }
    out.dt = h * h / qh;
    out.gamma = std::exp(-spec_.beta * out.dt);
    out.cost = spec_.stage_cost(x, u) * out.dt;
}

void StencilBuilder::build(std::span<const double> u, TransitionStencil& out) {
    out.center = template_.center;
    out.terminal = template_.terminal;
    out.terminal_value = template_.terminal_value;
    out.moves = template_.moves;
    out.self_prob = template_.self_prob;
    out.dt = out.gamma = out.cost = 0.0;
    if (terminal_) return;
    weights(x_, u, out);
}

void StencilBuilder::build_at(std::span<const double> x, std::span<const double> u, TransitionStencil& out,
                              std::vector<std::vector<double>>& points) {
    const std::size_t d = disc_.dim();
    out.center.clear();
    out.moves.resize(2 * d);
    points.resize(2 * d);
    bool term = spec_.in_target(x);
    for (std::size_t i = 0; i < d; ++i) {
        const double tol = 1e-12 * disc_.step(i);
        if (spec_.boundary[i] == Boundary::absorbing &&
            (x[i] <= spec_.lower[i] + tol || x[i] >= spec_.upper[i] - tol)) {
            term = true;
        }
    }
    out.terminal = term;
    if (term) {
        out.terminal_value = spec_.terminal_cost(x);
        out.self_prob = 1.0;
        out.dt = out.gamma = out.cost = 0.0;
        for (auto& m : out.moves) m = StencilMove{};
        return;
    }
    spec_.diffusion(x, a_);
    for (std::size_t i = 0; i < d; ++i) {
        const double lo = spec_.lower[i], hi = spec_.upper[i];
        const double tol = 1e-12 * disc_.step(i);
        for (int s = 0; s < 2; ++s) {
            const std::size_t mi = 2 * i + static_cast<std::size_t>(s);
            StencilMove& m = out.moves[mi];
            m = StencilMove{};
            m.dim = i;
            m.dir = s == 0 ? -1 : 1;
            auto& y = points[mi];
            y.assign(x.begin(), x.end());
            y[i] += m.dir * disc_.step(i);
            const bool off = y[i] < lo - tol || y[i] > hi + tol;
            if (off && spec_.boundary[i] == Boundary::reflecting) {
                m.kind = MoveKind::folded;
                continue;
            }
            if (off && spec_.boundary[i] == Boundary::periodic) {
                y[i] += (y[i] > hi) ? -(hi - lo) : (hi - lo);
            }
            y[i] = std::clamp(y[i], lo, hi);
            const bool face = spec_.boundary[i] == Boundary::absorbing && (y[i] <= lo + tol || y[i] >= hi - tol);
            if (face || spec_.in_target(y)) {
                m.kind = MoveKind::terminal;
                m.terminal_value = spec_.terminal_cost(y);
            }
        }
    }
    weights(x, u, out);
}

TransitionStencil build_stencil(const ProblemSpec& spec, const Discretization& disc,
                                std::span<const std::size_t> index, std::span<const double> u) {
    StencilBuilder b(spec, disc);
    b.set_state(index);
    TransitionStencil s;
    b.build(u, s);
    return s;
}

ConsistencyReport consistency_check(const ProblemSpec& spec, const Discretization& disc,
                                    std::span<const std::size_t> index, std::span<const double> u) {
    const std::size_t d = disc.dim();
    const auto st = build_stencil(spec, disc, index, u);
    if (st.terminal) throw ParameterError("consistency check needs a non-terminal node");
    ConsistencyReport r;
    std::vector<double> x(d);
    disc.point(index, x);
    r.drift.resize(d);
    r.diffusion.resize(d);
    spec.drift(x, u, r.drift);
    spec.diffusion(x, r.diffusion);
    r.dt = st.dt;
    r.mean_rate.assign(d, 0.0);
    r.second_moment.assign(d, 0.0);
    for (const auto& m : st.moves) {
        const double step = m.dir * disc.step(m.dim);
        r.mean_rate[m.dim] += m.prob * step;
        r.second_moment[m.dim] += m.prob * step * step;
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double mean = r.mean_rate[i];
        r.covariance.push_back((r.second_moment[i] - mean * mean) / st.dt);
        r.mean_rate[i] = mean / st.dt;
        r.second_moment[i] /= st.dt;
        r.residual.push_back(r.second_moment[i] - r.diffusion[i]);
        r.residual_bound.push_back(std::abs(r.drift[i]) * disc.step(i));
    }
    return r;
}

}  // namespace fthjb
