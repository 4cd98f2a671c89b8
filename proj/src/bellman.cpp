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

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>
#include <fmt/ranges.h>

#include "fthjb/dpsolve.hpp"

namespace fthjb {

OptimizerError::OptimizerError(std::vector<double> x)
    : std::runtime_error(fmt::format("control search failed at state [{}]", fmt::join(x, ", "))),
      x_(std::move(x)) {}

namespace {

bool better(double fx, std::span<const double> u, const MinResult& best) {
    const double tol = 1e-14 * std::max(1.0, std::abs(best.value));
    if (fx < best.value - tol) return true;
    if (fx > best.value + tol) return false;
    return std::lexicographical_compare(u.begin(), u.end(), best.control.begin(), best.control.end());
}

MinResult minimize_box(const std::vector<double>& lo, const std::vector<double>& hi,
                       const OptimizerConfig& opt,
                       const std::function<double(std::span<const double>)>& f) {
    const std::size_t du = lo.size();
    std::vector<double> width(du);
    for (std::size_t j = 0; j < du; ++j) width[j] = hi[j] - lo[j];

    auto clamp = [&](std::vector<double>& x) {
        for (std::size_t j = 0; j < du; ++j) x[j] = std::clamp(x[j], lo[j], hi[j]);
    };
    std::vector<double> xp(du), xm(du);
    auto gradient = [&](const std::vector<double>& x, std::vector<double>& g) {
        for (std::size_t j = 0; j < du; ++j) {
            if (width[j] <= 0.0) {
                g[j] = 0.0;
                continue;
            }
            const double e = opt.fd_step * width[j];
            xp = x;
            xm = x;
            xp[j] = std::min(x[j] + e, hi[j]);
            xm[j] = std::max(x[j] - e, lo[j]);
            g[j] = (f(xp) - f(xm)) / (xp[j] - xm[j]);
        }
    };

    MinResult best{std::numeric_limits<double>::infinity(), {}};
    std::size_t starts = 1;
    for (std::size_t j = 0; j < du; ++j) starts *= 3;
    std::vector<double> x(du), xn(du), g(du), gn(du), p(du), s(du), y(du), hy(du);
    std::vector<double> h(du * du);
    std::vector<bool> free(du);
    for (std::size_t c = 0; c < starts; ++c) {
        std::size_t code = c;
        for (std::size_t j = du; j-- > 0;) {
            const std::size_t digit = code % 3;
            code /= 3;
            x[j] = digit == 0 ? lo[j] : (digit == 1 ? 0.5 * (lo[j] + hi[j]) : hi[j]);
        }
        double fx = f(x);
        if (!std::isfinite(fx)) continue;
        gradient(x, g);
        bool h_ready = false;
        for (std::size_t step = 0; step < opt.max_steps; ++step) {
            double gmax = 0.0;
            for (std::size_t j = 0; j < du; ++j) {
                free[j] = width[j] > 0.0 && !((x[j] <= lo[j] && g[j] > 0.0) || (x[j] >= hi[j] && g[j] < 0.0));
                if (free[j]) gmax = std::max(gmax, std::abs(g[j]));
            }
            if (!(gmax > 0.0)) break;
            double slope = 0.0;
            if (h_ready) {
                for (std::size_t i = 0; i < du; ++i) {
                    p[i] = 0.0;
                    if (!free[i]) continue;
                    for (std::size_t j = 0; j < du; ++j) {
                        if (free[j]) p[i] -= h[i * du + j] * g[j];
                    }
                    slope += p[i] * g[i];
                }
            }
            if (!h_ready || !(slope < 0.0)) {
                // Scaled steepest descent, reaching a quarter of the box.
                for (std::size_t j = 0; j < du; ++j) p[j] = free[j] ? -g[j] / gmax * 0.25 * width[j] : 0.0;
                h_ready = false;
            }
            double t = 1.0;
            bool accepted = false;
            double fn = fx;
            double smax = 0.0;
            for (int ls = 0; ls < 60; ++ls) {
                for (std::size_t j = 0; j < du; ++j) xn[j] = x[j] + t * p[j];
                clamp(xn);
                double gs = 0.0;
                smax = 0.0;
                for (std::size_t j = 0; j < du; ++j) {
                    s[j] = xn[j] - x[j];
                    gs += g[j] * s[j];
                    if (width[j] > 0.0) smax = std::max(smax, std::abs(s[j]) / width[j]);
                }
                if (smax < opt.step_tol) break;
                fn = f(xn);
                if (std::isfinite(fn) && fn <= fx + 1e-4 * gs) {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if (!accepted) break;
            gradient(xn, gn);
            double sy = 0.0, yy = 0.0;
            for (std::size_t j = 0; j < du; ++j) {
                y[j] = gn[j] - g[j];
                sy += s[j] * y[j];
                yy += y[j] * y[j];
            }
            if (sy > 1e-300 && yy > 0.0) {
                if (!h_ready) {
                    std::fill(h.begin(), h.end(), 0.0);
                    for (std::size_t j = 0; j < du; ++j) h[j * du + j] = sy / yy;
                    h_ready = true;
                }
                // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
                const double rho = 1.0 / sy;
                double yhy = 0.0;
                for (std::size_t i = 0; i < du; ++i) {
                    hy[i] = 0.0;
                    for (std::size_t j = 0; j < du; ++j) hy[i] += h[i * du + j] * y[j];
                    yhy += y[i] * hy[i];
                }
                for (std::size_t i = 0; i < du; ++i) {
                    for (std::size_t j = 0; j < du; ++j) {
                        h[i * du + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                    }
                }
            }
            x = xn;
            fx = fn;
            g = gn;
            if (smax < opt.step_tol) break;
        }
        if (best.control.empty() || better(fx, x, best)) {
            best.value = fx;
            best.control = x;
        }
    }
    return best;
}

}  // namespace

MinResult minimize_controls(const ControlSpace& space, const OptimizerConfig& opt,
                            const std::function<double(std::span<const double>)>& f) {
    MinResult best{std::numeric_limits<double>::infinity(), {}};
    if (space.is_finite()) {
        for (const auto& u : space.finite) {
            const double v = f(u);
            if (!std::isfinite(v)) continue;
            if (best.control.empty() || better(v, u, best)) {
                best.value = v;
                best.control = u;
            }
        }
    } else {
        best = minimize_box(space.lower, space.upper, opt, f);
    }
    return best;
}

// ---------------------------------------------------------------------------
// NodeBellman
// ---------------------------------------------------------------------------

NodeBellman::NodeBellman(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& value,
                         OptimizerConfig opt)
    : spec_(spec), value_(value), opt_(opt), builder_(spec, disc), eval_(value), neighbor_(2 * disc.dim()) {
    if (value.dim() != disc.dim()) throw ShapeError("value function and discretization dimensions differ");
    for (std::size_t i = 0; i < disc.dim(); ++i) {
        if (!(value.core(i).grid() == disc.grid(i))) {
            throw ShapeError(fmt::format("value function grid {} differs from the discretization", i));
        }
    }
}

void NodeBellman::set_state(std::span<const std::size_t> index) {
    builder_.set_state(index);
    if (builder_.state_terminal()) return;
    eval_.set_center(index);
    center_ = eval_.center();
    const auto& moves = builder_.state_moves().moves;
    for (std::size_t m = 0; m < moves.size(); ++m) {
        neighbor_[m] = moves[m].kind == MoveKind::node ? eval_.along(moves[m].dim, moves[m].node) : 0.0;
    }
}

double NodeBellman::expectation(bool homogeneous) const {
    double s = stencil_.self_prob * center_;
    for (std::size_t m = 0; m < stencil_.moves.size(); ++m) {
        const auto& mv = stencil_.moves[m];
        if (mv.kind == MoveKind::node) {
            s += mv.prob * neighbor_[m];
        } else if (mv.kind == MoveKind::terminal && !homogeneous) {
            s += mv.prob * mv.terminal_value;
        }
    }
    return stencil_.gamma * s;
}

double NodeBellman::rhs(std::span<const double> u) {
    builder_.build(u, stencil_);
    if (stencil_.terminal) return stencil_.terminal_value;
    return stencil_.cost + expectation(false);
}

double NodeBellman::homogeneous_expectation(std::span<const double> u) {
    builder_.build(u, stencil_);
    if (stencil_.terminal) return 0.0;
    return expectation(true);
}

MinResult NodeBellman::minimize() {
    if (builder_.state_terminal()) {
        std::vector<double> u = spec_.controls.is_finite() ? spec_.controls.finite.front() : spec_.controls.lower;
        if (!spec_.controls.is_finite()) {
            for (std::size_t j = 0; j < u.size(); ++j) u[j] = 0.5 * (spec_.controls.lower[j] + spec_.controls.upper[j]);
        }
        return {builder_.state_terminal_value(), std::move(u)};
    }
    auto res = minimize_controls(spec_.controls, opt_, [this](std::span<const double> u) { return rhs(u); });
    if (res.control.empty()) {
        auto x = builder_.state_point();
        throw OptimizerError(std::vector<double>(x.begin(), x.end()));
    }
    return res;
}

// ---------------------------------------------------------------------------
// BellmanContext / ImplicitPolicy
// ---------------------------------------------------------------------------

BellmanContext::BellmanContext(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& value,
                               OptimizerConfig opt)
    : spec_(spec), disc_(disc), value_(value), opt_(opt) {
    NodeBellman check(spec, disc, value, opt);
}

double BellmanContext::rhs(std::span<const std::size_t> index, std::span<const double> u) const {
    NodeBellman nb(spec_, disc_, value_, opt_);
    nb.set_state(index);
    return nb.rhs(u);
}

MinResult BellmanContext::min(std::span<const std::size_t> index) const {
    NodeBellman nb(spec_, disc_, value_, opt_);
    nb.set_state(index);
    return nb.minimize();
}

ImplicitPolicy::ImplicitPolicy(const ProblemSpec& spec, const Discretization& disc, FunctionTrain value,
                               OptimizerConfig opt)
    : spec_(spec), disc_(disc), value_(std::move(value)), opt_(opt), strides_(disc.dim()) {
    NodeBellman check(spec_, disc_, value_, opt_);
    std::uint64_t s = 1;
    for (std::size_t k = disc.dim(); k-- > 0;) {
        strides_[k] = s;
        s *= disc.grid(k).size();
    }
}

std::vector<double> ImplicitPolicy::control(std::span<const std::size_t> index) const {
    std::uint64_t key = 0;
    for (std::size_t k = 0; k < index.size(); ++k) key += strides_[k] * index[k];
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    NodeBellman nb(spec_, disc_, value_, opt_);
    nb.set_state(index);
    auto res = nb.minimize();
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(res.control)).first->second;
}

std::size_t ImplicitPolicy::cached_nodes() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

}  // namespace fthjb
