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

#include "fthjb/simctl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "fthjb/parallel.hpp"

namespace fthjb {

std::string to_string(TerminalFlag f) {
    switch (f) {
        case TerminalFlag::target: return "target";
        case TerminalFlag::exited: return "exited";
        case TerminalFlag::horizon: return "horizon";
    }
    return "unknown";
}

namespace {

std::vector<double> middle_control(const ControlSpace& c) {
    if (c.is_finite()) return c.finite.front();
    std::vector<double> u(c.dim());
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = 0.5 * (c.lower[j] + c.upper[j]);
    return u;
}

bool in_box(const ProblemSpec& spec, std::span<const double> x) {
    for (std::size_t i = 0; i < spec.dim; ++i) {
        if (!(x[i] >= spec.lower[i] && x[i] <= spec.upper[i])) return false;
    }
    return true;
}

// Nodal index of x when every coordinate sits on a grid node.
bool node_index(const Discretization& disc, std::span<const double> x, std::vector<std::size_t>& idx) {
    idx.resize(disc.dim());
    for (std::size_t i = 0; i < disc.dim(); ++i) {
        idx[i] = disc.grid(i).find_node(x[i]);
        if (idx[i] == NodalGrid1D::npos) return false;
    }
    return true;
}

class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
    double operator()() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        have_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    bool have_ = false;
    double spare_ = 0.0;
};

}  // namespace

std::vector<double> policy_eval(const FunctionTrain& value, const ProblemSpec& spec, const Discretization& disc,
                                std::span<const double> x, const OptimizerConfig& opt) {
    if (x.size() != spec.dim) throw ShapeError("state has the wrong dimension");
    if (!in_box(spec, x)) throw DomainError("policy_eval needs an in-box state");
    std::vector<std::size_t> idx;
    if (node_index(disc, x, idx)) {
        NodeBellman nb(spec, disc, value, opt);
        nb.set_state(idx);
        try {
            return nb.minimize().control;
        } catch (const DegenerateDynamicsError&) {
            // Some control cannot move the state; handled below.
        }
    }
    StencilBuilder builder(spec, disc);
    TransitionStencil st;
    std::vector<std::vector<double>> points;
    try {
        builder.build_at(x, middle_control(spec.controls), st, points);
    } catch (const DegenerateDynamicsError&) {
        // Move kinds and neighbor points are set before the weights.
    }
    if (st.terminal) return middle_control(spec.controls);
    // Neighbor positions do not depend on u; interpolate the value once.
    const double center = value(x);
    std::vector<double> neighbor(st.moves.size(), 0.0);
    for (std::size_t m = 0; m < st.moves.size(); ++m) {
        if (st.moves[m].kind == MoveKind::node) neighbor[m] = value(points[m]);
    }
    auto rhs = [&](std::span<const double> u) {
        try {
            builder.build_at(x, u, st, points);
        } catch (const DegenerateDynamicsError&) {
            // The state cannot move under u: the cost of staying forever.
            return spec.beta > 0.0 ? spec.stage_cost(x, u) / spec.beta : std::numeric_limits<double>::infinity();
        }
        double s = st.self_prob * center;
        for (std::size_t m = 0; m < st.moves.size(); ++m) {
            const auto& mv = st.moves[m];
            if (mv.kind == MoveKind::node) s += mv.prob * neighbor[m];
            if (mv.kind == MoveKind::terminal) s += mv.prob * mv.terminal_value;
        }
        return st.cost + st.gamma * s;
    };
    auto res = minimize_controls(spec.controls, opt, rhs);
    if (res.control.empty()) throw OptimizerError(std::vector<double>(x.begin(), x.end()));
    return res.control;
}

double default_dt(const ProblemSpec& spec, const Discretization& disc, std::uint64_t seed, std::size_t samples) {
    std::vector<std::vector<double>> controls;
    if (spec.controls.is_finite()) {
        controls = spec.controls.finite;
    } else {
        controls = ControlSpace::lattice(spec.controls.lower, spec.controls.upper, 3).finite;
    }
    std::mt19937_64 rng(seed);
    StencilBuilder builder(spec, disc);
    TransitionStencil st;
    std::vector<std::vector<double>> points;
    std::vector<double> x(spec.dim);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < spec.dim; ++i) {
            const double t = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            x[i] = spec.lower[i] + t * (spec.upper[i] - spec.lower[i]);
        }
        for (const auto& u : controls) {
            try {
                builder.build_at(x, u, st, points);
            } catch (const DegenerateDynamicsError&) {
                continue;
            }
            if (!st.terminal) best = std::min(best, st.dt);
        }
    }
    if (!std::isfinite(best)) best = disc.min_step();
    return 0.5 * best;
}

Trajectory simulate(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& value,
                    std::span<const double> x0, double dt, double horizon, std::uint64_t seed,
                    const OptimizerConfig& opt) {
    if (x0.size() != spec.dim) throw ShapeError("initial state has the wrong dimension");
    if (!in_box(spec, x0)) throw DomainError("initial state is outside the box");
    if (!(dt > 0.0)) throw ParameterError("simulation step must be positive");
    const std::size_t d = spec.dim;
    Gaussian noise(seed);
    Trajectory traj;
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> b(d), a(d);
    const auto steps = static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    const double sdt = std::sqrt(dt);
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        traj.times.push_back(t);
        traj.states.push_back(x);
        if (spec.in_target(x)) {
            traj.flag = TerminalFlag::target;
            break;
        }
        if (k >= steps) {
            traj.flag = TerminalFlag::horizon;
            break;
        }
        auto u = policy_eval(value, spec, disc, x, opt);
        spec.drift(x, u, b);
        spec.diffusion(x, a);
        traj.controls.push_back(u);
        bool exited = false;
        for (std::size_t i = 0; i < d; ++i) {
            x[i] += b[i] * dt + sdt * std::sqrt(std::max(a[i], 0.0)) * noise();
            const double lo = spec.lower[i], hi = spec.upper[i];
            switch (spec.boundary[i]) {
                case Boundary::reflecting:
                    x[i] = std::clamp(x[i], lo, hi);
                    break;
                case Boundary::periodic:
                    x[i] = lo + std::fmod(std::fmod(x[i] - lo, hi - lo) + (hi - lo), hi - lo);
                    break;
                case Boundary::absorbing:
                    exited = exited || x[i] <= lo || x[i] >= hi;
                    break;
            }
        }
        if (exited) {
            traj.times.push_back(t + dt);
            traj.states.push_back(x);
            traj.flag = spec.in_target(x) ? TerminalFlag::target : TerminalFlag::exited;
            break;
        }
    }
    if (traj.controls.empty()) traj.controls.push_back(middle_control(spec.controls));
    while (traj.controls.size() < traj.states.size()) traj.controls.push_back(traj.controls.back());
    return traj;
}

std::vector<Trajectory> simulate_many(const ProblemSpec& spec, const Discretization& disc,
                                      const FunctionTrain& value, const std::vector<std::vector<double>>& x0s,
                                      double dt, double horizon, std::uint64_t seed, const OptimizerConfig& opt) {
    std::vector<Trajectory> out(x0s.size());
    parallel_for(x0s.size(), [&](std::size_t i) { out[i] = simulate(spec, disc, value, x0s[i], dt, horizon, seed + i, opt); });
    return out;
}

void write_trajectory_csv(std::ostream& out, const ProblemSpec& spec, const Trajectory& traj) {
    out << 't';
    for (const auto& s : spec.state_names) out << ',' << s;
    for (const auto& c : spec.control_names) out << ',' << c;
    out << '\n';
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        fmt::print(out, "{:.17g}", traj.times[k]);
        for (double v : traj.states[k]) fmt::print(out, ",{:.17g}", v);
        for (double v : traj.controls[k]) fmt::print(out, ",{:.17g}", v);
        out << '\n';
    }
    out << "# terminal=" << to_string(traj.flag) << '\n';
}

}  // namespace fthjb
