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

#include "fthjb/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

namespace fthjb {

namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<std::string> kCommonKeys = {"beta", "u_lb", "u_ub", "controls", "target", "boundary"};

class Params {
public:
    Params(const std::string& problem, const Overrides& o, const std::vector<std::string>& states,
           const std::vector<std::string>& own)
        : o_(o) {
        for (const auto& [key, value] : o) {
            bool ok = std::find(kCommonKeys.begin(), kCommonKeys.end(), key) != kCommonKeys.end() ||
                      std::find(own.begin(), own.end(), key) != own.end();
            for (const auto& s : states) {
                ok = ok || key == "lower." + s || key == "upper." + s || key == "boundary." + s;
            }
            if (!ok) throw ConfigError(fmt::format("unknown override '{}' for problem {}", key, problem));
        }
    }
    bool has(const std::string& k) const { return o_.count(k) != 0; }
    double num(const std::string& k, double def) const { return has(k) ? parse_double(k, o_.at(k)) : def; }
    std::vector<double> list(const std::string& k, std::vector<double> def) const {
        return has(k) ? parse_double_list(k, o_.at(k)) : def;
    }
    std::size_t size(const std::string& k, std::size_t def) const { return has(k) ? parse_size(k, o_.at(k)) : def; }
    bool flag(const std::string& k, bool def) const { return has(k) ? parse_bool(k, o_.at(k)) : def; }
    const std::string& str(const std::string& k) const { return o_.at(k); }

private:
    const Overrides& o_;
};

struct ControlDefaults {
    std::vector<double> lower;
    std::vector<double> upper;
    std::size_t points = 0;
    bool required = false;
};

// Applies the keys shared by every problem and validates the result.
void apply_common(ProblemSpec& spec, const Params& p, const ControlDefaults& cd) {
    auto boundary = [&](const std::string& key) {
        try {
            return parse_boundary(p.str(key));
        } catch (const ParameterError& e) {
            throw ConfigError(fmt::format("override.{}: {}", key, e.what()));
        }
    };
    spec.beta = p.num("beta", spec.beta);
    if (p.has("boundary")) {
        const Boundary b = boundary("boundary");
        std::fill(spec.boundary.begin(), spec.boundary.end(), b);
    }
    for (std::size_t i = 0; i < spec.dim; ++i) {
        const auto& s = spec.state_names[i];
        spec.lower[i] = p.num("lower." + s, spec.lower[i]);
        spec.upper[i] = p.num("upper." + s, spec.upper[i]);
        if (p.has("boundary." + s)) spec.boundary[i] = boundary("boundary." + s);
    }
    if (cd.required && !(p.has("u_lb") && p.has("u_ub"))) {
        throw ConfigError(fmt::format("problem {} requires override.u_lb and override.u_ub", spec.name));
    }
    auto lb = p.list("u_lb", cd.lower);
    auto ub = p.list("u_ub", cd.upper);
    if (lb.size() == 1 && spec.control_dim > 1) lb.assign(spec.control_dim, lb[0]);
    if (ub.size() == 1 && spec.control_dim > 1) ub.assign(spec.control_dim, ub[0]);
    if (lb.size() != spec.control_dim || ub.size() != spec.control_dim) {
        throw ConfigError(fmt::format("control bounds of {} need {} entries", spec.name, spec.control_dim));
    }
    const std::size_t points = p.size("controls", cd.points);
    spec.controls = points > 0 ? ControlSpace::lattice(lb, ub, points) : ControlSpace::box(lb, ub);
    if (!p.flag("target", true)) spec.target = nullptr;
    try {
        spec.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(fmt::format("problem {}: {}", spec.name, e.what()));
    }
}

ProblemSpec make_lqg2d(const Overrides& o) {
    const std::vector<std::string> states{"x1", "x2"};
    Params p("lqg2d", o, states, catalog_entry("lqg2d").override_keys);
    const double s1 = p.num("sigma1", 1.0);
    const double s2 = p.num("sigma2", 1.0);
    const double psi = p.num("psi", 100.0);
    ProblemSpec spec;
    spec.name = "lqg2d";
    spec.state_names = states;
    spec.control_names = {"u"};
    spec.dim = 2;
    spec.control_dim = 1;
    spec.lower = {-2.0, -2.0};
    spec.upper = {2.0, 2.0};
    spec.boundary = {Boundary::absorbing, Boundary::absorbing};
    spec.beta = 0.1;
    spec.drift = [](std::span<const double> x, std::span<const double> u, std::span<double> b) {
        b[0] = x[1];
        b[1] = u[0];
    };
    spec.diffusion = [s1, s2](std::span<const double>, std::span<double> a) {
        a[0] = s1 * s1;
        a[1] = s2 * s2;
    };
    spec.stage_cost = [](std::span<const double> x, std::span<const double> u) {
        return x[0] * x[0] + x[1] * x[1] + u[0] * u[0];
    };
    spec.terminal_cost = [psi](std::span<const double>) { return psi; };
    apply_common(spec, p, {{-1.0}, {1.0}, 0, false});
    return spec;
}

// Shared by the Dubins and understeered car models.
struct CarTarget {
    double half = 0.25;
    double psi_in = 0.0;
    double psi_out = 10.0;
    bool inside(std::span<const double> x) const { return std::abs(x[0]) <= half && std::abs(x[1]) <= half; }
};

ProblemSpec make_dubins(const Overrides& o) {
    const std::vector<std::string> states{"x", "y", "theta"};
    Params p("dubins", o, states, catalog_entry("dubins").override_keys);
    const double npos = p.num("noise_pos", 1.0);
    const double nth = p.num("noise_theta", 1e-2);
    CarTarget t{p.num("target_halfwidth", 0.25), p.num("psi_target", 0.0), p.num("psi_outside", 10.0)};
    ProblemSpec spec;
    spec.name = "dubins";
    spec.state_names = states;
    spec.control_names = {"u"};
    spec.dim = 3;
    spec.control_dim = 1;
    spec.lower = {-4.0, -4.0, -kPi};
    spec.upper = {4.0, 4.0, kPi};
    spec.boundary = {Boundary::absorbing, Boundary::absorbing, Boundary::periodic};
    spec.beta = 0.1;
    spec.drift = [](std::span<const double> x, std::span<const double> u, std::span<double> b) {
        b[0] = std::cos(x[2]);
        b[1] = std::sin(x[2]);
        b[2] = u[0];
    };
    spec.diffusion = [npos, nth](std::span<const double>, std::span<double> a) {
        a[0] = npos * npos;
        a[1] = npos * npos;
        a[2] = nth * nth;
    };
    spec.stage_cost = [](std::span<const double>, std::span<const double>) { return 1.0; };
    spec.terminal_cost = [t](std::span<const double> x) { return t.inside(x) ? t.psi_in : t.psi_out; };
    spec.target = [t](std::span<const double> x) { return t.inside(x); };
    apply_common(spec, p, {{-1.0}, {1.0}, 3, false});
    return spec;
}

ProblemSpec make_understeer(const Overrides& o) {
    const std::vector<std::string> states{"x", "y", "theta", "v"};
    Params p("understeer", o, states, catalog_entry("understeer").override_keys);
    const double vc = p.num("vc", 8.0);
    const double len = p.num("length", 0.2);
    const double alpha = p.num("alpha", 2.0);
    const double npos = p.num("noise_pos", 1.0);
    const double nth = p.num("noise_theta", 1e-2);
    const double nv = p.num("noise_v", 1e-2);
    CarTarget t{p.num("target_halfwidth", 0.25), p.num("psi_target", 0.0), p.num("psi_outside", 10.0)};
    ProblemSpec spec;
    spec.name = "understeer";
    spec.state_names = states;
    spec.control_names = {"steer", "accel"};
    spec.dim = 4;
    spec.control_dim = 2;
    spec.lower = {-4.0, -4.0, -kPi, 3.0};
    spec.upper = {4.0, 4.0, kPi, 5.0};
    spec.boundary = {Boundary::absorbing, Boundary::absorbing, Boundary::periodic, Boundary::reflecting};
    spec.beta = 0.1;
    spec.drift = [vc, len, alpha](std::span<const double> x, std::span<const double> u, std::span<double> b) {
        const double v = x[3];
        b[0] = v * std::cos(x[2]);
        b[1] = v * std::sin(x[2]);
        b[2] = v / ((1.0 + v / vc) * len) * std::tan(u[0]);
        b[3] = alpha * u[1];
    };
    spec.diffusion = [npos, nth, nv](std::span<const double>, std::span<double> a) {
        a[0] = npos * npos;
        a[1] = npos * npos;
        a[2] = nth * nth;
        a[3] = nv * nv;
    };
    spec.stage_cost = [](std::span<const double> x, std::span<const double>) {
        return 1.0 + x[0] * x[0] + x[1] * x[1];
    };
    spec.terminal_cost = [t](std::span<const double> x) { return t.inside(x) ? t.psi_in : t.psi_out; };
    spec.target = [t](std::span<const double> x) { return t.inside(x); };
    const double steer = 15.0 * kPi / 180.0;
    apply_common(spec, p, {{-steer, -1.0}, {steer, 1.0}, 0, false});
    return spec;
}

struct GliderParams {
    // Externally sourced defaults for a small flat-plate glider.
    double mass = 0.082;
    double inertia = 0.0015;
    double s_w = 0.0885;
    double s_e = 0.0147;
    double l = 0.27;
    double l_w = 0.0;
    double l_e = 0.022;
    double rho = 1.204;
    double gravity = 9.81;
};

ProblemSpec make_glider(const Overrides& o) {
    const std::vector<std::string> states{"x", "y", "theta", "phi", "vx", "vy", "thetadot"};
    Params p("glider", o, states, catalog_entry("glider").override_keys);
    GliderParams g;
    g.mass = p.num("mass", g.mass);
    g.inertia = p.num("inertia", g.inertia);
    g.s_w = p.num("s_w", g.s_w);
    g.s_e = p.num("s_e", g.s_e);
    g.l = p.num("l", g.l);
    g.l_w = p.num("l_w", g.l_w);
    g.l_e = p.num("l_e", g.l_e);
    g.rho = p.num("rho", g.rho);
    g.gravity = p.num("gravity", g.gravity);
    const double noise = p.num("noise", 1e-9);
    const double px = p.num("perch_x", 0.05), py = p.num("perch_y", 0.05);
    const double pvx = p.num("perch_vx", 0.25), pvy = p.num("perch_vy", 2.25);
    auto perched = [=](std::span<const double> x) {
        return std::abs(x[0]) <= px && std::abs(x[1]) <= py && std::abs(x[4]) <= pvx && std::abs(x[5]) <= pvy;
    };
    ProblemSpec spec;
    spec.name = "glider";
    spec.state_names = states;
    spec.control_names = {"phidot"};
    spec.dim = 7;
    spec.control_dim = 1;
    spec.lower = {-4.0, -1.0, -kPi / 2, -kPi / 3, -1.0, -5.0, -10.0};
    spec.upper = {1.0, 1.0, kPi / 2, kPi / 3, 7.0, 5.0, 10.0};
    spec.boundary.assign(7, Boundary::absorbing);
    spec.beta = 0.1;
    spec.drift = [g](std::span<const double> x, std::span<const double> u, std::span<double> b) {
        const double th = x[2], phi = x[3], vx = x[4], vy = x[5], thd = x[6];
        const double st = std::sin(th), ct = std::cos(th);
        const double stp = std::sin(th + phi), ctp = std::cos(th + phi);
        const double wx = vx + g.l_w * thd * st;
        const double wy = vy - g.l_w * thd * ct;
        const double ex = vx + g.l * thd * st + g.l_e * (thd + u[0]) * stp;
        const double ey = vy - g.l * thd * ct - g.l_e * (thd + u[0]) * ctp;
        const double aw = th - std::atan2(wy, wx);
        const double ae = th + phi - std::atan2(ey, ex);
        const double fw = g.rho * g.s_w * (wx * wx + wy * wy) * std::sin(aw);
        const double fe = g.rho * g.s_e * (ex * ex + ey * ey) * std::sin(ae);
        b[0] = vx;
        b[1] = vy;
        b[2] = thd;
        b[3] = u[0];
        b[4] = (-fw * st - fe * stp) / g.mass;
        b[5] = (fw * ct + fe * ctp - g.mass * g.gravity) / g.mass;
        b[6] = (-fw * g.l_w - fe * (g.l * std::cos(phi) + g.l_e)) / g.inertia;
    };
    spec.diffusion = [noise](std::span<const double>, std::span<double> a) {
        std::fill(a.begin(), a.end(), noise * noise);
    };
    spec.stage_cost = [](std::span<const double> x, std::span<const double>) {
        return 20 * x[0] * x[0] + 50 * x[1] * x[1] + x[3] * x[3] + 11 * x[4] * x[4] + x[5] * x[5] + x[6] * x[6];
    };
    spec.terminal_cost = [perched](std::span<const double> x) {
        if (perched(x)) return 0.0;
        return 600 * x[0] * x[0] + 400 * x[1] * x[1] + x[2] * x[2] / 9 + x[3] * x[3] / 9 + x[4] * x[4] +
               (x[5] + 1.5) * (x[5] + 1.5) + (x[6] + 0.5) * (x[6] + 0.5) / 9;
    };
    spec.target = perched;
    apply_common(spec, p, {{}, {}, 0, true});
    return spec;
}

ProblemSpec make_quadcopter(const Overrides& o) {
    const std::vector<std::string> states{"x", "y", "z", "vx", "vy", "vz"};
    Params p("quadcopter", o, states, catalog_entry("quadcopter").override_keys);
    const double m = p.num("mass", 1.0);
    const double grav = p.num("gravity", 9.81);
    const double npos = p.num("noise_pos", 0.1);
    const double nvel = p.num("noise_vel", 1.2);
    ProblemSpec spec;
    spec.name = "quadcopter";
    spec.state_names = states;
    spec.control_names = {"thrust", "roll", "pitch"};
    spec.dim = 6;
    spec.control_dim = 3;
    spec.lower = {-3.5, -3.5, -2.0, -5.0, -5.0, -5.0};
    spec.upper = {3.5, 3.5, 2.0, 5.0, 5.0, 5.0};
    spec.boundary.assign(6, Boundary::reflecting);
    spec.beta = 0.1;
    spec.drift = [m, grav](std::span<const double> x, std::span<const double> u, std::span<double> b) {
        const double t = (u[0] - m * grav) / m;
        b[0] = x[3];
        b[1] = x[4];
        b[2] = x[5];
        b[3] = t * std::cos(u[1]) * std::sin(u[2]);
        b[4] = -t * std::sin(u[1]);
        b[5] = std::cos(u[1]) * std::cos(u[2]) * t + grav;
    };
    spec.diffusion = [npos, nvel](std::span<const double>, std::span<double> a) {
        for (std::size_t i = 0; i < 3; ++i) a[i] = npos * npos;
        for (std::size_t i = 3; i < 6; ++i) a[i] = nvel * nvel;
    };
    spec.stage_cost = [](std::span<const double> x, std::span<const double> u) {
        return 60 + 8 * x[0] * x[0] + 6 * x[1] * x[1] + 8 * x[2] * x[2] + 2 * u[0] * u[0] + u[1] * u[1] +
               6 * u[2] * u[2];
    };
    spec.terminal_cost = [](std::span<const double>) { return 0.0; };
    spec.target = [](std::span<const double> x) {
        return std::abs(x[0]) <= 0.2 && std::abs(x[1]) <= 0.2 && std::abs(x[2]) <= 0.2 && x[3] >= 0.5 &&
               x[3] <= 1.5 && std::abs(x[4]) <= 0.2 && std::abs(x[5]) <= 0.2;
    };
    apply_common(spec, p, {{-1.5, -0.4, -0.4}, {1.5, 0.4, 0.4}, 0, false});
    return spec;
}

}  // namespace

const std::vector<CatalogEntry>& problem_catalog() {
    static const std::vector<CatalogEntry> catalog = {
        {"lqg2d", "double integrator with bounded acceleration, quadratic cost", {25, 50, 100}, 1e-7, 1e-7, 20,
         {"sigma1", "sigma2", "psi"}},
        {"dubins", "minimum-time Dubins vehicle to a box at the origin", {25, 50, 100, 200}, 1e-5, 1e-5, 20,
         {"noise_pos", "noise_theta", "target_halfwidth", "psi_target", "psi_outside"}},
        {"understeer", "variable-speed car that understeers at high speed", {25, 50, 100}, 1e-5, 1e-5, 20,
         {"vc", "length", "alpha", "noise_pos", "noise_theta", "noise_v", "target_halfwidth", "psi_target",
          "psi_outside"}},
        {"glider", "flat-plate glider perching on a string", {20, 40, 80, 160}, 1e-5, 1e-5, 10,
         {"mass", "inertia", "s_w", "s_e", "l", "l_w", "l_e", "rho", "gravity", "noise", "perch_x", "perch_y",
          "perch_vx", "perch_vy"}},
        {"quadcopter", "quadcopter flying through a window", {15, 30, 60, 120}, 1e-5, 1e-5, 10,
         {"mass", "gravity", "noise_pos", "noise_vel"}},
    };
    return catalog;
}

const CatalogEntry& catalog_entry(const std::string& name) {
    for (const auto& e : problem_catalog()) {
        if (e.name == name) return e;
    }
    throw ConfigError(fmt::format("unknown problem '{}'", name));
}

ProblemSpec make_problem(const std::string& name, const Overrides& overrides) {
    if (name == "lqg2d") return make_lqg2d(overrides);
    if (name == "dubins") return make_dubins(overrides);
    if (name == "understeer") return make_understeer(overrides);
    if (name == "glider") return make_glider(overrides);
    if (name == "quadcopter") return make_quadcopter(overrides);
    throw ConfigError(fmt::format("unknown problem '{}'", name));
}

Dynamics eval_dynamics(const ProblemSpec& spec, std::span<const double> x, std::span<const double> u) {
    Dynamics d{std::vector<double>(spec.dim), std::vector<double>(spec.dim)};
    spec.drift(x, u, d.drift);
    spec.diffusion(x, d.diffusion);
    return d;
}

}  // namespace fthjb
