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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fthjb/dpsolve.hpp"
#include "fthjb/problems.hpp"
#include "fthjb/simctl.hpp"
#include "support.hpp"

using namespace fthjb;

namespace {

ProblemSpec still_1d() {
    ProblemSpec s;
    s.name = "still";
    s.state_names = {"x"};
    s.control_names = {"u"};
    s.dim = 1;
    s.control_dim = 1;
    s.lower = {0.0};
    s.upper = {1.0};
    s.boundary = {Boundary::reflecting};
    s.drift = [](std::span<const double>, std::span<const double>, std::span<double> b) { b[0] = 0.0; };
    s.diffusion = [](std::span<const double>, std::span<double> a) { a[0] = 0.0; };
    s.stage_cost = [](std::span<const double>, std::span<const double> u) { return u[0] * u[0]; };
    s.terminal_cost = [](std::span<const double>) { return 0.0; };
    s.controls = ControlSpace::box({-1.0}, {1.0});
    return s;
}

// A quickly converged reflecting double-integrator value on a small grid.
struct SmallLqg {
    ProblemSpec spec = make_problem("lqg2d", {{"boundary", "reflecting"}, {"sigma1", "2"}, {"sigma2", "2"}});
    Discretization disc = Discretization::uniform(spec, 11);
    FunctionTrain value = [this] {
        SolverConfig cfg;
        cfg.max_iters = 20;
        return ftpi(spec, disc, cfg).value;
    }();
};

}  // namespace

TEST_CASE("motionless dynamics keep the state") {
    auto spec = still_1d();
    auto disc = Discretization::uniform(spec, 5);
    auto v = FunctionTrain::zero(disc.grids());
    const double x0[1] = {0.33};
    auto traj = simulate(spec, disc, v, x0, 0.1, 1.0, 3);
    CHECK(traj.flag == TerminalFlag::horizon);
    REQUIRE(traj.states.size() == 11);
    CHECK(traj.times.back() == doctest::Approx(1.0));
    for (const auto& s : traj.states) CHECK(s[0] == 0.33);
    CHECK(traj.controls.size() == traj.states.size());
    CHECK(std::abs(traj.controls[0][0]) <= 1e-9);
}

TEST_CASE("argument checks") {
    auto spec = still_1d();
    auto disc = Discretization::uniform(spec, 5);
    auto v = FunctionTrain::zero(disc.grids());
    const double out[1] = {1.5}, in[1] = {0.5};
    const double two[2] = {0.5, 0.5};
    CHECK_THROWS_AS(simulate(spec, disc, v, out, 0.1, 1.0, 0), DomainError);
    CHECK_THROWS_AS(simulate(spec, disc, v, two, 0.1, 1.0, 0), ShapeError);
    CHECK_THROWS_AS(simulate(spec, disc, v, in, 0.0, 1.0, 0), ParameterError);
    CHECK_THROWS_AS(policy_eval(v, spec, disc, out), DomainError);
}

TEST_CASE("on grid nodes the feedback is the Bellman argmin") {
    SmallLqg p;
    BellmanContext ctx(p.spec, p.disc, p.value);
    for (std::size_t i : {1, 4, 7}) {
        for (std::size_t j : {2, 5, 9}) {
            const std::size_t idx[2] = {i, j};
            std::vector<double> x(2);
            p.disc.point(idx, x);
            CHECK(policy_eval(p.value, p.spec, p.disc, x) == ctx.min(idx).control);
        }
    }
    // Off the grid the feedback stays inside the control box.
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
        auto x = support::random_point(p.disc.grids(), rng);
        auto u = policy_eval(p.value, p.spec, p.disc, x);
        CHECK(p.spec.controls.contains(u));
    }
}

TEST_CASE("paths are reproducible and stay in reflecting boxes") {
    SmallLqg p;
    const double dt = default_dt(p.spec, p.disc);
    CHECK(dt > 0.0);
    const std::vector<double> x0{1.5, -1.2};
    auto a = simulate(p.spec, p.disc, p.value, x0, dt, 2.0, 42);
    auto b = simulate(p.spec, p.disc, p.value, x0, dt, 2.0, 42);
    auto c = simulate(p.spec, p.disc, p.value, x0, dt, 2.0, 43);
    CHECK(a.states == b.states);
    CHECK(a.controls == b.controls);
    CHECK(a.states != c.states);
    CHECK(a.flag == TerminalFlag::horizon);
    bool inside = true;
    for (const auto& s : a.states) inside = inside && std::abs(s[0]) <= 2.0 && std::abs(s[1]) <= 2.0;
    CHECK(inside);

    auto many = simulate_many(p.spec, p.disc, p.value, {x0, x0}, dt, 2.0, 42);
    REQUIRE(many.size() == 2);
    CHECK(many[0].states == a.states);
    CHECK(many[1].states == c.states);
}

TEST_CASE("default step is below the chain holding times") {
    auto spec = make_problem("lqg2d");
    auto disc = Discretization::uniform(spec, 21);
    const double dt = default_dt(spec, disc);
    const std::size_t idx[2] = {10, 10};
    const double u[1] = {1.0};
    CHECK(dt <= 0.5 * build_stencil(spec, disc, idx, u).dt + 1e-15);
    CHECK(dt == default_dt(spec, disc));
}

TEST_CASE("absorbing faces and targets end a path") {
    auto spec = make_problem("dubins");
    auto disc = Discretization::uniform(spec, 9);
    auto v = FunctionTrain::zero(disc.grids());
    const double start_in[3] = {0.1, 0.1, 0.0};
    auto t = simulate(spec, disc, v, start_in, 0.01, 5.0, 1);
    CHECK(t.flag == TerminalFlag::target);
    CHECK(t.states.size() == 1);

    // Unit speed eastward from near the right wall leaves the box quickly.
    const double near_wall[3] = {3.95, 2.0, 0.0};
    auto e = simulate(spec, disc, v, near_wall, 0.01, 5.0, 1);
    CHECK(e.flag == TerminalFlag::exited);
    const bool on_face = e.states.back()[0] >= 4.0 || std::abs(e.states.back()[1]) >= 4.0;
    CHECK(on_face);
    for (const auto& u : e.controls) {
        const bool listed = u[0] == -1.0 || u[0] == 0.0 || u[0] == 1.0;
        CHECK(listed);
    }
}

TEST_CASE("finite control sets return enumeration minimizers") {
    auto spec = make_problem("dubins");
    auto disc = Discretization::uniform(spec, 9);
    auto v = support::separable_sum(disc.grids(), {{support::Fn1([](double x) { return x * x; }),
                                                    support::Fn1([](double) { return 1.0; }),
                                                    support::Fn1([](double th) { return 2.0 + std::sin(th); })}});
    BellmanContext ctx(spec, disc, v);
    const std::size_t idx[3] = {2, 6, 3};
    std::vector<double> x(3);
    disc.point(idx, x);
    auto u = policy_eval(v, spec, disc, x);
    double best = 1e300;
    std::vector<double> arg;
    for (const auto& c : spec.controls.finite) {
        const double r = ctx.rhs(idx, c);
        if (r < best) {
            best = r;
            arg = c;
        }
    }
    CHECK(u == arg);
}

TEST_CASE("trajectory files") {
    auto spec = still_1d();
    Trajectory t;
    t.times = {0.0, 0.5};
    t.states = {{0.25}, {0.75}};
    t.controls = {{0.1}, {0.1}};
    t.flag = TerminalFlag::exited;
    std::ostringstream out;
    write_trajectory_csv(out, spec, t);
    CHECK(out.str() == "t,x,u\n0,0.25,0.10000000000000001\n0.5,0.75,0.10000000000000001\n# terminal=exited\n");
    CHECK(to_string(TerminalFlag::target) == "target");
    CHECK(to_string(TerminalFlag::horizon) == "horizon");
}
