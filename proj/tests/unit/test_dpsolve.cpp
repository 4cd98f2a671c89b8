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
#include <limits>
#include <sstream>

#include "dense_dp.hpp"
#include "fthjb/dpsolve.hpp"
#include "fthjb/problems.hpp"
#include "support.hpp"

using namespace fthjb;

namespace {

// dx = u dt + sqrt(a) dw on [-1, 1], cost x^2 + u^2.
ProblemSpec controlled_1d(double a, Boundary bc, ControlSpace controls) {
    ProblemSpec s;
    s.name = "controlled";
    s.state_names = {"x"};
    s.control_names = {"u"};
    s.dim = 1;
    s.control_dim = 1;
    s.lower = {-1.0};
    s.upper = {1.0};
    s.boundary = {bc};
    s.drift = [](std::span<const double>, std::span<const double> u, std::span<double> b) { b[0] = u[0]; };
    s.diffusion = [a](std::span<const double>, std::span<double> out) { out[0] = a; };
    s.stage_cost = [](std::span<const double> x, std::span<const double> u) { return x[0] * x[0] + u[0] * u[0]; };
    s.terminal_cost = [](std::span<const double>) { return 1.0; };
    s.beta = 0.5;
    s.controls = std::move(controls);
    return s;
}

// Control-independent dynamics with a cost that is quadratic in u.
ProblemSpec quadratic_in_u(ControlSpace controls, std::function<double(std::span<const double>)> cost) {
    ProblemSpec s = controlled_1d(1.0, Boundary::reflecting, std::move(controls));
    s.control_dim = s.controls.dim();
    s.control_names.assign(s.control_dim, "u");
    s.drift = [](std::span<const double>, std::span<const double>, std::span<double> b) { b[0] = 0.3; };
    s.stage_cost = [cost](std::span<const double>, std::span<const double> u) { return cost(u); };
    return s;
}

SolverConfig tight(double tol, double delta_max) {
    SolverConfig c;
    c.cross.cross_tol = c.cross.round_tol = tol;
    c.cross.max_rank = 30;
    c.delta_max = delta_max;
    c.max_iters = 20000;
    return c;
}

}  // namespace

TEST_CASE("right-hand side against hand arithmetic") {
    auto spec = controlled_1d(1.0, Boundary::reflecting, ControlSpace::box({-1.0}, {1.0}));
    auto disc = Discretization::uniform(spec, 11);
    auto v = support::separable_sum(disc.grids(), {{support::Fn1([](double x) { return x * x; })}});
    BellmanContext ctx(spec, disc, v);
    const std::size_t idx[1] = {3};  // x = -0.4
    const double u[1] = {0.5};
    const double h = 0.2, q = h * 0.5 + 1.0, dt = h * h / q;
    const double pp = (h * 0.5 + 0.5) / q, pm = 0.5 / q;
    const double g = (0.16 + 0.25) * dt;
    const double expect = pp * 0.04 + pm * 0.36;
    CHECK(ctx.rhs(idx, u) == doctest::Approx(g + std::exp(-0.5 * dt) * expect).epsilon(1e-12));
}

TEST_CASE("constant values and strong discounting") {
    auto spec = controlled_1d(0.7, Boundary::reflecting, ControlSpace::box({-1.0}, {1.0}));
    auto disc = Discretization::uniform(spec, 9);
    auto c = FunctionTrain::constant(disc.grids(), 4.0);
    const std::size_t idx[1] = {2};
    const double u[1] = {-0.3};
    auto st = build_stencil(spec, disc, idx, u);
    BellmanContext ctx(spec, disc, c);
    CHECK(ctx.rhs(idx, u) == doctest::Approx(st.cost + st.gamma * 4.0).epsilon(1e-14));
    spec.beta = 1e9;
    BellmanContext strong(spec, disc, c);
    CHECK(strong.rhs(idx, u) == doctest::Approx(st.cost).epsilon(1e-14));
}

TEST_CASE("finite control sets are enumerated") {
    auto spec = controlled_1d(0.5, Boundary::absorbing, ControlSpace::set({{-1.0}, {0.0}, {1.0}}));
    auto disc = Discretization::uniform(spec, 11);
    auto v = support::separable_sum(disc.grids(), {{support::Fn1([](double x) { return std::exp(x); })}});
    BellmanContext ctx(spec, disc, v);
    for (std::size_t k = 1; k < 10; ++k) {
        const std::size_t idx[1] = {k};
        auto res = ctx.min(idx);
        double best = std::numeric_limits<double>::infinity();
        for (double u : {-1.0, 0.0, 1.0}) {
            const double uu[1] = {u};
            best = std::min(best, ctx.rhs(idx, uu));
        }
        CHECK(res.value == best);
        const double chosen[1] = {res.control[0]};
        CHECK(ctx.rhs(idx, chosen) == best);
    }
}

TEST_CASE("box optimizer finds interior and face optima") {
    // (u1 - 0.3)^2 + 2 (u2 + 0.1)^2 + 0.5 u1 u2 has its minimum at the root
    // of [[2, 0.5], [0.5, 4]] u = [0.6, -0.4].
    const double det = 2.0 * 4.0 - 0.25;
    const double u1 = (0.6 * 4.0 + 0.4 * 0.5) / det, u2 = (-0.4 * 2.0 - 0.5 * 0.6) / det;
    auto spec = quadratic_in_u(ControlSpace::box({-1.0, -1.0}, {1.0, 1.0}), [](std::span<const double> u) {
        return (u[0] - 0.3) * (u[0] - 0.3) + 2 * (u[1] + 0.1) * (u[1] + 0.1) + 0.5 * u[0] * u[1];
    });
    auto disc = Discretization::uniform(spec, 5);
    const auto one = FunctionTrain::constant(disc.grids(), 1.0);
    BellmanContext ctx(spec, disc, one);
    const std::size_t idx[1] = {2};
    auto res = ctx.min(idx);
    CHECK(res.control[0] == doctest::Approx(u1).epsilon(1e-6));
    CHECK(std::abs(res.control[1] - u2) <= 1e-6);

    auto face = quadratic_in_u(ControlSpace::box({-1.0}, {1.0}), [](std::span<const double> u) {
        return (u[0] + 2.0) * (u[0] + 2.0);
    });
    BellmanContext fctx(face, disc, one);
    CHECK(fctx.min(idx).control[0] == -1.0);
}

TEST_CASE("ties go to the lexicographically smallest control") {
    OptimizerConfig opt;
    auto flat = [](std::span<const double>) { return 1.0; };
    auto r = minimize_controls(ControlSpace::set({{1.0, 0.0}, {-1.0, 2.0}, {-1.0, 1.0}}), opt, flat);
    CHECK(r.control == std::vector<double>{-1.0, 1.0});
    auto b = minimize_controls(ControlSpace::box({-2.0, 0.0}, {1.0, 1.0}), opt, flat);
    CHECK(b.control == std::vector<double>{-2.0, 0.0});
}

TEST_CASE("optimizer failure carries the state") {
    auto spec = quadratic_in_u(ControlSpace::box({-1.0}, {1.0}),
                               [](std::span<const double>) { return std::numeric_limits<double>::quiet_NaN(); });
    auto disc = Discretization::uniform(spec, 5);
    const auto zero = FunctionTrain::zero(disc.grids());
    BellmanContext ctx(spec, disc, zero);
    const std::size_t idx[1] = {3};
    bool thrown = false;
    try {
        ctx.min(idx);
    } catch (const OptimizerError& e) {
        thrown = true;
        CHECK(e.state()[0] == doctest::Approx(0.5));
    }
    CHECK(thrown);
}

TEST_CASE("implicit policy caches node controls") {
    auto spec = controlled_1d(0.5, Boundary::absorbing, ControlSpace::box({-1.0}, {1.0}));
    auto disc = Discretization::uniform(spec, 9);
    auto v = support::separable_sum(disc.grids(), {{support::Fn1([](double x) { return x * x; })}});
    ImplicitPolicy pol(spec, disc, v);
    const std::size_t idx[1] = {2};
    auto a = pol.control(idx);
    auto b = pol.control(idx);
    CHECK(a == b);
    CHECK(pol.cached_nodes() == 1);
    BellmanContext ctx(spec, disc, v);
    CHECK(ctx.min(idx).control == a);
}

TEST_CASE("unit cost with reflecting walls") {
    auto spec = controlled_1d(1.0, Boundary::reflecting, ControlSpace::set({{0.0}}));
    spec.stage_cost = [](std::span<const double>, std::span<const double>) { return 1.0; };
    auto disc = Discretization::uniform(spec, 5);
    const std::size_t idx[1] = {2};
    const double u[1] = {0.0};
    auto st = build_stencil(spec, disc, idx, u);
    const double fixed = st.dt / (1.0 - st.gamma);

    auto res = ftvi(spec, disc, tight(1e-12, 1e-24));
    CHECK(res.diagnostics.converged);
    for (std::size_t k = 0; k < 5; ++k) {
        const std::size_t i[1] = {k};
        CHECK(res.value.at_node(i) == doctest::Approx(fixed).epsilon(1e-9));
    }
    oracle::DenseMdp mdp(spec, disc);
    auto dense = oracle::value_iteration(mdp);
    CHECK(dense.value[2] == doctest::Approx(fixed).epsilon(1e-10));
    const auto& recs = res.diagnostics.records;
    for (std::size_t k = 1; k < recs.size(); ++k) CHECK(recs[k].norm >= recs[k - 1].norm * (1.0 - 1e-12));
}

TEST_CASE("policy iteration with one sub-iteration tracks value iteration") {
    auto spec = controlled_1d(0.5, Boundary::absorbing, ControlSpace::set({{-1.0}, {0.0}, {1.0}}));
    auto disc = Discretization::uniform(spec, 11);
    auto cfg = tight(1e-12, 1e-30);
    cfg.max_iters = 25;
    cfg.n_fp = 1;
    auto vi = ftvi(spec, disc, cfg);
    auto pi = ftpi(spec, disc, cfg);
    REQUIRE(vi.diagnostics.records.size() == pi.diagnostics.records.size());
    for (std::size_t k = 0; k < vi.diagnostics.records.size(); ++k) {
        CHECK(pi.diagnostics.records[k].norm == doctest::Approx(vi.diagnostics.records[k].norm).epsilon(1e-10));
    }
}

TEST_CASE("policy iteration matches tabular dynamic programming in 1D") {
    auto spec = controlled_1d(0.5, Boundary::absorbing, ControlSpace::set({{-1.0}, {0.0}, {1.0}}));
    auto disc = Discretization::uniform(spec, 11);
    oracle::DenseMdp mdp(spec, disc);
    auto dense = oracle::value_iteration(mdp, 1e-14);
    auto res = ftpi(spec, disc, tight(1e-12, 1e-26));
    CHECK(res.diagnostics.converged);
    auto got = oracle::nodal_values(res.value, mdp.index());
    CHECK(oracle::sup_diff(got, dense.value) <= 1e-6);
}

TEST_CASE("value iteration matches tabular dynamic programming in 2D") {
    auto spec = make_problem("lqg2d", {{"controls", "3"}});
    auto disc = Discretization::uniform(spec, 11);
    oracle::DenseMdp mdp(spec, disc);
    auto dense = oracle::value_iteration(mdp, 1e-13);
    const double eps = 1e-9;
    auto res = ftvi(spec, disc, tight(eps, 1e-22));
    CHECK(res.diagnostics.converged);
    auto got = oracle::nodal_values(res.value, mdp.index());
    CHECK(oracle::sup_diff(got, dense.value) <= 10 * eps * oracle::sup_norm(dense.value));
}

TEST_CASE("policy iteration needs fewer outer iterations") {
    auto spec = make_problem("lqg2d", {{"boundary", "reflecting"}, {"beta", "1"}});
    auto disc = Discretization::uniform(spec, 15);
    SolverConfig cfg;
    cfg.cross.cross_tol = cfg.cross.round_tol = 1e-8;
    cfg.cross.max_rank = 15;
    cfg.delta_max = 1e-10;
    cfg.max_iters = 5000;
    auto vi = ftvi(spec, disc, cfg);
    auto pi = ftpi(spec, disc, cfg);
    REQUIRE(vi.diagnostics.converged);
    REQUIRE(pi.diagnostics.converged);
    CHECK(pi.diagnostics.records.size() * 3 <= vi.diagnostics.records.size());
    CHECK(pi.diagnostics.records.back().norm ==
          doctest::Approx(vi.diagnostics.records.back().norm).epsilon(1e-3));
    // Values rise monotonically from the zero start.
    const auto& recs = pi.diagnostics.records;
    for (std::size_t k = 3; k < recs.size(); ++k) CHECK(recs[k].norm >= recs[k - 1].norm * (1.0 - 1e-9));
}

TEST_CASE("evaluated fraction drops with resolution") {
    auto spec = make_problem("lqg2d", {{"boundary", "reflecting"}});
    SolverConfig cfg;
    cfg.cross.cross_tol = cfg.cross.round_tol = 1e-7;
    cfg.cross.max_rank = 20;
    cfg.max_iters = 30;
    double prev = 1.0;
    for (std::size_t n : {50, 100}) {
        auto res = ftvi(spec, Discretization::uniform(spec, n), cfg);
        const double frac = res.diagnostics.records.back().frac_evals;
        CHECK(frac < 1.0);
        CHECK(frac < prev);
        prev = frac;
    }
}

TEST_CASE("diagnostics output") {
    std::ostringstream out;
    SolveDiagnostics::write_csv_header(out);
    CHECK(out.str() == "iter,level_n,norm,delta,max_rank,mean_rank,unique_evals,frac_evals,wall_ms\n");
    SolveDiagnostics d;
    IterationRecord r;
    r.iter = 3;
    r.level_n = 9;
    r.norm = 0.1;
    d.records.push_back(r);
    std::ostringstream rows;
    d.write_csv_rows(rows);
    CHECK(rows.str() == "3,9,0.10000000000000001,0,0,0,0,0,0.000\n");

    auto spec = make_problem("lqg2d");
    SolverConfig cfg;
    CHECK(resolved_delta_max(cfg, spec) == doctest::Approx(16e-6));
    cfg.delta_max = 0.5;
    CHECK(resolved_delta_max(cfg, spec) == 0.5);
}

TEST_CASE("solves are reproducible") {
    auto spec = make_problem("lqg2d", {{"boundary", "reflecting"}});
    auto disc = Discretization::uniform(spec, 21);
    SolverConfig cfg;
    cfg.max_iters = 15;
    auto a = ftpi(spec, disc, cfg);
    auto b = ftpi(spec, disc, cfg);
    std::ostringstream sa, sb;
    a.diagnostics.write_csv_rows(sa);
    b.diagnostics.write_csv_rows(sb);
    CHECK(sa.str() == sb.str());
}
