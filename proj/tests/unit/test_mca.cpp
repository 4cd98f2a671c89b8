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

#include <atomic>
#include <memory>
#include <cmath>
#include <random>

#include "fthjb/mca.hpp"
#include "fthjb/problems.hpp"

using namespace fthjb;

namespace {

// dx = (b + u) dt + sqrt(a) dw on [0, 1] in every dimension.
ProblemSpec constant_spec(std::size_t d, double b, double a, Boundary bc = Boundary::absorbing) {
    ProblemSpec s;
    s.name = "constant";
    s.dim = d;
    s.control_dim = 1;
    s.lower.assign(d, 0.0);
    s.upper.assign(d, 1.0);
    s.boundary.assign(d, bc);
    s.drift = [b](std::span<const double>, std::span<const double> u, std::span<double> out) {
        for (auto& v : out) v = b + u[0];
    };
    s.diffusion = [a](std::span<const double>, std::span<double> out) {
        for (auto& v : out) v = a;
    };
    s.stage_cost = [](std::span<const double>, std::span<const double>) { return 2.0; };
    s.terminal_cost = [](std::span<const double> x) { return 5.0 + x[0]; };
    s.beta = 0.5;
    s.controls = ControlSpace::set({{0.0}});
    s.state_names.assign(d, "x");
    s.control_names = {"u"};
    return s;
}

double total_prob(const TransitionStencil& st) {
    double s = st.self_prob;
    for (const auto& m : st.moves) s += m.prob;
    return s;
}

const std::vector<double> kZero{0.0};

}  // namespace

TEST_CASE("pure diffusion in one dimension") {
    auto spec = constant_spec(1, 0.0, 1.0);
    auto disc = Discretization::uniform(spec, 11);
    const std::size_t idx[1] = {5};
    auto st = build_stencil(spec, disc, idx, kZero);
    CHECK(st.moves[0].prob == doctest::Approx(0.5));
    CHECK(st.moves[1].prob == doctest::Approx(0.5));
    CHECK(st.dt == doctest::Approx(0.01));
    CHECK(st.gamma == doctest::Approx(std::exp(-0.5 * 0.01)));
    CHECK(st.cost == doctest::Approx(2.0 * 0.01));
}

TEST_CASE("upwind weights with unit drift") {
    auto spec = constant_spec(1, 1.0, 1.0);
    auto disc = Discretization::uniform(spec, 11);
    const std::size_t idx[1] = {5};
    auto st = build_stencil(spec, disc, idx, kZero);
    CHECK(st.moves[1].prob == doctest::Approx(0.6 / 1.1).epsilon(1e-14));
    CHECK(st.moves[0].prob == doctest::Approx(0.5 / 1.1).epsilon(1e-14));
    CHECK(st.dt == doctest::Approx(0.01 / 1.1).epsilon(1e-14));
    auto rep = consistency_check(spec, disc, idx, kZero);
    CHECK(std::abs(rep.mean_rate[0] - 1.0) <= 1e-12);
    CHECK(rep.second_moment[0] == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(rep.residual[0] == doctest::Approx(0.1).epsilon(1e-10));
    CHECK(rep.residual_bound[0] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("isotropic diffusion in two dimensions") {
    auto spec = constant_spec(2, 0.0, 0.3);
    auto disc = Discretization::uniform(spec, 9);
    const std::size_t idx[2] = {4, 3};
    auto st = build_stencil(spec, disc, idx, kZero);
    for (const auto& m : st.moves) CHECK(m.prob == doctest::Approx(0.25));
    auto rep = consistency_check(spec, disc, idx, kZero);
    CHECK(rep.residual[0] == 0.0);
    CHECK(rep.residual[1] == 0.0);
}

TEST_CASE("unequal steps scale the weights") {
    auto spec = constant_spec(2, 0.7, 0.4);
    spec.upper[1] = 3.0;
    const std::size_t n[2] = {11, 16};
    auto disc = Discretization::uniform(spec, n);
    const std::size_t idx[2] = {5, 7};
    auto rep = consistency_check(spec, disc, idx, kZero);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(rep.mean_rate[i] == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(std::abs(rep.residual[i]) <= rep.residual_bound[i] + 1e-12);
    }
}

TEST_CASE("degenerate dynamics are rejected") {
    auto spec = constant_spec(1, 0.0, 0.0);
    auto disc = Discretization::uniform(spec, 5);
    const std::size_t idx[1] = {2};
    CHECK_THROWS_AS(build_stencil(spec, disc, idx, kZero), DegenerateDynamicsError);
}

TEST_CASE("reflecting faces fold mass onto the center") {
    auto spec = constant_spec(1, -0.8, 0.5, Boundary::reflecting);
    auto disc = Discretization::uniform(spec, 6);
    const std::size_t inner[1] = {2}, edge[1] = {0};
    auto a = build_stencil(spec, disc, inner, kZero);
    auto b = build_stencil(spec, disc, edge, kZero);
    CHECK(b.moves[0].kind == MoveKind::folded);
    CHECK(b.moves[0].prob == 0.0);
    CHECK(b.self_prob == doctest::Approx(a.moves[0].prob).epsilon(1e-15));
    CHECK(b.moves[1].prob == doctest::Approx(a.moves[1].prob).epsilon(1e-15));
    CHECK(total_prob(b) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(b.terminal);
}

TEST_CASE("periodic faces wrap around") {
    auto spec = constant_spec(1, 0.3, 0.5, Boundary::periodic);
    auto disc = Discretization::uniform(spec, 8);
    const std::size_t first[1] = {0}, last[1] = {7};
    auto a = build_stencil(spec, disc, first, kZero);
    CHECK(a.moves[0].kind == MoveKind::node);
    CHECK(a.moves[0].node == 6);
    auto b = build_stencil(spec, disc, last, kZero);
    CHECK(b.moves[1].node == 1);
}

TEST_CASE("absorbing faces and targets are terminal") {
    auto spec = constant_spec(1, 0.0, 1.0);
    auto disc = Discretization::uniform(spec, 11);
    const std::size_t face[1] = {0}, near[1] = {1}, mid[1] = {5};
    auto a = build_stencil(spec, disc, face, kZero);
    CHECK(a.terminal);
    CHECK(a.terminal_value == doctest::Approx(5.0));
    auto b = build_stencil(spec, disc, near, kZero);
    CHECK_FALSE(b.terminal);
    CHECK(b.moves[0].kind == MoveKind::terminal);
    CHECK(b.moves[0].terminal_value == doctest::Approx(5.0));
    CHECK(b.moves[1].kind == MoveKind::node);
    spec.target = [](std::span<const double> x) { return x[0] > 0.55 && x[0] < 0.65; };
    auto c = build_stencil(spec, disc, mid, kZero);
    CHECK(c.moves[1].kind == MoveKind::terminal);
    CHECK(c.moves[1].terminal_value == doctest::Approx(5.6));
    const std::size_t in_target[1] = {6};
    CHECK(build_stencil(spec, disc, in_target, kZero).terminal);
}

TEST_CASE("one drift and one diffusion call per stencil") {
    auto spec = constant_spec(3, 0.2, 0.5, Boundary::reflecting);
    auto drift = spec.drift;
    auto diffusion = spec.diffusion;
    auto nd = std::make_shared<std::atomic<int>>(0), na = std::make_shared<std::atomic<int>>(0);
    spec.drift = [=](std::span<const double> x, std::span<const double> u, std::span<double> b) {
        ++*nd;
        drift(x, u, b);
    };
    spec.diffusion = [=](std::span<const double> x, std::span<double> a) {
        ++*na;
        diffusion(x, a);
    };
    auto disc = Discretization::uniform(spec, 7);
    const std::size_t idx[3] = {0, 3, 6};
    build_stencil(spec, disc, idx, kZero);
    CHECK(nd->load() == 1);
    CHECK(na->load() == 1);
    StencilBuilder builder(spec, disc);
    builder.set_state(idx);
    TransitionStencil st;
    for (int k = 0; k < 5; ++k) builder.build(kZero, st);
    CHECK(nd->load() == 6);
    CHECK(na->load() == 2);
}

TEST_CASE("simplex, discount and drift identity on catalog problems") {
    std::mt19937_64 rng(2024);
    for (const auto& entry : problem_catalog()) {
        Overrides o;
        if (entry.name == "glider") o = {{"u_lb", "-2"}, {"u_ub", "2"}};
        auto spec = make_problem(entry.name, o);
        auto disc = Discretization::uniform(spec, 9);
        StencilBuilder builder(spec, disc);
        TransitionStencil st;
        std::vector<std::size_t> idx(spec.dim);
        std::vector<double> u(spec.control_dim), x(spec.dim);
        for (int t = 0; t < 200; ++t) {
            for (auto& i : idx) i = rng() % 9;
            if (spec.controls.is_finite()) {
                u = spec.controls.finite[rng() % spec.controls.finite.size()];
            } else {
                for (std::size_t j = 0; j < u.size(); ++j) {
                    u[j] = std::uniform_real_distribution<double>(spec.controls.lower[j], spec.controls.upper[j])(rng);
                }
            }
            builder.set_state(idx);
            builder.build(u, st);
            CHECK(total_prob(st) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(st.self_prob >= -1e-15);
            for (const auto& m : st.moves) CHECK(m.prob >= -1e-15);
            if (st.terminal) continue;
            CHECK(st.gamma > 0.0);
            CHECK(st.gamma < 1.0);
        }
    }
}

TEST_CASE("control spaces") {
    auto c = ControlSpace::lattice({-1.0}, {1.0}, 3);
    REQUIRE(c.finite.size() == 3);
    CHECK(c.finite[0][0] == -1.0);
    CHECK(c.finite[1][0] == 0.0);
    CHECK(c.finite[2][0] == 1.0);
    auto b = ControlSpace::box({-1.0, 0.0}, {1.0, 2.0});
    const double inside[2] = {0.5, 1.0}, outside[2] = {0.5, 3.0};
    CHECK(b.contains(inside));
    CHECK_FALSE(b.contains(outside));
    CHECK(b.dim() == 2);
}

TEST_CASE("boundary names") {
    CHECK(parse_boundary("reflecting") == Boundary::reflecting);
    CHECK(to_string(Boundary::periodic) == "periodic");
    CHECK_THROWS(parse_boundary("sticky"));
}

TEST_CASE("discretizations must be uniform") {
    CHECK_THROWS_AS(Discretization({NodalGrid1D({0.0, 0.1, 1.0})}), ShapeError);
    auto spec = constant_spec(2, 0.0, 1.0);
    auto disc = Discretization::uniform(spec, 5);
    CHECK(disc.num_nodes() == 25.0);
    CHECK(disc.step(1) == doctest::Approx(0.25));
}
