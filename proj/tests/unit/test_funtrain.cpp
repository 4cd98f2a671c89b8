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
#include <random>
#include <sstream>

#include "fthjb/funtrain.hpp"
#include "support.hpp"

using namespace fthjb;
using support::Fn1;

namespace {

const Fn1 ident = [](double x) { return x; };
const Fn1 square = [](double x) { return x * x; };
const Fn1 one = [](double) { return 1.0; };

FunctionTrain xy(std::size_t n) { return support::separable_sum(support::grids(2, n), {{ident, ident}}); }

// Midpoint-refined dense quadrature of f*g over [0,1]^2, exact for the
// bilinear-per-cell product up to the 3x3 Simpson rule on each cell.
double dense_inner(const FunctionTrain& f, const FunctionTrain& g) {
    const auto gr = f.grids();
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < gr[0].size(); ++i) {
        for (std::size_t j = 0; j + 1 < gr[1].size(); ++j) {
            const double x0 = gr[0].node(i), x1 = gr[0].node(i + 1);
            const double y0 = gr[1].node(j), y1 = gr[1].node(j + 1);
            const double wx[3] = {1, 4, 1}, wy[3] = {1, 4, 1};
            double cell = 0.0;
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const double x = x0 + 0.5 * a * (x1 - x0), y = y0 + 0.5 * b * (y1 - y0);
                    cell += wx[a] * wy[b] * f({x, y}) * g({x, y});
                }
            }
            s += cell * (x1 - x0) * (y1 - y0) / 36.0;
        }
    }
    return s;
}

}  // namespace

TEST_CASE("grid construction and lookup") {
    auto g = NodalGrid1D::uniform(-1.0, 1.0, 5);
    CHECK(g.size() == 5);
    CHECK(g.lower() == -1.0);
    CHECK(g.upper() == 1.0);
    CHECK(g.find_node(0.5) == 3);
    CHECK(g.find_node(0.25) == NodalGrid1D::npos);
    auto c = g.locate(0.25);
    CHECK(c.left == 2);
    CHECK(c.weight == doctest::Approx(0.5));
    CHECK_THROWS_AS(NodalGrid1D({0.0, 0.0, 1.0}), ShapeError);
    CHECK_THROWS_AS(NodalGrid1D({0.0}), ShapeError);
}

TEST_CASE("evaluation of small trains") {
    auto f = xy(3);
    CHECK(f({0.25, 0.5}) == doctest::Approx(0.125).epsilon(1e-15));
    auto c = FunctionTrain::constant(support::grids(3, 4), 1.0);
    CHECK(c({0.1, 0.7, 0.33}) == 1.0);
    CHECK(c.ranks() == std::vector<std::size_t>{1, 1, 1, 1});
    CHECK_THROWS_AS(f({1.5, 0.5}), DomainError);
    CHECK_THROWS_AS(f({0.5}), ShapeError);
}

TEST_CASE("nodal values of sin(x) + cos(y)") {
    auto g = support::grids(2, 50);
    auto f = support::separable_sum(g, {{[](double x) { return std::sin(x); }, one},
                                        {one, [](double y) { return std::cos(y); }}});
    CHECK(f.ranks() == std::vector<std::size_t>{1, 2, 1});
    double err = 0.0;
    for (std::size_t j = 0; j < 50; ++j) {
        for (std::size_t k = 0; k < 50; ++k) {
            const std::size_t idx[2] = {j, k};
            const double want = std::sin(g[0].node(j)) + std::cos(g[1].node(k));
            err = std::max({err, std::abs(f.at_node(idx) - want), std::abs(f({g[0].node(j), g[1].node(k)}) - want)});
        }
    }
    CHECK(err <= 1e-14);
}

TEST_CASE("addition and scaling") {
    auto f = xy(3);
    auto g = support::separable_sum(support::grids(2, 3), {{square, square}});
    auto h = ft_add(f, g);
    CHECK(h.ranks() == std::vector<std::size_t>{1, 2, 1});
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t idx[2] = {j, k};
            CHECK(h.at_node(idx) == doctest::Approx(f.at_node(idx) + g.at_node(idx)).epsilon(1e-15));
        }
    }
    auto z = ft_add(f, ft_scale(f, -1.0));
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) CHECK(std::abs(z(support::random_point(f.grids(), rng))) <= 1e-14);
    CHECK(ft_scale(f, 2.0)({0.5, 0.5}) == doctest::Approx(0.5));
    CHECK(ft_scale(f, 0.0)({0.3, 0.9}) == 0.0);
    CHECK(ft_scale(f, 1.0)({0.3, 0.9}) == f({0.3, 0.9}));
    CHECK_THROWS_AS(ft_add(f, xy(4)), ShapeError);
}

TEST_CASE("linearity on random trains") {
    auto g = support::grids(3, 7, -1.0, 2.0);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        auto f = support::random_ft(g, {2, 3}, 100 + t);
        auto h = support::random_ft(g, {3, 1}, 200 + t);
        const double c = std::uniform_real_distribution<double>(-3, 3)(rng);
        auto x = support::random_point(g, rng);
        const double fx = f(x), hx = h(x);
        CHECK(ft_add(f, h)(x) == doctest::Approx(fx + hx).epsilon(1e-13));
        CHECK(ft_scale(f, c)(x) == doctest::Approx(c * fx).epsilon(1e-13));
        CHECK(ft_sub(f, h)(x) == doctest::Approx(fx - hx).epsilon(1e-13));
    }
}

TEST_CASE("inner products and norms") {
    auto g = support::grids(2, 6);
    auto ones = FunctionTrain::constant(g, 1.0);
    auto x = support::separable_sum(g, {{ident, one}});
    CHECK(ft_inner(ones, ones) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ft_inner(ones, x) == doctest::Approx(0.5).epsilon(1e-14));
    // x*y is bilinear, so the hat interpolant is exact.
    auto p = xy(6);
    CHECK(std::abs(ft_inner(p, p) - 1.0 / 9.0) <= 1e-12);
    CHECK(ft_norm(FunctionTrain::zero(g)) == 0.0);
    CHECK(ft_norm(FunctionTrain::constant(support::grids(4, 3), 1.0)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ft_norm(FunctionTrain::constant(g, 2.0)) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS_AS(ft_inner(p, xy(5)), ShapeError);
}

TEST_CASE("inner product agrees with dense quadrature") {
    for (std::size_t n : {2, 5, 17, 30}) {
        auto g = support::grids(2, n);
        auto f = support::random_ft(g, {3}, n);
        auto h = support::random_ft(g, {4}, 3 * n);
        const double want = dense_inner(f, h);
        CHECK(std::abs(ft_inner(f, h) - want) <= 1e-11 * std::abs(want) + 1e-14);
        CHECK(ft_norm(f) == doctest::Approx(std::sqrt(dense_inner(f, f))).epsilon(1e-11));
    }
}

TEST_CASE("rounding recovers exact ranks") {
    auto g = support::grids(2, 10);
    auto base = support::separable_sum(g, {{ident, one}, {one, ident}});
    auto redundant = ft_add(base, base);
    CHECK(redundant.ranks() == std::vector<std::size_t>{1, 4, 1});
    auto r = ft_round(redundant, 1e-10);
    CHECK(r.ranks() == std::vector<std::size_t>{1, 2, 1});
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        auto x = support::random_point(g, rng);
        CHECK(std::abs(r(x) - redundant(x)) <= 1e-9 * ft_norm(redundant));
    }
    auto f = support::random_ft(support::grids(3, 8), {3, 2}, 11);
    CHECK(ft_round(ft_add(f, f), 1e-12).ranks() == f.ranks());
}

TEST_CASE("rounding a rank-one train is the identity") {
    auto f = xy(9);
    auto r = ft_round(f, 1e-3);
    CHECK(r.ranks() == f.ranks());
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        auto x = support::random_point(f.grids(), rng);
        CHECK(r(x) == doctest::Approx(f(x)).epsilon(1e-13));
    }
    CHECK_THROWS_AS(ft_round(f, 0.0), ParameterError);
    CHECK_THROWS_AS(ft_round(f, -1.0), ParameterError);
}

TEST_CASE("rounding error stays within the tolerance") {
    auto g = support::grids(2, 20);
    for (double eps : {1e-2, 1e-5}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto f = support::random_ft(g, {8}, seed);
            auto r = ft_round(f, eps);
            CHECK(r.max_rank() <= 8);
            CHECK(ft_norm(ft_sub(f, r)) <= eps * ft_norm(f));
        }
    }
    auto g4 = support::grids(4, 6, -2.0, 3.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto f = support::random_ft(g4, {4, 6, 4}, 50 + seed);
        auto r = ft_round(f, 0.3);
        CHECK(ft_norm(ft_sub(f, r)) <= 0.3 * ft_norm(f));
    }
}

TEST_CASE("axis neighbor evaluation matches direct evaluation") {
    auto g = support::grids(3, 5);
    auto f = support::random_ft(g, {3, 2}, 9);
    AxisNeighborEvaluator ev(f);
    const std::size_t c[3] = {1, 4, 2};
    ev.set_center(c);
    CHECK(ev.center() == doctest::Approx(f.at_node(c)).epsilon(1e-14));
    for (std::size_t d = 0; d < 3; ++d) {
        for (std::size_t k = 0; k < 5; ++k) {
            std::size_t idx[3] = {1, 4, 2};
            idx[d] = k;
            CHECK(ev.along(d, k) == doctest::Approx(f.at_node(idx)).epsilon(1e-13));
        }
    }
}

TEST_CASE("serialization round trip is bit exact") {
    auto f = support::random_ft(support::grids(3, 6, -1.0, 0.5), {2, 4}, 17);
    std::stringstream a;
    write_ft(a, f);
    const std::string first = a.str();
    CHECK(first.substr(0, 4) == "FTRN");
    std::stringstream in(first);
    auto back = read_ft(in);
    std::stringstream b;
    write_ft(b, back);
    CHECK(b.str() == first);
    CHECK(back.ranks() == f.ranks());
    for (std::size_t i = 0; i < 3; ++i) {
        auto x = f.core(i).coeffs(), y = back.core(i).coeffs();
        CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
}

TEST_CASE("corrupted streams are rejected") {
    auto f = xy(4);
    std::stringstream s;
    write_ft(s, f);
    std::string bytes = s.str();
    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream b1(bad);
    CHECK_THROWS_AS(read_ft(b1), FormatError);
    std::stringstream b2(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_ft(b2), FormatError);
    std::string wrong_version = bytes;
    wrong_version[4] = 9;
    std::stringstream b3(wrong_version);
    CHECK_THROWS_AS(read_ft(b3), FormatError);
}
