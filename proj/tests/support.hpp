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

// Builders shared by the test programs.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "fthjb/funtrain.hpp"

namespace support {

using fthjb::FtCore;
using fthjb::FunctionTrain;
using fthjb::NodalGrid1D;
using Fn1 = std::function<double(double)>;

inline std::vector<NodalGrid1D> grids(std::size_t d, std::size_t n, double lo = 0.0, double hi = 1.0) {
    return std::vector<NodalGrid1D>(d, NodalGrid1D::uniform(lo, hi, n));
}

// f(x) = sum_t prod_i terms[t][i](x_i), one rank per term.
inline FunctionTrain separable_sum(const std::vector<NodalGrid1D>& g, const std::vector<std::vector<Fn1>>& terms) {
    const std::size_t d = g.size(), r = terms.size();
    std::vector<FtCore> cores;
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t rl = i == 0 ? 1 : r, rr = i + 1 == d ? 1 : r;
        FtCore c(g[i], rl, rr);
        for (std::size_t t = 0; t < r; ++t) {
            const std::size_t a = i == 0 ? 0 : t, b = i + 1 == d ? 0 : t;
            for (std::size_t l = 0; l < g[i].size(); ++l) c.at(a, b, l) += terms[t][i](g[i].node(l));
        }
        cores.push_back(std::move(c));
    }
    return FunctionTrain(std::move(cores));
}

// Standard normal coefficients with the given interior ranks.
inline FunctionTrain random_ft(const std::vector<NodalGrid1D>& g, const std::vector<std::size_t>& interior,
                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<FtCore> cores;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t rl = i == 0 ? 1 : interior[i - 1];
        const std::size_t rr = i + 1 == g.size() ? 1 : interior[i];
        FtCore c(g[i], rl, rr);
        for (auto& v : c.coeffs()) v = nd(rng);
        cores.push_back(std::move(c));
    }
    return FunctionTrain(std::move(cores));
}

inline std::vector<double> random_point(const std::vector<NodalGrid1D>& g, std::mt19937_64& rng) {
    std::vector<double> x(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::uniform_real_distribution<double> u(g[i].lower(), g[i].upper());
        x[i] = u(rng);
    }
    return x;
}

}  // namespace support
