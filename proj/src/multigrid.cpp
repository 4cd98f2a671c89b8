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

#include <fmt/core.h>

#include "fthjb/dpsolve.hpp"
#include "pool.hpp"

namespace fthjb {

namespace {

NodalGrid1D every_other(const NodalGrid1D& g) {
    if (g.size() % 2 == 0 || g.size() < 3) {
        throw ShapeError(fmt::format("restriction needs an odd node count, got {}", g.size()));
    }
    std::vector<double> nodes;
    for (std::size_t k = 0; k < g.size(); k += 2) nodes.push_back(g.node(k));
    return NodalGrid1D(std::move(nodes));
}

FunctionTrain with_grids(const FunctionTrain& f, const std::vector<NodalGrid1D>& grids) {
    std::vector<FtCore> cores;
    for (std::size_t k = 0; k < f.dim(); ++k) {
        const auto& c = f.core(k);
        cores.emplace_back(grids[k], c.rows(), c.cols(), std::vector<double>(c.coeffs().begin(), c.coeffs().end()));
    }
    return FunctionTrain(std::move(cores));
}

void require_subgrid(const Discretization& fine, const Discretization& coarse) {
    if (fine.dim() != coarse.dim()) throw ShapeError("fine and coarse dimensions differ");
    for (std::size_t i = 0; i < fine.dim(); ++i) {
        const auto& f = fine.grid(i);
        const auto& c = coarse.grid(i);
        if (f.size() != 2 * c.size() - 1) throw ShapeError("coarse grid must hold every other fine node");
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (std::abs(c.node(k) - f.node(2 * k)) > 1e-12 * fine.step(i)) {
                throw ShapeError("coarse grid must hold every other fine node");
            }
        }
    }
}

}  // namespace

FunctionTrain prolong(const FunctionTrain& fine) {
    std::vector<FtCore> cores;
    for (const auto& c : fine.cores()) {
        NodalGrid1D g = every_other(c.grid());
        FtCore out(g, c.rows(), c.cols());
        for (std::size_t a = 0; a < c.rows(); ++a)
            for (std::size_t b = 0; b < c.cols(); ++b)
                for (std::size_t l = 0; l < g.size(); ++l) out.at(a, b, l) = c.at(a, b, 2 * l);
        cores.push_back(std::move(out));
    }
    return FunctionTrain(std::move(cores));
}

FunctionTrain resample(const FunctionTrain& f, const std::vector<NodalGrid1D>& grids) {
    if (grids.size() != f.dim()) throw ShapeError("grid count does not match the train dimension");
    std::vector<FtCore> cores;
    for (std::size_t k = 0; k < f.dim(); ++k) {
        const auto& c = f.core(k);
        const auto& g = grids[k];
        const double tol = 1e-12 * (c.grid().upper() - c.grid().lower());
        if (std::abs(g.lower() - c.grid().lower()) > tol || std::abs(g.upper() - c.grid().upper()) > tol) {
            throw ShapeError(fmt::format("grid {} covers a different interval", k));
        }
        FtCore out(g, c.rows(), c.cols());
        std::vector<double> mat(c.rows() * c.cols());
        for (std::size_t l = 0; l < g.size(); ++l) {
            const double x = std::clamp(g.node(l), c.grid().lower(), c.grid().upper());
            c.eval_matrix(x, mat);
            for (std::size_t a = 0; a < c.rows(); ++a)
                for (std::size_t b = 0; b < c.cols(); ++b) out.at(a, b, l) = mat[a * c.cols() + b];
        }
        cores.push_back(std::move(out));
    }
    return FunctionTrain(std::move(cores));
}

FunctionTrain interp(const FunctionTrain& coarse, const std::vector<NodalGrid1D>& fine) {
    if (fine.size() != coarse.dim()) throw ShapeError("grid count does not match the train dimension");
    for (std::size_t k = 0; k < fine.size(); ++k) {
        for (double x : coarse.core(k).grid().nodes()) {
            if (fine[k].find_node(x, 1e-9) == NodalGrid1D::npos) {
                throw ShapeError(fmt::format("coarse node {} of dimension {} is not a fine node", x, k));
            }
        }
    }
    return resample(coarse, fine);
}

VgridResult vgrid_two_level(const ProblemSpec& spec, const Discretization& fine, const Discretization& coarse,
                            const ImplicitPolicy& policy, FunctionTrain v, const VgridConfig& vcfg,
                            const CrossConfig& cfg, const OptimizerConfig& opt) {
    require_subgrid(fine, coarse);
    if (!(vcfg.omega > 0.0 && vcfg.omega < 2.0)) throw ParameterError("omega must lie in (0, 2)");
    VgridResult out{std::move(v), 0.0, 0, false};
    auto note = [&](const RankAdaptResult& r) {
        out.unique_evals = std::max(out.unique_evals, r.counter.unique_states_evaluated);
        out.rank_capped = out.rank_capped || r.rank_capped;
    };
    FunctionTrain& val = out.value;
    for (std::size_t cycle = 0; cycle < vcfg.cycles; ++cycle) {
        for (std::size_t l = 0; l < vcfg.pre_smooth; ++l) {
            auto t = apply_policy(spec, fine, policy, val, cfg, opt);
            note(t);
            if (vcfg.omega == 1.0) {
                val = std::move(t.ft);
            } else {
                val = ft_round(ft_add(ft_scale(t.ft, vcfg.omega), ft_scale(val, 1.0 - vcfg.omega)), cfg.round_tol);
            }
        }
        auto t = apply_policy(spec, fine, policy, val, cfg, opt);
        note(t);
        const FunctionTrain r = ft_round(ft_sub(t.ft, val), cfg.round_tol);
        out.residual_norm = ft_norm(r);
        const FunctionTrain r2 = with_grids(prolong(r), coarse.grids());

        FunctionTrain e = FunctionTrain::zero(coarse.grids());
        for (std::size_t l = 0; l < vcfg.coarse_iters; ++l) {
            detail::Pool<NodeBellman> cpool([&] { return std::make_unique<NodeBellman>(spec, coarse, e, opt); });
            detail::Pool<StencilBuilder> fpool([&] { return std::make_unique<StencilBuilder>(spec, fine); });
            CachedFunction f(
                [&](std::span<const std::size_t> idx) {
                    std::vector<std::size_t> fidx(idx.begin(), idx.end());
                    for (auto& i : fidx) i *= 2;
                    auto nb = cpool.acquire();
                    nb->set_state(idx);
                    if (nb->terminal()) return 0.0;
                    const auto u = policy.control(fidx);
                    const double expect = nb->homogeneous_expectation(u);
                    double stage = r2.at_node(idx);
                    if (vcfg.scale_residual) {
                        auto sb = fpool.acquire();
                        sb->set_state(fidx);
                        TransitionStencil st;
                        sb->build(u, st);
                        stage *= nb->stencil().dt / st.dt;
                    }
                    return stage + expect;
                },
                coarse.shape());
            CrossConfig c = cfg;
            auto ranks = e.ranks();
            for (std::size_t k = 1; k + 1 < ranks.size(); ++k) ranks[k] = std::min(ranks[k] + cfg.kickrank, cfg.max_rank);
            c.init_ranks = ranks;
            auto res = ft_rankadapt(f, c, coarse.grids());
            note(res);
            e = std::move(res.ft);
        }
        val = ft_round(ft_add(val, interp(e, fine.grids())), cfg.round_tol);
    }
    return out;
}

MultigridResult oneway_multigrid(const ProblemSpec& spec, const std::vector<std::size_t>& schedule,
                                 const SolverConfig& cfg, SolverKind kind) {
    if (schedule.empty()) throw ParameterError("grid schedule is empty");
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        if (schedule[i] <= schedule[i - 1]) throw ParameterError("grid schedule must be strictly increasing");
    }
    MultigridResult out{FunctionTrain::zero(Discretization::uniform(spec, schedule.front()).grids()), {}, true};
    std::optional<FunctionTrain> warm;
    for (std::size_t n : schedule) {
        const Discretization disc = Discretization::uniform(spec, n);
        if (warm) {
            // Nested schedules refine exactly; others fall back to resampling.
            bool nested = true;
            for (std::size_t i = 0; i < disc.dim() && nested; ++i) {
                for (double x : warm->core(i).grid().nodes()) {
                    if (disc.grid(i).find_node(x, 1e-9) == NodalGrid1D::npos) {
                        nested = false;
                        break;
                    }
                }
            }
            warm = nested ? interp(*warm, disc.grids()) : resample(*warm, disc.grids());
        }
        SolveResult res = kind == SolverKind::ftvi   ? ftvi(spec, disc, cfg, std::move(warm))
                          : kind == SolverKind::ftpi ? ftpi(spec, disc, cfg, std::move(warm))
                                                     : ftpi_vgrid(spec, disc, cfg, std::move(warm));
        out.converged = out.converged && res.diagnostics.converged;
        out.levels.push_back(std::move(res.diagnostics));
        warm = res.value;
        out.value = std::move(res.value);
    }
    return out;
}

}  // namespace fthjb
