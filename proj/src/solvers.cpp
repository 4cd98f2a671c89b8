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
#include <chrono>
#include <cmath>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "fthjb/dpsolve.hpp"
#include "pool.hpp"

namespace fthjb {

void SolveDiagnostics::write_csv_header(std::ostream& out) {
    out << "iter,level_n,norm,delta,max_rank,mean_rank,unique_evals,frac_evals,wall_ms\n";
}

void SolveDiagnostics::write_csv_rows(std::ostream& out) const {
    for (const auto& r : records) {
        fmt::print(out, "{},{},{:.17g},{:.17g},{},{:.17g},{},{:.17g},{:.3f}\n", r.iter, r.level_n, r.norm, r.delta,
                   r.max_rank, r.mean_rank, r.unique_evals, r.frac_evals, r.wall_ms);
    }
}

double box_volume(const ProblemSpec& spec) {
    double v = 1.0;
    for (std::size_t i = 0; i < spec.dim; ++i) v *= spec.upper[i] - spec.lower[i];
    return v;
}

double resolved_delta_max(const SolverConfig& cfg, const ProblemSpec& spec) {
    return cfg.delta_max > 0.0 ? cfg.delta_max : 1e-6 * box_volume(spec);
}

namespace {

using Clock = std::chrono::steady_clock;

CrossConfig warm_config(const CrossConfig& base, const FunctionTrain& v) {
    CrossConfig c = base;
    auto r = v.ranks();
    for (std::size_t k = 1; k + 1 < r.size(); ++k) r[k] = std::min(r[k] + base.kickrank, base.max_rank);
    c.init_ranks = std::move(r);
    return c;
}

FunctionTrain initial_value(const Discretization& disc, std::optional<FunctionTrain> init) {
    if (init) {
        if (init->dim() != disc.dim()) throw ShapeError("initial value has the wrong dimension");
        for (std::size_t i = 0; i < disc.dim(); ++i) {
            if (!(init->core(i).grid() == disc.grid(i))) throw ShapeError("initial value grid mismatch");
        }
        return std::move(*init);
    }
    return FunctionTrain::zero(disc.grids());
}

IterationRecord make_record(std::size_t iter, const Discretization& disc, const FunctionTrain& v, double delta,
                            std::size_t unique, const SolverConfig& cfg, Clock::time_point start) {
    IterationRecord r;
    r.iter = iter;
    r.level_n = disc.grid(0).size();
    r.norm = ft_norm(v);
    r.delta = delta;
    r.max_rank = v.max_rank();
    r.mean_rank = v.mean_rank();
    r.unique_evals = unique;
    r.frac_evals = static_cast<double>(unique) / disc.num_nodes();
    if (cfg.record_time) {
        r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    }
    return r;
}

void finish_iteration(SolveDiagnostics& diag, const SolverConfig& cfg, IterationRecord rec) {
    if (cfg.on_iteration) cfg.on_iteration(rec);
    diag.records.push_back(rec);
}

RankAdaptResult bellman_update(const ProblemSpec& spec, const Discretization& disc, const FunctionTrain& v,
                               const CrossConfig& cfg, const OptimizerConfig& opt) {
    detail::Pool<NodeBellman> pool([&] { return std::make_unique<NodeBellman>(spec, disc, v, opt); });
    CachedFunction f(
        [&](std::span<const std::size_t> idx) {
            auto w = pool.acquire();
            w->set_state(idx);
            return w->minimize().value;
        },
        disc.shape());
    return ft_rankadapt(f, warm_config(cfg, v), disc.grids());
}

}  // namespace

RankAdaptResult apply_policy(const ProblemSpec& spec, const Discretization& disc, const ImplicitPolicy& policy,
                             const FunctionTrain& v, const CrossConfig& cfg, const OptimizerConfig& opt) {
    detail::Pool<NodeBellman> pool([&] { return std::make_unique<NodeBellman>(spec, disc, v, opt); });
    CachedFunction f(
        [&](std::span<const std::size_t> idx) {
            const auto u = policy.control(idx);
            auto w = pool.acquire();
            w->set_state(idx);
            return w->rhs(u);
        },
        disc.shape());
    return ft_rankadapt(f, warm_config(cfg, v), disc.grids());
}

SolveResult ftvi(const ProblemSpec& spec, const Discretization& disc, const SolverConfig& cfg,
                 std::optional<FunctionTrain> init) {
    spec.validate();
    cfg.cross.validate(disc.dim());
    const double delta_max = resolved_delta_max(cfg, spec);
    FunctionTrain v = initial_value(disc, std::move(init));
    SolveDiagnostics diag;
    const auto start = Clock::now();
    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        auto res = bellman_update(spec, disc, v, cfg.cross, cfg.optimizer);
        diag.rank_capped = diag.rank_capped || res.rank_capped;
        const double delta = std::pow(ft_norm(ft_sub(res.ft, v)), 2);
        v = std::move(res.ft);
        finish_iteration(diag, cfg, make_record(k, disc, v, delta, res.counter.unique_states_evaluated, cfg, start));
        if (delta < delta_max) {
            diag.converged = true;
            break;
        }
    }
    return {std::move(v), std::move(diag)};
}

SolveResult ftpi(const ProblemSpec& spec, const Discretization& disc, const SolverConfig& cfg,
                 std::optional<FunctionTrain> init) {
    spec.validate();
    cfg.cross.validate(disc.dim());
    if (cfg.n_fp < 1) throw ParameterError("n_fp must be at least 1");
    const double delta_max = resolved_delta_max(cfg, spec);
    FunctionTrain v = initial_value(disc, std::move(init));
    SolveDiagnostics diag;
    const auto start = Clock::now();
    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        ImplicitPolicy policy(spec, disc, v, cfg.optimizer);
        FunctionTrain w = v;
        std::size_t unique = 0;
        for (std::size_t l = 0; l < cfg.n_fp; ++l) {
            auto res = apply_policy(spec, disc, policy, w, cfg.cross, cfg.optimizer);
            diag.rank_capped = diag.rank_capped || res.rank_capped;
            unique = std::max(unique, res.counter.unique_states_evaluated);
            w = std::move(res.ft);
        }
        const double delta = std::pow(ft_norm(ft_sub(w, v)), 2);
        v = std::move(w);
        finish_iteration(diag, cfg, make_record(k, disc, v, delta, unique, cfg, start));
        if (delta < delta_max) {
            diag.converged = true;
            break;
        }
    }
    return {std::move(v), std::move(diag)};
}

SolveResult ftpi_vgrid(const ProblemSpec& spec, const Discretization& disc, const SolverConfig& cfg,
                       std::optional<FunctionTrain> init) {
    spec.validate();
    cfg.cross.validate(disc.dim());
    std::vector<NodalGrid1D> coarse_grids;
    for (std::size_t i = 0; i < disc.dim(); ++i) {
        const std::size_t n = disc.grid(i).size();
        if (n % 2 == 0 || n < 5) throw ShapeError("the V-grid solver needs odd node counts of at least 5");
        coarse_grids.push_back(prolong(FunctionTrain::zero({disc.grid(i)})).core(0).grid());
    }
    const Discretization coarse(std::move(coarse_grids));
    const double delta_max = resolved_delta_max(cfg, spec);
    VgridConfig vcfg;
    vcfg.pre_smooth = cfg.vgrid_pre;
    vcfg.coarse_iters = cfg.vgrid_coarse;
    vcfg.omega = cfg.omega;
    FunctionTrain v = initial_value(disc, std::move(init));
    SolveDiagnostics diag;
    const auto start = Clock::now();
    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        ImplicitPolicy policy(spec, disc, v, cfg.optimizer);
        auto res = vgrid_two_level(spec, disc, coarse, policy, v, vcfg, cfg.cross, cfg.optimizer);
        diag.rank_capped = diag.rank_capped || res.rank_capped;
        const double delta = std::pow(ft_norm(ft_sub(res.value, v)), 2);
        v = std::move(res.value);
        finish_iteration(diag, cfg, make_record(k, disc, v, delta, res.unique_evals, cfg, start));
        if (delta < delta_max) {
            diag.converged = true;
            break;
        }
    }
    return {std::move(v), std::move(diag)};
}

}  // namespace fthjb
