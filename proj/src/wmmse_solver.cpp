/*
 * Copyright 2026 The mmpc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mmpc/wmmse_solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mmpc/errors.hpp"
#include "mmpc/random.hpp"

namespace mmpc {

namespace {

struct Dims {
    int cells;
    int slots;
    double kmax;
    double mk;
    double sqrt_mk;
    double noise;
};

Dims dims_of(const Realization& r, const SystemParams& params) {
    const double kmax = r.slots();
    const double mk = static_cast<double>(params.num_antennas) * kmax;
    return {r.cells(), r.slots(), kmax, mk, std::sqrt(mk), params.noise_power_mw};
}

/// sum_{i,t active} rho_{i,t}^2 beta^l_{i,t} + sigma^2 for every BS l.
std::vector<double> data_interference(const SolverState& s, const Realization& r, double noise) {
    std::vector<double> out(static_cast<std::size_t>(r.cells()), noise);
    for (int l = 0; l < r.cells(); ++l)
        for (int i = 0; i < r.cells(); ++i)
            for (int t = 0; t < r.slots(); ++t)
                if (r.is_active(i, t)) {
                    const double rho = s.rho(i, t);
                    out[static_cast<std::size_t>(l)] += rho * rho * r.beta.at(l, i, t);
                }
    return out;
}

/// K sum_{i in P_t} rho_hat_{i,t}^2 beta^l_{i,t} + sigma^2 for every (BS l, slot t).
SlotMatrix pilot_received(const SolverState& s, const Realization& r, double kmax, double noise) {
    SlotMatrix out(r.cells(), r.slots());
    for (int l = 0; l < r.cells(); ++l)
        for (int t = 0; t < r.slots(); ++t) {
            double acc = 0.0;
            for (int i = 0; i < r.cells(); ++i)
                if (r.is_active(i, t)) {
                    const double rh = s.rho_hat(i, t);
                    acc += rh * rh * r.beta.at(l, i, t);
                }
            out(l, t) = kmax * acc + noise;
        }
    return out;
}

/// Projected closed-form amplitude; 0/0 resolves to 0.
double project_amplitude(double numer, double denom, double max_power) {
    if (numer == 0.0) return 0.0;
    return std::min(numer / denom, std::sqrt(max_power));
}

double sum_log1p_sinr(const Realization& r, const PowerAllocation& p, const SystemParams& params) {
    const SlotMatrix sinr = compute_sinr(r, p, params);
    double acc = 0.0;
    for (int l = 0; l < r.cells(); ++l)
        for (int k = 0; k < r.slots(); ++k)
            if (r.is_active(l, k)) acc += std::log1p(sinr(l, k));
    return acc;
}

}  // namespace

void SolverConfig::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("solver epsilon must be positive");
    if (max_iters < 1) throw ConfigError("solver max_iters must be at least 1");
    if (num_inits < 1) throw ConfigError("solver num_inits must be at least 1");
}

SolverState initial_state(const Realization& r, const SystemParams& params, InitKind init,
                          SolverMode mode, std::uint64_t init_seed, std::uint64_t start_index) {
    const int cells = r.cells();
    const int slots = r.slots();
    SolverState s{SlotMatrix(cells, slots), SlotMatrix(cells, slots), SlotMatrix(cells, slots),
                  SlotMatrix(cells, slots)};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int l = 0; l < cells; ++l) {
        for (int k = 0; k < slots; ++k) {
            if (!r.is_active(l, k)) continue;
            const double cap = params.max_power_mw(l, k);
            if (init == InitKind::FullPower) {
                s.rho_hat(l, k) = std::sqrt(cap);
                s.rho(l, k) = std::sqrt(cap);
                continue;
            }
            auto rng = make_stream({init_seed, start_index, static_cast<std::uint64_t>(l),
                                    static_cast<std::uint64_t>(k)});
            const double pilot = unit(rng) * cap;
            const double data = unit(rng) * cap;
            s.rho_hat(l, k) = mode == SolverMode::DataOnly ? std::sqrt(cap) : std::sqrt(pilot);
            s.rho(l, k) = std::sqrt(data);
        }
    }
    return s;
}

PowerAllocation state_powers(const SolverState& state, const SlotMatrix& max_power_mw) {
    const int cells = state.rho.cells();
    const int slots = state.rho.slots();
    auto p = PowerAllocation::zeros(cells, slots);
    for (int l = 0; l < cells; ++l)
        for (int k = 0; k < slots; ++k) {
            const double cap = max_power_mw(l, k);
            p.pilot_mw(l, k) = std::min(state.rho_hat(l, k) * state.rho_hat(l, k), cap);
            p.data_mw(l, k) = std::min(state.rho(l, k) * state.rho(l, k), cap);
        }
    return p;
}

SlotMatrix compute_u_tilde(const SolverState& s, const Realization& r, const SystemParams& params) {
    const Dims d = dims_of(r, params);
    const auto interference = data_interference(s, r, d.noise);
    const SlotMatrix pilot_rx = pilot_received(s, r, d.kmax, d.noise);

    SlotMatrix u_tilde(d.cells, d.slots);
    for (int l = 0; l < d.cells; ++l) {
        for (int k = 0; k < d.slots; ++k) {
            if (!r.is_active(l, k)) continue;
            double coherent = 0.0;
            for (int i = 0; i < d.cells; ++i) {
                if (!r.is_active(i, k)) continue;
                const double a = s.rho(i, k) * s.rho_hat(i, k) * r.beta.at(l, i, k);
                coherent += a * a;
            }
            u_tilde(l, k) = d.mk * coherent + pilot_rx(l, k) * interference[static_cast<std::size_t>(l)];
        }
    }
    return u_tilde;
}

SlotMatrix update_u(const SolverState& s, const Realization& r, const SystemParams& params) {
    const Dims d = dims_of(r, params);
    const SlotMatrix u_tilde = compute_u_tilde(s, r, params);
    SlotMatrix u(d.cells, d.slots);
    for (int l = 0; l < d.cells; ++l)
        for (int k = 0; k < d.slots; ++k)
            if (r.is_active(l, k))
                u(l, k) = d.sqrt_mk * s.rho(l, k) * s.rho_hat(l, k) * r.beta.at(l, l, k) /
                          u_tilde(l, k);
    return u;
}

SlotMatrix update_w(const SolverState& s, const Realization& r, const SystemParams& params) {
    const Dims d = dims_of(r, params);
    const SlotMatrix u_tilde = compute_u_tilde(s, r, params);
    SlotMatrix w(d.cells, d.slots);
    for (int l = 0; l < d.cells; ++l) {
        for (int k = 0; k < d.slots; ++k) {
            if (!r.is_active(l, k)) continue;
            const double u = s.u(l, k);
            const double e = u * u * u_tilde(l, k) -
                             2.0 * d.sqrt_mk * s.rho(l, k) * s.rho_hat(l, k) * u * r.beta.at(l, l, k) +
                             1.0;
            if (!(e > 0.0))
                throw InternalError("nonpositive MSE at cell " + std::to_string(l) + " slot " +
                                    std::to_string(k) + "; u is stale");
            w(l, k) = 1.0 / e;
        }
    }
    return w;
}

SlotMatrix update_pilot(const SolverState& s, const Realization& r, const SystemParams& params) {
    const Dims d = dims_of(r, params);
    const auto interference = data_interference(s, r, d.noise);

    SlotMatrix rho_hat(d.cells, d.slots);
    for (int l = 0; l < d.cells; ++l) {
        for (int k = 0; k < d.slots; ++k) {
            if (!r.is_active(l, k)) continue;
            double coherent = 0.0;
            double noncoherent = 0.0;
            for (int j = 0; j < d.cells; ++j) {
                if (!r.is_active(j, k)) continue;
                const double wu2 = s.w(j, k) * s.u(j, k) * s.u(j, k);
                const double b = r.beta.at(j, l, k);
                coherent += wu2 * b * b;
                noncoherent += wu2 * b * interference[static_cast<std::size_t>(j)];
            }
            const double rho = s.rho(l, k);
            const double eta_hat = rho * rho * d.mk * coherent + d.kmax * noncoherent;
            const double numer = d.sqrt_mk * rho * s.u(l, k) * s.w(l, k) * r.beta.at(l, l, k);
            rho_hat(l, k) = project_amplitude(numer, eta_hat, params.max_power_mw(l, k));
        }
    }
    return rho_hat;
}

SlotMatrix update_data(const SolverState& s, const Realization& r, const SystemParams& params) {
    const Dims d = dims_of(r, params);
    const SlotMatrix pilot_rx = pilot_received(s, r, d.kmax, d.noise);

    // Per-BS weighted estimation-quality term, sum_t w u^2 (K sum rho_hat^2 beta + sigma^2).
    std::vector<double> weighted(static_cast<std::size_t>(d.cells), 0.0);
    for (int i = 0; i < d.cells; ++i)
        for (int t = 0; t < d.slots; ++t)
            if (r.is_active(i, t))
                weighted[static_cast<std::size_t>(i)] +=
                    s.w(i, t) * s.u(i, t) * s.u(i, t) * pilot_rx(i, t);

    SlotMatrix rho(d.cells, d.slots);
    for (int l = 0; l < d.cells; ++l) {
        for (int k = 0; k < d.slots; ++k) {
            if (!r.is_active(l, k)) continue;
            double coherent = 0.0;
            for (int i = 0; i < d.cells; ++i) {
                if (!r.is_active(i, k)) continue;
                const double b = r.beta.at(i, l, k);
                coherent += s.w(i, k) * s.u(i, k) * s.u(i, k) * b * b;
            }
            double noncoherent = 0.0;
            for (int i = 0; i < d.cells; ++i)
                noncoherent += r.beta.at(i, l, k) * weighted[static_cast<std::size_t>(i)];
            const double rh = s.rho_hat(l, k);
            const double eta = rh * rh * d.mk * coherent + noncoherent;
            const double numer = d.sqrt_mk * rh * s.u(l, k) * s.w(l, k) * r.beta.at(l, l, k);
            rho(l, k) = project_amplitude(numer, eta, params.max_power_mw(l, k));
        }
    }
    return rho;
}

void sweep(SolverState& state, const Realization& r, const SystemParams& params, SolverMode mode) {
    state.u = update_u(state, r, params);
    state.w = update_w(state, r, params);
    if (mode == SolverMode::JointPilotData) state.rho_hat = update_pilot(state, r, params);
    state.rho = update_data(state, r, params);
}

SolveResult solve_from(SolverState state, const Realization& r, const SystemParams& params,
                       const SolverConfig& cfg) {
    cfg.validate();
    SolveResult res;
    auto sum_se = [&](const SolverState& s) {
        return se_from_sinr(r, compute_sinr(r, state_powers(s, params.max_power_mw), params), params)
            .total_sum_se;
    };

    res.objective_trace.push_back(sum_se(state));
    res.status = SolveStatus::MaxItersReached;
    for (int n = 1; n <= cfg.max_iters; ++n) {
        sweep(state, r, params, cfg.mode);
        const double prev = res.objective_trace.back();
        const double cur = sum_se(state);
        res.objective_trace.push_back(cur);
        res.iterations = n;
        if (cur < prev - 1e-9 * std::max(1.0, std::abs(prev)))
            throw InternalError("sum SE decreased at iteration " + std::to_string(n));
        if (std::abs(cur - prev) <= cfg.epsilon) {
            res.status = SolveStatus::Converged;
            break;
        }
    }

    res.powers = state_powers(state, params.max_power_mw);
    res.kkt_residual = kkt_residual(r, res.powers, params,
                                    cfg.mode == SolverMode::DataOnly ? KktVariables::DataOnly
                                                                     : KktVariables::PilotAndData);
    return res;
}

SolveResult solve(const Realization& r, const SystemParams& params, const SolverConfig& cfg) {
    cfg.validate();
    return solve_from(initial_state(r, params, cfg.init, cfg.mode, cfg.init_seed), r, params, cfg);
}

SolveResult solve_best_of_n(const Realization& r, const SystemParams& params,
                            const SolverConfig& cfg) {
    cfg.validate();
    SolveResult best = solve_from(
        initial_state(r, params, InitKind::FullPower, cfg.mode, cfg.init_seed), r, params, cfg);
    for (int start = 1; start < cfg.num_inits; ++start) {
        SolveResult cand = solve_from(initial_state(r, params, InitKind::UniformRandom, cfg.mode,
                                                    cfg.init_seed, static_cast<std::uint64_t>(start)),
                                      r, params, cfg);
        if (cand.final_sum_se() > best.final_sum_se()) best = std::move(cand);
    }
    return best;
}

PowerAllocation fixed_power_baseline(const Realization& r, const SlotMatrix& max_power_mw) {
    auto p = PowerAllocation::zeros(r.cells(), r.slots());
    for (int l = 0; l < r.cells(); ++l)
        for (int k = 0; k < r.slots(); ++k)
            if (r.is_active(l, k)) {
                p.pilot_mw(l, k) = max_power_mw(l, k);
                p.data_mw(l, k) = max_power_mw(l, k);
            }
    return p;
}

double kkt_residual(const Realization& r, const PowerAllocation& powers, const SystemParams& params,
                    KktVariables vars) {
    validate_powers(r, powers, params.max_power_mw);
    PowerAllocation probe = powers;
    double worst = 0.0;
    // d ln(sum SE) = d(sum SE) / sum SE; the pre-log factor cancels.
    const double base = sum_log1p_sinr(r, powers, params);
    const double norm = base > 0.0 ? base : 1.0;

    auto check = [&](SlotMatrix& target, int l, int k) {
        const double cap = params.max_power_mw(l, k);
        const double scale = std::sqrt(cap);
        const double original = target(l, k);
        const double amp = std::sqrt(original);
        const double h = 1e-4 * scale;

        target(l, k) = (amp + h) * (amp + h);
        const double up = sum_log1p_sinr(r, probe, params);
        target(l, k) = (amp - h) * (amp - h);
        const double down = sum_log1p_sinr(r, probe, params);
        target(l, k) = original;

        const double slope = scale * (up - down) / (2.0 * h * norm);
        double res;
        if (original >= cap) {
            res = std::max(0.0, -slope);
        } else if (original == 0.0) {
            res = std::max(0.0, slope);
        } else {
            res = std::abs(slope);
        }
        worst = std::max(worst, res);
    };

    for (int l = 0; l < r.cells(); ++l) {
        for (int k = 0; k < r.slots(); ++k) {
            if (!r.is_active(l, k)) continue;
            if (vars == KktVariables::PilotAndData) check(probe.pilot_mw, l, k);
            check(probe.data_mw, l, k);
        }
    }
    return worst;
}

std::uint64_t estimate_op_count(const Realization& r, int iterations) {
    const double active = r.active_count();
    if (active == 0.0 || iterations <= 0) return 0;
    const double mean_sharing = active / static_cast<double>(r.slots());
    const double per_iter =
        (8.0 * active + 4.0 * mean_sharing * active + 23.0 * mean_sharing + 50.0) * active;
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(iterations) * per_iter));
}

}  // namespace mmpc
