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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mmpc/errors.hpp"
#include "mmpc/wmmse_solver.hpp"
#include "support.hpp"

namespace mmpc {
namespace {

using namespace mmpc::testing;

struct HandCase {
    Realization r;
    SystemParams p;
    SolverState s;
};

HandCase hand_case(double budget = 200.0) {
    GainTensor b(1, 1);
    b.at(0, 0, 0) = 1.0;
    HandCase h{realization_from_gains(b), flat_params(1, 1, 1, 1.0, budget), {}};
    h.s = {SlotMatrix(1, 1, 0.0), SlotMatrix(1, 1, 0.0), SlotMatrix(1, 1, 1.0), SlotMatrix(1, 1, 1.0)};
    return h;
}

TEST(Updates, HandChain) {
    auto h = hand_case();
    EXPECT_NEAR(compute_u_tilde(h.s, h.r, h.p)(0, 0), 5.0, 1e-12);
    h.s.u = update_u(h.s, h.r, h.p);
    EXPECT_NEAR(h.s.u(0, 0), 0.2, 1e-12);
    h.s.w = update_w(h.s, h.r, h.p);
    EXPECT_NEAR(h.s.w(0, 0), 1.25, 1e-12);
    EXPECT_NEAR(1.0 / h.s.w(0, 0), 0.8, 1e-12);
    const double sinr = compute_sinr(h.r, state_powers(h.s, h.p.max_power_mw), h.p)(0, 0);
    EXPECT_NEAR(sinr, 0.25, 1e-12);
    EXPECT_NEAR(1.0 / (1.0 + sinr), 0.8, 1e-12);
    const auto rho_hat = update_pilot(h.s, h.r, h.p);
    EXPECT_NEAR(rho_hat(0, 0), 0.25 / 0.15, 1e-12);
    EXPECT_NEAR(rho_hat(0, 0) * rho_hat(0, 0), 2.778, 5e-4);
}

TEST(Updates, PilotClampsExactlyToBudget) {
    auto h = hand_case(1.0);
    h.s.u = update_u(h.s, h.r, h.p);
    h.s.w = update_w(h.s, h.r, h.p);
    EXPECT_EQ(update_pilot(h.s, h.r, h.p)(0, 0), 1.0);
    h.p.max_power_mw(0, 0) = 2.0;
    EXPECT_EQ(update_pilot(h.s, h.r, h.p)(0, 0), std::sqrt(2.0));
}

TEST(Updates, DataClampsExactlyToBudget) {
    auto h = hand_case(1.0);
    h.s.u = update_u(h.s, h.r, h.p);
    h.s.w = update_w(h.s, h.r, h.p);
    h.s.rho_hat = update_pilot(h.s, h.r, h.p);
    // the lone user is never interference-limited, so more data power always helps
    const double rho = update_data(h.s, h.r, h.p)(0, 0);
    EXPECT_LE(rho, 1.0);
    h.p.max_power_mw(0, 0) = 1e-6;
    h.s.rho_hat(0, 0) = 1e-3;
    EXPECT_EQ(update_data(h.s, h.r, h.p)(0, 0), std::sqrt(1e-6));
}

TEST(Updates, ZeroDataPowerGivesUnitWeights) {
    auto h = hand_case();
    h.s.rho(0, 0) = 0.0;
    h.s.u = update_u(h.s, h.r, h.p);
    EXPECT_EQ(h.s.u(0, 0), 0.0);
    h.s.w = update_w(h.s, h.r, h.p);
    EXPECT_EQ(h.s.w(0, 0), 1.0);
    // 0/0 resolves to zero
    EXPECT_EQ(update_pilot(h.s, h.r, h.p)(0, 0), 0.0);
}

TEST(Updates, AbsentUserStaysSilentWhateverTheState) {
    auto r = generate_realization(small_config(4, 3, 1.0, 5), 0);
    deactivate(r, 2, 1);
    const auto p = params_for(small_config(4, 3, 1.0, 5));
    auto s = initial_state(r, p, InitKind::FullPower, SolverMode::JointPilotData, 0);
    EXPECT_EQ(s.rho(2, 1), 0.0);
    s.rho(2, 1) = s.rho_hat(2, 1) = 3.0;  // deliberately inconsistent
    s.u = update_u(s, r, p);
    s.w = update_w(s, r, p);
    EXPECT_EQ(update_pilot(s, r, p)(2, 1), 0.0);
    s.rho_hat = update_pilot(s, r, p);
    EXPECT_EQ(update_data(s, r, p)(2, 1), 0.0);
}

TEST(Updates, UTildeMatchesOracle) {
    std::mt19937_64 rng(3);
    for (int L : {1, 4}) {
        const auto cfg = small_config(L, 4, 0.75, 30 + L);
        const auto p = params_for(cfg);
        for (std::uint64_t d = 0; d < 20; ++d) {
            const auto r = generate_realization(cfg, d);
            auto s = initial_state(r, p, InitKind::UniformRandom, SolverMode::JointPilotData, d);
            const auto ut = compute_u_tilde(s, r, p);
            const auto u = update_u(s, r, p);
            const double c = std::sqrt(double(p.num_antennas) * r.slots());
            for (int l = 0; l < L; ++l)
                for (int k = 0; k < 4; ++k) {
                    if (!r.is_active(l, k)) {
                        EXPECT_EQ(u(l, k), 0.0);
                        continue;
                    }
                    const double o = oracle_u_tilde(r, s, p.num_antennas, p.noise_power_mw, l, k);
                    EXPECT_LE(rel_diff(ut(l, k), o), 1e-12);
                    EXPECT_LE(rel_diff(u(l, k), c * s.rho(l, k) * s.rho_hat(l, k) * r.beta.at(l, l, k) / o), 1e-12);
                }
        }
    }
}

TEST(Updates, WeightsMatchOnePlusSinrAtEveryIteration) {
    const auto cfg = small_config(4, 6, 0.7, 77);
    const auto p = params_for(cfg);
    for (std::uint64_t d = 0; d < 10; ++d) {
        const auto r = generate_realization(cfg, d);
        auto s = initial_state(r, p, InitKind::UniformRandom, SolverMode::JointPilotData, d);
        for (int it = 0; it < 40; ++it) {
            s.u = update_u(s, r, p);
            s.w = update_w(s, r, p);
            const auto sinr = compute_sinr(r, state_powers(s, p.max_power_mw), p);
            for (int l = 0; l < 4; ++l)
                for (int k = 0; k < 6; ++k) {
                    if (!r.is_active(l, k)) continue;
                    const double e = oracle_mse(r, s, p.num_antennas, p.noise_power_mw, l, k);
                    EXPECT_GT(e, 0.0);
                    EXPECT_LE(e, 1.0 + 1e-12);
                    EXPECT_LE(rel_diff(s.w(l, k) * e, 1.0), 1e-10);
                    EXPECT_LE(rel_diff(s.w(l, k), 1.0 + sinr(l, k)), 1e-9);
                    EXPECT_LE(rel_diff(e, 1.0 / (1.0 + sinr(l, k))), 1e-10);
                }
            s.rho_hat = update_pilot(s, r, p);
            s.rho = update_data(s, r, p);
        }
    }
}

// Each block update must be the exact minimizer of the weighted-MSE
// objective in that block; the objective separates over users, so a 1-D
// search per coordinate is a complete check.
void expect_block_minimizer(const Realization& r, const SystemParams& p, SolverState s,
                            SlotMatrix SolverState::*block, const SlotMatrix& closed_form) {
    for (int l = 0; l < r.cells(); ++l)
        for (int k = 0; k < r.slots(); ++k) {
            if (!r.is_active(l, k)) continue;
            SolverState probe = s;
            auto f = [&](double x) {
                (probe.*block)(l, k) = x;
                return oracle_wmse_objective(r, probe, p.num_antennas, p.noise_power_mw);
            };
            const double cap = std::sqrt(p.max_power_mw(l, k));
            const double x = golden_section_min(f, 0.0, cap);
            EXPECT_NEAR(closed_form(l, k), x, 1e-6 * cap) << "cell " << l << " slot " << k;
            // the closed form is never worse than the search result
            EXPECT_LE(f(closed_form(l, k)), f(x) + 1e-9 * std::abs(f(x)));
        }
}

TEST(Updates, PilotAndDataAreBlockMinimizers) {
    for (int L : {1, 4}) {
        auto cfg = small_config(L, 3, 0.8, 50 + L);
        const auto p = params_for(cfg);
        for (std::uint64_t d = 0; d < 6; ++d) {
            const auto r = generate_realization(cfg, d);
            auto s = initial_state(r, p, InitKind::UniformRandom, SolverMode::JointPilotData, d);
            s.u = update_u(s, r, p);
            s.w = update_w(s, r, p);
            const auto rho_hat = update_pilot(s, r, p);
            expect_block_minimizer(r, p, s, &SolverState::rho_hat, rho_hat);
            s.rho_hat = rho_hat;
            const auto rho = update_data(s, r, p);
            expect_block_minimizer(r, p, s, &SolverState::rho, rho);
        }
    }
}

TEST(Updates, SymmetricSingleUserDataMatchesGoldenSection) {
    for (double beta : {1e-12, 1e-9, 1e-6}) {
        GainTensor b(1, 1);
        b.at(0, 0, 0) = beta;
        const auto r = realization_from_gains(b);
        const auto p = flat_params(1, 1, 200, dbm_to_mw(-94), 200.0);
        SolverState s{SlotMatrix(1, 1), SlotMatrix(1, 1), SlotMatrix(1, 1, std::sqrt(50.0)),
                      SlotMatrix(1, 1, std::sqrt(80.0))};
        s.u = update_u(s, r, p);
        s.w = update_w(s, r, p);
        const double closed = update_data(s, r, p)(0, 0);
        SolverState probe = s;
        const double x = golden_section_min(
            [&](double v) {
                probe.rho(0, 0) = v;
                return oracle_wmse_objective(r, probe, p.num_antennas, p.noise_power_mw);
            },
            0.0, std::sqrt(200.0));
        EXPECT_NEAR(closed * closed, x * x, 1e-6 * 200.0) << "beta " << beta;
    }
}

TEST(Solve, AllZeroActivity) {
    const auto cfg = small_config(4, 5, 0.0, 1);
    const auto r = generate_realization(cfg, 0);
    const auto res = solve(r, params_for(cfg), SolverConfig{});
    EXPECT_EQ(res.iterations, 1);
    EXPECT_EQ(res.status, SolveStatus::Converged);
    EXPECT_EQ(res.final_sum_se(), 0.0);
    EXPECT_EQ(res.powers, PowerAllocation::zeros(4, 5));
}

TEST(Solve, MonotoneFeasibleAndSilentOnInactiveSlots) {
    const auto cfg = small_config(4, 10, 2.0 / 3.0, 21);
    const auto p = params_for(cfg);
    for (std::uint64_t d = 0; d < 10; ++d) {
        const auto r = generate_realization(cfg, d);
        for (auto init : {InitKind::FullPower, InitKind::UniformRandom}) {
            auto s = initial_state(r, p, init, SolverMode::JointPilotData, d);
            double prev = -1.0;
            for (int it = 0; it < 200; ++it) {
                sweep(s, r, p, SolverMode::JointPilotData);
                for (int l = 0; l < 4; ++l)
                    for (int k = 0; k < 10; ++k) {
                        EXPECT_LE(s.rho(l, k) * s.rho(l, k), p.max_power_mw(l, k) * (1 + 1e-15));
                        EXPECT_LE(s.rho_hat(l, k) * s.rho_hat(l, k), p.max_power_mw(l, k) * (1 + 1e-15));
                        EXPECT_GE(s.rho(l, k), 0.0);
                        EXPECT_GE(s.rho_hat(l, k), 0.0);
                        if (!r.is_active(l, k)) {
                            EXPECT_EQ(s.rho(l, k), 0.0);
                            EXPECT_EQ(s.rho_hat(l, k), 0.0);
                            EXPECT_EQ(s.u(l, k), 0.0);
                            EXPECT_EQ(s.w(l, k), 0.0);
                        }
                    }
                const auto pa = state_powers(s, p.max_power_mw);
                EXPECT_NO_THROW(validate_powers(r, pa, p.max_power_mw));
                const double cur = oracle_sum_se(r, pa, p);
                EXPECT_GE(cur, prev - 1e-9 * std::abs(prev));
                prev = cur;
            }
        }
    }
}

TEST(Solve, TraceAndStatus) {
    const auto cfg = small_config(4, 10, 2.0 / 3.0, 3);
    const auto p = params_for(cfg);
    const auto r = generate_realization(cfg, 0);
    const auto res = solve(r, p, SolverConfig{});
    ASSERT_EQ(res.objective_trace.size(), static_cast<std::size_t>(res.iterations) + 1);
    EXPECT_EQ(res.status, SolveStatus::Converged);
    EXPECT_LE(std::abs(res.objective_trace.back() - res.objective_trace[res.objective_trace.size() - 2]), 0.01);
    EXPECT_NEAR(res.final_sum_se(), evaluate_se(r, res.powers, p).total_sum_se, 1e-9);
    EXPECT_NEAR(res.objective_trace.front(), evaluate_se(r, fixed_power_baseline(r, p.max_power_mw), p).total_sum_se, 1e-9);

    SolverConfig tight;
    tight.epsilon = 1e-12;
    tight.max_iters = 3;
    const auto capped = solve(r, p, tight);
    EXPECT_EQ(capped.status, SolveStatus::MaxItersReached);
    EXPECT_EQ(capped.iterations, 3);
}

TEST(Solve, DataOnlyKeepsPilotsAtBudget) {
    const auto cfg = small_config(4, 10, 2.0 / 3.0, 9);
    const auto p = params_for(cfg);
    SolverConfig sc;
    sc.mode = SolverMode::DataOnly;
    for (std::uint64_t d = 0; d < 5; ++d) {
        const auto r = generate_realization(cfg, d);
        const auto res = solve(r, p, sc);
        for (int l = 0; l < 4; ++l)
            for (int k = 0; k < 10; ++k)
                EXPECT_EQ(res.powers.pilot_mw(l, k), r.is_active(l, k) ? p.max_power_mw(l, k) : 0.0);
        EXPECT_LE(res.iterations, sc.max_iters);
    }
}

TEST(Solve, ZeroGainMeansZeroPower) {
    const auto cfg = small_config(4, 6, 1.0, 31);
    const auto p = params_for(cfg);
    for (std::uint64_t d = 0; d < 10; ++d) {
        auto r = generate_realization(cfg, d);
        deactivate(r, static_cast<int>(d % 4), static_cast<int>(d % 6));
        deactivate(r, static_cast<int>((d + 1) % 4), static_cast<int>((d + 3) % 6));
        for (auto mode : {SolverMode::JointPilotData, SolverMode::DataOnly}) {
            SolverConfig sc;
            sc.mode = mode;
            const auto res = solve(r, p, sc);
            for (int l = 0; l < 4; ++l)
                for (int k = 0; k < 6; ++k)
                    if (!r.is_active(l, k)) {
                        EXPECT_EQ(res.powers.pilot_mw(l, k), 0.0);
                        EXPECT_EQ(res.powers.data_mw(l, k), 0.0);
                    }
        }
    }
}

TEST(Solve, MatchesSparseReferenceOnActiveUsers) {
    // The reference never sees the inactive users at all, so agreement shows
    // that zero columns are inert in the dense formulation.
    for (double activity : {0.4, 2.0 / 3.0, 1.0}) {
        const auto cfg = small_config(4, 8, activity, 61);
        const auto p = params_for(cfg);
        for (std::uint64_t d = 0; d < 5; ++d) {
            const auto r = generate_realization(cfg, d);
            const auto ref = SparseReference::from(r, p);
            for (auto mode : {SolverMode::JointPilotData, SolverMode::DataOnly}) {
                auto s = initial_state(r, p, InitKind::FullPower, mode, 0);
                auto rs = ref.full_power();
                for (int it = 0; it < 60; ++it) {
                    sweep(s, r, p, mode);
                    ref.sweep(rs, mode == SolverMode::JointPilotData);
                }
                for (std::size_t a = 0; a < ref.users().size(); ++a) {
                    const auto& u = ref.users()[a];
                    EXPECT_NEAR(s.rho(u.cell, u.pilot), rs.rho[a], 1e-10 * std::sqrt(u.cap));
                    EXPECT_NEAR(s.rho_hat(u.cell, u.pilot), rs.rho_hat[a], 1e-10 * std::sqrt(u.cap));
                }
            }
        }
    }
}

TEST(Solve, SlotPermutationEquivariance) {
    const auto cfg = small_config(4, 6, 0.7, 88);
    const auto p = params_for(cfg);
    std::mt19937_64 rng(1);
    for (std::uint64_t d = 0; d < 8; ++d) {
        const auto r = generate_realization(cfg, d);
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        GainTensor pb(4, 6);
        for (int l = 0; l < 4; ++l)
            for (int i = 0; i < 4; ++i)
                for (int t = 0; t < 6; ++t) pb.at(l, i, perm[t]) = r.beta.at(l, i, t);
        const auto pr = realization_from_gains(pb);
        const auto a = solve(r, p, SolverConfig{});
        const auto b = solve(pr, p, SolverConfig{});
        EXPECT_EQ(a.iterations, b.iterations);
        for (int i = 0; i < 4; ++i)
            for (int t = 0; t < 6; ++t) {
                EXPECT_NEAR(a.powers.pilot_mw(i, t), b.powers.pilot_mw(i, perm[t]), 1e-7);
                EXPECT_NEAR(a.powers.data_mw(i, t), b.powers.data_mw(i, perm[t]), 1e-7);
            }
    }
}

TEST(Solve, CellPermutationEquivariance) {
    const auto cfg = small_config(4, 5, 0.7, 89);
    const auto p = params_for(cfg);
    const std::vector<int> perm = {2, 0, 3, 1};
    for (std::uint64_t d = 0; d < 8; ++d) {
        const auto r = generate_realization(cfg, d);
        GainTensor pb(4, 5);
        for (int l = 0; l < 4; ++l)
            for (int i = 0; i < 4; ++i)
                for (int t = 0; t < 5; ++t) pb.at(perm[l], perm[i], t) = r.beta.at(l, i, t);
        const auto a = solve(r, p, SolverConfig{});
        const auto b = solve(realization_from_gains(pb), p, SolverConfig{});
        for (int i = 0; i < 4; ++i)
            for (int t = 0; t < 5; ++t) {
                EXPECT_NEAR(a.powers.pilot_mw(i, t), b.powers.pilot_mw(perm[i], t), 1e-7);
                EXPECT_NEAR(a.powers.data_mw(i, t), b.powers.data_mw(perm[i], t), 1e-7);
            }
    }
}

TEST(MultiStart, OneStartIsPlainSolveAndMoreNeverHurt) {
    const auto cfg = small_config(4, 10, 2.0 / 3.0, 17);
    const auto p = params_for(cfg);
    SolverConfig one;
    SolverConfig five;
    five.num_inits = 5;
    five.init_seed = 1234;
    for (std::uint64_t d = 0; d < 10; ++d) {
        const auto r = generate_realization(cfg, d);
        const auto base = solve(r, p, one);
        const auto b1 = solve_best_of_n(r, p, one);
        EXPECT_EQ(b1.powers, base.powers);
        EXPECT_EQ(b1.objective_trace, base.objective_trace);
        EXPECT_GE(solve_best_of_n(r, p, five).final_sum_se(), b1.final_sum_se());
    }
}

TEST(MultiStart, RandomStartsAreFeasibleAndSeeded) {
    const auto cfg = small_config(4, 10, 2.0 / 3.0, 18);
    const auto p = params_for(cfg);
    const auto r = generate_realization(cfg, 0);
    const auto a = initial_state(r, p, InitKind::UniformRandom, SolverMode::JointPilotData, 5, 1);
    const auto b = initial_state(r, p, InitKind::UniformRandom, SolverMode::JointPilotData, 5, 1);
    const auto c = initial_state(r, p, InitKind::UniformRandom, SolverMode::JointPilotData, 5, 2);
    EXPECT_EQ(a.rho, b.rho);
    EXPECT_NE(a.rho, c.rho);
    EXPECT_NO_THROW(validate_powers(r, state_powers(a, p.max_power_mw), p.max_power_mw));
}

TEST(FixedPower, Baseline) {
    const auto cfg = small_config(4, 3, 0.0, 1);
    const auto p = params_for(cfg);
    EXPECT_EQ(fixed_power_baseline(generate_realization(cfg, 0), p.max_power_mw), PowerAllocation::zeros(4, 3));
    GainTensor b(1, 2);
    b.at(0, 0, 1) = 1e-9;
    const auto r = realization_from_gains(b);
    const auto fp = fixed_power_baseline(r, SlotMatrix(1, 2, 200.0));
    EXPECT_EQ(fp.pilot_mw(0, 1), 200.0);
    EXPECT_EQ(fp.data_mw(0, 1), 200.0);
    EXPECT_EQ(fp.pilot_mw(0, 0), 0.0);
    EXPECT_NO_THROW(evaluate_se(r, fp, flat_params(1, 2, 200, 1e-12, 200.0)));
}

TEST(Kkt, TightSolveIsStationary) {
    // Users heading for zero power decay slowly, so the residual shrinks
    // roughly like sqrt(epsilon); 1e-8 is comfortably tight enough.
    const auto cfg = small_config(4, 10, 2.0 / 3.0, 25);
    const auto p = params_for(cfg);
    SolverConfig sc;
    sc.epsilon = 1e-8;
    sc.max_iters = 100000;
    for (std::uint64_t d = 0; d < 10; ++d) {
        const auto r = generate_realization(cfg, d);
        const auto res = solve(r, p, sc);
        EXPECT_LE(res.kkt_residual, 1e-3) << "draw " << d;
        EXPECT_DOUBLE_EQ(res.kkt_residual, kkt_residual(r, res.powers, p));
    }
}

TEST(Kkt, FullPowerOnContaminatedPairIsNotStationary) {
    GainTensor b(2, 1);
    // a strong user sharing its pilot with a weak neighbour
    b.at(0, 0, 0) = 1e-9;
    b.at(1, 1, 0) = 1e-11;
    b.at(0, 1, 0) = 5e-12;
    b.at(1, 0, 0) = 5e-12;
    const auto r = realization_from_gains(b);
    const auto p = flat_params(2, 1, 200, dbm_to_mw(-94), 200.0);
    EXPECT_GT(kkt_residual(r, fixed_power_baseline(r, p.max_power_mw), p), 1e-3);
}

TEST(Kkt, LoneUserAtFullPowerIsStationary) {
    GainTensor b(1, 1);
    b.at(0, 0, 0) = 1e-10;
    const auto r = realization_from_gains(b);
    const auto p = flat_params(1, 1, 200, dbm_to_mw(-94), 200.0);
    EXPECT_LE(kkt_residual(r, fixed_power_baseline(r, p.max_power_mw), p), 1e-9);
    // backing off from the budget is not stationary
    auto half = fixed_power_baseline(r, p.max_power_mw);
    half.data_mw(0, 0) = 100.0;
    EXPECT_GT(kkt_residual(r, half, p), 1e-3);
}

TEST(OpCount, Formula) {
    EXPECT_EQ(estimate_op_count(generate_realization(small_config(4, 3, 0.0, 1), 0), 10), 0u);
    GainTensor b(1, 1);
    b.at(0, 0, 0) = 1.0;
    const auto one = realization_from_gains(b);
    EXPECT_EQ(estimate_op_count(one, 1), 85u);
    const auto r = generate_realization(small_config(4, 10, 2.0 / 3.0, 1), 0);
    EXPECT_NEAR(double(estimate_op_count(r, 30)), 3.0 * double(estimate_op_count(r, 10)), 3.0);
}

TEST(SolverConfig, Validation) {
    SolverConfig c;
    c.epsilon = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.max_iters = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.num_inits = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace mmpc
