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

#pragma once

// Joint pilot/data power control for maximum sum SE.
//
// The sum-SE problem is rewritten as a weighted-MSE minimization over
// (u, w, rho_hat, rho), with rho_hat = sqrt(pilot power) and rho = sqrt(data
// power). Each block has a closed-form minimizer given the others, so the
// solver is plain block-coordinate descent: u -> w -> rho_hat -> rho. The
// sum SE is nondecreasing across sweeps and the fixed points are stationary
// points of the original problem.

#include <cstdint>
#include <vector>

#include "mmpc/grid.hpp"
#include "mmpc/network_model.hpp"
#include "mmpc/se_kernel.hpp"
#include "mmpc/system.hpp"

namespace mmpc {

enum class SolverMode {
    JointPilotData,  ///< JPDPO: optimize pilot and data powers
    DataOnly,        ///< DPOO: pilot powers pinned at the budget
};

enum class InitKind {
    FullPower,
    UniformRandom,  ///< powers ~ U[0, P] per slot, keyed by init_seed
};

struct SolverConfig {
    /// Stop when consecutive sum-SE values (bits/s/Hz) differ by at most this.
    double epsilon = 0.01;
    int max_iters = 2000;
    SolverMode mode = SolverMode::JointPilotData;
    InitKind init = InitKind::FullPower;
    std::uint64_t init_seed = 0;
    /// Starts used by solve_best_of_n.
    int num_inits = 1;

    void validate() const;
};

/// Block variables of the weighted-MSE problem; all indexed [cell][slot].
/// Inactive slots hold zero in every matrix.
struct SolverState {
    SlotMatrix u;
    SlotMatrix w;
    SlotMatrix rho_hat;  ///< sqrt(mW)
    SlotMatrix rho;      ///< sqrt(mW)
};

enum class SolveStatus { Converged, MaxItersReached };

struct SolveResult {
    PowerAllocation powers;
    /// trace[0] is the sum SE at the initial point, trace[n] after sweep n.
    std::vector<double> objective_trace;
    int iterations = 0;
    SolveStatus status = SolveStatus::Converged;
    double kkt_residual = 0.0;

    double final_sum_se() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

/// State at the chosen initial powers; u and w start at zero.
SolverState initial_state(const Realization& r, const SystemParams& params, InitKind init,
                          SolverMode mode, std::uint64_t init_seed, std::uint64_t start_index = 0);

/// Squares the amplitudes back to mW, pinning clamped entries to exactly P.
PowerAllocation state_powers(const SolverState& state, const SlotMatrix& max_power_mw);

/// The denominator u~ of the receive-coefficient update at the state's powers.
SlotMatrix compute_u_tilde(const SolverState& state, const Realization& r,
                           const SystemParams& params);

/// Receive coefficients u given the state's (rho, rho_hat).
SlotMatrix update_u(const SolverState& state, const Realization& r, const SystemParams& params);

/// MSE weights w = 1/e, with e evaluated at the state's u and (rho, rho_hat).
/// With u fresh from update_u, e = 1/(1+SINR). Throws InternalError if e <= 0.
SlotMatrix update_w(const SolverState& state, const Realization& r, const SystemParams& params);

/// Pilot amplitudes minimizing the weighted MSE for fixed (u, w, rho),
/// projected onto [0, sqrt(P)].
SlotMatrix update_pilot(const SolverState& state, const Realization& r,
                        const SystemParams& params);

/// Data amplitudes minimizing the weighted MSE for fixed (u, w, rho_hat),
/// projected onto [0, sqrt(P)].
SlotMatrix update_data(const SolverState& state, const Realization& r,
                       const SystemParams& params);

/// One full sweep u -> w -> rho_hat -> rho (rho_hat untouched in DataOnly mode).
void sweep(SolverState& state, const Realization& r, const SystemParams& params,
           SolverMode mode);

/// Iterates sweeps from `state` until the sum SE moves by at most epsilon.
SolveResult solve_from(SolverState state, const Realization& r, const SystemParams& params,
                       const SolverConfig& cfg);

/// Runs from the initialization named in cfg.
SolveResult solve(const Realization& r, const SystemParams& params, const SolverConfig& cfg);

/// Best final sum SE over a full-power start plus cfg.num_inits - 1 random starts.
SolveResult solve_best_of_n(const Realization& r, const SystemParams& params,
                            const SolverConfig& cfg);

/// Every active user at full pilot and data power.
PowerAllocation fixed_power_baseline(const Realization& r, const SlotMatrix& max_power_mw);

enum class KktVariables { PilotAndData, DataOnly };

/// Projected-gradient stationarity residual of ln(sum SE) in amplitude space.
///
/// Each partial derivative is taken by central differences with step
/// 1e-4 * sqrt(P) and scaled by sqrt(P), i.e. it is the derivative with
/// respect to the normalized amplitude rho / sqrt(P) in [0, 1]. Taking the
/// log makes the value a relative rate, independent of the SE level. At the
/// budget only a negative slope counts, at zero only a positive one. Returns
/// the largest magnitude over all active users and the selected variables.
/// When the sum SE is zero the unnormalized gradient of sum ln(1+SINR) is used.
double kkt_residual(const Realization& r, const PowerAllocation& powers,
                    const SystemParams& params,
                    KktVariables vars = KktVariables::PilotAndData);

/// Multiplication/division/log count of `iterations` sweeps for this activity
/// pattern; the pilot-sharing cardinality is its mean over slots.
std::uint64_t estimate_op_count(const Realization& r, int iterations);

}  // namespace mmpc
