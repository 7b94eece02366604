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

#include <vector>

#include "mmpc/grid.hpp"
#include "mmpc/network_model.hpp"
#include "mmpc/system.hpp"

namespace mmpc {

/// Pilot and data powers per (cell, slot), mW.
struct PowerAllocation {
    SlotMatrix pilot_mw;
    SlotMatrix data_mw;

    static PowerAllocation zeros(int cells, int slots) {
        return {SlotMatrix(cells, slots), SlotMatrix(cells, slots)};
    }
    bool operator==(const PowerAllocation&) const = default;
};

/// MMSE channel-estimate statistics, both indexed [bs][user_cell][slot].
/// Each entry multiplies I_M in the corresponding covariance.
struct EstimateStats {
    GainTensor est_var;
    GainTensor err_var;
};

struct SEReport {
    SlotMatrix sinr;
    SlotMatrix se_bps_hz;
    std::vector<double> sum_se_per_cell;
    double total_sum_se = 0.0;
};

/// Cells whose user in `slot` is active, i.e. the users sharing pilot `slot`.
std::vector<int> pilot_sharing_set(const Realization& r, int slot);

/// Throws InfeasiblePowerError naming the first (cell, slot) that is negative,
/// above its budget, non-finite, or nonzero while inactive.
void validate_powers(const Realization& r, const PowerAllocation& powers,
                     const SlotMatrix& max_power_mw);

EstimateStats estimate_stats(const Realization& r, const PowerAllocation& powers,
                             int max_users_per_cell, double noise_power_mw);

/// Fraction of each coherence interval left for data, 1 - K_max / tau_c.
double prelog_factor(int max_users_per_cell, int coherence_symbols);

/// Closed-form SINR of every active user under MRC with MMSE estimates.
///
/// No feasibility check: any nonnegative powers are accepted, which lets
/// finite-difference probes step just outside the box. Inactive slots get 0.
SlotMatrix compute_sinr(const Realization& r, const PowerAllocation& powers,
                        const SystemParams& params);

/// Validated SE report; the scoring entry point for every allocation source.
SEReport evaluate_se(const Realization& r, const PowerAllocation& powers,
                     const SystemParams& params);

/// SE report without the feasibility check.
SEReport se_from_sinr(const Realization& r, SlotMatrix sinr, const SystemParams& params);

}  // namespace mmpc
