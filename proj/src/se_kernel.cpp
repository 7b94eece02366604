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

#include "mmpc/se_kernel.hpp"

#include <cmath>
#include <string>

#include "mmpc/errors.hpp"

namespace mmpc {

namespace {

std::string where(int cell, int slot) {
    return "cell " + std::to_string(cell) + " slot " + std::to_string(slot);
}

}  // namespace

std::vector<int> pilot_sharing_set(const Realization& r, int slot) {
    std::vector<int> cells;
    for (int i = 0; i < r.cells(); ++i)
        if (r.is_active(i, slot)) cells.push_back(i);
    return cells;
}

void validate_powers(const Realization& r, const PowerAllocation& powers,
                     const SlotMatrix& max_power_mw) {
    const int cells = r.cells();
    const int slots = r.slots();
    auto shape_ok = [&](const SlotMatrix& m) { return m.cells() == cells && m.slots() == slots; };
    if (!shape_ok(powers.pilot_mw) || !shape_ok(powers.data_mw) || !shape_ok(max_power_mw))
        throw InfeasiblePowerError(-1, -1, "power allocation shape does not match the realization");

    for (int l = 0; l < cells; ++l) {
        for (int k = 0; k < slots; ++k) {
            for (double p : {powers.pilot_mw(l, k), powers.data_mw(l, k)}) {
                if (!std::isfinite(p) || p < 0.0)
                    throw InfeasiblePowerError(l, k, "negative or non-finite power at " + where(l, k));
                if (p > max_power_mw(l, k))
                    throw InfeasiblePowerError(l, k, "power above budget at " + where(l, k));
                if (!r.is_active(l, k) && p != 0.0)
                    throw InfeasiblePowerError(l, k, "nonzero power on inactive " + where(l, k));
            }
        }
    }
}

EstimateStats estimate_stats(const Realization& r, const PowerAllocation& powers,
                             int max_users_per_cell, double noise_power_mw) {
    const int cells = r.cells();
    const int slots = r.slots();
    const double kmax = max_users_per_cell;
    EstimateStats s{GainTensor(cells, slots), GainTensor(cells, slots)};

    for (int l = 0; l < cells; ++l) {
        for (int t = 0; t < slots; ++t) {
            double received = 0.0;
            for (int i = 0; i < cells; ++i)
                if (r.is_active(i, t)) received += powers.pilot_mw(i, t) * r.beta.at(l, i, t);
            const double denom = kmax * received + noise_power_mw;

            for (int i = 0; i < cells; ++i) {
                if (!r.is_active(i, t)) continue;
                const double b = r.beta.at(l, i, t);
                double contamination = 0.0;
                for (int j = 0; j < cells; ++j)
                    if (j != i && r.is_active(j, t))
                        contamination += powers.pilot_mw(j, t) * r.beta.at(l, j, t);
                s.est_var.at(l, i, t) = kmax * b * b * powers.pilot_mw(i, t) / denom;
                s.err_var.at(l, i, t) = (kmax * contamination * b + b * noise_power_mw) / denom;
            }
        }
    }
    return s;
}

double prelog_factor(int max_users_per_cell, int coherence_symbols) {
    return 1.0 - static_cast<double>(max_users_per_cell) / static_cast<double>(coherence_symbols);
}

SlotMatrix compute_sinr(const Realization& r, const PowerAllocation& powers,
                        const SystemParams& params) {
    const int cells = r.cells();
    const int slots = r.slots();
    const double kmax = slots;
    const double mk = static_cast<double>(params.num_antennas) * kmax;
    const double noise = params.noise_power_mw;
    const auto& pilot = powers.pilot_mw;
    const auto& data = powers.data_mw;

    // Non-coherent interference plus noise seen by each BS.
    std::vector<double> interference(static_cast<std::size_t>(cells), noise);
    for (int l = 0; l < cells; ++l)
        for (int i = 0; i < cells; ++i)
            for (int t = 0; t < slots; ++t)
                if (r.is_active(i, t))
                    interference[static_cast<std::size_t>(l)] += data(i, t) * r.beta.at(l, i, t);

    SlotMatrix sinr(cells, slots);
    for (int l = 0; l < cells; ++l) {
        for (int k = 0; k < slots; ++k) {
            if (!r.is_active(l, k)) continue;
            double pilot_rx = 0.0;
            double contamination = 0.0;
            for (int i = 0; i < cells; ++i) {
                if (!r.is_active(i, k)) continue;
                const double b = r.beta.at(l, i, k);
                pilot_rx += pilot(i, k) * b;
                if (i != l) contamination += data(i, k) * pilot(i, k) * b * b;
            }
            const double own = r.beta.at(l, l, k);
            const double numer = mk * data(l, k) * pilot(l, k) * own * own;
            const double denom = mk * contamination + (kmax * pilot_rx + noise) *
                                                          interference[static_cast<std::size_t>(l)];
            sinr(l, k) = numer / denom;
        }
    }
    return sinr;
}

SEReport se_from_sinr(const Realization& r, SlotMatrix sinr, const SystemParams& params) {
    const int cells = r.cells();
    const int slots = r.slots();
    const double prelog = prelog_factor(slots, params.coherence_symbols);
    SEReport rep;
    rep.se_bps_hz = SlotMatrix(cells, slots);
    rep.sum_se_per_cell.assign(static_cast<std::size_t>(cells), 0.0);
    for (int l = 0; l < cells; ++l) {
        for (int k = 0; k < slots; ++k) {
            if (!r.is_active(l, k)) continue;
            const double se = prelog * std::log2(1.0 + sinr(l, k));
            rep.se_bps_hz(l, k) = se;
            rep.sum_se_per_cell[static_cast<std::size_t>(l)] += se;
        }
        rep.total_sum_se += rep.sum_se_per_cell[static_cast<std::size_t>(l)];
    }
    rep.sinr = std::move(sinr);
    return rep;
}

SEReport evaluate_se(const Realization& r, const PowerAllocation& powers,
                     const SystemParams& params) {
    if (params.num_antennas < 1) throw ConfigError("num_antennas must be positive");
    if (params.coherence_symbols <= r.slots())
        throw ConfigError("coherence_symbols must exceed max_users_per_cell");
    validate_powers(r, powers, params.max_power_mw);
    return se_from_sinr(r, compute_sinr(r, powers, params), params);
}

}  // namespace mmpc
