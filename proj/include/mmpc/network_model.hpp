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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmpc/grid.hpp"
#include "mmpc/system.hpp"

namespace mmpc {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// How user activity is drawn for each (cell, slot).
enum class ActivityKind : std::uint32_t {
    Fixed = 0,          ///< one probability for every user
    PerUser = 1,        ///< explicit [cell][slot] probabilities
    UniformRandom = 2,  ///< each user draws its own probability ~ U[0,1] per realization
};

struct ActivityModel {
    ActivityKind kind = ActivityKind::Fixed;
    double prob = 2.0 / 3.0;
    SlotMatrix per_user;

    /// Mean activity probability over all users.
    double mean() const;
};

/// Scenario constants for the square-grid, wrap-around network.
///
/// The defaults reproduce the four-cell evaluation scenario: 1 km^2 area,
/// 10 users per cell, 200 antennas, 200 mW budgets, activity 2/3, and a
/// -94 dBm noise floor (20 MHz thermal noise plus a 7 dB noise figure).
struct NetworkConfig {
    int num_cells = 4;
    double area_side_m = 1000.0;
    int max_users_per_cell = 10;
    int num_antennas = 200;
    int coherence_symbols = 200;
    double noise_power_mw = dbm_to_mw(-94.0);
    double max_power_mw = 200.0;
    /// Overrides max_power_mw when present; shape [num_cells][max_users_per_cell].
    std::optional<SlotMatrix> max_power_matrix_mw;
    ActivityModel activity;
    double pathloss_intercept_db = -148.1;
    double pathloss_exponent_x10 = 37.6;
    double shadow_std_db = 7.0;
    double min_distance_m = 35.0;
    int max_resample_attempts = 1000;
    std::uint64_t seed = 1;

    /// sqrt(num_cells); validate() guarantees it is exact.
    int grid_side() const;
    double cell_side_m() const;
    Point bs_position(int cell) const;
    SlotMatrix max_power() const;
    SystemParams system_params() const;

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Parses a flat JSON object whose keys mirror NetworkConfig. Missing keys
/// keep their defaults, unknown keys are rejected. The result is validated.
NetworkConfig parse_config(std::string_view json_text);
NetworkConfig load_config(const std::string& path);
/// Serializes every field, so parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const NetworkConfig& cfg);

/// One network draw: gains plus activity.
struct Realization {
    GainTensor beta;
    ActivityMask active;
    /// Indexed cell * slots + slot; empty when the realization was not sampled
    /// geometrically (e.g. read back from a dataset).
    std::vector<std::optional<Point>> user_positions;

    int cells() const noexcept { return beta.cells(); }
    int slots() const noexcept { return beta.slots(); }
    bool is_active(int cell, int slot) const { return active(cell, slot) != 0; }
    int active_count() const;
};

/// Builds a realization from a gain tensor, treating a user as active iff its
/// serving gain beta[i][i][t] is positive.
Realization realization_from_gains(GainTensor beta);

/// Checks mask/gain consistency: inactive columns all-zero, active columns
/// served by their strongest BS, gains in [0,1]. Throws ConfigError.
void validate_realization(const Realization& r);

/// Toroidal minimum-image distance on a square of the given side.
double wrap_distance(Point a, Point b, double area_side_m);

/// Linear gain of the log-distance pathloss model with a given shadowing term.
double pathloss_gain(const NetworkConfig& cfg, double distance_m, double shadow_db);

/// Deterministic in (cfg.seed, draw_index); each (cell, slot) owns an
/// independent random stream so draws can be generated in any order.
Realization generate_realization(const NetworkConfig& cfg, std::uint64_t draw_index);

}  // namespace mmpc
