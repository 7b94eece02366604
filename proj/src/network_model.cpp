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

#include "mmpc/network_model.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mmpc/errors.hpp"
#include "mmpc/random.hpp"

namespace mmpc {

namespace {

using nlohmann::json;

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "num_cells",          "grid_side",          "area_side_m",
        "max_users_per_cell", "num_antennas",       "coherence_symbols",
        "noise_power_mw",     "max_power_mw",       "activity_prob",
        "pathloss_intercept_db", "pathloss_exponent_x10", "shadow_std_db",
        "min_distance_m",     "max_resample_attempts", "seed",
    };
    return keys;
}

int get_int(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError("config key '" + key + "' is out of range");
    return static_cast<int>(x);
}

double get_double(const json& j, const std::string& key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
}

SlotMatrix get_matrix(const json& v, const std::string& key) {
    if (!v.is_array() || v.empty())
        throw ConfigError("config key '" + key + "' must be a number or a nested array");
    const int rows = static_cast<int>(v.size());
    const int cols = static_cast<int>(v.front().is_array() ? v.front().size() : 0);
    if (cols == 0) throw ConfigError("config key '" + key + "' must be a [cell][slot] array");
    SlotMatrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = v[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ConfigError("config key '" + key + "' has ragged rows");
        for (int c = 0; c < cols; ++c) {
            const auto& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) throw ConfigError("config key '" + key + "' has a non-numeric entry");
            m(r, c) = x.get<double>();
        }
    }
    return m;
}

json matrix_to_json(const SlotMatrix& m) {
    json rows = json::array();
    for (int r = 0; r < m.cells(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.slots(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

bool all_finite(const SlotMatrix& m) {
    return std::all_of(m.flat().begin(), m.flat().end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

double ActivityModel::mean() const {
    switch (kind) {
    case ActivityKind::Fixed:
        return prob;
    case ActivityKind::UniformRandom:
        return 0.5;
    case ActivityKind::PerUser: {
        if (per_user.size() == 0) return 0.0;
        double s = 0.0;
        for (double p : per_user.flat()) s += p;
        return s / static_cast<double>(per_user.size());
    }
    }
    return prob;
}

int NetworkConfig::grid_side() const {
    return static_cast<int>(std::lround(std::sqrt(static_cast<double>(num_cells))));
}

double NetworkConfig::cell_side_m() const { return area_side_m / grid_side(); }

Point NetworkConfig::bs_position(int cell) const {
    const int g = grid_side();
    const double s = cell_side_m();
    return {(cell % g + 0.5) * s, (cell / g + 0.5) * s};
}

SlotMatrix NetworkConfig::max_power() const {
    if (max_power_matrix_mw) return *max_power_matrix_mw;
    return SlotMatrix(num_cells, max_users_per_cell, max_power_mw);
}

SystemParams NetworkConfig::system_params() const {
    return SystemParams{num_antennas, coherence_symbols, noise_power_mw, max_power()};
}

void NetworkConfig::validate() const {
    if (num_cells < 1) throw ConfigError("num_cells must be positive");
    const int g = grid_side();
    if (g * g != num_cells) throw ConfigError("num_cells must be a perfect square");
    if (!(area_side_m > 0.0) || !std::isfinite(area_side_m))
        throw ConfigError("area_side_m must be positive");
    if (max_users_per_cell < 1) throw ConfigError("max_users_per_cell must be positive");
    if (num_antennas < 1) throw ConfigError("num_antennas must be positive");
    if (coherence_symbols <= max_users_per_cell)
        throw ConfigError("coherence_symbols must exceed max_users_per_cell");
    if (!(noise_power_mw > 0.0) || !std::isfinite(noise_power_mw))
        throw ConfigError("noise_power_mw must be positive");

    switch (activity.kind) {
    case ActivityKind::Fixed:
        if (!(activity.prob >= 0.0 && activity.prob <= 1.0))
            throw ConfigError("activity_prob must lie in [0,1]");
        break;
    case ActivityKind::PerUser:
        if (activity.per_user.cells() != num_cells ||
            activity.per_user.slots() != max_users_per_cell)
            throw ConfigError("activity_prob matrix must be [num_cells][max_users_per_cell]");
        for (double p : activity.per_user.flat())
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("activity_prob entries must lie in [0,1]");
        break;
    case ActivityKind::UniformRandom:
        break;
    }

    const SlotMatrix power = max_power();
    if (power.cells() != num_cells || power.slots() != max_users_per_cell)
        throw ConfigError("max_power_mw matrix must be [num_cells][max_users_per_cell]");
    if (!all_finite(power)) throw ConfigError("max_power_mw entries must be finite");
    for (int l = 0; l < num_cells; ++l) {
        for (int k = 0; k < max_users_per_cell; ++k) {
            double p_active = activity.prob;
            if (activity.kind == ActivityKind::PerUser) p_active = activity.per_user(l, k);
            if (activity.kind == ActivityKind::UniformRandom) p_active = 1.0;
            if (power(l, k) < 0.0) throw ConfigError("max_power_mw entries must be nonnegative");
            if (p_active > 0.0 && !(power(l, k) > 0.0))
                throw ConfigError("max_power_mw must be positive for users that can be active");
        }
    }

    if (!std::isfinite(pathloss_intercept_db) || !std::isfinite(pathloss_exponent_x10))
        throw ConfigError("pathloss constants must be finite");
    if (!(shadow_std_db >= 0.0)) throw ConfigError("shadow_std_db must be nonnegative");
    if (!(min_distance_m >= 0.0) || !(min_distance_m < 0.5 * cell_side_m()))
        throw ConfigError("min_distance_m must lie in [0, cell_side/2)");
    if (max_resample_attempts < 1) throw ConfigError("max_resample_attempts must be positive");
}

NetworkConfig parse_config(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

    NetworkConfig cfg;
    if (j.contains("num_cells")) cfg.num_cells = get_int(j, "num_cells");
    if (j.contains("area_side_m")) cfg.area_side_m = get_double(j, "area_side_m");
    if (j.contains("max_users_per_cell")) cfg.max_users_per_cell = get_int(j, "max_users_per_cell");
    if (j.contains("num_antennas")) cfg.num_antennas = get_int(j, "num_antennas");
    if (j.contains("coherence_symbols")) cfg.coherence_symbols = get_int(j, "coherence_symbols");
    if (j.contains("noise_power_mw")) cfg.noise_power_mw = get_double(j, "noise_power_mw");
    if (j.contains("max_power_mw")) {
        const auto& v = j.at("max_power_mw");
        if (v.is_number()) {
            cfg.max_power_mw = v.get<double>();
        } else {
            cfg.max_power_matrix_mw = get_matrix(v, "max_power_mw");
        }
    }
    if (j.contains("activity_prob")) {
        const auto& v = j.at("activity_prob");
        if (v.is_number()) {
            cfg.activity.kind = ActivityKind::Fixed;
            cfg.activity.prob = v.get<double>();
        } else if (v.is_string()) {
            if (v.get<std::string>() != "uniform")
                throw ConfigError("activity_prob string form must be \"uniform\"");
            cfg.activity.kind = ActivityKind::UniformRandom;
        } else {
            cfg.activity.kind = ActivityKind::PerUser;
            cfg.activity.per_user = get_matrix(v, "activity_prob");
        }
    }
    if (j.contains("pathloss_intercept_db"))
        cfg.pathloss_intercept_db = get_double(j, "pathloss_intercept_db");
    if (j.contains("pathloss_exponent_x10"))
        cfg.pathloss_exponent_x10 = get_double(j, "pathloss_exponent_x10");
    if (j.contains("shadow_std_db")) cfg.shadow_std_db = get_double(j, "shadow_std_db");
    if (j.contains("min_distance_m")) cfg.min_distance_m = get_double(j, "min_distance_m");
    if (j.contains("max_resample_attempts"))
        cfg.max_resample_attempts = get_int(j, "max_resample_attempts");
    if (j.contains("seed")) {
        const auto& v = j.at("seed");
        if (!v.is_number_unsigned()) throw ConfigError("config key 'seed' must be a nonnegative integer");
        cfg.seed = v.get<std::uint64_t>();
    }

    cfg.validate();
    if (j.contains("grid_side") && get_int(j, "grid_side") != cfg.grid_side())
        throw ConfigError("grid_side must equal sqrt(num_cells)");
    return cfg;
}

NetworkConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const NetworkConfig& cfg) {
    json j;
    j["num_cells"] = cfg.num_cells;
    j["grid_side"] = cfg.grid_side();
    j["area_side_m"] = cfg.area_side_m;
    j["max_users_per_cell"] = cfg.max_users_per_cell;
    j["num_antennas"] = cfg.num_antennas;
    j["coherence_symbols"] = cfg.coherence_symbols;
    j["noise_power_mw"] = cfg.noise_power_mw;
    if (cfg.max_power_matrix_mw) {
        j["max_power_mw"] = matrix_to_json(*cfg.max_power_matrix_mw);
    } else {
        j["max_power_mw"] = cfg.max_power_mw;
    }
    switch (cfg.activity.kind) {
    case ActivityKind::Fixed:
        j["activity_prob"] = cfg.activity.prob;
        break;
    case ActivityKind::PerUser:
        j["activity_prob"] = matrix_to_json(cfg.activity.per_user);
        break;
    case ActivityKind::UniformRandom:
        j["activity_prob"] = "uniform";
        break;
    }
    j["pathloss_intercept_db"] = cfg.pathloss_intercept_db;
    j["pathloss_exponent_x10"] = cfg.pathloss_exponent_x10;
    j["shadow_std_db"] = cfg.shadow_std_db;
    j["min_distance_m"] = cfg.min_distance_m;
    j["max_resample_attempts"] = cfg.max_resample_attempts;
    j["seed"] = cfg.seed;
    return j.dump(2);
}

int Realization::active_count() const {
    int n = 0;
    for (auto a : active.flat()) n += a != 0;
    return n;
}

Realization realization_from_gains(GainTensor beta) {
    Realization r;
    const int cells = beta.cells();
    const int slots = beta.slots();
    r.active = ActivityMask(cells, slots, 0);
    for (int i = 0; i < cells; ++i)
        for (int t = 0; t < slots; ++t) r.active(i, t) = beta.at(i, i, t) > 0.0 ? 1 : 0;
    r.beta = std::move(beta);
    return r;
}

void validate_realization(const Realization& r) {
    const int cells = r.cells();
    const int slots = r.slots();
    if (r.active.cells() != cells || r.active.slots() != slots)
        throw ConfigError("activity mask shape does not match the gain tensor");
    for (int i = 0; i < cells; ++i) {
        for (int t = 0; t < slots; ++t) {
            const double serving = r.beta.at(i, i, t);
            for (int l = 0; l < cells; ++l) {
                const double b = r.beta.at(l, i, t);
                if (!(b >= 0.0 && b <= 1.0))
                    throw ConfigError("gain outside [0,1] at cell " + std::to_string(i) +
                                      " slot " + std::to_string(t));
                if (!r.is_active(i, t) && b != 0.0)
                    throw ConfigError("inactive user with nonzero gain at cell " +
                                      std::to_string(i) + " slot " + std::to_string(t));
                if (b > serving)
                    throw ConfigError("user at cell " + std::to_string(i) + " slot " +
                                      std::to_string(t) + " is not served by its strongest BS");
            }
        }
    }
}

double wrap_distance(Point a, Point b, double area_side_m) {
    double best = std::numeric_limits<double>::infinity();
    for (int sx = -1; sx <= 1; ++sx) {
        for (int sy = -1; sy <= 1; ++sy) {
            const double dx = a.x - (b.x + sx * area_side_m);
            const double dy = a.y - (b.y + sy * area_side_m);
            best = std::min(best, std::hypot(dx, dy));
        }
    }
    return best;
}

double pathloss_gain(const NetworkConfig& cfg, double distance_m, double shadow_db) {
    const double db = cfg.pathloss_intercept_db -
                      cfg.pathloss_exponent_x10 * std::log10(distance_m / 1000.0) + shadow_db;
    return std::pow(10.0, db / 10.0);
}

Realization generate_realization(const NetworkConfig& cfg, std::uint64_t draw_index) {
    cfg.validate();
    const int cells = cfg.num_cells;
    const int slots = cfg.max_users_per_cell;
    const int g = cfg.grid_side();
    const double side = cfg.cell_side_m();

    Realization r;
    r.beta = GainTensor(cells, slots);
    r.active = ActivityMask(cells, slots, 0);
    r.user_positions.assign(static_cast<std::size_t>(cells) * static_cast<std::size_t>(slots),
                            std::nullopt);

    std::vector<double> dist(static_cast<std::size_t>(cells));
    std::vector<double> gain(static_cast<std::size_t>(cells));

    for (int i = 0; i < cells; ++i) {
        const Point bs = cfg.bs_position(i);
        const double x0 = (i % g) * side;
        const double y0 = (i / g) * side;
        for (int t = 0; t < slots; ++t) {
            auto rng = make_stream({cfg.seed, draw_index, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint64_t>(t)});
            // Fresh distributions per user: normal_distribution caches a spare
            // variate, which would otherwise leak between streams.
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::normal_distribution<double> standard_normal(0.0, 1.0);
            double p = cfg.activity.prob;
            if (cfg.activity.kind == ActivityKind::PerUser) p = cfg.activity.per_user(i, t);
            if (cfg.activity.kind == ActivityKind::UniformRandom) p = unit(rng);
            if (!(unit(rng) < p)) continue;

            std::optional<Point> pos;
            for (int a = 0; a < cfg.max_resample_attempts && !pos; ++a) {
                const Point cand{x0 + unit(rng) * side, y0 + unit(rng) * side};
                if (wrap_distance(cand, bs, cfg.area_side_m) >= cfg.min_distance_m) pos = cand;
            }
            if (!pos)
                throw GenerationError(i, t, "could not place user at cell " + std::to_string(i) +
                                                " slot " + std::to_string(t));
            for (int l = 0; l < cells; ++l)
                dist[static_cast<std::size_t>(l)] =
                    wrap_distance(*pos, cfg.bs_position(l), cfg.area_side_m);

            bool accepted = false;
            for (int a = 0; a < cfg.max_resample_attempts && !accepted; ++a) {
                for (int l = 0; l < cells; ++l)
                    gain[static_cast<std::size_t>(l)] =
                        pathloss_gain(cfg, dist[static_cast<std::size_t>(l)],
                                      cfg.shadow_std_db * standard_normal(rng));
                const double serving = gain[static_cast<std::size_t>(i)];
                accepted = std::all_of(gain.begin(), gain.end(),
                                       [&](double b) { return b <= serving && b <= 1.0; });
            }
            if (!accepted)
                throw GenerationError(i, t, "shadow fading resample budget exhausted at cell " +
                                                std::to_string(i) + " slot " + std::to_string(t));

            r.active(i, t) = 1;
            r.user_positions[static_cast<std::size_t>(i) * static_cast<std::size_t>(slots) +
                             static_cast<std::size_t>(t)] = pos;
            for (int l = 0; l < cells; ++l) r.beta.at(l, i, t) = gain[static_cast<std::size_t>(l)];
        }
    }
    return r;
}

}  // namespace mmpc
