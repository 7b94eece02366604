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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmpc/dataset_io.hpp"
#include "mmpc/network_model.hpp"
#include "mmpc/wmmse_solver.hpp"

namespace mmpc {

/// Runs fn(i) for i in [0, count) on `workers` threads. The first exception
/// thrown by any task is rethrown after all threads have joined.
void parallel_for(std::uint64_t count, int workers, const std::function<void(std::uint64_t)>& fn);

/// Solver settings used to label draw `draw_index` of a scenario.
SolverConfig label_solver_config(const SolverConfig& base, LabelProvenance labels,
                                 std::uint64_t seed, std::uint64_t draw_index);

/// Solves one realization the way the given label provenance prescribes.
SolveResult solve_for_label(const Realization& r, const SystemParams& params,
                            const SolverConfig& cfg, LabelProvenance labels);

struct GenerateOptions {
    std::uint64_t num_samples = 1;
    LabelProvenance labels;
    SolverConfig solver;
    int workers = 1;
    /// Solves allowed to end at max_iters; nullopt means 1% of samples, rounded up.
    std::optional<std::uint64_t> max_failures;
};

struct DatasetSummary {
    std::uint64_t count = 0;
    std::uint64_t failures = 0;
    /// Mean over samples of the total sum SE, rescored from the stored values.
    double mean_sum_se = 0.0;
    double mean_sum_se_per_cell = 0.0;
    std::uint64_t active_users = 0;
    /// Fraction of active users labelled with zero pilot and data power.
    double zero_power_fraction = 0.0;
    double mean_iterations = 0.0;
    int max_iterations = 0;
};

/// Generates, labels and streams `num_samples` records to `path`, ordered by
/// draw index and byte-identical for any worker count. On error nothing is
/// left at `path`.
DatasetSummary write_dataset(const NetworkConfig& cfg, const GenerateOptions& opts,
                             const std::string& path);

enum class AllocationSource { FixedPower, Labels, Predictions };

struct EvaluationStats {
    std::uint64_t samples = 0;
    std::vector<double> cell_sum_se;  ///< one entry per (sample, cell)
    std::vector<double> user_se;      ///< one entry per active user
    std::vector<double> pilot_mw;     ///< one entry per active user
    std::vector<double> data_mw;      ///< one entry per active user
    double mean_sum_se = 0.0;         ///< mean total sum SE per sample
    double mean_cell_sum_se = 0.0;
    double median_cell_sum_se = 0.0;
    double mean_user_se = 0.0;
    double fp_mean_cell_sum_se = 0.0;
    /// mean_cell_sum_se / fp_mean_cell_sum_se - 1, or 0 when FP scores 0.
    double gain_vs_fp = 0.0;
};

/// Scores every record of a dataset with the chosen allocation. Predictions
/// must carry the dataset's SHA-256; their inactive slots are zeroed on ingest
/// and float32 overshoot of at most 1e-6 relative is pinned to the budget.
EvaluationStats evaluate_dataset(const std::string& dataset_path, AllocationSource source,
                                 const std::string& predictions_path = "", int workers = 1);

/// Prediction ingest for one record: zeroes inactive slots, pins float32
/// overshoot to the budget, then validates. Throws InfeasiblePowerError
/// naming the record.
PowerAllocation ingest_prediction(const Realization& r, PowerAllocation pred,
                                  const SlotMatrix& max_power_mw, std::uint64_t record_index);

struct BenchRow {
    std::string mode;
    std::uint64_t samples = 0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double mean_iterations = 0.0;
    double mean_sum_se = 0.0;
};

/// Wall-clock timing of JPDPO and DPOO solves over freshly drawn realizations.
std::vector<BenchRow> bench_solvers(const NetworkConfig& cfg, std::uint64_t samples,
                                    const SolverConfig& base);

/// Writes a PredictionFile that repeats the dataset's labels; handy for
/// checking the scoring path end to end.
void labels_as_predictions(const std::string& dataset_path, const std::string& out_path);

}  // namespace mmpc
