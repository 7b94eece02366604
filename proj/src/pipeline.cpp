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

#include "mmpc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "mmpc/errors.hpp"
#include "mmpc/random.hpp"

namespace mmpc {

namespace {

constexpr std::uint64_t kInitStreamTag = 0x1abe15eedULL;

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void parallel_for(std::uint64_t count, int workers,
                  const std::function<void(std::uint64_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::uint64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const auto n_threads = static_cast<std::uint64_t>(workers) < count ? workers
                                                                        : static_cast<int>(count);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (std::uint64_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

SolverConfig label_solver_config(const SolverConfig& base, LabelProvenance labels,
                                 std::uint64_t seed, std::uint64_t draw_index) {
    SolverConfig cfg = base;
    cfg.mode = labels.kind == LabelKind::DataOnly ? SolverMode::DataOnly : SolverMode::JointPilotData;
    cfg.init = InitKind::FullPower;
    cfg.num_inits = labels.kind == LabelKind::BestOfN ? static_cast<int>(labels.num_inits) : 1;
    cfg.init_seed = stream_key({seed, draw_index, kInitStreamTag});
    return cfg;
}

SolveResult solve_for_label(const Realization& r, const SystemParams& params,
                            const SolverConfig& cfg, LabelProvenance labels) {
    if (labels.kind == LabelKind::BestOfN) return solve_best_of_n(r, params, cfg);
    return solve(r, params, cfg);
}

DatasetSummary write_dataset(const NetworkConfig& cfg, const GenerateOptions& opts,
                             const std::string& path) {
    cfg.validate();
    opts.solver.validate();
    if (opts.num_samples < 1) throw ConfigError("num_samples must be at least 1");
    const std::uint64_t budget =
        opts.max_failures.value_or((opts.num_samples + 99) / 100);

    const DatasetHeader header = DatasetHeader::from_config(cfg, opts.labels, opts.num_samples);
    const SystemParams params = cfg.system_params();
    DatasetWriter writer(path, header);

    struct Labelled {
        DatasetRecord record;
        int iterations = 0;
        bool converged = true;
    };

    DatasetSummary sum;
    double total_se = 0.0;
    double total_iters = 0.0;
    std::uint64_t zero_users = 0;
    const std::uint64_t chunk = 64 * static_cast<std::uint64_t>(std::max(1, opts.workers));

    for (std::uint64_t start = 0; start < opts.num_samples; start += chunk) {
        const std::uint64_t n = std::min(chunk, opts.num_samples - start);
        std::vector<Labelled> batch(n);
        parallel_for(n, opts.workers, [&](std::uint64_t i) {
            const std::uint64_t draw = start + i;
            const Realization r = generate_realization(cfg, draw);
            const SolverConfig scfg = label_solver_config(opts.solver, opts.labels, cfg.seed, draw);
            const SolveResult res = solve_for_label(r, params, scfg, opts.labels);
            batch[i] = {quantize_record(r.beta, res.powers, params.max_power_mw), res.iterations,
                        res.status == SolveStatus::Converged};
        });

        for (const auto& item : batch) {
            validate_record(header, item.record);
            const Realization r = item.record.realization();
            total_se += evaluate_se(r, item.record.label, params).total_sum_se;
            total_iters += item.iterations;
            sum.max_iterations = std::max(sum.max_iterations, item.iterations);
            for (int l = 0; l < r.cells(); ++l)
                for (int k = 0; k < r.slots(); ++k)
                    if (r.is_active(l, k)) {
                        ++sum.active_users;
                        if (item.record.label.pilot_mw(l, k) == 0.0 &&
                            item.record.label.data_mw(l, k) == 0.0)
                            ++zero_users;
                    }
            if (!item.converged && ++sum.failures > budget)
                throw SolverBudgetError("solver hit max_iters on " + std::to_string(sum.failures) +
                                        " samples, budget is " + std::to_string(budget));
            writer.append(item.record);
            ++sum.count;
        }
    }
    writer.finish();

    const double count = static_cast<double>(sum.count);
    sum.mean_sum_se = total_se / count;
    sum.mean_sum_se_per_cell = sum.mean_sum_se / cfg.num_cells;
    sum.mean_iterations = total_iters / count;
    sum.zero_power_fraction =
        sum.active_users ? static_cast<double>(zero_users) / static_cast<double>(sum.active_users) : 0.0;
    return sum;
}

PowerAllocation ingest_prediction(const Realization& r, PowerAllocation pred,
                                  const SlotMatrix& max_power_mw, std::uint64_t record_index) {
    if (pred.pilot_mw.cells() != r.cells() || pred.pilot_mw.slots() != r.slots() ||
        pred.data_mw.cells() != r.cells() || pred.data_mw.slots() != r.slots())
        throw InfeasiblePowerError(-1, -1, "prediction shape mismatch in record " +
                                               std::to_string(record_index));
    for (int l = 0; l < r.cells(); ++l) {
        for (int k = 0; k < r.slots(); ++k) {
            const double cap = max_power_mw(l, k);
            for (SlotMatrix* m : {&pred.pilot_mw, &pred.data_mw}) {
                double& p = (*m)(l, k);
                if (!r.is_active(l, k)) {
                    p = 0.0;
                } else if (p > cap && p <= cap * (1.0 + 1e-6)) {
                    p = cap;
                }
            }
        }
    }
    try {
        validate_powers(r, pred, max_power_mw);
    } catch (const InfeasiblePowerError& e) {
        throw InfeasiblePowerError(e.cell(), e.slot(),
                                   "record " + std::to_string(record_index) + ": " + e.what());
    }
    return pred;
}

EvaluationStats evaluate_dataset(const std::string& dataset_path, AllocationSource source,
                                 const std::string& predictions_path, int workers) {
    DatasetReader reader(dataset_path);
    const DatasetHeader header = reader.header();
    const SystemParams params = header.system_params();

    std::optional<PredictionFile> predictions;
    if (source == AllocationSource::Predictions) {
        predictions = read_predictions(predictions_path);
        const auto& ph = predictions->header;
        if (ph.dataset_sha256 != sha256_file(dataset_path))
            throw FormatError("prediction file was made for a different dataset (SHA-256 mismatch)", 24);
        if (ph.num_cells != header.num_cells || ph.max_users_per_cell != header.max_users_per_cell ||
            ph.sample_count != header.sample_count)
            throw FormatError("prediction dimensions do not match the dataset", 8);
    }

    std::vector<DatasetRecord> records;
    records.reserve(reader.size());
    while (auto rec = reader.next()) records.push_back(std::move(*rec));

    struct Scored {
        SEReport report;
        double fp_total = 0.0;
        PowerAllocation alloc;
    };
    std::vector<Scored> scored(records.size());
    parallel_for(records.size(), workers, [&](std::uint64_t d) {
        const Realization r = records[d].realization();
        try {
            validate_realization(r);
        } catch (const ConfigError& e) {
            throw FormatError("record " + std::to_string(d) + ": " + e.what(),
                              header.header_bytes() + d * header.record_bytes(),
                              static_cast<std::int64_t>(d));
        }
        PowerAllocation alloc;
        switch (source) {
        case AllocationSource::FixedPower:
            alloc = fixed_power_baseline(r, params.max_power_mw);
            break;
        case AllocationSource::Labels:
            alloc = records[d].label;
            break;
        case AllocationSource::Predictions:
            alloc = ingest_prediction(r, predictions->records[d], params.max_power_mw, d);
            break;
        }
        SEReport rep;
        try {
            rep = evaluate_se(r, alloc, params);
        } catch (const InfeasiblePowerError& e) {
            throw InfeasiblePowerError(e.cell(), e.slot(),
                                       "record " + std::to_string(d) + ": " + e.what());
        }
        const double fp = evaluate_se(r, fixed_power_baseline(r, params.max_power_mw), params).total_sum_se;
        scored[d] = {std::move(rep), fp, std::move(alloc)};
    });

    EvaluationStats st;
    st.samples = records.size();
    double total = 0.0;
    double fp_total = 0.0;
    for (std::size_t d = 0; d < records.size(); ++d) {
        const Realization r = records[d].realization();
        const auto& s = scored[d];
        total += s.report.total_sum_se;
        fp_total += s.fp_total;
        for (double c : s.report.sum_se_per_cell) st.cell_sum_se.push_back(c);
        for (int l = 0; l < r.cells(); ++l)
            for (int k = 0; k < r.slots(); ++k)
                if (r.is_active(l, k)) {
                    st.user_se.push_back(s.report.se_bps_hz(l, k));
                    st.pilot_mw.push_back(s.alloc.pilot_mw(l, k));
                    st.data_mw.push_back(s.alloc.data_mw(l, k));
                }
    }
    const double n = records.empty() ? 1.0 : static_cast<double>(records.size());
    st.mean_sum_se = total / n;
    st.mean_cell_sum_se = mean_of(st.cell_sum_se);
    st.median_cell_sum_se = median_of(st.cell_sum_se);
    st.mean_user_se = mean_of(st.user_se);
    st.fp_mean_cell_sum_se = fp_total / n / static_cast<double>(header.num_cells);
    // ratio of totals, so scoring FP against itself gives exactly 0
    st.gain_vs_fp = fp_total > 0.0 ? total / fp_total - 1.0 : 0.0;
    return st;
}

std::vector<BenchRow> bench_solvers(const NetworkConfig& cfg, std::uint64_t samples,
                                    const SolverConfig& base) {
    cfg.validate();
    base.validate();
    if (samples < 1) throw ConfigError("bench needs at least one sample");
    const SystemParams params = cfg.system_params();

    std::vector<BenchRow> rows;
    for (SolverMode mode : {SolverMode::JointPilotData, SolverMode::DataOnly}) {
        SolverConfig scfg = base;
        scfg.mode = mode;
        scfg.init = InitKind::FullPower;
        std::vector<double> ms;
        double iters = 0.0;
        double se = 0.0;
        for (std::uint64_t d = 0; d < samples; ++d) {
            const Realization r = generate_realization(cfg, d);
            const auto t0 = std::chrono::steady_clock::now();
            const SolveResult res = solve(r, params, scfg);
            const auto t1 = std::chrono::steady_clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            iters += res.iterations;
            se += res.final_sum_se();
        }
        std::vector<double> sorted = ms;
        std::sort(sorted.begin(), sorted.end());
        const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
        BenchRow row;
        row.mode = mode == SolverMode::JointPilotData ? "jpdpo" : "dpoo";
        row.samples = samples;
        row.mean_ms = mean_of(ms);
        row.p95_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
        row.mean_iterations = iters / static_cast<double>(samples);
        row.mean_sum_se = se / static_cast<double>(samples);
        rows.push_back(row);
    }
    return rows;
}

void labels_as_predictions(const std::string& dataset_path, const std::string& out_path) {
    DatasetReader reader(dataset_path);
    PredictionFile file;
    file.header.num_cells = reader.header().num_cells;
    file.header.max_users_per_cell = reader.header().max_users_per_cell;
    file.header.sample_count = reader.size();
    file.header.dataset_sha256 = sha256_file(dataset_path);
    while (auto rec = reader.next()) file.records.push_back(rec->label);
    write_predictions(out_path, file);
}

}  // namespace mmpc
