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

#include "mmpc/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmpc/errors.hpp"
#include "mmpc/pipeline.hpp"

namespace mmpc {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp + "' for writing");
        out << text;
        out.close();
        if (!out) throw Error("write failed on '" + tmp + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot move '" + path + "' into place");
    }
}

void write_manifest(const std::string& path, const ordered_json& m) {
    write_atomic(path, m.dump(2) + "\n");
}

ordered_json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_cdf(const std::vector<double>& values, const std::string& path) {
    if (values.empty()) {
        write_atomic(path, "value,cdf\n");
        return;
    }
    export_cdf_csv(values, path);
}

ordered_json solver_json(const SolverConfig& s) {
    return {{"epsilon", s.epsilon}, {"max_iters", s.max_iters}};
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    NetworkConfig cfg;
    GenerateOptions opts;
    std::string out;
};

int do_generate(const GenerateArgs& a, std::ostream& out) {
    const std::string started = utc_now();
    const DatasetSummary s = write_dataset(a.cfg, a.opts, a.out);
    const std::string finished = utc_now();

    ordered_json m;
    m["command"] = "generate";
    m["config"] = ordered_json::parse(config_to_json(a.cfg));
    m["seed"] = a.cfg.seed;
    m["options"] = {{"samples", a.opts.num_samples},
                    {"labels", a.opts.labels.to_string()},
                    {"workers", a.opts.workers},
                    {"solver", solver_json(a.opts.solver)}};
    if (a.opts.max_failures) m["options"]["max_failures"] = *a.opts.max_failures;
    m["started_at"] = started;
    m["finished_at"] = finished;
    m["outputs"] = {{"dataset", a.out}, {"sha256", to_hex(sha256_file(a.out))}};
    m["summary"] = {{"count", s.count},
                    {"failures", s.failures},
                    {"mean_sum_se", s.mean_sum_se},
                    {"mean_sum_se_per_cell", s.mean_sum_se_per_cell},
                    {"active_users", s.active_users},
                    {"zero_power_fraction", s.zero_power_fraction},
                    {"mean_iterations", s.mean_iterations},
                    {"max_iterations", s.max_iterations}};
    write_manifest(a.out + ".manifest.json", m);

    out << "samples: " << s.count << "\n"
        << "mean_sum_se_per_cell: " << format_number(s.mean_sum_se_per_cell) << "\n"
        << "mean_sum_se: " << format_number(s.mean_sum_se) << "\n"
        << "zero_power_fraction: " << format_number(s.zero_power_fraction) << "\n"
        << "mean_iterations: " << format_number(s.mean_iterations) << "\n"
        << "max_iterations: " << s.max_iterations << "\n"
        << "failures: " << s.failures << "\n"
        << "dataset: " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string dataset;
    std::string predictions;
    std::string baseline;
    std::string out_dir;
    int workers = 1;
};

int do_evaluate(const EvaluateArgs& a, std::ostream& out) {
    AllocationSource source = AllocationSource::Predictions;
    if (a.predictions.empty()) {
        if (a.baseline == "fp")
            source = AllocationSource::FixedPower;
        else if (a.baseline == "labels")
            source = AllocationSource::Labels;
        else
            throw ConfigError("--baseline must be fp or labels");
    }
    const std::string out_dir = a.out_dir.empty() ? a.dataset + ".eval" : a.out_dir;

    const std::string started = utc_now();
    const EvaluationStats st = evaluate_dataset(a.dataset, source, a.predictions, a.workers);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const std::vector<std::pair<std::string, const std::vector<double>*>> csvs = {
        {"cell_sum_se_cdf.csv", &st.cell_sum_se},
        {"user_se_cdf.csv", &st.user_se},
        {"pilot_power_cdf.csv", &st.pilot_mw},
        {"data_power_cdf.csv", &st.data_mw},
    };
    ordered_json outputs;
    for (const auto& [name, values] : csvs) {
        const std::string path = (dir / name).string();
        write_cdf(*values, path);
        outputs[name] = path;
    }
    const std::string finished = utc_now();

    ordered_json m;
    m["command"] = "evaluate";
    m["inputs"] = {{"dataset", a.dataset}, {"dataset_sha256", to_hex(sha256_file(a.dataset))}};
    if (!a.predictions.empty()) {
        m["inputs"]["predictions"] = a.predictions;
        m["inputs"]["predictions_sha256"] = to_hex(sha256_file(a.predictions));
    }
    m["source"] = a.predictions.empty() ? a.baseline : "predictions";
    m["seed"] = DatasetReader(a.dataset).header().seed;
    m["options"] = {{"workers", a.workers}};
    m["started_at"] = started;
    m["finished_at"] = finished;
    m["outputs"] = outputs;
    m["summary"] = {{"samples", st.samples},
                    {"mean_sum_se", st.mean_sum_se},
                    {"mean_cell_sum_se", st.mean_cell_sum_se},
                    {"median_cell_sum_se", st.median_cell_sum_se},
                    {"mean_user_se", st.mean_user_se},
                    {"fp_mean_cell_sum_se", st.fp_mean_cell_sum_se},
                    {"gain_vs_fp", st.gain_vs_fp}};
    write_manifest((dir / "manifest.json").string(), m);

    out << "samples: " << st.samples << "\n"
        << "mean_sum_se: " << format_number(st.mean_sum_se) << "\n"
        << "mean_cell_sum_se: " << format_number(st.mean_cell_sum_se) << "\n"
        << "median_cell_sum_se: " << format_number(st.median_cell_sum_se) << "\n"
        << "mean_user_se: " << format_number(st.mean_user_se) << "\n"
        << "gain_vs_fp: " << format_number(st.gain_vs_fp) << "\n"
        << "out_dir: " << out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    NetworkConfig cfg;
    std::uint64_t samples = 10;
    SolverConfig solver;
    std::string out;
};

int do_bench(const BenchArgs& a, std::ostream& out) {
    const std::string started = utc_now();
    const auto rows = bench_solvers(a.cfg, a.samples, a.solver);
    const std::string finished = utc_now();

    std::ostringstream csv;
    csv << "mode,samples,mean_ms,p95_ms,mean_iterations,mean_sum_se\n";
    for (const auto& r : rows)
        csv << r.mode << ',' << r.samples << ',' << format_number(r.mean_ms) << ','
            << format_number(r.p95_ms) << ',' << format_number(r.mean_iterations) << ','
            << format_number(r.mean_sum_se) << '\n';
    out << csv.str();

    if (!a.out.empty()) {
        write_atomic(a.out, csv.str());
        ordered_json m;
        m["command"] = "bench";
        m["config"] = ordered_json::parse(config_to_json(a.cfg));
        m["seed"] = a.cfg.seed;
        m["options"] = {{"samples", a.samples}, {"solver", solver_json(a.solver)}};
        m["started_at"] = started;
        m["finished_at"] = finished;
        m["outputs"] = {{"csv", a.out}};
        ordered_json summary = ordered_json::array();
        for (const auto& r : rows)
            summary.push_back({{"mode", r.mode},
                               {"mean_ms", r.mean_ms},
                               {"p95_ms", r.p95_ms},
                               {"mean_iterations", r.mean_iterations},
                               {"mean_sum_se", r.mean_sum_se}});
        m["summary"] = summary;
        write_manifest(a.out + ".manifest.json", m);
    }
    return kExitOk;
}

// ---------------------------------------------------------------- replay

SolverConfig solver_from_json(const ordered_json& j) {
    SolverConfig s;
    s.epsilon = j.at("epsilon").get<double>();
    s.max_iters = j.at("max_iters").get<int>();
    return s;
}

int do_replay(const std::string& manifest_path, const std::string& out_override,
              std::ostream& out) {
    const ordered_json m = read_json_file(manifest_path);
    try {
        const std::string command = m.at("command").get<std::string>();
        if (command == "generate") {
            GenerateArgs a;
            a.cfg = parse_config(m.at("config").dump());
            const auto& o = m.at("options");
            a.opts.num_samples = o.at("samples").get<std::uint64_t>();
            a.opts.labels = LabelProvenance::parse(o.at("labels").get<std::string>());
            a.opts.workers = o.at("workers").get<int>();
            a.opts.solver = solver_from_json(o.at("solver"));
            if (o.contains("max_failures")) a.opts.max_failures = o.at("max_failures").get<std::uint64_t>();
            a.out = out_override.empty() ? m.at("outputs").at("dataset").get<std::string>() : out_override;
            return do_generate(a, out);
        }
        if (command == "evaluate") {
            EvaluateArgs a;
            const auto& in = m.at("inputs");
            a.dataset = in.at("dataset").get<std::string>();
            if (in.contains("predictions")) a.predictions = in.at("predictions").get<std::string>();
            else a.baseline = m.at("source").get<std::string>();
            a.workers = m.at("options").at("workers").get<int>();
            a.out_dir = out_override.empty() ? fs::path(manifest_path).parent_path().string() : out_override;
            return do_evaluate(a, out);
        }
        if (command == "bench") {
            BenchArgs a;
            a.cfg = parse_config(m.at("config").dump());
            a.samples = m.at("options").at("samples").get<std::uint64_t>();
            a.solver = solver_from_json(m.at("options").at("solver"));
            a.out = out_override.empty() ? m.at("outputs").at("csv").get<std::string>() : out_override;
            return do_bench(a, out);
        }
        throw ConfigError("manifest has unknown command '" + command + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed manifest '" + manifest_path + "': " + e.what());
    }
}

void add_solver_flags(CLI::App* cmd, SolverConfig& s) {
    cmd->add_option("--epsilon", s.epsilon, "Stop when the sum SE changes by at most this")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", s.max_iters, "Iteration cap per solve")->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Massive MIMO uplink power control toolkit", "mmpc"};
    app.require_subcommand(1);

    // generate
    std::string gen_config;
    std::uint64_t gen_samples = 0;
    std::string gen_labels = "jpdpo";
    std::string gen_out;
    int gen_workers = 1;
    std::optional<std::uint64_t> gen_seed;
    std::optional<std::uint64_t> gen_max_failures;
    SolverConfig gen_solver;
    auto* gen = app.add_subcommand("generate", "Generate a labelled dataset");
    gen->add_option("config", gen_config, "Scenario config (JSON)")->required();
    gen->add_option("--samples", gen_samples, "Number of realizations")->required()->check(CLI::PositiveNumber);
    gen->add_option("--labels", gen_labels, "jpdpo, dpoo or best-of:<n>");
    gen->add_option("--out", gen_out, "Dataset output path")->required();
    gen->add_option("--workers", gen_workers, "Worker threads")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Override the config seed");
    gen->add_option("--max-failures", gen_max_failures, "Solves allowed to hit the iteration cap");
    add_solver_flags(gen, gen_solver);

    // evaluate
    EvaluateArgs ev;
    auto* eval = app.add_subcommand("evaluate", "Score an allocation over a dataset");
    eval->add_option("dataset", ev.dataset, "Dataset file")->required();
    auto* pred_opt = eval->add_option("--predictions", ev.predictions, "Prediction file");
    auto* base_opt = eval->add_option("--baseline", ev.baseline, "fp or labels")
                         ->check(CLI::IsMember({"fp", "labels"}));
    pred_opt->excludes(base_opt);
    eval->add_option("--out-dir", ev.out_dir, "Directory for CSVs and manifest");
    eval->add_option("--workers", ev.workers, "Worker threads")->check(CLI::PositiveNumber);

    // bench
    std::string bench_config;
    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time JPDPO and DPOO solves");
    bench->add_option("config", bench_config, "Scenario config (JSON)")->required();
    bench->add_option("--samples", bench_args.samples, "Number of realizations")->check(CLI::PositiveNumber);
    bench->add_option("--out", bench_args.out, "Write the timing table as CSV");
    add_solver_flags(bench, bench_args.solver);

    // replay
    std::string replay_manifest;
    std::string replay_out;
    auto* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
    replay->add_option("manifest", replay_manifest, "Manifest JSON")->required();
    replay->add_option("--out", replay_out, "Override the output path (or directory for evaluate)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            GenerateArgs a;
            a.cfg = load_config(gen_config);
            if (gen_seed) a.cfg.seed = *gen_seed;
            a.opts.num_samples = gen_samples;
            a.opts.labels = LabelProvenance::parse(gen_labels);
            a.opts.workers = gen_workers;
            a.opts.solver = gen_solver;
            a.opts.max_failures = gen_max_failures;
            a.out = gen_out;
            return do_generate(a, out);
        }
        if (*eval) {
            if (ev.predictions.empty() && ev.baseline.empty())
                throw ConfigError("evaluate needs --predictions or --baseline");
            return do_evaluate(ev, out);
        }
        if (*bench) {
            bench_args.cfg = load_config(bench_config);
            return do_bench(bench_args, out);
        }
        return do_replay(replay_manifest, replay_out, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const GenerationError& e) {
        err << "error: cell " << e.cell() << " slot " << e.slot() << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const SolverBudgetError& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolverBudget;
    } catch (const InfeasiblePowerError& e) {
        err << "error: " << e.what() << " (cell " << e.cell() << ", slot " << e.slot() << ")\n";
        return kExitData;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << " (byte offset " << e.byte_offset() << ")\n";
        return kExitData;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace mmpc
