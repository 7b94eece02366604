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

// Binary dataset and prediction files. All multi-byte fields are
// little-endian; floats are IEEE-754. See docs/file-formats.md for the
// byte-level layout.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmpc/grid.hpp"
#include "mmpc/network_model.hpp"
#include "mmpc/se_kernel.hpp"
#include "mmpc/system.hpp"

namespace mmpc {

inline constexpr std::array<char, 4> kDatasetMagic = {'M', 'M', 'P', 'C'};
inline constexpr std::array<char, 4> kPredictionMagic = {'M', 'M', 'P', 'R'};
inline constexpr std::uint32_t kFormatVersion = 1;

enum class LabelKind : std::uint32_t { JointPilotData = 0, DataOnly = 1, BestOfN = 2 };

/// Which solver produced the labels.
struct LabelProvenance {
    LabelKind kind = LabelKind::JointPilotData;
    std::uint32_t num_inits = 1;

    /// "jpdpo", "dpoo" or "best-of:<n>".
    static LabelProvenance parse(const std::string& text);
    std::string to_string() const;
    bool operator==(const LabelProvenance&) const = default;
};

struct DatasetHeader {
    std::uint32_t version = kFormatVersion;
    std::uint32_t num_cells = 0;
    std::uint32_t max_users_per_cell = 0;
    std::uint32_t num_antennas = 0;
    std::uint32_t coherence_symbols = 0;
    double noise_power_mw = 0.0;
    ActivityKind activity_kind = ActivityKind::Fixed;
    /// Mean activity probability of the generating model.
    double activity_prob = 0.0;
    LabelProvenance labels;
    std::uint64_t seed = 0;
    std::uint64_t sample_count = 0;
    /// [num_cells][max_users_per_cell], mW.
    SlotMatrix max_power_mw;

    static DatasetHeader from_config(const NetworkConfig& cfg, LabelProvenance labels,
                                     std::uint64_t sample_count);
    SystemParams system_params() const;
    std::size_t header_bytes() const;
    std::size_t record_bytes() const;
    bool operator==(const DatasetHeader&) const = default;
};

/// One stored sample, holding exactly the values representable on disk.
struct DatasetRecord {
    GainTensor beta;
    PowerAllocation label;

    /// Activity is recovered from the gains: active iff the serving gain is positive.
    Realization realization() const { return realization_from_gains(beta); }
};

/// Rounds a record to the on-disk float32 precision. Labels are rounded
/// toward zero when nearest-rounding would overshoot the budget.
DatasetRecord quantize_record(const GainTensor& beta, const PowerAllocation& label,
                              const SlotMatrix& max_power_mw);

/// Throws InfeasiblePowerError/ConfigError if the label is infeasible for the
/// tensor or an inactive column is not all-zero.
void validate_record(const DatasetHeader& header, const DatasetRecord& rec);

/// Streams fixed-size records into `<path>.partial`, renaming to `path` on
/// finish(). Destroying an unfinished writer removes the partial file.
class DatasetWriter {
public:
    DatasetWriter(const std::string& path, const DatasetHeader& header);
    ~DatasetWriter();
    DatasetWriter(const DatasetWriter&) = delete;
    DatasetWriter& operator=(const DatasetWriter&) = delete;

    void append(const DatasetRecord& rec);
    /// Requires exactly header.sample_count records to have been appended.
    void finish();
    std::uint64_t written() const noexcept { return written_; }

private:
    std::string path_;
    std::string tmp_path_;
    DatasetHeader header_;
    std::ofstream out_;
    std::uint64_t written_ = 0;
    bool finished_ = false;
};

/// Sequential / random-access reader. The header and file length are
/// checked on open; record contents are checked on demand via validate_record.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& path);

    const DatasetHeader& header() const noexcept { return header_; }
    std::uint64_t size() const noexcept { return header_.sample_count; }

    DatasetRecord read(std::uint64_t index);
    /// Next record in stored order, or nullopt at the end.
    std::optional<DatasetRecord> next();

private:
    std::string path_;
    std::ifstream in_;
    DatasetHeader header_;
    std::uint64_t cursor_ = 0;
};

std::vector<DatasetRecord> read_all_records(const std::string& path);

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256_file(const std::string& path);
std::string to_hex(const Sha256Digest& digest);

struct PredictionHeader {
    std::uint32_t version = kFormatVersion;
    std::uint32_t num_cells = 0;
    std::uint32_t max_users_per_cell = 0;
    std::uint64_t sample_count = 0;
    /// SHA-256 of the complete dataset file the predictions were made for.
    Sha256Digest dataset_sha256{};
    bool operator==(const PredictionHeader&) const = default;
};

struct PredictionFile {
    PredictionHeader header;
    std::vector<PowerAllocation> records;
};

void write_predictions(const std::string& path, const PredictionFile& file);
PredictionFile read_predictions(const std::string& path);

/// Two-column "value,cdf" CSV of the empirical CDF, sorted ascending.
void export_cdf_csv(std::span<const double> values, const std::string& path);

/// Shortest round-trip decimal, always with a fractional part ("5.0", "0.25").
std::string format_number(double x);

}  // namespace mmpc
