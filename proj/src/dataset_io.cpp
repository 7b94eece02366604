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

#include "mmpc/dataset_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "mmpc/errors.hpp"

namespace mmpc {

namespace {

// Little-endian encoder into a byte buffer.
class ByteSink {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

    const std::string& bytes() const noexcept { return buf_; }

private:
    std::string buf_;
};

// Little-endian decoder over a byte buffer read from `base_offset` in a file.
class ByteSource {
public:
    ByteSource(const std::string& buf, std::uint64_t base_offset)
        : buf_(buf), base_(base_offset) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char* out, std::size_t n) {
        need(n);
        std::copy_n(buf_.data() + pos_, n, out);
        pos_ += n;
    }
    std::uint64_t offset() const noexcept { return base_ + pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw FormatError("unexpected end of data", offset());
    }

    const std::string& buf_;
    std::uint64_t base_;
    std::size_t pos_ = 0;
};

constexpr std::size_t kDatasetFixedHeaderBytes = 72;
constexpr std::size_t kPredictionHeaderBytes = 56;

std::string read_bytes(std::ifstream& in, std::uint64_t offset, std::size_t n) {
    std::string buf(n, '\0');
    in.clear();
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(buf.data(), static_cast<std::streamsize>(n));
    buf.resize(static_cast<std::size_t>(in.gcount()));
    return buf;
}

std::uint64_t file_size(const std::string& path) {
    std::error_code ec;
    const auto n = std::filesystem::file_size(path, ec);
    if (ec) throw FormatError("cannot stat '" + path + "': " + ec.message(), 0);
    return n;
}

float to_disk_power(double x, double cap) {
    float f = static_cast<float>(x);
    if (static_cast<double>(f) > cap) f = std::nextafter(f, 0.0f);
    return f;
}

void encode_header(ByteSink& s, const DatasetHeader& h) {
    s.raw(kDatasetMagic.data(), kDatasetMagic.size());
    s.u32(h.version);
    s.u32(h.num_cells);
    s.u32(h.max_users_per_cell);
    s.u32(h.num_antennas);
    s.u32(h.coherence_symbols);
    s.f64(h.noise_power_mw);
    s.u32(static_cast<std::uint32_t>(h.activity_kind));
    s.u32(static_cast<std::uint32_t>(h.labels.kind));
    s.f64(h.activity_prob);
    s.u32(h.labels.num_inits);
    s.u32(0);  // reserved
    s.u64(h.seed);
    s.u64(h.sample_count);
    for (double p : h.max_power_mw.flat()) s.f64(p);
}

void encode_record(ByteSink& s, const DatasetRecord& rec) {
    for (double b : rec.beta.flat()) s.f32(static_cast<float>(b));
    for (double p : rec.label.pilot_mw.flat()) s.f32(static_cast<float>(p));
    for (double p : rec.label.data_mw.flat()) s.f32(static_cast<float>(p));
}

struct EvpDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

}  // namespace

LabelProvenance LabelProvenance::parse(const std::string& text) {
    if (text == "jpdpo") return {LabelKind::JointPilotData, 1};
    if (text == "dpoo") return {LabelKind::DataOnly, 1};
    const std::string prefix = "best-of:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string digits = text.substr(prefix.size());
        std::uint32_t n = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && n >= 1)
            return {LabelKind::BestOfN, n};
    }
    throw ConfigError("label mode must be jpdpo, dpoo or best-of:<n>, got '" + text + "'");
}

std::string LabelProvenance::to_string() const {
    switch (kind) {
    case LabelKind::JointPilotData:
        return "jpdpo";
    case LabelKind::DataOnly:
        return "dpoo";
    case LabelKind::BestOfN:
        return "best-of:" + std::to_string(num_inits);
    }
    return "unknown";
}

DatasetHeader DatasetHeader::from_config(const NetworkConfig& cfg, LabelProvenance labels,
                                         std::uint64_t sample_count) {
    DatasetHeader h;
    h.num_cells = static_cast<std::uint32_t>(cfg.num_cells);
    h.max_users_per_cell = static_cast<std::uint32_t>(cfg.max_users_per_cell);
    h.num_antennas = static_cast<std::uint32_t>(cfg.num_antennas);
    h.coherence_symbols = static_cast<std::uint32_t>(cfg.coherence_symbols);
    h.noise_power_mw = cfg.noise_power_mw;
    h.activity_kind = cfg.activity.kind;
    h.activity_prob = cfg.activity.mean();
    h.labels = labels;
    h.seed = cfg.seed;
    h.sample_count = sample_count;
    h.max_power_mw = cfg.max_power();
    return h;
}

SystemParams DatasetHeader::system_params() const {
    return SystemParams{static_cast<int>(num_antennas), static_cast<int>(coherence_symbols),
                        noise_power_mw, max_power_mw};
}

std::size_t DatasetHeader::header_bytes() const {
    return kDatasetFixedHeaderBytes + 8 * static_cast<std::size_t>(num_cells) * max_users_per_cell;
}

std::size_t DatasetHeader::record_bytes() const {
    const std::size_t lk = static_cast<std::size_t>(num_cells) * max_users_per_cell;
    return 4 * (lk * num_cells + 2 * lk);
}

DatasetRecord quantize_record(const GainTensor& beta, const PowerAllocation& label,
                              const SlotMatrix& max_power_mw) {
    DatasetRecord rec{GainTensor(beta.cells(), beta.slots()),
                      PowerAllocation::zeros(beta.cells(), beta.slots())};
    for (std::size_t i = 0; i < beta.flat().size(); ++i)
        rec.beta.flat()[i] = static_cast<double>(static_cast<float>(beta.flat()[i]));
    for (int l = 0; l < beta.cells(); ++l)
        for (int k = 0; k < beta.slots(); ++k) {
            const double cap = max_power_mw(l, k);
            rec.label.pilot_mw(l, k) = to_disk_power(label.pilot_mw(l, k), cap);
            rec.label.data_mw(l, k) = to_disk_power(label.data_mw(l, k), cap);
        }
    return rec;
}

void validate_record(const DatasetHeader& header, const DatasetRecord& rec) {
    const Realization r = rec.realization();
    validate_realization(r);
    validate_powers(r, rec.label, header.max_power_mw);
}

DatasetWriter::DatasetWriter(const std::string& path, const DatasetHeader& header)
    : path_(path), tmp_path_(path + ".partial"), header_(header) {
    const std::size_t lk = static_cast<std::size_t>(header.num_cells) * header.max_users_per_cell;
    if (header.max_power_mw.size() != lk)
        throw ConfigError("dataset header power matrix does not match its dimensions");
    out_.open(tmp_path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error("cannot open '" + tmp_path_ + "' for writing");
    ByteSink s;
    encode_header(s, header_);
    out_.write(s.bytes().data(), static_cast<std::streamsize>(s.bytes().size()));
    if (!out_) throw Error("write failed on '" + tmp_path_ + "'");
}

DatasetWriter::~DatasetWriter() {
    if (!finished_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_path_, ec);
    }
}

void DatasetWriter::append(const DatasetRecord& rec) {
    if (finished_) throw Error("dataset writer already finished");
    if (written_ >= header_.sample_count) throw Error("more records than the header declares");
    if (rec.beta.cells() != static_cast<int>(header_.num_cells) ||
        rec.beta.slots() != static_cast<int>(header_.max_users_per_cell))
        throw ConfigError("record dimensions do not match the dataset header");
    ByteSink s;
    encode_record(s, rec);
    out_.write(s.bytes().data(), static_cast<std::streamsize>(s.bytes().size()));
    if (!out_) throw Error("write failed on '" + tmp_path_ + "'");
    ++written_;
}

void DatasetWriter::finish() {
    if (finished_) return;
    if (written_ != header_.sample_count)
        throw Error("dataset has " + std::to_string(written_) + " records, header declares " +
                    std::to_string(header_.sample_count));
    out_.close();
    if (!out_) throw Error("close failed on '" + tmp_path_ + "'");
    std::error_code ec;
    std::filesystem::rename(tmp_path_, path_, ec);
    if (ec) throw Error("cannot move dataset into place: " + ec.message());
    finished_ = true;
}

DatasetReader::DatasetReader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw FormatError("cannot open dataset '" + path + "'", 0);

    const std::string fixed = read_bytes(in_, 0, kDatasetFixedHeaderBytes);
    if (fixed.size() < kDatasetMagic.size() ||
        !std::equal(kDatasetMagic.begin(), kDatasetMagic.end(), fixed.begin()))
        throw FormatError("bad magic: not a dataset file", 0);
    if (fixed.size() < kDatasetFixedHeaderBytes) throw FormatError("truncated header", fixed.size());

    ByteSource src(fixed, 0);
    char magic[4];
    src.raw(magic, 4);
    header_.version = src.u32();
    if (header_.version != kFormatVersion)
        throw FormatError("unsupported format version " + std::to_string(header_.version), 4);
    header_.num_cells = src.u32();
    header_.max_users_per_cell = src.u32();
    header_.num_antennas = src.u32();
    header_.coherence_symbols = src.u32();
    header_.noise_power_mw = src.f64();
    const std::uint32_t activity = src.u32();
    const std::uint32_t label_kind = src.u32();
    header_.activity_prob = src.f64();
    header_.labels.num_inits = src.u32();
    src.u32();  // reserved
    header_.seed = src.u64();
    header_.sample_count = src.u64();

    if (header_.num_cells == 0 || header_.max_users_per_cell == 0 || header_.num_antennas == 0)
        throw FormatError("zero dimension in header", 8);
    if (header_.num_cells > 4096 || header_.max_users_per_cell > 4096)
        throw FormatError("implausible dimensions in header", 8);
    if (header_.coherence_symbols <= header_.max_users_per_cell)
        throw FormatError("coherence_symbols must exceed max_users_per_cell", 20);
    if (!(header_.noise_power_mw > 0.0)) throw FormatError("nonpositive noise power", 24);
    if (activity > 2) throw FormatError("unknown activity kind", 32);
    if (label_kind > 2) throw FormatError("unknown label kind", 36);
    header_.activity_kind = static_cast<ActivityKind>(activity);
    header_.labels.kind = static_cast<LabelKind>(label_kind);

    const int cells = static_cast<int>(header_.num_cells);
    const int slots = static_cast<int>(header_.max_users_per_cell);
    const std::string power_bytes =
        read_bytes(in_, kDatasetFixedHeaderBytes, header_.header_bytes() - kDatasetFixedHeaderBytes);
    ByteSource psrc(power_bytes, kDatasetFixedHeaderBytes);
    header_.max_power_mw = SlotMatrix(cells, slots);
    for (double& p : header_.max_power_mw.flat()) {
        p = psrc.f64();
        if (!(p >= 0.0) || !std::isfinite(p))
            throw FormatError("invalid power budget in header", psrc.offset() - 8);
    }

    const std::uint64_t size = file_size(path);
    if (size < header_.header_bytes()) throw FormatError("truncated header", size);
    const std::uint64_t expected = header_.header_bytes() + header_.sample_count * header_.record_bytes();
    if (size < expected) {
        const std::uint64_t complete = (size - header_.header_bytes()) / header_.record_bytes();
        throw FormatError("truncated record " + std::to_string(complete) + " (file has " +
                              std::to_string(size) + " bytes, expected " +
                              std::to_string(expected) + ")",
                          header_.header_bytes() + complete * header_.record_bytes(),
                          static_cast<std::int64_t>(complete));
    }
    if (size > expected)
        throw FormatError("trailing bytes after the last record", expected);
}

DatasetRecord DatasetReader::read(std::uint64_t index) {
    if (index >= header_.sample_count)
        throw FormatError("record index out of range", 0, static_cast<std::int64_t>(index));
    const int cells = static_cast<int>(header_.num_cells);
    const int slots = static_cast<int>(header_.max_users_per_cell);
    const std::uint64_t offset = header_.header_bytes() + index * header_.record_bytes();
    const std::string buf = read_bytes(in_, offset, header_.record_bytes());
    if (buf.size() != header_.record_bytes())
        throw FormatError("truncated record " + std::to_string(index), offset + buf.size(),
                          static_cast<std::int64_t>(index));

    ByteSource src(buf, offset);
    DatasetRecord rec{GainTensor(cells, slots), PowerAllocation::zeros(cells, slots)};
    for (double& b : rec.beta.flat()) b = src.f32();
    for (double& p : rec.label.pilot_mw.flat()) p = src.f32();
    for (double& p : rec.label.data_mw.flat()) p = src.f32();
    return rec;
}

std::optional<DatasetRecord> DatasetReader::next() {
    if (cursor_ >= header_.sample_count) return std::nullopt;
    return read(cursor_++);
}

std::vector<DatasetRecord> read_all_records(const std::string& path) {
    DatasetReader reader(path);
    std::vector<DatasetRecord> out;
    out.reserve(reader.size());
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

Sha256Digest sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "' for hashing", 0);
    std::unique_ptr<EVP_MD_CTX, EvpDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 initialization failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto n = in.gcount();
        if (n > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(n)) != 1)
            throw Error("SHA-256 update failed");
    }
    Sha256Digest digest{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1 || len != digest.size())
        throw Error("SHA-256 finalization failed");
    return digest;
}

std::string to_hex(const Sha256Digest& digest) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (auto b : digest) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xf]);
    }
    return out;
}

void write_predictions(const std::string& path, const PredictionFile& file) {
    const auto& h = file.header;
    if (file.records.size() != h.sample_count)
        throw Error("prediction record count does not match its header");
    ByteSink s;
    s.raw(kPredictionMagic.data(), kPredictionMagic.size());
    s.u32(h.version);
    s.u32(h.num_cells);
    s.u32(h.max_users_per_cell);
    s.u64(h.sample_count);
    s.raw(reinterpret_cast<const char*>(h.dataset_sha256.data()), h.dataset_sha256.size());
    for (const auto& rec : file.records) {
        if (rec.pilot_mw.cells() != static_cast<int>(h.num_cells) ||
            rec.pilot_mw.slots() != static_cast<int>(h.max_users_per_cell) ||
            rec.data_mw.cells() != static_cast<int>(h.num_cells) ||
            rec.data_mw.slots() != static_cast<int>(h.max_users_per_cell))
            throw ConfigError("prediction record dimensions do not match its header");
        for (double p : rec.pilot_mw.flat()) s.f32(static_cast<float>(p));
        for (double p : rec.data_mw.flat()) s.f32(static_cast<float>(p));
    }
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp + "' for writing");
        out.write(s.bytes().data(), static_cast<std::streamsize>(s.bytes().size()));
        if (!out) throw Error("write failed on '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot move predictions into place: " + ec.message());
}

PredictionFile read_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open predictions '" + path + "'", 0);
    const std::string head = read_bytes(in, 0, kPredictionHeaderBytes);
    if (head.size() < 4 || !std::equal(kPredictionMagic.begin(), kPredictionMagic.end(), head.begin()))
        throw FormatError("bad magic: not a prediction file", 0);
    if (head.size() < kPredictionHeaderBytes) throw FormatError("truncated header", head.size());

    PredictionFile file;
    auto& h = file.header;
    ByteSource src(head, 0);
    char magic[4];
    src.raw(magic, 4);
    h.version = src.u32();
    if (h.version != kFormatVersion)
        throw FormatError("unsupported format version " + std::to_string(h.version), 4);
    h.num_cells = src.u32();
    h.max_users_per_cell = src.u32();
    h.sample_count = src.u64();
    src.raw(reinterpret_cast<char*>(h.dataset_sha256.data()), h.dataset_sha256.size());
    if (h.num_cells == 0 || h.max_users_per_cell == 0 || h.num_cells > 4096 ||
        h.max_users_per_cell > 4096)
        throw FormatError("implausible dimensions in header", 8);

    const int cells = static_cast<int>(h.num_cells);
    const int slots = static_cast<int>(h.max_users_per_cell);
    const std::size_t record_bytes = 8 * static_cast<std::size_t>(cells) * static_cast<std::size_t>(slots);
    const std::uint64_t expected = kPredictionHeaderBytes + h.sample_count * record_bytes;
    const std::uint64_t size = file_size(path);
    if (size < expected) {
        // size >= kPredictionHeaderBytes here: the header itself was read in full.
        const std::uint64_t complete = (size - kPredictionHeaderBytes) / record_bytes;
        throw FormatError("truncated record " + std::to_string(complete),
                          kPredictionHeaderBytes + complete * record_bytes,
                          static_cast<std::int64_t>(complete));
    }
    if (size > expected) throw FormatError("trailing bytes after the last record", expected);

    const std::string body = read_bytes(in, kPredictionHeaderBytes, size - kPredictionHeaderBytes);
    ByteSource rs(body, kPredictionHeaderBytes);
    file.records.reserve(h.sample_count);
    for (std::uint64_t d = 0; d < h.sample_count; ++d) {
        auto rec = PowerAllocation::zeros(cells, slots);
        for (double& p : rec.pilot_mw.flat()) p = rs.f32();
        for (double& p : rec.data_mw.flat()) p = rs.f32();
        file.records.push_back(std::move(rec));
    }
    return file;
}

std::string format_number(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    std::string s(buf, ptr);
    if (std::isfinite(x) && s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

void export_cdf_csv(std::span<const double> values, const std::string& path) {
    if (values.empty()) throw Error("cannot export the CDF of an empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "value,cdf\n";
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        out << format_number(sorted[i]) << ',' << format_number(static_cast<double>(i + 1) / n) << '\n';
    if (!out) throw Error("write failed on '" + path + "'");
}

}  // namespace mmpc
