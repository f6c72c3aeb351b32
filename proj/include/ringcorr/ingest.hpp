#pragma once

#include "ringcorr/chain_model.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ringcorr::ingest {

// One transaction as seen on chain: rings hold absolute global output
// indices (already delta-decoded), strictly increasing within a ring.
struct RawTransactionRecord {
    std::string tx_id;
    std::int64_t height = 0;
    std::int64_t timestamp = 0;
    std::vector<std::vector<std::uint64_t>> rings;
    std::uint64_t outputs_created = 0;

    friend bool operator==(const RawTransactionRecord&, const RawTransactionRecord&) = default;
};

enum class RecordFormat { raw, resolved };

struct FileHeader {
    RecordFormat format = RecordFormat::resolved;
    int version = 1;
    // raw exports only: global index of the first output created in the file
    std::optional<std::uint64_t> start_index;
};

using Record = std::variant<RawTransactionRecord, Transaction>;

std::string header_line(const FileHeader& h);
std::string to_jsonl(const RawTransactionRecord& r);
std::string to_jsonl(const Transaction& tx);

RawTransactionRecord parse_raw_line(const std::string& line, std::size_t line_no);
Transaction parse_resolved_line(const std::string& line, std::size_t line_no);

// Lazy line-by-line reader. The first line is the format header; blank lines
// are skipped. Errors carry 1-based line numbers.
class JsonlReader {
public:
    explicit JsonlReader(const std::filesystem::path& path);

    const FileHeader& header() const noexcept { return header_; }
    std::optional<Record> next();
    // SchemaError if the file is not in the requested format.
    std::optional<RawTransactionRecord> next_raw();
    std::optional<Transaction> next_resolved();

private:
    bool next_line(std::string& line);

    std::filesystem::path path_;
    std::ifstream in_;
    FileHeader header_;
    std::size_t line_no_ = 0;
};

std::vector<Transaction> read_resolved_file(const std::filesystem::path& path);
std::vector<RawTransactionRecord> read_raw_file(const std::filesystem::path& path);

// Line-oriented writer; emits the header on construction.
class JsonlWriter {
public:
    JsonlWriter(const std::filesystem::path& path, const FileHeader& header);

    void write(const RawTransactionRecord& r);
    void write(const Transaction& tx);
    void flush();

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

void write_resolved_file(const std::filesystem::path& path, std::span<const Transaction> txs);
void write_raw_file(const std::filesystem::path& path, std::span<const RawTransactionRecord> records,
                    std::optional<std::uint64_t> start_index = std::nullopt);

// Append-only map from global output index to the creating block, stored as
// one run per block. Covers [start, start + size()).
class OutputIndexTable {
public:
    explicit OutputIndexTable(std::uint64_t start = 0) : start_(start), end_(start) {}

    // Appends `count` consecutive outputs created in `block`.
    void append(const BlockRef& block, std::uint64_t count);

    std::uint64_t start() const noexcept { return start_; }
    std::uint64_t end() const noexcept { return end_; }
    std::uint64_t size() const noexcept { return end_ - start_; }
    bool empty() const noexcept { return end_ == start_; }
    bool covers(std::uint64_t index) const noexcept { return index >= start_ && index < end_; }

    // nullopt outside the covered range.
    std::optional<BlockRef> lookup(std::uint64_t index) const;

private:
    struct Run {
        std::uint64_t first;
        BlockRef block;
    };
    std::uint64_t start_;
    std::uint64_t end_;
    std::vector<Run> runs_;
};

// Incremental form of build_output_index; OrderError if heights decrease.
class OutputIndexBuilder {
public:
    explicit OutputIndexBuilder(std::uint64_t start) : table_(start) {}
    void add(const RawTransactionRecord& r);
    OutputIndexTable finish() && { return std::move(table_); }

private:
    OutputIndexTable table_;
    std::optional<std::int64_t> last_height_;
};

OutputIndexTable build_output_index(std::span<const RawTransactionRecord> records,
                                    std::uint64_t start);
OutputIndexTable build_output_index(JsonlReader& reader, std::uint64_t start);

struct QuarantineReport {
    std::uint64_t resolved = 0;
    std::uint64_t quarantined = 0;

    std::string to_json() const;
};

// Resolves one record against a frozen table; nullopt when any member index
// is outside the table (the whole transaction is quarantined).
std::optional<Transaction> resolve_record(const RawTransactionRecord& r,
                                          const OutputIndexTable& table);

// Streams records through resolve_record. Quarantined records go to
// `on_quarantine` when provided.
QuarantineReport resolve_exports(
    const std::function<std::optional<RawTransactionRecord>()>& next_raw,
    const OutputIndexTable& table, const std::function<void(const Transaction&)>& on_resolved,
    const std::function<void(const RawTransactionRecord&)>& on_quarantine = {});

// File-to-file resolution: one pass to build the table, one to resolve.
// Start index comes from `start_index` or the raw header (default 0).
QuarantineReport resolve_file(const std::filesystem::path& raw_path,
                              const std::filesystem::path& resolved_path,
                              std::optional<std::uint64_t> start_index = std::nullopt,
                              const std::optional<std::filesystem::path>& quarantine_path = std::nullopt);

} // namespace ringcorr::ingest
