#include "ringcorr/ingest.hpp"

#include "ringcorr/errors.hpp"

#include "json.hpp"

#include <algorithm>

namespace ringcorr::ingest {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

std::string_view format_name(RecordFormat f) {
    return f == RecordFormat::raw ? "raw" : "resolved";
}

std::int64_t non_negative_int(const json& j, const char* key, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError(line_no, std::string("missing field '") + key + "'");
    if (!it->is_number_integer())
        throw ParseError(line_no, std::string("field '") + key + "' must be an integer");
    const auto v = it->get<std::int64_t>();
    if (v < 0)
        throw ParseError(line_no, std::string("field '") + key + "' must be non-negative");
    return v;
}

std::string tx_id_of(const json& j, std::size_t line_no) {
    auto it = j.find("tx");
    if (it == j.end() || !it->is_string() || it->get_ref<const std::string&>().empty())
        throw ParseError(line_no, "field 'tx' must be a non-empty string");
    return it->get<std::string>();
}

json parse_object(const std::string& line, std::size_t line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ParseError(line_no, "record must be a JSON object");
    return j;
}

const json& rings_of(const json& j, std::size_t line_no) {
    auto it = j.find("rings");
    if (it == j.end() || !it->is_array())
        throw ParseError(line_no, "field 'rings' must be an array of rings");
    for (const auto& ring : *it)
        if (!ring.is_array() || ring.empty())
            throw ParseError(line_no, "field 'rings' must contain non-empty arrays");
    return *it;
}

FileHeader parse_header(const std::string& line, const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error&) {
        throw SchemaError(path.string() + ": first line is not a JSON header");
    }
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string())
        throw SchemaError(path.string() + ": header lacks a 'format' field");
    FileHeader h;
    const auto fmt = j["format"].get<std::string>();
    if (fmt == "raw")
        h.format = RecordFormat::raw;
    else if (fmt == "resolved")
        h.format = RecordFormat::resolved;
    else
        throw SchemaError(path.string() + ": unknown format '" + fmt + "'");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != 1)
        throw SchemaError(path.string() + ": unsupported version (expected 1)");
    h.version = 1;
    if (auto it = j.find("start_index"); it != j.end()) {
        if (!it->is_number_unsigned())
            throw SchemaError(path.string() + ": 'start_index' must be a non-negative integer");
        h.start_index = it->get<std::uint64_t>();
    }
    return h;
}

} // namespace

std::string header_line(const FileHeader& h) {
    ojson j;
    j["format"] = format_name(h.format);
    j["version"] = h.version;
    if (h.start_index)
        j["start_index"] = *h.start_index;
    return j.dump();
}

std::string to_jsonl(const RawTransactionRecord& r) {
    ojson j;
    j["tx"] = r.tx_id;
    j["h"] = r.height;
    j["ts"] = r.timestamp;
    j["rings"] = r.rings;
    j["outs"] = r.outputs_created;
    return j.dump();
}

std::string to_jsonl(const Transaction& tx) {
    ojson j;
    j["tx"] = tx.tx_id;
    j["h"] = tx.block.height;
    j["ts"] = tx.block.timestamp;
    ojson rings = ojson::array();
    for (const auto& ring : tx.inputs) {
        ojson members = ojson::array();
        for (const auto& m : ring.members) {
            ojson o;
            o["h"] = m.origin.height;
            o["ts"] = m.origin.timestamp;
            members.push_back(std::move(o));
        }
        rings.push_back(std::move(members));
    }
    j["rings"] = std::move(rings);
    return j.dump();
}

RawTransactionRecord parse_raw_line(const std::string& line, std::size_t line_no) {
    const json j = parse_object(line, line_no);
    RawTransactionRecord r;
    r.tx_id = tx_id_of(j, line_no);
    r.height = non_negative_int(j, "h", line_no);
    r.timestamp = non_negative_int(j, "ts", line_no);
    r.outputs_created = static_cast<std::uint64_t>(non_negative_int(j, "outs", line_no));
    for (const auto& ring : rings_of(j, line_no)) {
        std::vector<std::uint64_t> idx;
        idx.reserve(ring.size());
        for (const auto& v : ring) {
            if (!v.is_number_unsigned())
                throw ParseError(line_no, "ring entries must be non-negative integer output indices");
            const auto x = v.get<std::uint64_t>();
            if (!idx.empty() && x <= idx.back())
                throw ParseError(line_no, "ring indices must be strictly increasing");
            idx.push_back(x);
        }
        r.rings.push_back(std::move(idx));
    }
    return r;
}

Transaction parse_resolved_line(const std::string& line, std::size_t line_no) {
    const json j = parse_object(line, line_no);
    Transaction tx;
    tx.tx_id = tx_id_of(j, line_no);
    tx.block.height = non_negative_int(j, "h", line_no);
    tx.block.timestamp = non_negative_int(j, "ts", line_no);
    for (const auto& ring : rings_of(j, line_no)) {
        RingInput in;
        in.members.reserve(ring.size());
        for (const auto& m : ring) {
            if (!m.is_object())
                throw ParseError(line_no, "resolved ring members must be {\"h\",\"ts\"} objects");
            in.members.push_back({{non_negative_int(m, "h", line_no), non_negative_int(m, "ts", line_no)},
                                  std::nullopt});
        }
        tx.inputs.push_back(std::move(in));
    }
    return tx;
}

JsonlReader::JsonlReader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_)
        throw IOError("cannot open " + path.string());
    std::string line;
    if (!next_line(line))
        throw SchemaError(path.string() + ": missing header line");
    header_ = parse_header(line, path);
}

bool JsonlReader::next_line(std::string& line) {
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos)
            return true;
    }
    return false;
}

std::optional<Record> JsonlReader::next() {
    std::string line;
    if (!next_line(line))
        return std::nullopt;
    if (header_.format == RecordFormat::raw)
        return Record{parse_raw_line(line, line_no_)};
    return Record{parse_resolved_line(line, line_no_)};
}

std::optional<RawTransactionRecord> JsonlReader::next_raw() {
    if (header_.format != RecordFormat::raw)
        throw SchemaError(path_.string() + ": expected a raw export, found resolved");
    auto r = next();
    if (!r)
        return std::nullopt;
    return std::get<RawTransactionRecord>(std::move(*r));
}

std::optional<Transaction> JsonlReader::next_resolved() {
    if (header_.format != RecordFormat::resolved)
        throw SchemaError(path_.string() + ": expected a resolved export, found raw");
    auto r = next();
    if (!r)
        return std::nullopt;
    return std::get<Transaction>(std::move(*r));
}

std::vector<Transaction> read_resolved_file(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<Transaction> out;
    while (auto tx = reader.next_resolved())
        out.push_back(std::move(*tx));
    return out;
}

std::vector<RawTransactionRecord> read_raw_file(const std::filesystem::path& path) {
    JsonlReader reader(path);
    std::vector<RawTransactionRecord> out;
    while (auto r = reader.next_raw())
        out.push_back(std::move(*r));
    return out;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, const FileHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_)
        throw IOError("cannot write " + path.string());
    out_ << header_line(header) << '\n';
}

void JsonlWriter::write(const RawTransactionRecord& r) { out_ << to_jsonl(r) << '\n'; }
void JsonlWriter::write(const Transaction& tx) { out_ << to_jsonl(tx) << '\n'; }

void JsonlWriter::flush() {
    out_.flush();
    if (!out_)
        throw IOError("write failed for " + path_.string());
}

void write_resolved_file(const std::filesystem::path& path, std::span<const Transaction> txs) {
    JsonlWriter w(path, {RecordFormat::resolved, 1, std::nullopt});
    for (const auto& tx : txs)
        w.write(tx);
    w.flush();
}

void write_raw_file(const std::filesystem::path& path, std::span<const RawTransactionRecord> records,
                    std::optional<std::uint64_t> start_index) {
    JsonlWriter w(path, {RecordFormat::raw, 1, start_index});
    for (const auto& r : records)
        w.write(r);
    w.flush();
}

void OutputIndexTable::append(const BlockRef& block, std::uint64_t count) {
    if (count == 0)
        return;
    if (runs_.empty() || runs_.back().block != block)
        runs_.push_back({end_, block});
    end_ += count;
}

std::optional<BlockRef> OutputIndexTable::lookup(std::uint64_t index) const {
    if (!covers(index))
        return std::nullopt;
    auto it = std::upper_bound(runs_.begin(), runs_.end(), index,
                               [](std::uint64_t i, const Run& r) { return i < r.first; });
    return std::prev(it)->block;
}

void OutputIndexBuilder::add(const RawTransactionRecord& r) {
    if (last_height_ && r.height < *last_height_)
        throw OrderError("height " + std::to_string(r.height) + " of tx " + r.tx_id +
                         " follows height " + std::to_string(*last_height_));
    last_height_ = r.height;
    table_.append({r.height, r.timestamp}, r.outputs_created);
}

OutputIndexTable build_output_index(std::span<const RawTransactionRecord> records,
                                    std::uint64_t start) {
    OutputIndexBuilder b(start);
    for (const auto& r : records)
        b.add(r);
    return std::move(b).finish();
}

OutputIndexTable build_output_index(JsonlReader& reader, std::uint64_t start) {
    OutputIndexBuilder b(start);
    while (auto r = reader.next_raw())
        b.add(*r);
    return std::move(b).finish();
}

std::string QuarantineReport::to_json() const {
    ojson j;
    j["resolved"] = resolved;
    j["quarantined"] = quarantined;
    return j.dump();
}

std::optional<Transaction> resolve_record(const RawTransactionRecord& r,
                                          const OutputIndexTable& table) {
    Transaction tx;
    tx.tx_id = r.tx_id;
    tx.block = {r.height, r.timestamp};
    tx.inputs.reserve(r.rings.size());
    for (const auto& ring : r.rings) {
        RingInput in;
        in.members.reserve(ring.size());
        for (auto idx : ring) {
            auto origin = table.lookup(idx);
            if (!origin)
                return std::nullopt;
            in.members.push_back({*origin, std::nullopt});
        }
        tx.inputs.push_back(std::move(in));
    }
    return tx;
}

QuarantineReport resolve_exports(
    const std::function<std::optional<RawTransactionRecord>()>& next_raw,
    const OutputIndexTable& table, const std::function<void(const Transaction&)>& on_resolved,
    const std::function<void(const RawTransactionRecord&)>& on_quarantine) {
    QuarantineReport report;
    while (auto r = next_raw()) {
        if (auto tx = resolve_record(*r, table)) {
            ++report.resolved;
            on_resolved(*tx);
        } else {
            ++report.quarantined;
            if (on_quarantine)
                on_quarantine(*r);
        }
    }
    return report;
}

QuarantineReport resolve_file(const std::filesystem::path& raw_path,
                              const std::filesystem::path& resolved_path,
                              std::optional<std::uint64_t> start_index,
                              const std::optional<std::filesystem::path>& quarantine_path) {
    OutputIndexTable table;
    {
        JsonlReader pass1(raw_path);
        const auto start = start_index.value_or(pass1.header().start_index.value_or(0));
        table = build_output_index(pass1, start);
    }

    JsonlReader pass2(raw_path);
    JsonlWriter out(resolved_path, {RecordFormat::resolved, 1, std::nullopt});
    std::optional<JsonlWriter> quarantine;
    if (quarantine_path)
        quarantine.emplace(*quarantine_path, pass2.header());

    auto report = resolve_exports(
        [&] { return pass2.next_raw(); }, table, [&](const Transaction& tx) { out.write(tx); },
        [&](const RawTransactionRecord& r) {
            if (quarantine)
                quarantine->write(r);
        });
    out.flush();
    if (quarantine)
        quarantine->flush();
    return report;
}

} // namespace ringcorr::ingest
