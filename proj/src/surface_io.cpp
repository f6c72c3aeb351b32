#include "ringcorr/surface_io.hpp"

#include "ringcorr/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ringcorr::io {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void write_meta(ojson& j, const SurfaceMeta& meta) {
    ojson m = ojson::object();
    m["from_height"] = meta.from_height ? ojson(*meta.from_height) : ojson(nullptr);
    m["to_height"] = meta.to_height ? ojson(*meta.to_height) : ojson(nullptr);
    m["seed"] = meta.seed ? ojson(*meta.seed) : ojson(nullptr);
    m["binning"] = ojson::parse(meta.binning.dump());
    j["meta"] = std::move(m);
}

SurfaceMeta read_meta(const json& j) {
    SurfaceMeta meta;
    auto it = j.find("meta");
    if (it == j.end() || !it->is_object())
        return meta;
    const auto& m = *it;
    if (m.contains("from_height") && !m["from_height"].is_null())
        meta.from_height = m["from_height"].get<std::int64_t>();
    if (m.contains("to_height") && !m["to_height"].is_null())
        meta.to_height = m["to_height"].get<std::int64_t>();
    if (m.contains("seed") && !m["seed"].is_null())
        meta.seed = m["seed"].get<std::uint64_t>();
    if (m.contains("binning"))
        meta.binning = m["binning"];
    return meta;
}

template <typename T>
ojson matrix(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
    ojson out = ojson::array();
    for (std::size_t i = 0; i < rows; ++i) {
        ojson row = ojson::array();
        for (std::size_t j = 0; j < cols; ++j)
            row.push_back(v[i * cols + j]);
        out.push_back(std::move(row));
    }
    return out;
}

const json& require(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(std::string("document lacks '") + key + "'");
    return *it;
}

} // namespace

ojson edges_to_json(const std::vector<double>& edges) {
    ojson out = ojson::array();
    for (double e : edges)
        out.push_back(std::isinf(e) ? ojson(nullptr) : ojson(e));
    return out;
}

std::vector<double> edges_from_json(const json& j) {
    if (!j.is_array())
        throw SchemaError("edges must be an array");
    std::vector<double> edges;
    edges.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].is_null())
            edges.push_back(i == 0 ? -kInf : kInf);
        else if (j[i].is_number())
            edges.push_back(j[i].get<double>());
        else
            throw SchemaError("edges must be numbers or null");
    }
    return edges;
}

json binning_to_json(const BinningSpec& spec) {
    json j;
    j["mode"] = to_string(spec.mode);
    j["bins"] = spec.bin_count;
    j["space"] = to_string(spec.space);
    if (spec.mode == BinningMode::linear) {
        j["bin_width"] = spec.bin_width;
    } else {
        j["shape"] = spec.gamma.shape;
        j["scale"] = spec.gamma.scale;
    }
    return j;
}

BinningSpec binning_from_json(const json& j) {
    BinningSpec spec;
    spec.mode = parse_binning_mode(j.at("mode").get<std::string>());
    spec.bin_count = j.at("bins").get<std::size_t>();
    spec.space = parse_variable_space(j.value("space", std::string("age")));
    if (spec.mode == BinningMode::linear) {
        spec.bin_width = j.at("bin_width").get<double>();
    } else {
        spec.gamma.shape = j.value("shape", spec.gamma.shape);
        spec.gamma.scale = j.value("scale", spec.gamma.scale);
    }
    return spec;
}

ojson to_json(const Histogram2D& h, std::string_view kind, const SurfaceMeta& meta) {
    ojson j;
    j["kind"] = kind;
    j["edges"] = edges_to_json(h.edges());
    j["edges2"] = edges_to_json(h.edges2());
    j["counts"] = matrix(h.counts(), h.rows(), h.cols());
    j["total"] = h.total();
    write_meta(j, meta);
    return j;
}

ojson to_json(const Histogram1D& h, std::string_view kind, const SurfaceMeta& meta) {
    ojson j;
    j["kind"] = kind;
    j["edges"] = edges_to_json(h.edges());
    j["counts"] = h.counts();
    j["total"] = h.total();
    write_meta(j, meta);
    return j;
}

ojson to_json(const CorrelationSurface& s) {
    ojson j;
    j["kind"] = to_string(s.kind);
    j["edges"] = edges_to_json(s.edges);
    j["edges2"] = edges_to_json(s.edges2);
    ojson values = ojson::array();
    ojson valid = ojson::array();
    for (std::size_t r = 0; r < s.rows; ++r) {
        ojson vrow = ojson::array();
        ojson mrow = ojson::array();
        for (std::size_t c = 0; c < s.cols; ++c) {
            const bool ok = s.is_valid(r, c);
            vrow.push_back(ok ? ojson(s.value(r, c)) : ojson(nullptr));
            mrow.push_back(ok);
        }
        values.push_back(std::move(vrow));
        valid.push_back(std::move(mrow));
    }
    j["values"] = std::move(values);
    j["valid"] = std::move(valid);
    write_meta(j, s.meta);
    return j;
}

ojson to_json(const DiagonalProfile& p, const SurfaceMeta& meta) {
    ojson j;
    j["kind"] = p.statistic == DiagonalStatistic::foreground ? "diagonal"
               : p.statistic == DiagonalStatistic::ratio     ? "diagonal_ratio"
                                                             : "diagonal_log_ratio";
    j["edges"] = edges_to_json(p.edges);
    j["chunk_count"] = p.chunk_count;
    ojson mean = ojson::array();
    ojson se = ojson::array();
    for (std::size_t b = 0; b < p.mean.size(); ++b) {
        mean.push_back(p.valid[b] ? ojson(p.mean[b]) : ojson(nullptr));
        se.push_back(p.valid[b] ? ojson(p.std_error[b]) : ojson(nullptr));
    }
    j["mean"] = std::move(mean);
    j["std_error"] = std::move(se);
    j["valid_chunks"] = p.valid_chunks;
    ojson valid = ojson::array();
    for (auto v : p.valid)
        valid.push_back(v != 0);
    j["valid"] = std::move(valid);
    ojson chunks = ojson::array();
    for (const auto& row : p.chunk_values) {
        ojson r = ojson::array();
        for (double v : row)
            r.push_back(std::isfinite(v) ? ojson(v) : ojson(nullptr));
        chunks.push_back(std::move(r));
    }
    j["chunks"] = std::move(chunks);
    write_meta(j, meta);
    return j;
}

Histogram2D histogram2d_from_json(const json& j) {
    auto edges = edges_from_json(require(j, "edges"));
    auto edges2 = j.contains("edges2") ? edges_from_json(j["edges2"]) : edges;
    std::vector<std::uint64_t> counts;
    for (const auto& row : require(j, "counts"))
        for (const auto& v : row)
            counts.push_back(v.get<std::uint64_t>());
    return Histogram2D::from_counts(std::move(edges), std::move(edges2), std::move(counts));
}

Histogram1D histogram1d_from_json(const json& j) {
    return Histogram1D::from_counts(edges_from_json(require(j, "edges")),
                                    require(j, "counts").get<std::vector<std::uint64_t>>());
}

CorrelationSurface surface_from_json(const json& j) {
    CorrelationSurface s;
    try {
        s.kind = parse_surface_kind(require(j, "kind").get<std::string>());
        s.edges = edges_from_json(require(j, "edges"));
        s.edges2 = j.contains("edges2") ? edges_from_json(j["edges2"]) : s.edges;
        if (s.edges.size() < 2 || s.edges2.size() < 2)
            throw SchemaError("surface needs at least one bin per axis");
        s.rows = s.edges.size() - 1;
        s.cols = s.edges2.size() - 1;
        const auto& values = require(j, "values");
        const auto& valid = require(j, "valid");
        if (values.size() != s.rows || valid.size() != s.rows)
            throw SchemaError("surface row count does not match edges");
        for (std::size_t r = 0; r < s.rows; ++r) {
            if (values[r].size() != s.cols || valid[r].size() != s.cols)
                throw SchemaError("surface column count does not match edges2");
            for (std::size_t c = 0; c < s.cols; ++c) {
                const bool ok = valid[r][c].get<bool>();
                s.valid.push_back(ok ? 1 : 0);
                s.values.push_back(ok && values[r][c].is_number() ? values[r][c].get<double>() : 0.0);
                if (ok && !values[r][c].is_number())
                    throw SchemaError("valid bin without a numeric value");
            }
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed surface document: ") + e.what());
    }
    s.meta = read_meta(j);
    return s;
}

CorrelationSurface load_surface(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IOError("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return surface_from_json(j);
}

void write_json(const std::filesystem::path& path, const ojson& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IOError("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out)
        throw IOError("write failed for " + path.string());
}

std::string format_number(double v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string surface_csv(const CorrelationSurface& s) {
    std::ostringstream out;
    out << "bin_i,bin_j,edge_lo_i,edge_hi_i,edge_lo_j,edge_hi_j,value,valid,log10_value\n";
    for (std::size_t i = 0; i < s.rows; ++i) {
        for (std::size_t j = 0; j < s.cols; ++j) {
            const bool ok = s.is_valid(i, j);
            out << i << ',' << j << ',' << format_number(s.edges[i]) << ',' << format_number(s.edges[i + 1])
                << ',' << format_number(s.edges2[j]) << ',' << format_number(s.edges2[j + 1]) << ',';
            if (ok)
                out << format_number(s.value(i, j));
            out << ',' << (ok ? 1 : 0) << ',';
            if (ok && s.value(i, j) > 0.0)
                out << format_number(std::log10(s.value(i, j)));
            out << '\n';
        }
    }
    return out.str();
}

void emit_plotdata(const CorrelationSurface& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IOError("cannot write " + path.string());
    out << surface_csv(s);
    if (!out)
        throw IOError("write failed for " + path.string());
}

std::string diagonal_csv(const DiagonalProfile& p) {
    std::ostringstream out;
    out << "bin,edge_lo,edge_hi,mean,std_error,valid_chunks,valid\n";
    for (std::size_t b = 0; b < p.mean.size(); ++b) {
        out << b << ',' << format_number(p.edges[b]) << ',' << format_number(p.edges[b + 1]) << ',';
        if (p.valid[b])
            out << format_number(p.mean[b]) << ',' << format_number(p.std_error[b]);
        else
            out << ',';
        out << ',' << p.valid_chunks[b] << ',' << (p.valid[b] ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace ringcorr::io
