#pragma once

#include "ringcorr/correlation.hpp"
#include "ringcorr/histogram.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace ringcorr::io {

using ojson = nlohmann::ordered_json;

// Infinite edges are stored as null (leading -inf / 0-less lower end, trailing +inf).
ojson edges_to_json(const std::vector<double>& edges);
std::vector<double> edges_from_json(const nlohmann::json& j);

nlohmann::json binning_to_json(const BinningSpec& spec);
BinningSpec binning_from_json(const nlohmann::json& j);

ojson to_json(const Histogram2D& h, std::string_view kind, const SurfaceMeta& meta);
ojson to_json(const Histogram1D& h, std::string_view kind, const SurfaceMeta& meta);
ojson to_json(const CorrelationSurface& s);
ojson to_json(const DiagonalProfile& p, const SurfaceMeta& meta);

Histogram2D histogram2d_from_json(const nlohmann::json& j);
Histogram1D histogram1d_from_json(const nlohmann::json& j);
CorrelationSurface surface_from_json(const nlohmann::json& j);

CorrelationSurface load_surface(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const ojson& j);

// Shortest round-trip decimal form; "inf"/"-inf" for infinities.
std::string format_number(double v);

// Long-form plot data, one row per bin pair:
// bin_i,bin_j,edge_lo_i,edge_hi_i,edge_lo_j,edge_hi_j,value,valid,log10_value
// Invalid bins leave value and log10_value empty.
std::string surface_csv(const CorrelationSurface& s);
void emit_plotdata(const CorrelationSurface& s, const std::filesystem::path& path);

// bin,edge_lo,edge_hi,mean,std_error,valid_chunks,valid
std::string diagonal_csv(const DiagonalProfile& p);

} // namespace ringcorr::io
