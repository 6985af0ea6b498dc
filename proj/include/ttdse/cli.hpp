// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ttdse/enumerate.hpp"
#include "ttdse/prune.hpp"

namespace ttdse {

struct CatalogLayer {
    std::string text;  // shape cell as printed, e.g. "24*4*([1024, 1024])"
    LayerShape layer;
    std::uint64_t multiplicity = 1;
    std::array<std::string, kStageCount> published;  // reported stage counts
};

struct ModelCatalogEntry {
    std::string model;
    std::string dataset;
    std::vector<CatalogLayer> layers;
};

/// Tables of CNN and LLM layers with their published DS-reduction counts.
const std::vector<ModelCatalogEntry>& builtin_catalog();

struct ParsedShape {
    LayerShape layer;
    std::uint64_t multiplicity = 1;
};

/// Parses "[N, M]", "[N M]" and multiplicity forms like "24*4*([N, M])".
ParsedShape parse_shape_entry(const std::string& text);

struct ConfigLayer {
    std::string name;
    LayerShape layer;
    std::uint64_t multiplicity = 1;
};

struct Config {
    std::vector<ConfigLayer> layers;
    EnumerationPolicy policy;
    HardwareConfig hardware;
};

Config parse_config(const std::string& json_text);
Config load_config(const std::filesystem::path& path);

struct ReportRow {
    std::string name;
    LayerShape layer;
    std::uint64_t multiplicity = 1;
    std::array<Count, kStageCount> counts{};
    std::string convention;
    bool empty = false;

    std::array<std::string, kStageCount> sci() const;
};

ReportRow report_reduction(const StageReport& report, const std::string& name, std::uint64_t multiplicity = 1);

/// CSV with one row per layer and a closing multiplicity-weighted total.
std::string report_csv(const std::vector<ReportRow>& rows);
/// Fixed-width text in the column layout of the published tables.
std::string report_table(const std::vector<ReportRow>& rows);

/// Survivors plus the dense-layer sentinel, sorted by flops then params.
std::string export_pareto(const std::vector<TTSolution>& survivors, const LayerShape& layer);

struct EmittedFile {
    std::filesystem::path kernel;
    std::filesystem::path plan;
};

struct EmitResult {
    std::vector<EmittedFile> files;
    std::vector<std::string> skipped;  // diagnostics for infeasible Einsum layers
};

/// Plans and emits every Einsum of `solution` into out/kernels/<layer>/ and out/plans/<layer>/.
EmitResult emit_all(const TTSolution& solution, const HardwareConfig& hw, const std::filesystem::path& out,
                    const std::string& layer_name);

}  // namespace ttdse
