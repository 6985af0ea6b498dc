// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ttdse/count.hpp"
#include "ttdse/enumerate.hpp"
#include "ttdse/ttcore.hpp"

namespace ttdse {

struct HardwareConfig {
    unsigned vector_bits = 256;
    unsigned data_bits = 32;
    unsigned threads = 4;
    unsigned registers_available = 32;
    std::uint64_t l2_size_bytes = 1u << 20;
    unsigned l2_assoc = 8;
    unsigned element_bytes = 4;
    std::vector<double> thread_thresholds{2e6, 4e6, 8e6};
    double scalability_flops_floor = 8e6;
    std::size_t scalability_d_limit = 4;

    unsigned vl() const { return vector_bits / data_bits; }
    std::uint64_t l2_way_bytes() const { return l2_size_bytes / l2_assoc; }
    void validate() const;
};

struct TTSolution {
    CombinationShape shape;
    RankList ranks;
    CostMetrics costs;
    std::vector<unsigned> threads_per_layer;  // index t-1 for core t
};

TTSolution make_solution(const CombinationShape& shape, const RankList& ranks);

bool passes_vectorization(const RankList& ranks, const HardwareConfig& hw);
bool passes_initial_layer(const CostMetrics& costs, const CostMetrics& dense, InitialLayerRule rule);
bool passes_scalability(const TTSolution& solution, const HardwareConfig& hw);

/// 1 + number of thresholds <= flops, capped at hw.threads.
unsigned assign_threads(Count flops, const HardwareConfig& hw);

/// One aligned representative per factor-multiset pair, in first-seen order.
std::vector<CombinationShape> stage_alignment(const std::vector<CombinationShape>& shapes);
std::vector<TTSolution> stage_vectorization(std::vector<TTSolution> solutions, const HardwareConfig& hw);
std::vector<TTSolution> stage_initial_layer(std::vector<TTSolution> solutions, const LayerShape& layer,
                                            InitialLayerRule rule = InitialLayerRule::both_lower);
/// Drops long, light solutions and fills threads_per_layer on the rest.
std::vector<TTSolution> stage_scalability(std::vector<TTSolution> solutions, const HardwareConfig& hw);

enum class Stage { all_initial, alignment, vectorization, initial_layer, scalability };
inline constexpr std::size_t kStageCount = 5;
const char* stage_name(Stage s);

struct StageReport {
    LayerShape layer;
    std::array<Count, kStageCount> counts{};
    std::string convention;
    bool empty() const { return counts.back() == 0; }
    Count at(Stage s) const { return counts[static_cast<std::size_t>(s)]; }
};

struct PipelineOptions {
    std::optional<double> budget_seconds;
    /// Refuse to materialize more vectorized candidates than this.
    Count max_materialized = 50'000'000;
    bool keep_survivors = true;
};

struct PipelineResult {
    std::vector<TTSolution> survivors;  // sorted by (flops, params, shape, ranks)
    StageReport report;
};

/// Number of vectorized rank lists for one aligned shape under `policy`.
Count count_vectorized_rank_lists(const CombinationShape& aligned, const EnumerationPolicy& policy,
                                  const HardwareConfig& hw);

PipelineResult run_pipeline(const LayerShape& layer, const EnumerationPolicy& policy, const HardwareConfig& hw,
                            const PipelineOptions& options = {});

bool solution_less(const TTSolution& a, const TTSolution& b);

}  // namespace ttdse
