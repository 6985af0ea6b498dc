// SPDX-License-Identifier: Apache-2.0
//
// Shape algebra and exact cost models for Tensor-Train factorized
// fully-connected layers.
//
// Conventions used throughout:
//   * A layer maps N inputs to M outputs, W is M x N.
//   * A combination shape factors M = m_1 * ... * m_d and N = n_1 * ... * n_d.
//   * TT core t (1-based) has shape [r_{t-1}, n_t, m_t, r_t] with r_0 = r_d = 1.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ttdse/count.hpp"

namespace ttdse {

using Factor = std::uint64_t;

struct LayerShape {
    Factor n_in = 1;   // N
    Factor m_out = 1;  // M

    void validate() const;
    std::string label() const;  // "NxM"
    friend bool operator==(const LayerShape&, const LayerShape&) = default;
    friend auto operator<=>(const LayerShape&, const LayerShape&) = default;
};

struct CombinationShape {
    std::vector<Factor> m;
    std::vector<Factor> n;

    std::size_t d() const { return m.size(); }
    Factor m_product() const;
    Factor n_product() const;

    /// Checks d >= 1, equal lengths, and factors >= 2 whenever d > 1.
    void validate() const;
    /// validate() plus products matching the layer.
    void validate_for(const LayerShape& layer) const;

    friend bool operator==(const CombinationShape&, const CombinationShape&) = default;
    friend auto operator<=>(const CombinationShape&, const CombinationShape&) = default;
};

struct RankList {
    std::vector<Factor> r;  // r_0 .. r_d

    static RankList uniform(std::size_t d, Factor rank);

    /// Length d+1, boundary ranks 1, interior ranks >= 1.
    void validate_for(const CombinationShape& shape) const;

    friend bool operator==(const RankList&, const RankList&) = default;
    friend auto operator<=>(const RankList&, const RankList&) = default;
};

struct CostMetrics {
    Count params = 0;
    Count flops = 0;
    std::vector<Count> per_layer_flops;  // index t-1 for core t
};

/// Bias plus the volume of every core.
Count memory_params(const CombinationShape& shape, const RankList& ranks);

/// FLOPs of the Einsum contracting core t (1-based):
/// 2 * r_t * r_{t-1} * (m_t ... m_d) * (n_1 ... n_t).
Count flops_layer(std::size_t t, const CombinationShape& shape, const RankList& ranks);

CostMetrics flops_total(const CombinationShape& shape, const RankList& ranks);

/// Unfactorized layer: params M*N + M, flops 2*M*N + M.
CostMetrics dense_costs(const LayerShape& layer);

/// Sorts m descending and n ascending.
CombinationShape align(const CombinationShape& shape);
bool is_aligned(const CombinationShape& shape);

/// Number of distinct (m-permutation, n-permutation) pairs:
/// (d!)^2 divided by the factorials of the value multiplicities of each list.
Count permutation_count(const CombinationShape& shape);

/// Largest meaningful interior rank at each bond t = 1..d-1: the smaller of
/// the two matricization sizes prod_{s<=t} m_s n_s and prod_{s>t} m_s n_s.
std::vector<Count> max_ranks(const CombinationShape& shape);

struct RatioStats {
    double ratio_flops = 1.0;
    double ratio_memory = 1.0;
    Count flops_aligned = 0, flops_min = 0, flops_max = 0;
    Count memory_aligned = 0, memory_min = 0, memory_max = 0;
    Count permutations = 0;
};

/// Compares the aligned shape against every distinct permutation of its m and
/// n lists. When max == min the ratio is 1 (nothing to improve on).
/// Throws BudgetExceeded when d > max_d.
RatioStats ratio_stats(const CombinationShape& shape, const RankList& ranks, std::size_t max_d = 6);

std::string join_factors(const std::vector<Factor>& values, char sep = 'x');

}  // namespace ttdse
