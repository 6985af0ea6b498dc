// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttdse/count.hpp"
#include "ttdse/ttcore.hpp"

namespace ttdse {

enum class RankMode { uniform, independent };
enum class InitialLayerRule { both_lower, either_lower };

/// Admissible interior rank values: either an explicit sorted list or an
/// arithmetic range from..to step. An open range (no `to`) is only usable when
/// ranks are clamped to the shape's maximal TT-rank.
struct RankSet {
    std::vector<Factor> values;
    bool is_range = false;
    Factor from = 1;
    Factor step = 1;
    std::optional<Factor> to;

    static RankSet list(std::vector<Factor> values);
    static RankSet range(Factor from, std::optional<Factor> to, Factor step = 1);

    void validate() const;
    bool bounded() const { return !is_range || to.has_value(); }

    /// Number of admissible values <= cap (cap = nullopt means no cap).
    Count count_up_to(std::optional<Count> cap) const;
    /// Admissible values <= cap in ascending order.
    std::vector<Factor> values_up_to(std::optional<Count> cap) const;
    std::string describe() const;
};

struct EnumerationPolicy {
    std::size_t max_d = 6;
    RankSet ranks = RankSet::range(1, std::nullopt, 1);
    RankMode rank_mode = RankMode::independent;
    bool align_only = false;
    /// Clamp each interior rank to max_ranks() of the (permuted) shape.
    bool clamp_to_max_rank = true;
    /// From the vectorization stage on, explore uniform ranks R only.
    bool uniform_after_vectorization = true;
    InitialLayerRule initial_layer_rule = InitialLayerRule::both_lower;

    /// Convention that reproduces the published DS-reduction tables:
    /// unbounded d, every rank 1..max per bond, uniform R after vectorization.
    static EnumerationPolicy table_convention();

    void validate() const;
    std::string convention() const;
};

/// Every multiset of d factors >= 2 with product x, each as a non-increasing
/// tuple, in lexicographic order. d = 1 yields the single tuple [x].
class FactorTupleStream {
public:
    FactorTupleStream(Factor x, std::size_t d);
    std::optional<std::vector<Factor>> next();
    std::size_t generated() const { return generated_; }

private:
    bool advance(std::size_t depth);

    Factor x_;
    std::size_t d_;
    std::vector<Factor> divisors_;
    std::vector<Factor> current_;
    std::vector<Factor> remaining_;
    std::vector<std::ptrdiff_t> index_;
    std::ptrdiff_t depth_ = 0;
    bool done_ = false;
    std::size_t generated_ = 0;
};

std::vector<std::vector<Factor>> factor_tuples(Factor x, std::size_t d);

/// Combination shapes for d = 1..policy.max_d. With align_only each factor
/// multiset pair is emitted once in aligned form; otherwise every distinct
/// (m-permutation, n-permutation) pair is emitted.
class CombinationShapeStream {
public:
    CombinationShapeStream(const LayerShape& layer, const EnumerationPolicy& policy);
    std::optional<CombinationShape> next();
    /// Factor tuples pulled from the underlying streams so far.
    std::size_t generated() const { return generated_; }

private:
    bool load_next_pair();
    bool start_d(std::size_t d);

    LayerShape layer_;
    std::size_t max_d_;
    bool align_only_;
    std::size_t d_ = 0;
    std::optional<FactorTupleStream> m_stream_;
    std::optional<FactorTupleStream> n_stream_;
    std::vector<Factor> m_tuple_;
    CombinationShape perm_;
    bool have_pair_ = false;
    bool first_perm_ = false;
    bool exhausted_ = false;
    std::size_t generated_ = 0;
};

/// Rank lists for a configuration of length d. `caps` (size d-1) bounds each
/// interior rank when non-empty.
class RankListStream {
public:
    RankListStream(std::size_t d, const RankSet& ranks, RankMode mode, std::span<const Count> caps = {});
    std::optional<RankList> next();

private:
    std::size_t d_;
    RankMode mode_;
    std::vector<std::vector<Factor>> choices_;
    std::vector<std::size_t> odometer_;
    bool done_ = false;
};

/// Convenience: rank lists ignoring any clamp (the policy's rank set must be bounded).
RankListStream rank_lists(std::size_t d, const EnumerationPolicy& policy);

Count count_rank_lists(std::size_t d, const RankSet& ranks, RankMode mode, std::span<const Count> caps = {});

/// Size of the design space (shapes x rank lists) without materializing it.
/// Clamped policies need per-permutation caps, which are summed by a dynamic
/// program over partial permutations instead of enumerating them.
Count count_design_space(const LayerShape& layer, const EnumerationPolicy& policy);

/// Same count restricted to aligned representatives.
Count count_aligned_design_space(const LayerShape& layer, const EnumerationPolicy& policy);

/// Sum over every distinct permutation of `shape` of the number of rank lists
/// admitted under per-permutation caps. Exposed for testing against brute force.
Count clamped_permutation_rank_count(const CombinationShape& shape, const RankSet& ranks, RankMode mode);

}  // namespace ttdse
