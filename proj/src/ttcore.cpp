// SPDX-License-Identifier: Apache-2.0
#include "ttdse/ttcore.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ttdse/errors.hpp"

namespace ttdse {

namespace {

Count product(const std::vector<Factor>& v, std::size_t first, std::size_t last) {
    Count p = 1;
    for (std::size_t i = first; i < last; ++i) p = checked_mul(p, v[i]);
    return p;
}

void check_compatible(const CombinationShape& shape, const RankList& ranks) {
    shape.validate();
    ranks.validate_for(shape);
}

Count distinct_orderings(const std::vector<Factor>& values) {
    std::map<Factor, unsigned> multiplicity;
    for (Factor v : values) ++multiplicity[v];
    Count count = factorial(static_cast<unsigned>(values.size()));
    for (const auto& [value, k] : multiplicity) count /= factorial(k);
    return count;
}

double ratio(Count max, Count min, Count aligned) {
    if (max == min) return 1.0;
    return to_double(max - aligned) / to_double(max - min);
}

}  // namespace

void LayerShape::validate() const {
    if (n_in < 1 || m_out < 1) throw ValidationError("layer dimensions must be >= 1");
}

std::string LayerShape::label() const {
    return std::to_string(n_in) + "x" + std::to_string(m_out);
}

Factor CombinationShape::m_product() const {
    Factor p = 1;
    for (Factor f : m) p *= f;
    return p;
}

Factor CombinationShape::n_product() const {
    Factor p = 1;
    for (Factor f : n) p *= f;
    return p;
}

void CombinationShape::validate() const {
    if (m.empty() || m.size() != n.size()) {
        throw ShapeMismatch("combination shape needs equal, non-zero lengths for m and n");
    }
    const Factor min_factor = d() > 1 ? 2 : 1;
    for (std::size_t i = 0; i < d(); ++i) {
        if (m[i] < min_factor || n[i] < min_factor) {
            throw ShapeMismatch("combination shape factor below " + std::to_string(min_factor));
        }
    }
}

void CombinationShape::validate_for(const LayerShape& layer) const {
    validate();
    if (m_product() != layer.m_out || n_product() != layer.n_in) {
        throw ShapeMismatch("combination shape does not factor layer " + layer.label());
    }
}

RankList RankList::uniform(std::size_t d, Factor rank) {
    RankList out;
    out.r.assign(d + 1, rank);
    out.r.front() = 1;
    out.r.back() = 1;
    return out;
}

void RankList::validate_for(const CombinationShape& shape) const {
    if (r.size() != shape.d() + 1) {
        throw ShapeMismatch("rank list length " + std::to_string(r.size()) + " does not match d+1 = " +
                            std::to_string(shape.d() + 1));
    }
    if (r.front() != 1 || r.back() != 1) throw ShapeMismatch("boundary ranks must be 1");
    for (Factor v : r) {
        if (v < 1) throw ShapeMismatch("ranks must be >= 1");
    }
}

Count memory_params(const CombinationShape& shape, const RankList& ranks) {
    check_compatible(shape, ranks);
    Count total = shape.m_product();
    for (std::size_t i = 0; i < shape.d(); ++i) {
        Count core = checked_mul(checked_mul(ranks.r[i], shape.m[i]), checked_mul(shape.n[i], ranks.r[i + 1]));
        total = checked_add(total, core);
    }
    return total;
}

Count flops_layer(std::size_t t, const CombinationShape& shape, const RankList& ranks) {
    check_compatible(shape, ranks);
    if (t < 1 || t > shape.d()) {
        throw std::out_of_range("layer index " + std::to_string(t) + " outside 1.." + std::to_string(shape.d()));
    }
    Count f = checked_mul(2, checked_mul(ranks.r[t], ranks.r[t - 1]));
    f = checked_mul(f, product(shape.m, t - 1, shape.d()));
    return checked_mul(f, product(shape.n, 0, t));
}

CostMetrics flops_total(const CombinationShape& shape, const RankList& ranks) {
    CostMetrics out;
    out.params = memory_params(shape, ranks);
    out.flops = shape.m_product();
    out.per_layer_flops.reserve(shape.d());
    for (std::size_t t = 1; t <= shape.d(); ++t) {
        Count f = flops_layer(t, shape, ranks);
        out.per_layer_flops.push_back(f);
        out.flops = checked_add(out.flops, f);
    }
    return out;
}

CostMetrics dense_costs(const LayerShape& layer) {
    layer.validate();
    const Count mn = checked_mul(layer.m_out, layer.n_in);
    CostMetrics out;
    out.params = checked_add(mn, layer.m_out);
    out.per_layer_flops = {checked_mul(2, mn)};
    out.flops = checked_add(out.per_layer_flops[0], layer.m_out);
    return out;
}

CombinationShape align(const CombinationShape& shape) {
    CombinationShape out = shape;
    std::sort(out.m.begin(), out.m.end(), std::greater<>());
    std::sort(out.n.begin(), out.n.end());
    return out;
}

bool is_aligned(const CombinationShape& shape) {
    return std::is_sorted(shape.m.begin(), shape.m.end(), std::greater<>()) &&
           std::is_sorted(shape.n.begin(), shape.n.end());
}

Count permutation_count(const CombinationShape& shape) {
    return checked_mul(distinct_orderings(shape.m), distinct_orderings(shape.n));
}

std::vector<Count> max_ranks(const CombinationShape& shape) {
    shape.validate();
    const std::size_t d = shape.d();
    std::vector<Count> prefix(d + 1, 1);
    for (std::size_t s = 0; s < d; ++s) {
        prefix[s + 1] = checked_mul(prefix[s], checked_mul(shape.m[s], shape.n[s]));
    }
    std::vector<Count> out;
    for (std::size_t t = 1; t < d; ++t) {
        const Count left = prefix[t];
        const Count right = prefix[d] / prefix[t];
        out.push_back(std::min(left, right));
    }
    return out;
}

RatioStats ratio_stats(const CombinationShape& shape, const RankList& ranks, std::size_t max_d) {
    check_compatible(shape, ranks);
    if (shape.d() > max_d) {
        throw BudgetExceeded("ratio_stats: d = " + std::to_string(shape.d()) + " exceeds permutation guard " +
                             std::to_string(max_d));
    }
    const CombinationShape aligned = align(shape);
    RatioStats out;
    const CostMetrics base = flops_total(aligned, ranks);
    out.flops_aligned = base.flops;
    out.memory_aligned = base.params;
    out.flops_min = out.flops_max = base.flops;
    out.memory_min = out.memory_max = base.params;

    CombinationShape perm;
    perm.m = shape.m;
    std::sort(perm.m.begin(), perm.m.end());
    do {
        perm.n = shape.n;
        std::sort(perm.n.begin(), perm.n.end());
        do {
            const CostMetrics c = flops_total(perm, ranks);
            out.flops_min = std::min(out.flops_min, c.flops);
            out.flops_max = std::max(out.flops_max, c.flops);
            out.memory_min = std::min(out.memory_min, c.params);
            out.memory_max = std::max(out.memory_max, c.params);
            ++out.permutations;
        } while (std::next_permutation(perm.n.begin(), perm.n.end()));
    } while (std::next_permutation(perm.m.begin(), perm.m.end()));

    out.ratio_flops = ratio(out.flops_max, out.flops_min, out.flops_aligned);
    out.ratio_memory = ratio(out.memory_max, out.memory_min, out.memory_aligned);
    return out;
}

std::string join_factors(const std::vector<Factor>& values, char sep) {
    std::ostringstream os;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << sep;
        os << values[i];
    }
    return os.str();
}

}  // namespace ttdse
