// SPDX-License-Identifier: Apache-2.0
#include "ttdse/enumerate.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ttdse/errors.hpp"

namespace ttdse {

RankSet RankSet::list(std::vector<Factor> values) {
    RankSet out;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    out.values = std::move(values);
    return out;
}

RankSet RankSet::range(Factor from, std::optional<Factor> to, Factor step) {
    RankSet out;
    out.is_range = true;
    out.from = from;
    out.to = to;
    out.step = step;
    return out;
}

void RankSet::validate() const {
    if (is_range) {
        if (from < 1) throw ValidationError("rank range must start at >= 1");
        if (step < 1) throw ValidationError("rank range step must be >= 1");
        if (to && *to < from) throw ValidationError("rank range is empty");
        return;
    }
    if (values.empty()) throw ValidationError("rank value list must be non-empty");
    for (Factor v : values) {
        if (v < 1) throw ValidationError("rank values must be >= 1");
    }
}

Count RankSet::count_up_to(std::optional<Count> cap) const {
    if (!is_range) {
        if (!cap) return values.size();
        return static_cast<Count>(std::upper_bound(values.begin(), values.end(), *cap,
                                                   [](Count c, Factor v) { return c < v; }) -
                                  values.begin());
    }
    if (!cap && !to) throw ValidationError("open rank range needs a cap");
    Count hi = cap ? *cap : Count(*to);
    if (to) hi = std::min<Count>(hi, *to);
    if (hi < from) return 0;
    return (hi - from) / step + 1;
}

std::vector<Factor> RankSet::values_up_to(std::optional<Count> cap) const {
    std::vector<Factor> out;
    if (!is_range) {
        for (Factor v : values) {
            if (!cap || v <= *cap) out.push_back(v);
        }
        return out;
    }
    const Count n = count_up_to(cap);
    out.reserve(static_cast<std::size_t>(n));
    for (Count i = 0; i < n; ++i) out.push_back(static_cast<Factor>(from + i * step));
    return out;
}

std::string RankSet::describe() const {
    std::ostringstream os;
    if (is_range) {
        os << "range(" << from << ".." << (to ? std::to_string(*to) : std::string("max")) << " step " << step
           << ")";
    } else {
        os << "{" << join_factors(values, ',') << "}";
    }
    return os.str();
}

EnumerationPolicy EnumerationPolicy::table_convention() {
    EnumerationPolicy p;
    p.max_d = 64;
    p.ranks = RankSet::range(1, std::nullopt, 1);
    p.rank_mode = RankMode::independent;
    p.clamp_to_max_rank = true;
    p.uniform_after_vectorization = true;
    return p;
}

void EnumerationPolicy::validate() const {
    if (max_d < 1) throw ValidationError("max_d must be >= 1");
    ranks.validate();
    if (!clamp_to_max_rank && !ranks.bounded()) {
        throw ValidationError("an open rank range requires clamp_to_max_rank");
    }
}

std::string EnumerationPolicy::convention() const {
    std::ostringstream os;
    os << "max_d=" << max_d << " ranks=" << ranks.describe()
       << " mode=" << (rank_mode == RankMode::uniform ? "uniform" : "independent")
       << " clamp=" << (clamp_to_max_rank ? "yes" : "no") << " align_only=" << (align_only ? "yes" : "no")
       << " uniform_after_vectorization=" << (uniform_after_vectorization ? "yes" : "no")
       << " initial_rule=" << (initial_layer_rule == InitialLayerRule::both_lower ? "and" : "or");
    return os.str();
}

// ---------------------------------------------------------------------------

FactorTupleStream::FactorTupleStream(Factor x, std::size_t d) : x_(x), d_(d) {
    if (d == 0) throw ValidationError("factor tuple length must be >= 1");
    if (x < 1) throw ValidationError("factored value must be >= 1");
    if (d_ == 1) return;
    for (Factor f = 1; f * f <= x; ++f) {
        if (x % f == 0) {
            divisors_.push_back(f);
            if (f != x / f) divisors_.push_back(x / f);
        }
    }
    std::sort(divisors_.begin(), divisors_.end());
    current_.assign(d_, 0);
    remaining_.assign(d_, 0);
    remaining_[0] = x_;
    index_.assign(d_, -1);
}

bool FactorTupleStream::advance(std::size_t depth) {
    const Factor bound = depth == 0 ? remaining_[0] : current_[depth - 1];
    for (auto j = static_cast<std::size_t>(index_[depth] + 1); j < divisors_.size(); ++j) {
        const Factor f = divisors_[j];
        if (f > bound) break;
        if (f < 2 || remaining_[depth] % f != 0) continue;
        index_[depth] = static_cast<std::ptrdiff_t>(j);
        return true;
    }
    index_[depth] = static_cast<std::ptrdiff_t>(divisors_.size());
    return false;
}

std::optional<std::vector<Factor>> FactorTupleStream::next() {
    if (done_) return std::nullopt;
    if (d_ == 1) {
        done_ = true;
        ++generated_;
        return std::vector<Factor>{x_};
    }
    const auto last = static_cast<std::ptrdiff_t>(d_) - 2;
    while (depth_ >= 0) {
        const auto depth = static_cast<std::size_t>(depth_);
        if (!advance(depth)) {
            --depth_;
            continue;
        }
        const Factor f = divisors_[static_cast<std::size_t>(index_[depth])];
        current_[depth] = f;
        const Factor rest = remaining_[depth] / f;
        remaining_[depth + 1] = rest;
        const std::size_t slots = d_ - 1 - depth;
        // rest has to split into `slots` factors, each in [2, f]
        if ((rest >> std::min<std::size_t>(slots, 63)) == 0) continue;
        Count ceiling = 1;
        bool fits = false;
        for (std::size_t s = 0; s < slots; ++s) {
            ceiling *= f;
            if (ceiling >= rest) {
                fits = true;
                break;
            }
        }
        if (!fits) continue;
        if (depth_ == last) {
            if (rest >= 2 && rest <= f) {
                current_[d_ - 1] = rest;
                ++generated_;
                return current_;
            }
            continue;
        }
        ++depth_;
        index_[static_cast<std::size_t>(depth_)] = -1;
    }
    done_ = true;
    return std::nullopt;
}

std::vector<std::vector<Factor>> factor_tuples(Factor x, std::size_t d) {
    std::vector<std::vector<Factor>> out;
    FactorTupleStream s(x, d);
    while (auto t = s.next()) out.push_back(std::move(*t));
    return out;
}

// ---------------------------------------------------------------------------

CombinationShapeStream::CombinationShapeStream(const LayerShape& layer, const EnumerationPolicy& policy)
    : layer_(layer), max_d_(policy.max_d), align_only_(policy.align_only) {
    layer.validate();
    policy.validate();
}

bool CombinationShapeStream::start_d(std::size_t d) {
    if (d > max_d_) return false;
    if (d > 1) {
        const Factor smallest = std::min(layer_.m_out, layer_.n_in);
        if (d >= 64 || (Factor(1) << d) > smallest) return false;
    }
    d_ = d;
    m_stream_.emplace(layer_.m_out, d);
    n_stream_.reset();
    return true;
}

bool CombinationShapeStream::load_next_pair() {
    if (d_ == 0 && !start_d(1)) return false;
    while (true) {
        if (n_stream_) {
            if (auto n = n_stream_->next()) {
                ++generated_;
                if (align_only_) {
                    perm_.m = m_tuple_;
                    perm_.n.assign(n->rbegin(), n->rend());
                } else {
                    perm_.m.assign(m_tuple_.rbegin(), m_tuple_.rend());
                    perm_.n.assign(n->rbegin(), n->rend());
                }
                return true;
            }
            n_stream_.reset();
        }
        if (auto m = m_stream_->next()) {
            ++generated_;
            m_tuple_ = std::move(*m);
            n_stream_.emplace(layer_.n_in, d_);
            continue;
        }
        if (!start_d(d_ + 1)) return false;
    }
}

std::optional<CombinationShape> CombinationShapeStream::next() {
    while (!exhausted_) {
        if (have_pair_) {
            if (first_perm_) {
                first_perm_ = false;
                return perm_;
            }
            if (!align_only_) {
                if (std::next_permutation(perm_.n.begin(), perm_.n.end())) return perm_;
                if (std::next_permutation(perm_.m.begin(), perm_.m.end())) return perm_;
            }
            have_pair_ = false;
        }
        if (load_next_pair()) {
            have_pair_ = true;
            first_perm_ = true;
        } else {
            exhausted_ = true;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

RankListStream::RankListStream(std::size_t d, const RankSet& ranks, RankMode mode, std::span<const Count> caps)
    : d_(d), mode_(mode) {
    if (d == 0) throw ValidationError("rank list length must be >= 1");
    if (!caps.empty() && caps.size() != d - 1) throw ShapeMismatch("rank caps need one entry per bond");
    ranks.validate();
    if (d == 1) return;
    auto cap_at = [&](std::size_t i) -> std::optional<Count> {
        if (caps.empty()) return std::nullopt;
        return caps[i];
    };
    if (mode == RankMode::uniform) {
        std::optional<Count> cap;
        if (!caps.empty()) cap = *std::min_element(caps.begin(), caps.end());
        choices_.push_back(ranks.values_up_to(cap));
    } else {
        for (std::size_t i = 0; i + 1 < d; ++i) choices_.push_back(ranks.values_up_to(cap_at(i)));
    }
    for (const auto& c : choices_) {
        if (c.empty()) done_ = true;
    }
    odometer_.assign(choices_.size(), 0);
}

std::optional<RankList> RankListStream::next() {
    if (done_) return std::nullopt;
    RankList out;
    if (d_ == 1) {
        done_ = true;
        out.r = {1, 1};
        return out;
    }
    if (mode_ == RankMode::uniform) {
        out = RankList::uniform(d_, choices_[0][odometer_[0]]);
    } else {
        out.r.assign(d_ + 1, 1);
        for (std::size_t i = 0; i < choices_.size(); ++i) out.r[i + 1] = choices_[i][odometer_[i]];
    }
    std::size_t i = odometer_.size();
    while (i > 0) {
        --i;
        if (++odometer_[i] < choices_[i].size()) return out;
        odometer_[i] = 0;
    }
    done_ = true;
    return out;
}

RankListStream rank_lists(std::size_t d, const EnumerationPolicy& policy) {
    return RankListStream(d, policy.ranks, policy.rank_mode);
}

Count count_rank_lists(std::size_t d, const RankSet& ranks, RankMode mode, std::span<const Count> caps) {
    if (d == 0) throw ValidationError("rank list length must be >= 1");
    if (d == 1) return 1;
    if (!caps.empty() && caps.size() != d - 1) throw ShapeMismatch("rank caps need one entry per bond");
    if (mode == RankMode::uniform) {
        std::optional<Count> cap;
        if (!caps.empty()) cap = *std::min_element(caps.begin(), caps.end());
        return ranks.count_up_to(cap);
    }
    Count total = 1;
    for (std::size_t i = 0; i + 1 < d; ++i) {
        total = checked_mul(total, ranks.count_up_to(caps.empty() ? std::nullopt : std::optional<Count>(caps[i])));
    }
    return total;
}

// ---------------------------------------------------------------------------

namespace {

struct Multiset {
    std::vector<Factor> value;
    std::vector<unsigned> mult;
};

Multiset to_multiset(std::vector<Factor> v) {
    std::sort(v.begin(), v.end());
    Multiset out;
    for (Factor f : v) {
        if (out.value.empty() || out.value.back() != f) {
            out.value.push_back(f);
            out.mult.push_back(0);
        }
        ++out.mult.back();
    }
    return out;
}

// Walks partial permutations keyed by how many copies of each distinct m and
// n value are already placed; the prefix product depends only on that.
class PermutationDp {
public:
    PermutationDp(const CombinationShape& shape, const RankSet& ranks)
        : m_(to_multiset(shape.m)), n_(to_multiset(shape.n)), ranks_(ranks), d_(shape.d()) {
        total_ = 1;
        for (std::size_t i = 0; i < d_; ++i) total_ = checked_mul(total_, checked_mul(shape.m[i], shape.n[i]));
        used_m_.assign(m_.value.size(), 0);
        used_n_.assign(n_.value.size(), 0);
    }

    Count independent() { return independent_from(0, 1); }

    Count uniform() {
        Count sum = 0;
        for (const auto& [cap, ways] : uniform_from(0, 1)) {
            sum = checked_add(sum, checked_mul(ways, ranks_.count_up_to(cap)));
        }
        return sum;
    }

private:
    std::uint64_t key() const {
        std::uint64_t k = 0;
        for (std::size_t i = 0; i < used_m_.size(); ++i) k = k * (m_.mult[i] + 1) + used_m_[i];
        for (std::size_t i = 0; i < used_n_.size(); ++i) k = k * (n_.mult[i] + 1) + used_n_[i];
        return k;
    }

    Count cap(Count prefix) const { return std::min(prefix, total_ / prefix); }

    template <typename F>
    void for_each_step(Count prefix, F&& f) {
        for (std::size_t i = 0; i < m_.value.size(); ++i) {
            if (used_m_[i] == m_.mult[i]) continue;
            ++used_m_[i];
            for (std::size_t j = 0; j < n_.value.size(); ++j) {
                if (used_n_[j] == n_.mult[j]) continue;
                ++used_n_[j];
                f(prefix * m_.value[i] * n_.value[j]);
                --used_n_[j];
            }
            --used_m_[i];
        }
    }

    Count independent_from(std::size_t depth, Count prefix) {
        if (depth == d_) return 1;
        const std::uint64_t k = key();
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        Count sum = 0;
        for_each_step(prefix, [&](Count p) {
            Count tail = independent_from(depth + 1, p);
            if (depth + 1 < d_) tail = checked_mul(tail, ranks_.count_up_to(cap(p)));
            sum = checked_add(sum, tail);
        });
        memo_.emplace(k, sum);
        return sum;
    }

    using CapWays = std::map<Count, Count>;

    CapWays uniform_from(std::size_t depth, Count prefix) {
        if (depth == d_) return {{std::numeric_limits<Count>::max(), 1}};
        const std::uint64_t k = key();
        if (auto it = umemo_.find(k); it != umemo_.end()) return it->second;
        CapWays out;
        for_each_step(prefix, [&](Count p) {
            const Count here = depth + 1 < d_ ? cap(p) : std::numeric_limits<Count>::max();
            for (const auto& [c, ways] : uniform_from(depth + 1, p)) {
                Count& slot = out[std::min(c, here)];
                slot = checked_add(slot, ways);
            }
        });
        umemo_.emplace(k, out);
        return out;
    }

    Multiset m_, n_;
    const RankSet& ranks_;
    std::size_t d_;
    Count total_;
    std::vector<unsigned> used_m_, used_n_;
    std::unordered_map<std::uint64_t, Count> memo_;
    std::unordered_map<std::uint64_t, CapWays> umemo_;
};

template <typename F>
void for_each_multiset_pair(const LayerShape& layer, std::size_t max_d, F&& f) {
    for (std::size_t d = 1; d <= max_d; ++d) {
        if (d > 1 && (d >= 64 || (Factor(1) << d) > std::min(layer.m_out, layer.n_in))) break;
        const auto ns = factor_tuples(layer.n_in, d);
        FactorTupleStream ms(layer.m_out, d);
        while (auto m = ms.next()) {
            for (const auto& n : ns) {
                CombinationShape shape;
                shape.m = *m;
                shape.n.assign(n.rbegin(), n.rend());
                f(shape);
            }
        }
    }
}

}  // namespace

Count clamped_permutation_rank_count(const CombinationShape& shape, const RankSet& ranks, RankMode mode) {
    shape.validate();
    if (shape.d() == 1) return 1;
    PermutationDp dp(shape, ranks);
    return mode == RankMode::uniform ? dp.uniform() : dp.independent();
}

Count count_design_space(const LayerShape& layer, const EnumerationPolicy& policy) {
    policy.validate();
    layer.validate();
    if (policy.align_only) return count_aligned_design_space(layer, policy);
    Count total = 0;
    for_each_multiset_pair(layer, policy.max_d, [&](const CombinationShape& shape) {
        Count c;
        if (policy.clamp_to_max_rank) {
            c = clamped_permutation_rank_count(shape, policy.ranks, policy.rank_mode);
        } else {
            c = checked_mul(permutation_count(shape), count_rank_lists(shape.d(), policy.ranks, policy.rank_mode));
        }
        total = checked_add(total, c);
    });
    return total;
}

Count count_aligned_design_space(const LayerShape& layer, const EnumerationPolicy& policy) {
    policy.validate();
    layer.validate();
    Count total = 0;
    for_each_multiset_pair(layer, policy.max_d, [&](const CombinationShape& shape) {
        std::vector<Count> caps;
        if (policy.clamp_to_max_rank) caps = max_ranks(shape);
        total = checked_add(total, count_rank_lists(shape.d(), policy.ranks, policy.rank_mode, caps));
    });
    return total;
}

}  // namespace ttdse
