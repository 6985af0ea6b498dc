// SPDX-License-Identifier: Apache-2.0
#include "ttdse/prune.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <set>

#include "ttdse/errors.hpp"

namespace ttdse {

void HardwareConfig::validate() const {
    if (vector_bits == 0 || data_bits == 0) throw ValidationError("vector_bits and data_bits must be positive");
    if (vector_bits % data_bits != 0) throw ValidationError("vector_bits must be divisible by data_bits");
    if (threads == 0) throw ValidationError("threads must be >= 1");
    if (registers_available == 0) throw ValidationError("registers_available must be >= 1");
    if (l2_assoc == 0 || l2_size_bytes == 0) throw ValidationError("L2 geometry must be positive");
    if (l2_size_bytes % l2_assoc != 0) throw ValidationError("l2_size_bytes must be divisible by l2_assoc");
    if (element_bytes == 0) throw ValidationError("element_bytes must be >= 1");
    for (std::size_t i = 1; i < thread_thresholds.size(); ++i) {
        if (!(thread_thresholds[i - 1] < thread_thresholds[i])) {
            throw ValidationError("thread_thresholds must be strictly increasing");
        }
    }
}

TTSolution make_solution(const CombinationShape& shape, const RankList& ranks) {
    TTSolution s;
    s.shape = shape;
    s.ranks = ranks;
    s.costs = flops_total(shape, ranks);
    return s;
}

bool passes_vectorization(const RankList& ranks, const HardwareConfig& hw) {
    const unsigned vl = hw.vl();
    for (std::size_t i = 1; i + 1 < ranks.r.size(); ++i) {
        if (ranks.r[i] % vl != 0) return false;
    }
    return true;
}

bool passes_initial_layer(const CostMetrics& costs, const CostMetrics& dense, InitialLayerRule rule) {
    const bool flops = costs.flops < dense.flops;
    const bool params = costs.params < dense.params;
    return rule == InitialLayerRule::both_lower ? (flops && params) : (flops || params);
}

bool passes_scalability(const TTSolution& solution, const HardwareConfig& hw) {
    if (solution.shape.d() <= hw.scalability_d_limit) return true;
    const auto& per = solution.costs.per_layer_flops;
    const Count heaviest = per.empty() ? 0 : *std::max_element(per.begin(), per.end());
    return !(to_double(heaviest) < hw.scalability_flops_floor);
}

unsigned assign_threads(Count flops, const HardwareConfig& hw) {
    const double f = to_double(flops);
    unsigned n = 1;
    for (double t : hw.thread_thresholds) {
        if (f >= t) ++n;
    }
    return std::min(n, hw.threads);
}

std::vector<CombinationShape> stage_alignment(const std::vector<CombinationShape>& shapes) {
    std::vector<CombinationShape> out;
    std::set<CombinationShape> seen;
    for (const auto& s : shapes) {
        CombinationShape a = align(s);
        if (seen.insert(a).second) out.push_back(std::move(a));
    }
    return out;
}

std::vector<TTSolution> stage_vectorization(std::vector<TTSolution> solutions, const HardwareConfig& hw) {
    std::erase_if(solutions, [&](const TTSolution& s) { return !passes_vectorization(s.ranks, hw); });
    return solutions;
}

std::vector<TTSolution> stage_initial_layer(std::vector<TTSolution> solutions, const LayerShape& layer,
                                            InitialLayerRule rule) {
    const CostMetrics dense = dense_costs(layer);
    std::erase_if(solutions, [&](const TTSolution& s) { return !passes_initial_layer(s.costs, dense, rule); });
    return solutions;
}

std::vector<TTSolution> stage_scalability(std::vector<TTSolution> solutions, const HardwareConfig& hw) {
    std::erase_if(solutions, [&](const TTSolution& s) { return !passes_scalability(s, hw); });
    for (auto& s : solutions) {
        s.threads_per_layer.clear();
        for (Count f : s.costs.per_layer_flops) s.threads_per_layer.push_back(assign_threads(f, hw));
    }
    return solutions;
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::all_initial: return "all_initial";
        case Stage::alignment: return "alignment";
        case Stage::vectorization: return "vectorization";
        case Stage::initial_layer: return "initial_layer";
        case Stage::scalability: return "scalability";
    }
    return "?";
}

bool solution_less(const TTSolution& a, const TTSolution& b) {
    if (a.costs.flops != b.costs.flops) return a.costs.flops < b.costs.flops;
    if (a.costs.params != b.costs.params) return a.costs.params < b.costs.params;
    if (a.shape != b.shape) return a.shape < b.shape;
    return a.ranks < b.ranks;
}

namespace {

// Admissible multiples of vl that are <= cap.
std::vector<Factor> vector_values(const RankSet& ranks, std::optional<Count> cap, unsigned vl) {
    std::vector<Factor> out;
    if (ranks.is_range) {
        const Count n = ranks.count_up_to(cap);
        for (Count i = 0; i < n; ++i) {
            const Factor v = static_cast<Factor>(ranks.from + i * ranks.step);
            if (v % vl == 0) out.push_back(v);
        }
        return out;
    }
    for (Factor v : ranks.values_up_to(cap)) {
        if (v % vl == 0) out.push_back(v);
    }
    return out;
}

Count count_vector_values(const RankSet& ranks, std::optional<Count> cap, unsigned vl) {
    if (!ranks.is_range) return vector_values(ranks, cap, vl).size();
    const Count n = ranks.count_up_to(cap);
    // from + i*step mod vl is periodic in i with period vl / gcd(step, vl)
    const Count period = vl / std::gcd<Factor, Factor>(ranks.step, vl);
    Count per_period = 0;
    for (Count i = 0; i < period; ++i) {
        if ((ranks.from + i * ranks.step) % vl == 0) ++per_period;
    }
    Count total = (n / period) * per_period;
    for (Count i = (n / period) * period; i < n; ++i) {
        if ((ranks.from + i * ranks.step) % vl == 0) ++total;
    }
    return total;
}

bool uniform_vectorized(const EnumerationPolicy& policy) {
    return policy.uniform_after_vectorization || policy.rank_mode == RankMode::uniform;
}

std::vector<std::vector<Factor>> vector_choices(const CombinationShape& aligned, const EnumerationPolicy& policy,
                                                unsigned vl) {
    std::vector<std::vector<Factor>> choices;
    if (aligned.d() == 1) return choices;
    std::vector<Count> caps;
    if (policy.clamp_to_max_rank) caps = max_ranks(aligned);
    auto cap_at = [&](std::size_t i) -> std::optional<Count> {
        if (caps.empty()) return std::nullopt;
        return caps[i];
    };
    if (uniform_vectorized(policy)) {
        std::optional<Count> cap;
        if (!caps.empty()) cap = *std::min_element(caps.begin(), caps.end());
        choices.push_back(vector_values(policy.ranks, cap, vl));
    } else {
        for (std::size_t i = 0; i + 1 < aligned.d(); ++i) choices.push_back(vector_values(policy.ranks, cap_at(i), vl));
    }
    return choices;
}

class Clock {
public:
    explicit Clock(std::optional<double> budget) : budget_(budget), start_(std::chrono::steady_clock::now()) {}
    void check(const LayerShape& layer) const {
        if (!budget_) return;
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
        if (elapsed.count() > *budget_) {
            throw BudgetExceeded("layer " + layer.label() + ": wall-clock budget of " + std::to_string(*budget_) +
                                 " s exceeded");
        }
    }

private:
    std::optional<double> budget_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

Count count_vectorized_rank_lists(const CombinationShape& aligned, const EnumerationPolicy& policy,
                                  const HardwareConfig& hw) {
    if (aligned.d() == 1) return 1;
    std::vector<Count> caps;
    if (policy.clamp_to_max_rank) caps = max_ranks(aligned);
    if (uniform_vectorized(policy)) {
        std::optional<Count> cap;
        if (!caps.empty()) cap = *std::min_element(caps.begin(), caps.end());
        return count_vector_values(policy.ranks, cap, hw.vl());
    }
    Count total = 1;
    for (std::size_t i = 0; i + 1 < aligned.d(); ++i) {
        total = checked_mul(total, count_vector_values(policy.ranks, caps.empty() ? std::nullopt
                                                                                   : std::optional<Count>(caps[i]),
                                                       hw.vl()));
    }
    return total;
}

PipelineResult run_pipeline(const LayerShape& layer, const EnumerationPolicy& policy, const HardwareConfig& hw,
                            const PipelineOptions& options) {
    layer.validate();
    policy.validate();
    hw.validate();
    const Clock clock(options.budget_seconds);

    PipelineResult result;
    StageReport& report = result.report;
    report.layer = layer;
    report.convention = policy.convention() + " vl=" + std::to_string(hw.vl()) +
                        " scalability: drop d>" + std::to_string(hw.scalability_d_limit) +
                        " and max per-layer flops<" + std::to_string(static_cast<long long>(hw.scalability_flops_floor));

    EnumerationPolicy full = policy;
    full.align_only = false;
    report.counts[0] = count_design_space(layer, full);
    clock.check(layer);
    report.counts[1] = count_aligned_design_space(layer, policy);
    clock.check(layer);

    EnumerationPolicy aligned_policy = policy;
    aligned_policy.align_only = true;
    std::vector<CombinationShape> shapes;
    {
        CombinationShapeStream stream(layer, aligned_policy);
        while (auto s = stream.next()) shapes.push_back(std::move(*s));
    }
    Count vectorized = 0;
    for (const auto& s : shapes) vectorized = checked_add(vectorized, count_vectorized_rank_lists(s, policy, hw));
    report.counts[2] = vectorized;
    if (vectorized > options.max_materialized) {
        throw BudgetExceeded("layer " + layer.label() + ": " + to_string(vectorized) +
                             " vectorized candidates exceed the materialization limit " +
                             to_string(options.max_materialized));
    }

    const CostMetrics dense = dense_costs(layer);
    Count initial = 0;
    std::size_t visited = 0;
    for (const auto& shape : shapes) {
        const auto choices = vector_choices(shape, policy, hw.vl());
        const bool uniform = uniform_vectorized(policy);
        std::vector<std::size_t> odo(choices.size(), 0);
        bool empty = std::any_of(choices.begin(), choices.end(), [](const auto& c) { return c.empty(); });
        while (!empty) {
            RankList ranks;
            if (shape.d() == 1) {
                ranks.r = {1, 1};
            } else if (uniform) {
                ranks = RankList::uniform(shape.d(), choices[0][odo[0]]);
            } else {
                ranks.r.assign(shape.d() + 1, 1);
                for (std::size_t i = 0; i < choices.size(); ++i) ranks.r[i + 1] = choices[i][odo[i]];
            }
            if ((++visited & 0xFFF) == 0) clock.check(layer);
            TTSolution sol = make_solution(shape, ranks);
            if (passes_initial_layer(sol.costs, dense, policy.initial_layer_rule)) {
                ++initial;
                if (passes_scalability(sol, hw)) {
                    for (Count f : sol.costs.per_layer_flops) sol.threads_per_layer.push_back(assign_threads(f, hw));
                    ++report.counts[4];
                    if (options.keep_survivors) result.survivors.push_back(std::move(sol));
                }
            }
            std::size_t i = odo.size();
            bool carry = true;
            while (carry && i > 0) {
                --i;
                if (++odo[i] < choices[i].size()) {
                    carry = false;
                } else {
                    odo[i] = 0;
                }
            }
            if (carry) break;
        }
    }
    report.counts[3] = initial;
    std::sort(result.survivors.begin(), result.survivors.end(), solution_less);
    return result;
}

}  // namespace ttdse
