// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <random>
#include <set>

#include "doctest.h"
#include "ttdse/errors.hpp"
#include "ttdse/executor.hpp"
#include "ttdse/ttcore.hpp"

using namespace ttdse;

namespace {

const CombinationShape kLeNet300{{5, 5, 3, 2, 2}, {2, 2, 2, 7, 14}};
const CombinationShape kWorked{{10, 10, 5, 2}, {2, 8, 8, 32}};

// Oracle: core volumes summed directly plus the bias.
Count volume_oracle(const CombinationShape& s, const RankList& r) {
    Count total = s.m_product();
    for (std::size_t t = 0; t < s.d(); ++t) total += Count{r.r[t]} * s.n[t] * s.m[t] * r.r[t + 1];
    return total;
}

// Oracle: every (m-permutation, n-permutation) pair, collected in a set.
std::set<CombinationShape> all_permutations(const CombinationShape& s) {
    std::set<CombinationShape> out;
    std::vector<Factor> m = s.m, n = s.n;
    std::sort(m.begin(), m.end());
    do {
        std::sort(n.begin(), n.end());
        do {
            out.insert({m, n});
        } while (std::next_permutation(n.begin(), n.end()));
    } while (std::next_permutation(m.begin(), m.end()));
    return out;
}

}  // namespace

TEST_CASE("memory_params worked examples") {
    CHECK(memory_params(kLeNet300, RankList::uniform(5, 10)) == 3680);
    CHECK(volume_oracle(kLeNet300, RankList::uniform(5, 10)) == 3680);
    CHECK(memory_params(kWorked, RankList::uniform(4, 8)) == 9352);
    CHECK(memory_params({{300}, {784}}, {{1, 1}}) == 784 * 300 + 300);
}

TEST_CASE("flops_layer and flops_total") {
    const RankList r10 = RankList::uniform(5, 10);
    CHECK(flops_layer(5, kLeNet300, r10) == 31360);
    CHECK(flops_layer(1, {{7}, {9}}, {{1, 1}}) == 2 * 7 * 9);
    CHECK(flops_layer(1, {{1}, {1}}, {{1, 1}}) == 2);
    CHECK(flops_total({{7}, {9}}, {{1, 1}}).flops == 7 + 2 * 7 * 9);

    const CostMetrics c = flops_total(kLeNet300, r10);
    REQUIRE(c.per_layer_flops.size() == 5);
    const MacCount macs = count_macs(kLeNet300, r10);
    for (std::size_t t = 1; t <= 5; ++t) CHECK(2 * macs.per_layer[t - 1] == flops_layer(t, kLeNet300, r10));
    CHECK(c.flops == 2 * macs.total + 300);

    const MacCount worked = count_macs(kWorked, RankList::uniform(4, 8));
    CHECK(flops_total(kWorked, RankList::uniform(4, 8)).flops == 2 * worked.total + 1000);
}

TEST_CASE("dense_costs") {
    CHECK(dense_costs({784, 300}).params == 235500);
    CHECK(dense_costs({120, 84}).params == 10164);
    CHECK(dense_costs({1, 1}).params == 2);
    CHECK(dense_costs({1, 1}).flops == 3);
}

TEST_CASE("align") {
    const CombinationShape a = align({{2, 5, 3, 5, 2}, {14, 2, 7, 2, 2}});
    CHECK(a == kLeNet300);
    CHECK(align(a) == a);
    CHECK(is_aligned(a));
    CHECK_FALSE(is_aligned({{2, 5}, {3, 2}}));
    CHECK(align({{12}, {7}}) == CombinationShape{{12}, {7}});
}

TEST_CASE("permutation_count") {
    CHECK(permutation_count(kLeNet300) == 600);
    CHECK(permutation_count({{2, 3, 5}, {7, 11, 13}}) == 36);
    CHECK(permutation_count({{2, 2}, {3, 3}}) == 1);
    CHECK(all_permutations(kLeNet300).size() == 600);
}

TEST_CASE("ratio_stats on the worked shape") {
    const RatioStats st = ratio_stats(kWorked, RankList::uniform(4, 8));
    CHECK(st.memory_aligned == 9352);
    CHECK(st.memory_max == 26952);
    CHECK(st.memory_min == 5224);
    CHECK(st.ratio_flops == 1.0);
    CHECK(st.ratio_memory == doctest::Approx(double(26952 - 9352) / double(26952 - 5224)));
    CHECK(st.permutations == permutation_count(kWorked));

    const RatioStats one = ratio_stats({{12}, {7}}, {{1, 1}});
    CHECK(one.ratio_flops == 1.0);
    CHECK(one.ratio_memory == 1.0);
    CHECK_THROWS_AS(ratio_stats(kLeNet300, RankList::uniform(5, 8), 4), BudgetExceeded);
}

TEST_CASE("max_ranks") {
    const auto caps = max_ranks({{4, 3}, {2, 5}});
    REQUIRE(caps.size() == 1);
    CHECK(caps[0] == 8);
}

TEST_CASE("validation") {
    CHECK_THROWS(CombinationShape{{2, 3}, {6}}.validate());
    CHECK_THROWS(CombinationShape{{1, 6}, {2, 3}}.validate());
    CHECK_THROWS(RankList{{1, 8, 2}}.validate_for({{2, 3}, {2, 3}}));
    CHECK_THROWS(RankList{{1, 8}}.validate_for({{2, 3}, {2, 3}}));
    CHECK_THROWS(kLeNet300.validate_for({784, 301}));
    CHECK_NOTHROW(kLeNet300.validate_for({784, 300}));
}

TEST_CASE("property: aligned shapes minimise FLOPs over every permutation") {
    std::mt19937_64 rng(7);
    const std::vector<Factor> pool{2, 3, 4, 5, 7, 8};
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t d = 2 + rng() % 3;
        CombinationShape s;
        for (std::size_t i = 0; i < d; ++i) {
            s.m.push_back(pool[rng() % pool.size()]);
            s.n.push_back(pool[rng() % pool.size()]);
        }
        for (Factor R : {1, 8, 16}) {
            const RankList r = RankList::uniform(d, R);
            const Count aligned = flops_total(align(s), r).flops;
            for (const auto& p : all_permutations(s)) CHECK(aligned <= flops_total(p, r).flops);
        }
    }
}

TEST_CASE("property: permutation_count equals brute force for d <= 5") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + rng() % 5;
        CombinationShape s;
        for (std::size_t i = 0; i < d; ++i) {
            s.m.push_back(2 + rng() % 3);
            s.n.push_back(2 + rng() % 3);
        }
        CHECK(permutation_count(s) == all_permutations(s).size());
    }
}

TEST_CASE("property: costs strictly increase with any interior rank") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const CombinationShape s{{4, 3, 5}, {2, 6, 7}};
        RankList r{{1, 1 + rng() % 20, 1 + rng() % 20, 1}};
        const std::size_t bond = 1 + rng() % 2;
        RankList bigger = r;
        bigger.r[bond] += 1 + rng() % 5;
        CHECK(memory_params(s, r) < memory_params(s, bigger));
        CHECK(flops_total(s, r).flops < flops_total(s, bigger).flops);
    }
}

TEST_CASE("property: d = 1 collapses to the dense layer") {
    for (Factor M : {1, 7, 84, 300}) {
        for (Factor N : {1, 9, 120}) {
            const CombinationShape s{{M}, {N}};
            CHECK(memory_params(s, {{1, 1}}) == dense_costs({N, M}).params);
            CHECK(flops_total(s, {{1, 1}}).flops == dense_costs({N, M}).flops);
            CHECK(volume_oracle(s, {{1, 1}}) == dense_costs({N, M}).params);
        }
    }
}

TEST_CASE("property: memory_params equals the core-volume oracle") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 1 + rng() % 5;
        CombinationShape s;
        RankList r{{1}};
        for (std::size_t i = 0; i < d; ++i) {
            s.m.push_back(2 + rng() % 9);
            s.n.push_back(2 + rng() % 9);
            r.r.push_back(i + 1 == d ? 1 : 1 + rng() % 40);
        }
        CHECK(memory_params(s, r) == volume_oracle(s, r));
    }
}
