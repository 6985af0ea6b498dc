// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "ttdse/enumerate.hpp"
#include "ttdse/errors.hpp"

using namespace ttdse;

namespace {

// Oracle: recursive multiplicative partitions into exactly d parts >= 2.
void partitions(Factor x, std::size_t d, Factor max_part, std::vector<Factor>& cur,
                std::vector<std::vector<Factor>>& out) {
    if (d == 1) {
        if (x >= 2 && x <= max_part) {
            cur.push_back(x);
            out.push_back(cur);
            cur.pop_back();
        }
        return;
    }
    for (Factor f = std::min(max_part, x); f >= 2; --f) {
        if (x % f) continue;
        cur.push_back(f);
        partitions(x / f, d - 1, f, cur, out);
        cur.pop_back();
    }
}

std::vector<std::vector<Factor>> partition_oracle(Factor x, std::size_t d) {
    std::vector<std::vector<Factor>> out;
    std::vector<Factor> cur;
    if (d == 1) return {{x}};
    partitions(x, d, x, cur, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<CombinationShape> drain(CombinationShapeStream s) {
    std::vector<CombinationShape> out;
    while (auto x = s.next()) out.push_back(*x);
    return out;
}

EnumerationPolicy bounded(std::size_t max_d, std::vector<Factor> ranks, RankMode mode, bool clamp) {
    EnumerationPolicy p;
    p.max_d = max_d;
    p.ranks = RankSet::list(std::move(ranks));
    p.rank_mode = mode;
    p.clamp_to_max_rank = clamp;
    return p;
}

// Oracle for count_design_space: materialize every shape and count its rank lists.
Count brute_design_space(const LayerShape& layer, const EnumerationPolicy& policy) {
    Count total = 0;
    for (const auto& s : drain(CombinationShapeStream(layer, policy))) {
        std::vector<Count> caps;
        if (policy.clamp_to_max_rank) caps = max_ranks(s);
        RankListStream rl(s.d(), policy.ranks, policy.rank_mode, caps);
        while (rl.next()) ++total;
    }
    return total;
}

}  // namespace

TEST_CASE("factor_tuples examples") {
    CHECK(factor_tuples(12, 2) == std::vector<std::vector<Factor>>{{4, 3}, {6, 2}});
    CHECK(factor_tuples(7, 2).empty());
    CHECK(factor_tuples(7, 1) == std::vector<std::vector<Factor>>{{7}});
    const auto t300 = factor_tuples(300, 5);
    CHECK(std::find(t300.begin(), t300.end(), std::vector<Factor>{5, 5, 3, 2, 2}) != t300.end());
    CHECK(factor_tuples(1, 1) == std::vector<std::vector<Factor>>{{1}});
    CHECK(factor_tuples(1, 2).empty());
}

TEST_CASE("property: factor tuples are complete, distinct and multiply to x") {
    for (Factor x = 1; x <= 10000; x += (x < 200 ? 1 : 97)) {
        for (std::size_t d = 1; d <= 4; ++d) {
            auto got = factor_tuples(x, d);
            for (const auto& t : got) {
                CHECK(std::accumulate(t.begin(), t.end(), Factor{1}, std::multiplies<>()) == x);
                CHECK(std::is_sorted(t.rbegin(), t.rend()));
            }
            const std::set<std::vector<Factor>> unique(got.begin(), got.end());
            CHECK(unique.size() == got.size());
            std::sort(got.begin(), got.end());
            CHECK(got == partition_oracle(x, d));
        }
    }
}

TEST_CASE("combination shapes") {
    EnumerationPolicy p;
    p.align_only = true;
    const auto shapes = drain(CombinationShapeStream({784, 300}, p));
    const CombinationShape lenet{{5, 5, 3, 2, 2}, {2, 2, 2, 7, 14}};
    CHECK(std::find(shapes.begin(), shapes.end(), lenet) != shapes.end());
    for (const auto& s : shapes) {
        CHECK(is_aligned(s));
        CHECK_NOTHROW(s.validate_for({784, 300}));
    }

    const auto unit = drain(CombinationShapeStream({1, 1}, EnumerationPolicy{}));
    REQUIRE(unit.size() == 1);
    CHECK(unit[0].d() == 1);
}

TEST_CASE("property: alignment reduction equals permutation_count") {
    for (LayerShape layer : {LayerShape{120, 84}, LayerShape{64, 36}, LayerShape{300, 100}}) {
        EnumerationPolicy all;
        all.max_d = 5;
        EnumerationPolicy aligned = all;
        aligned.align_only = true;
        std::map<CombinationShape, Count> groups;
        const auto everything = drain(CombinationShapeStream(layer, all));
        for (const auto& s : everything) ++groups[align(s)];
        const auto reps = drain(CombinationShapeStream(layer, aligned));
        CHECK(reps.size() == groups.size());
        for (const auto& r : reps) CHECK(groups.at(r) == permutation_count(r));
        const std::set<CombinationShape> unique(everything.begin(), everything.end());
        CHECK(unique.size() == everything.size());
    }
}

TEST_CASE("streams are lazy") {
    EnumerationPolicy p;
    p.max_d = 13;
    CombinationShapeStream s({49152, 12288}, p);
    for (int i = 0; i < 100; ++i) REQUIRE(s.next());
    CHECK(s.generated() < 1000);
}

TEST_CASE("rank lists") {
    EnumerationPolicy p;
    p.ranks = RankSet::list({10});
    p.rank_mode = RankMode::uniform;
    auto s = rank_lists(5, p);
    CHECK(s.next()->r == std::vector<Factor>{1, 10, 10, 10, 10, 1});
    CHECK_FALSE(s.next());

    p.rank_mode = RankMode::independent;
    p.ranks = RankSet::list({8, 16});
    auto one = rank_lists(1, p);
    CHECK(one.next()->r == std::vector<Factor>{1, 1});
    CHECK_FALSE(one.next());

    auto three = rank_lists(3, p);
    int n = 0;
    while (three.next()) ++n;
    CHECK(n == 4);
    CHECK(count_rank_lists(3, p.ranks, RankMode::independent) == 4);
    CHECK(count_rank_lists(3, p.ranks, RankMode::uniform) == 2);

    const std::vector<Count> caps{8, 12};
    CHECK(count_rank_lists(3, p.ranks, RankMode::independent, caps) == 1);
    CHECK(count_rank_lists(3, RankSet::range(1, std::nullopt), RankMode::independent, caps) == 96);
    CHECK(count_rank_lists(3, RankSet::range(1, std::nullopt), RankMode::uniform, caps) == 8);
}

TEST_CASE("rank set validation") {
    CHECK_THROWS_AS(RankSet::list({}).validate(), ValidationError);
    CHECK_THROWS_AS(RankSet::list({0, 8}).validate(), ValidationError);
    CHECK_THROWS_AS(RankSet::range(1, 8, 0).validate(), ValidationError);
    EnumerationPolicy open;
    open.clamp_to_max_rank = false;
    CHECK_THROWS_AS(open.validate(), ValidationError);
    CHECK(RankSet::range(3, 20, 4).values_up_to(std::nullopt) == std::vector<Factor>{3, 7, 11, 15, 19});
    CHECK(RankSet::range(3, std::nullopt, 4).count_up_to(Count{12}) == 3);
}

TEST_CASE("count_design_space") {
    CHECK(count_design_space({1, 1}, EnumerationPolicy::table_convention()) == 1);
    CHECK(to_sci2(count_design_space({120, 84}, EnumerationPolicy::table_convention())) == "5.4E+06");
    CHECK(to_sci2(count_design_space({400, 120}, EnumerationPolicy::table_convention())) == "9.5E+08");
    CHECK(count_design_space({12288, 49152}, EnumerationPolicy::table_convention()) > Count{1} << 100);
}

TEST_CASE("property: counting matches materialization") {
    const std::vector<LayerShape> layers{{120, 84}, {36, 24}, {64, 48}, {100, 60}};
    for (const auto& layer : layers) {
        for (bool clamp : {false, true}) {
            for (RankMode mode : {RankMode::independent, RankMode::uniform}) {
                const EnumerationPolicy p = bounded(4, {1, 2, 5, 8, 16}, mode, clamp);
                CHECK(count_design_space(layer, p) == brute_design_space(layer, p));
                EnumerationPolicy a = p;
                a.align_only = true;
                CHECK(count_aligned_design_space(layer, p) == brute_design_space(layer, a));
            }
        }
    }
}

TEST_CASE("property: clamped permutation counting matches brute force") {
    std::mt19937_64 rng(5);
    const RankSet open = RankSet::range(1, std::nullopt);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 2 + rng() % 3;
        CombinationShape s;
        for (std::size_t i = 0; i < d; ++i) {
            s.m.push_back(2 + rng() % 3);
            s.n.push_back(2 + rng() % 3);
        }
        s = align(s);
        for (RankMode mode : {RankMode::independent, RankMode::uniform}) {
            Count brute = 0;
            std::vector<Factor> m = s.m, n = s.n;
            std::sort(m.begin(), m.end());
            do {
                std::sort(n.begin(), n.end());
                do {
                    const auto caps = max_ranks({m, n});
                    brute += count_rank_lists(d, open, mode, caps);
                } while (std::next_permutation(n.begin(), n.end()));
            } while (std::next_permutation(m.begin(), m.end()));
            CHECK(clamped_permutation_rank_count(s, open, mode) == brute);
        }
    }
}
