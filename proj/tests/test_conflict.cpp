#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support.hpp"

using namespace pedsim;

TEST(FrictionRule, ThreeBands) {
    const Friction f{0.4, 0.9};
    EXPECT_EQ(friction_outcome(f.low / 2, f), ConflictOutcome::AllBlocked);
    EXPECT_EQ(friction_outcome((f.low + f.high) / 2, f), ConflictOutcome::OneMoves);
    EXPECT_EQ(friction_outcome(f.low, f), ConflictOutcome::OneMoves);
    EXPECT_EQ(friction_outcome(f.high, f), ConflictOutcome::OneMoves);
    EXPECT_EQ(friction_outcome(0.95, f), ConflictOutcome::BothMove);
}

TEST(ResolveConflict, VerdictMatchesDraw) {
    const Friction f{0.4, 0.9};
    for (std::uint64_t k = 0; k < 500; ++k) {
        Rng rng = make_stream(1, StreamTag::Conflict, {k});
        const auto v = resolve_conflict({{3, 3}, {10, 11}}, f, rng);
        EXPECT_EQ(v.outcome, friction_outcome(v.draw, f));
        const std::size_t expected_movers = v.outcome == ConflictOutcome::AllBlocked ? 0 : v.outcome == ConflictOutcome::OneMoves ? 1 : 2;
        EXPECT_EQ(v.movers.size(), expected_movers);
        EXPECT_EQ(v.movers.size() + v.blocked.size(), 2u);
    }
}

TEST(ResolveConflict, LargeGroupsReduceToTwo) {
    const Friction f{0.4, 0.9};
    for (std::uint64_t k = 0; k < 500; ++k) {
        Rng rng = make_stream(2, StreamTag::Conflict, {k});
        const ConflictGroup g{{0, 0}, {1, 2, 3, 4, 5}};
        const auto v = resolve_conflict(g, f, rng);
        EXPECT_EQ(v.finalists, 2u);
        EXPECT_LE(v.movers.size(), 2u);
        EXPECT_GE(v.blocked.size(), 3u);
        std::set<PedId> all(v.movers.begin(), v.movers.end());
        all.insert(v.blocked.begin(), v.blocked.end());
        EXPECT_EQ(all, (std::set<PedId>{1, 2, 3, 4, 5}));
        EXPECT_EQ(v.movers.size() + v.blocked.size(), 5u);
    }
}

TEST(ResolveConflict, FinalistsAreUniform) {
    std::array<int, 4> chosen{};
    const int n = 40000;
    for (int k = 0; k < n; ++k) {
        Rng rng = make_stream(4, StreamTag::Conflict, {static_cast<std::uint64_t>(k)});
        const auto v = resolve_conflict({{0, 0}, {0, 1, 2, 3}}, {0.4, 0.9}, rng);
        // The two pre-blocked contenders come first in `blocked`.
        for (PedId p = 0; p < 4; ++p)
            if (std::find(v.blocked.begin(), v.blocked.begin() + 2, p) == v.blocked.begin() + 2) ++chosen[static_cast<std::size_t>(p)];
    }
    // Each contender is a finalist with probability 1/2.
    const double sigma = std::sqrt(n * 0.25);
    for (int c : chosen) EXPECT_NEAR(c, n / 2.0, 4 * sigma);
}

TEST(ResolveConflict, FullTargetBlocksEveryone) {
    Rng rng = make_stream(1, StreamTag::Conflict, {0});
    const auto v = resolve_conflict({{1, 1}, {4, 7}}, {0.4, 0.9}, rng, true);
    EXPECT_TRUE(v.movers.empty());
    EXPECT_EQ(v.blocked.size(), 2u);
}

TEST(ResolveConflict, OutcomeFrequencies) {
    const int n = 100000;
    std::array<int, 3> counts{};
    std::vector<ConflictGroup> groups;
    for (int k = 0; k < n; ++k) groups.push_back({{k % 100, k / 100}, {0, 1}});
    const auto verdicts = resolve_conflicts(groups, {0.4, 0.9}, 42, 0, 100);
    for (const auto& v : verdicts) ++counts[static_cast<std::size_t>(v.outcome)];
    const std::array<double, 3> p = {0.4, 0.5, 0.1};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(counts[i], n * p[i], 3 * std::sqrt(n * p[i] * (1 - p[i])));
}

TEST(ResolveConflict, RejectsSingleContender) {
    Rng rng = make_stream(1, StreamTag::Conflict, {0});
    EXPECT_THROW(resolve_conflict({{0, 0}, {1}}, {0.4, 0.9}, rng), std::invalid_argument);
}
