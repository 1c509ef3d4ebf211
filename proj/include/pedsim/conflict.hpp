#pragma once
// Friction-based resolution of same-target conflicts.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "pedsim/rng.hpp"
#include "pedsim/types.hpp"

namespace pedsim {

struct ConflictGroup {
    Cell target;
    std::vector<PedId> contenders;  // at least two
};

struct Friction {
    double low = 0.4;
    double high = 0.9;
};

enum class ConflictOutcome : std::uint8_t { AllBlocked, OneMoves, BothMove };

struct ConflictVerdict {
    Cell target;
    ConflictOutcome outcome = ConflictOutcome::AllBlocked;
    std::vector<PedId> movers;
    std::vector<PedId> blocked;
    std::size_t finalists = 0;  // contenders left for the friction draw
    double draw = 0.0;
};


/// Friction rule for a two-way conflict given a uniform draw `r`.
constexpr ConflictOutcome friction_outcome(double r, Friction f) noexcept {
    if (r < f.low) return ConflictOutcome::AllBlocked;
    if (r <= f.high) return ConflictOutcome::OneMoves;
    return ConflictOutcome::BothMove;
}

/// Blocks all but two random contenders, then one uniform draw r decides:
/// r < low blocks both, low <= r <= high lets one random contender through, r > high lets both in.
/// A target that is already full blocks the whole group.
inline ConflictVerdict resolve_conflict(const ConflictGroup& group, Friction f, Rng& rng, bool target_full = false) {
    if (group.contenders.size() < 2) throw std::invalid_argument("a conflict needs at least two contenders");
    ConflictVerdict v;
    v.target = group.target;
    if (target_full) {
        v.blocked = group.contenders;
        return v;
    }
    std::vector<PedId> pool = group.contenders;
    // Partial Fisher-Yates: the first two slots hold the finalists.
    for (std::size_t i = 0; i < 2; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    v.blocked.assign(pool.begin() + 2, pool.end());
    v.finalists = 2;

    v.draw = uniform01(rng);
    v.outcome = friction_outcome(v.draw, f);
    switch (v.outcome) {
        case ConflictOutcome::AllBlocked:
            v.blocked.push_back(pool[0]);
            v.blocked.push_back(pool[1]);
            break;
        case ConflictOutcome::OneMoves: {
            const std::size_t winner = uniform_index(rng, 2);
            v.movers.push_back(pool[winner]);
            v.blocked.push_back(pool[1 - winner]);
            break;
        }
        case ConflictOutcome::BothMove:
            v.movers.push_back(pool[0]);
            v.movers.push_back(pool[1]);
            break;
    }
    return v;
}

/// Resolves each group on its own stream keyed by (seed, step, target cell).
inline std::vector<ConflictVerdict> resolve_conflicts(std::span<const ConflictGroup> groups, Friction f, std::uint64_t seed,
                                                      std::uint64_t step, int grid_width) {
    std::vector<ConflictVerdict> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        const auto cell_key = static_cast<std::uint64_t>(g.target.y) * static_cast<std::uint64_t>(grid_width) +
                              static_cast<std::uint64_t>(g.target.x);
        Rng rng = make_stream(seed, StreamTag::Conflict, {step, cell_key});
        out.push_back(resolve_conflict(g, f, rng));
    }
    return out;
}

}  // namespace pedsim
