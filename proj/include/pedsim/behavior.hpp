#pragma once
// Agent perception, the seven-component utility, group balancing and stochastic action choice.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "pedsim/floor_field.hpp"
#include "pedsim/geometry.hpp"
#include "pedsim/rng.hpp"
#include "pedsim/scenario.hpp"
#include "pedsim/types.hpp"
#include "pedsim/urn.hpp"

namespace pedsim {

struct GroupRef {
    int group = 0;  // top-level group id
    int leaf = 0;   // id of the simple group holding the pedestrian (== group for simple groups)
    friend bool operator==(const GroupRef&, const GroupRef&) = default;
};

struct Pedestrian {
    PedId id = kNoPed;
    std::optional<GroupRef> group;
    Cell position;
    Action old_dir = Action::X;
    int dest = 0;
    double speed_d = 0.0;      // current desired speed, m/s
    double class_speed = 0.0;  // desired speed at generation (speed class)
    UrnState urn;
    double diag_penalty = 0.0;
    std::optional<int> current_area;
    double speed_before_area = 0.0;  // desired speed when the current slope area was entered
    double area_entry_factor = 1.0;  // k_enter applied on entry
    Action last_action = Action::X;  // executed this step
    long long travel_x = 0;  // unwrapped position, cells
    long long travel_y = 0;
    Rng rng;
};

/// Simple groups hold members and no subgroups; structured groups hold subgroups and no members.
struct Group {
    int id = 0;
    std::vector<Group> subgroups;
    std::vector<PedId> members;

    bool is_simple() const noexcept { return subgroups.empty(); }

    template <typename F>
    void for_each_member(F&& f) const {
        for (PedId m : members) f(m);
        for (const auto& g : subgroups) g.for_each_member(f);
    }
    const Group* find(int leaf_id) const noexcept {
        if (id == leaf_id) return this;
        for (const auto& g : subgroups)
            if (const auto* r = g.find(leaf_id)) return r;
        return nullptr;
    }
};

struct Occupancy {
    PedId first = kNoPed;
    PedId second = kNoPed;
    int count() const noexcept { return (first != kNoPed) + (second != kNoPed); }
    friend bool operator==(const Occupancy&, const Occupancy&) = default;
};

struct CellFree {};
struct CellObstacle {};
struct CellOnePed {
    PedId id;
};
struct CellTwoPeds {
    PedId first;
    PedId second;
};
using CellState = std::variant<CellFree, CellObstacle, CellOnePed, CellTwoPeds>;

struct BehaviorWeights {
    double goal = 0.0;
    double obstacle = 0.0;
    double social = 0.0;
    double cohesion = 0.0;
    double structured = 0.0;
    double direction = 0.0;
    double overlap = 0.0;

    static BehaviorWeights from(const CalibrationParams& p) noexcept {
        return {p.kappa_goal, p.kappa_obstacle, p.kappa_social, p.kappa_cohesion,
                p.kappa_structured, p.kappa_direction, p.kappa_overlap};
    }
    friend bool operator==(const BehaviorWeights&, const BehaviorWeights&) = default;
};

struct Components {
    double goal = 0.0;        // [-1, 1]
    double obstacle = 0.0;    // [-1, 0]
    double social = 0.0;      // [-1, 0]
    double cohesion = 0.0;    // [-1, 1]
    double structured = 0.0;  // [-1, 1]
    double direction = 0.0;   // [0, 1]
    double overlap = 0.0;     // [-1, 0]
};

struct CandidateView {
    bool feasible = false;
    Cell cell;
    double path = kUnreachable;  // seam-adjusted path value
    double obstacle = 0.0;
    double density = 0.0;
    double own_density = 0.0;  // the evaluating agent's own contribution at this cell
    int occupants = 0;         // others in the cell
    Point2 offset;             // displacement from the current cell, cells
};

struct Perception {
    Cell position;
    double path_here = 0.0;
    double density_here = 0.0;
    std::array<CandidateView, 9> candidates;
    std::vector<Point2> simple_members;      // relative to the current cell, cells
    std::vector<Point2> structured_members;  // same structured group, other subgroups
};

struct ModelConstants {
    double rho_sat = 4.0;
    double obstacle_span = 2.0;
    double overlap_threshold = 4.0;
    double perception_distance = 5.0;  // metres

    static ModelConstants from(const CalibrationParams& p) noexcept {
        return {p.rho_sat, p.obstacle_span, p.overlap_threshold, p.perception_distance};
    }
};

/// Read-only world snapshot consumed by perception.
struct WorldView {
    const ScenarioSpec& spec;
    const FloorField& path;
    const FloorField& obstacle;
    const FloorField& density;
    const DensityKernel& kernel;
    const Grid<Occupancy>& occupancy;
};

/// Offset from `from` to `to`, taking the short way round the periodic seam.
inline Point2 relative_offset(Cell from, Cell to, int width, BoundaryMode mode) noexcept {
    double ox = to.x - from.x;
    if (mode == BoundaryMode::PeriodicX) {
        if (ox > width / 2.0) ox -= width;
        if (ox < -width / 2.0) ox += width;
    }
    return {ox, static_cast<double>(to.y - from.y)};
}

inline Perception perceive(const Pedestrian& ped, const WorldView& world, const ModelConstants& k,
                           std::span<const Cell> simple_members = {}, std::span<const Cell> structured_members = {}) {
    const auto& geo = world.spec.geometry;
    const Cell here = ped.position;
    Perception p;
    p.position = here;
    p.path_here = world.path.values[here];
    p.density_here = world.density.values[here];
    const bool can_overlap = p.density_here >= k.overlap_threshold;

    for (Action a : kActions) {
        auto& cand = p.candidates[static_cast<std::size_t>(index_of(a))];
        cand.offset = {static_cast<double>(dx(a)), static_cast<double>(dy(a))};
        if (a == Action::X) {
            cand = {true, here, p.path_here, world.obstacle.values[here], p.density_here, 1.0,
                    world.occupancy[here].count() - 1, cand.offset};
            continue;
        }
        Cell c;
        if (!neighbour(here, a, geo.width, geo.height, geo.boundary, c)) continue;
        cand.cell = c;
        if (!world.spec.layout[c].walkable()) continue;
        if (is_diagonal(a)) {
            Cell s1, s2;
            const bool ok1 = neighbour(here, action_from_offset(dx(a), 0), geo.width, geo.height, geo.boundary, s1) &&
                             world.spec.layout[s1].walkable();
            const bool ok2 = neighbour(here, action_from_offset(0, dy(a)), geo.width, geo.height, geo.boundary, s2) &&
                             world.spec.layout[s2].walkable();
            if (!ok1 || !ok2) continue;
        }
        cand.path = periodic_path_value(world.path, here, c, geo.boundary);
        cand.obstacle = world.obstacle.values[c];
        cand.density = world.density.values[c];
        cand.own_density = world.kernel.weight(dx(a), dy(a));
        cand.occupants = world.occupancy[c].count();
        if (is_unreachable(cand.path)) continue;
        cand.feasible = cand.occupants == 0 || (cand.occupants == 1 && can_overlap);
    }

    const double reach = k.perception_distance / geo.cell_side;
    auto gather = [&](std::span<const Cell> cells, std::vector<Point2>& out) {
        for (const Cell& m : cells) {
            const Point2 off = relative_offset(here, m, geo.width, geo.boundary);
            if (std::hypot(off.x, off.y) <= reach + 1e-9) out.push_back(off);
        }
    };
    gather(simple_members, p.simple_members);
    gather(structured_members, p.structured_members);
    return p;
}

namespace detail {

inline double mean_distance(std::span<const Point2> members, Point2 from) {
    double sum = 0.0;
    for (const auto& m : members) sum += std::hypot(m.x - from.x, m.y - from.y);
    return sum / static_cast<double>(members.size());
}

inline double attraction(std::span<const Point2> members, Point2 offset) {
    if (members.empty()) return 0.0;
    const double gain = mean_distance(members, {0.0, 0.0}) - mean_distance(members, offset);
    return std::clamp(gain / kSqrt2, -1.0, 1.0);
}

}  // namespace detail

inline double comp_goal(const Perception& p, Action a) {
    if (a == Action::X) return 0.0;
    const auto& c = p.candidates[static_cast<std::size_t>(index_of(a))];
    return std::clamp((p.path_here - c.path) / kSqrt2, -1.0, 1.0);
}

inline double comp_obstacle(double obstacle_value, double span) {
    return -std::max(0.0, 1.0 - obstacle_value / span);
}

inline double comp_social(double density_value, double own_contribution, double rho_sat) {
    return -std::min(1.0, std::max(0.0, density_value - own_contribution) / rho_sat);
}

inline double comp_cohesion(const Perception& p, Action a) {
    return detail::attraction(p.simple_members, p.candidates[static_cast<std::size_t>(index_of(a))].offset);
}

inline double comp_structured(const Perception& p, Action a) {
    return detail::attraction(p.structured_members, p.candidates[static_cast<std::size_t>(index_of(a))].offset);
}

inline double comp_direction(Action a, Action old_dir) {
    const int turns = turn_distance(a, old_dir);
    if (turns == 0) return 1.0;
    if (turns == 1) return 0.5;
    return 0.0;
}

inline double comp_overlap(int occupants) { return occupants == 1 ? -1.0 : 0.0; }

inline Components components(const Perception& p, Action a, Action old_dir, const ModelConstants& k) {
    const auto& c = p.candidates[static_cast<std::size_t>(index_of(a))];
    Components out;
    out.goal = comp_goal(p, a);
    out.obstacle = comp_obstacle(c.obstacle, k.obstacle_span);
    out.social = comp_social(c.density, c.own_density, k.rho_sat);
    out.cohesion = comp_cohesion(p, a);
    out.structured = comp_structured(p, a);
    out.direction = comp_direction(a, old_dir);
    out.overlap = a == Action::X ? 0.0 : comp_overlap(c.occupants);
    return out;
}

/// Weighted component sum divided by the step length of `a`.
inline double utility(const Components& c, const BehaviorWeights& w, Action a) noexcept {
    const double sum = w.goal * c.goal + w.obstacle * c.obstacle + w.social * c.social + w.cohesion * c.cohesion +
                       w.structured * c.structured + w.direction * c.direction + w.overlap * c.overlap;
    return sum / step_length(a);
}

/// Hull area of member positions (metres) divided by member count.
inline double dispersion(std::span<const Point2> member_positions_m) {
    if (member_positions_m.empty()) return 0.0;
    return convex_hull_area(member_positions_m) / static_cast<double>(member_positions_m.size());
}

/// Reweights cohesion against goal and structured attraction by tanh(dispersion / delta).
inline BehaviorWeights balance_weights(const BehaviorWeights& w, double disp, double delta) {
    const double b = std::tanh(disp / delta);
    BehaviorWeights out = w;
    out.cohesion = w.cohesion / 3.0 + 2.0 * w.cohesion / 3.0 * b;
    out.goal = w.goal / 3.0 + 2.0 * w.goal / 3.0 * (1.0 - b);
    out.structured = w.structured / 3.0 + 2.0 * w.structured / 3.0 * (1.0 - b);
    return out;
}

struct ActionEvaluation {
    std::array<double, 9> utility{};
    std::array<double, 9> probability{};
    std::array<bool, 9> feasible{};
};

/// Softmax of utilities over feasible actions.
inline ActionEvaluation normalize(const std::array<double, 9>& utility, const std::array<bool, 9>& feasible) {
    ActionEvaluation e{utility, {}, feasible};
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 9; ++i)
        if (feasible[i]) top = std::max(top, utility[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
        e.probability[i] = feasible[i] ? std::exp(utility[i] - top) : 0.0;
        total += e.probability[i];
    }
    for (auto& pr : e.probability) pr /= total;
    return e;
}

inline ActionEvaluation evaluate(const Perception& p, Action old_dir, const BehaviorWeights& w, const ModelConstants& k) {
    std::array<double, 9> u{};
    std::array<bool, 9> feasible{};
    for (Action a : kActions) {
        const auto i = static_cast<std::size_t>(index_of(a));
        feasible[i] = p.candidates[i].feasible;
        if (feasible[i]) u[i] = utility(components(p, a, old_dir, k), w, a);
    }
    return normalize(u, feasible);
}

/// Inverse-CDF pick with a uniform draw in [0, 1); X when nothing else is feasible.
inline Action choose_action(const ActionEvaluation& e, double u) {
    double cumulative = 0.0;
    Action last = Action::X;
    for (Action a : kActions) {
        const auto i = static_cast<std::size_t>(index_of(a));
        if (!e.feasible[i]) continue;
        cumulative += e.probability[i];
        last = a;
        if (u < cumulative) return a;
    }
    return last;
}

inline Action choose_action(const ActionEvaluation& e, Rng& rng) { return choose_action(e, uniform01(rng)); }

}  // namespace pedsim
