#pragma once
// Simulation world and the three-phase parallel update.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pedsim/behavior.hpp"
#include "pedsim/conflict.hpp"
#include "pedsim/floor_field.hpp"
#include "pedsim/rng.hpp"
#include "pedsim/scenario.hpp"
#include "pedsim/urn.hpp"

namespace pedsim {

class InconsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Applies a slope boundary crossing: entering multiplies the desired speed by k_enter, leaving by k_exit.
/// Leaving through a reciprocal boundary restores the pre-entry speed exactly. The urn restarts at the new
/// ratio so the change shows within the slope rather than after the running cycle.
inline void process_slope_marker(Pedestrian& ped, int area, const SlopeConfig& marker, double speed_max,
                                 int max_denominator = 1000) {
    if (ped.current_area != area) {
        ped.speed_before_area = ped.speed_d;
        ped.area_entry_factor = marker.k_enter;
        ped.current_area = area;
        ped.speed_d *= marker.k_enter;
    } else {
        if (std::abs(marker.k_exit * ped.area_entry_factor - 1.0) <= 1e-9) ped.speed_d = ped.speed_before_area;
        else ped.speed_d *= marker.k_exit;
        ped.current_area.reset();
    }
    if (ped.speed_d > speed_max) {
        spdlog::warn("pedestrian {}: desired speed {:.4f} above maximum after slope {}, clamped", ped.id, ped.speed_d, area);
        ped.speed_d = speed_max;
    }
    ped.urn.restart(frac(ped.speed_d / speed_max, max_denominator));
}

struct PedestrianInit {
    Cell position;
    int dest = 1;
    double speed = 0.0;
    Action old_dir = Action::X;
};

struct StepRecord {
    PedId id = kNoPed;
    Cell from;
    Cell to;
    Action chosen = Action::X;  // tentative action (X when not activated)
    Activation activation = Activation::Skipped;
    bool moved = false;
};

struct StepReport {
    std::uint64_t step = 0;  // index of the step just executed (0-based)
    std::vector<ConflictGroup> conflicts;
    std::vector<ConflictVerdict> verdicts;
    std::vector<StepRecord> records;
    std::vector<PedId> generated;
    std::vector<PedId> absorbed;
    std::size_t capacity_blocks = 0;  // movers held back because their target would exceed two occupants
};

class World {
public:
    explicit World(ScenarioSpec spec) : spec_(std::move(spec)) {
        const auto& geo = spec_.geometry;
        for (const auto* d : spec_.of_kind(MarkerKind::DestinationArea)) path_fields_.emplace(d->id, compute_path_field(spec_, d->id));
        obstacle_field_ = compute_obstacle_field(spec_);
        density_ = DensityField(geo.width, geo.height, geo.boundary, DensityKernel(spec_.params.density_radius, geo.cell_side));
        occupancy_ = Grid<Occupancy>(geo.width, geo.height);
        for (const auto* s : spec_.of_kind(MarkerKind::StartArea)) {
            Spawner sp;
            sp.marker = s;
            sp.rng = make_stream(spec_.params.seed, StreamTag::Spawn, {static_cast<std::uint64_t>(s->id)});
            if (s->start->generation.mode == Generation::Mode::Block)
                sp.pending = static_cast<long long>(std::llround(s->start->generation.amount));
            spawners_.push_back(std::move(sp));
        }
        std::vector<PedId> unused;
        generate(unused);
        refresh();
    }

    const ScenarioSpec& spec() const noexcept { return spec_; }
    const CalibrationParams& params() const noexcept { return spec_.params; }
    std::uint64_t step_count() const noexcept { return step_; }
    double step_duration() const noexcept { return spec_.params.step_duration(spec_.geometry.cell_side); }
    std::size_t generated_total() const noexcept { return generated_total_; }
    std::size_t absorbed_total() const noexcept { return absorbed_total_; }

    const std::vector<Pedestrian>& pedestrians() const noexcept { return peds_; }
    const Pedestrian* find(PedId id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &peds_[it->second];
    }
    const std::vector<Group>& groups() const noexcept { return groups_; }

    const FloorField& path_field(int destination) const { return path_fields_.at(destination); }
    const FloorField& obstacle_field() const noexcept { return obstacle_field_; }
    const FloorField& density_field() const noexcept { return density_.field(); }
    const DensityKernel& density_kernel() const noexcept { return density_.kernel(); }
    const Grid<Occupancy>& occupancy() const noexcept { return occupancy_; }

    CellState cell_state(Cell c) const {
        if (!spec_.layout.at(c).walkable()) return CellObstacle{};
        const auto& o = occupancy_[c];
        if (o.count() == 0) return CellFree{};
        if (o.count() == 1) return CellOnePed{o.first};
        return CellTwoPeds{o.first, o.second};
    }

    /// Places an individual pedestrian; the cell must be walkable and not full.
    PedId add_pedestrian(const PedestrianInit& init) {
        const PedId id = create(init, std::nullopt);
        refresh();
        return id;
    }

    /// Creates a simple group from `members`; returns the group id.
    int add_simple_group(std::span<const PedestrianInit> members) {
        Group g{next_group_id_++, {}, {}};
        for (const auto& m : members) g.members.push_back(create(m, GroupRef{g.id, g.id}));
        groups_.push_back(std::move(g));
        refresh();
        return groups_.back().id;
    }

    /// Creates a structured group with one simple subgroup per entry of `subgroups`.
    int add_structured_group(std::span<const std::vector<PedestrianInit>> subgroups) {
        Group top{next_group_id_++, {}, {}};
        for (const auto& sub : subgroups) {
            Group leaf{next_group_id_++, {}, {}};
            for (const auto& m : sub) leaf.members.push_back(create(m, GroupRef{top.id, leaf.id}));
            top.subgroups.push_back(std::move(leaf));
        }
        groups_.push_back(std::move(top));
        refresh();
        return groups_.back().id;
    }

    /// Ids of every living member of `group_id` (any depth).
    std::vector<PedId> group_members(int group_id) const {
        std::vector<PedId> out;
        for (const auto& g : groups_)
            if (const auto* found = g.find(group_id)) found->for_each_member([&](PedId m) { out.push_back(m); });
        return out;
    }

    StepReport step() {
        StepReport report;
        report.step = step_;
        const auto weights = BehaviorWeights::from(spec_.params);
        const auto constants = ModelConstants::from(spec_.params);
        const auto leaf_weights = balanced_weights(weights);

        // Phase 1: activation and tentative choice against the current snapshot.
        std::vector<Intent> intents(peds_.size());
        std::vector<Cell> simple_cells, structured_cells;
        for (std::size_t i = 0; i < peds_.size(); ++i) {
            auto& ped = peds_[i];
            auto& intent = intents[i];
            const double u = uniform01(ped.rng);
            if (!ped.urn.wants_move(u)) continue;
            intent.activated = true;
            member_cells(ped, simple_cells, structured_cells);
            const WorldView view{spec_, path_fields_.at(ped.dest), obstacle_field_, density_.field(), density_.kernel(), occupancy_};
            const auto perception = perceive(ped, view, constants, simple_cells, structured_cells);
            const auto& w = ped.group ? leaf_weights.at(ped.group->leaf) : weights;
            const auto eval = evaluate(perception, ped.old_dir, w, constants);
            intent.action = choose_action(eval, ped.rng);
            intent.target = perception.candidates[static_cast<std::size_t>(index_of(intent.action))].cell;
            intent.moving = intent.action != Action::X;
        }

        // Phase 2: conflict detection and friction resolution.
        std::map<std::size_t, std::vector<std::size_t>> by_target;
        for (std::size_t i = 0; i < peds_.size(); ++i)
            if (intents[i].moving) by_target[occupancy_.index(intents[i].target)].push_back(i);
        for (auto& [cell_index, contenders] : by_target) {
            if (contenders.size() < 2) continue;
            ConflictGroup group{occupancy_.cell(cell_index), {}};
            for (auto i : contenders) group.contenders.push_back(peds_[i].id);
            Rng rng = make_stream(spec_.params.seed, StreamTag::Conflict, {step_, static_cast<std::uint64_t>(cell_index)});
            auto verdict = resolve_conflict(group, {spec_.params.frict_l, spec_.params.frict_h}, rng,
                                            occupancy_[group.target].count() >= 2);
            for (PedId b : verdict.blocked) {
                auto& in = intents[index_.at(b)];
                in.moving = false;
                in.blocked = true;
            }
            report.conflicts.push_back(std::move(group));
            report.verdicts.push_back(std::move(verdict));
        }
        report.capacity_blocks = enforce_capacity(intents);

        // Phase 3: movement, urn bookkeeping, markers, absorption, generation, field update.
        report.records.reserve(peds_.size());
        for (std::size_t i = 0; i < peds_.size(); ++i) {
            auto& ped = peds_[i];
            const auto& in = intents[i];
            StepRecord rec{ped.id, ped.position, ped.position, in.activated ? in.action : Action::X, Activation::Skipped, false};
            const Cell previous = ped.position;
            ped.last_action = Action::X;
            if (in.moving) {
                ped.position = in.target;
                ped.travel_x += dx(in.action);
                ped.travel_y += dy(in.action);
                ped.last_action = in.action;
                rec.to = in.target;
                rec.moved = true;
            }
            int extra = 0;
            if (rec.moved && is_diagonal(in.action)) {
                const auto rho = ped.urn.rho();
                extra = apply_diag_penalty(ped.diag_penalty, static_cast<double>(rho.den) / static_cast<double>(rho.num));
            }
            if (in.activated) {
                rec.activation = in.blocked ? Activation::Failed : Activation::Succeeded;
                ped.urn.settle(rec.activation, extra);
                ped.old_dir = ped.last_action;
            } else {
                ped.urn.settle(Activation::Skipped, extra);
            }
            if (rec.moved) {
                const auto& tag = spec_.layout[ped.position];
                const auto& prev = spec_.layout[previous];
                if (tag.kind == CellTag::Kind::Slope && !(prev.kind == CellTag::Kind::Slope && prev.id == tag.id && prev.side == tag.side)) {
                    const auto* marker = spec_.find_slope(tag.id, tag.side);
                    process_slope_marker(ped, tag.id, *marker->slope, spec_.params.speed_max, spec_.params.urn_max_denominator);
                }
            }
            report.records.push_back(rec);
        }

        if (spec_.geometry.boundary == BoundaryMode::Open) absorb(report.absorbed);
        ++step_;
        generate(report.generated);
        refresh();
        check_consistency();
        return report;
    }

    /// Verifies that occupancy matches pedestrian positions; throws InconsistencyError otherwise.
    void check_consistency() const {
        Grid<Occupancy> expected(occupancy_.width(), occupancy_.height());
        for (const auto& p : peds_) {
            if (!spec_.layout.at(p.position).walkable())
                throw InconsistencyError(fmt::format("pedestrian {} stands on an obstacle at ({}, {})", p.id, p.position.x, p.position.y));
            auto& o = expected[p.position];
            if (o.first == kNoPed) o.first = p.id;
            else if (o.second == kNoPed) o.second = p.id;
            else throw InconsistencyError(fmt::format("more than two pedestrians in cell ({}, {})", p.position.x, p.position.y));
            if (p.urn.alpha() < 0 || p.urn.alpha() > p.urn.beta())
                throw InconsistencyError(fmt::format("pedestrian {} urn out of range ({}, {})", p.id, p.urn.alpha(), p.urn.beta()));
        }
        if (!(expected == occupancy_)) throw InconsistencyError("occupancy grid does not match pedestrian positions");
    }

private:
    struct Intent {
        bool activated = false;
        bool moving = false;
        bool blocked = false;
        Action action = Action::X;
        Cell target;
    };

    struct Spawner {
        const SpatialMarker* marker = nullptr;
        Rng rng;
        long long pending = 0;    // pedestrians waiting for space
        double accumulator = 0.0;  // fractional frequency arrivals
        std::size_t produced = 0;  // pedestrians emitted so far (drives group composition)
    };

    PedId create(const PedestrianInit& init, std::optional<GroupRef> group) {
        if (!spec_.layout.at(init.position).walkable()) throw std::invalid_argument("pedestrian placed on an obstacle");
        if (occupancy_[init.position].count() >= 2) throw std::invalid_argument("pedestrian placed in a full cell");
        if (!path_fields_.count(init.dest)) throw std::invalid_argument(fmt::format("unknown destination {}", init.dest));
        Pedestrian p;
        p.id = next_id_++;
        p.group = group;
        p.position = init.position;
        p.old_dir = init.old_dir;
        p.dest = init.dest;
        p.speed_d = init.speed;
        p.class_speed = init.speed;
        p.urn = UrnState(frac(init.speed / spec_.params.speed_max, spec_.params.urn_max_denominator));
        p.travel_x = init.position.x;
        p.travel_y = init.position.y;
        p.rng = make_stream(spec_.params.seed, StreamTag::Pedestrian, {static_cast<std::uint64_t>(p.id)});
        auto& o = occupancy_[p.position];
        (o.first == kNoPed ? o.first : o.second) = p.id;
        peds_.push_back(std::move(p));
        index_[peds_.back().id] = peds_.size() - 1;
        ++generated_total_;
        return peds_.back().id;
    }

    std::unordered_map<int, BehaviorWeights> balanced_weights(const BehaviorWeights& base) const {
        std::unordered_map<int, BehaviorWeights> out;
        std::vector<Point2> pts;
        auto visit = [&](const Group& leaf) {
            pts.clear();
            for (PedId m : leaf.members) {
                const auto& p = peds_[index_.at(m)];
                pts.push_back({static_cast<double>(p.travel_x) * spec_.geometry.cell_side,
                               static_cast<double>(p.travel_y) * spec_.geometry.cell_side});
            }
            out[leaf.id] = balance_weights(base, dispersion(pts), spec_.params.delta);
        };
        for (const auto& g : groups_) {
            if (g.is_simple()) visit(g);
            else
                for (const auto& sub : g.subgroups) visit(sub);
        }
        return out;
    }

    void member_cells(const Pedestrian& ped, std::vector<Cell>& simple, std::vector<Cell>& structured) const {
        simple.clear();
        structured.clear();
        if (!ped.group) return;
        for (const auto& g : groups_) {
            if (g.id != ped.group->group) continue;
            if (g.is_simple()) {
                for (PedId m : g.members)
                    if (m != ped.id) simple.push_back(peds_[index_.at(m)].position);
                continue;
            }
            for (const auto& sub : g.subgroups)
                for (PedId m : sub.members)
                    if (m != ped.id) (sub.id == ped.group->leaf ? simple : structured).push_back(peds_[index_.at(m)].position);
        }
    }

    /// Holds back arrivals (highest id first) wherever the post-move count would exceed two, until stable.
    std::size_t enforce_capacity(std::vector<Intent>& intents) {
        std::size_t held = 0;
        while (true) {
            std::unordered_map<std::size_t, std::vector<std::size_t>> arrivals;
            std::unordered_map<std::size_t, int> count;
            for (std::size_t i = 0; i < peds_.size(); ++i) {
                const Cell c = intents[i].moving ? intents[i].target : peds_[i].position;
                const auto key = occupancy_.index(c);
                ++count[key];
                if (intents[i].moving) arrivals[key].push_back(i);
            }
            bool changed = false;
            std::vector<std::size_t> keys;
            for (const auto& [k, n] : count)
                if (n > 2) keys.push_back(k);
            std::sort(keys.begin(), keys.end());
            for (auto k : keys) {
                auto& list = arrivals[k];
                std::sort(list.begin(), list.end());
                int excess = count[k] - 2;
                while (excess-- > 0 && !list.empty()) {
                    auto& in = intents[list.back()];
                    in.moving = false;
                    in.blocked = true;
                    list.pop_back();
                    ++held;
                    changed = true;
                }
            }
            if (!changed) return held;
        }
    }

    void absorb(std::vector<PedId>& absorbed) {
        std::vector<Pedestrian> kept;
        kept.reserve(peds_.size());
        for (auto& p : peds_) {
            const auto& tag = spec_.layout[p.position];
            if (tag.kind == CellTag::Kind::Destination && tag.id == p.dest) {
                absorbed.push_back(p.id);
                continue;
            }
            kept.push_back(std::move(p));
        }
        if (absorbed.empty()) {
            peds_ = std::move(kept);
            return;
        }
        peds_ = std::move(kept);
        absorbed_total_ += absorbed.size();
        auto drop = [&](auto& self, Group& g) -> void {
            std::erase_if(g.members, [&](PedId m) { return std::find(absorbed.begin(), absorbed.end(), m) != absorbed.end(); });
            for (auto& s : g.subgroups) self(self, s);
            std::erase_if(g.subgroups, [](const Group& s) { return s.members.empty() && s.subgroups.empty(); });
        };
        for (auto& g : groups_) drop(drop, g);
        std::erase_if(groups_, [](const Group& g) { return g.members.empty() && g.subgroups.empty(); });
    }

    double sample_speed(Spawner& sp) {
        const auto& classes = sp.marker->start->speeds;
        const double u = uniform01(sp.rng);
        double cumulative = 0.0;
        for (const auto& c : classes) {
            cumulative += c.probability;
            if (u < cumulative) return c.speed;
        }
        return classes.back().speed;
    }

    /// Free start cells for a unit of `n` pedestrians: a random seed cell plus its nearest free neighbours.
    std::vector<Cell> spawn_cells(Spawner& sp, std::size_t n) {
        std::vector<Cell> free;
        for (const auto& c : sp.marker->cells)
            if (occupancy_[c].count() == 0) free.push_back(c);
        if (free.size() < n) return {};
        const Cell seed = free[uniform_index(sp.rng, free.size())];
        std::stable_sort(free.begin(), free.end(), [&](Cell a, Cell b) {
            const auto da = (a.x - seed.x) * (a.x - seed.x) + (a.y - seed.y) * (a.y - seed.y);
            const auto db = (b.x - seed.x) * (b.x - seed.x) + (b.y - seed.y) * (b.y - seed.y);
            return da < db;
        });
        free.resize(n);
        return free;
    }

    void generate(std::vector<PedId>& generated) {
        for (auto& sp : spawners_) {
            const auto& cfg = *sp.marker->start;
            if (cfg.generation.mode == Generation::Mode::Frequency && step_ > 0) {
                sp.accumulator += cfg.generation.amount * step_duration();
                const auto whole = static_cast<long long>(std::floor(sp.accumulator + 1e-12));
                sp.pending += whole;
                sp.accumulator -= static_cast<double>(whole);
            }
            const auto unit = static_cast<std::size_t>(std::max(1, cfg.group.members()));
            while (sp.pending > 0) {
                const auto size = std::min<std::size_t>(unit, static_cast<std::size_t>(sp.pending));
                const auto cells = spawn_cells(sp, size);
                if (cells.empty()) break;  // deferred to a later step
                std::vector<double> speeds;
                for (std::size_t k = 0; k < size; ++k)
                    speeds.push_back(cfg.group.member_speeds.empty() ? sample_speed(sp) : cfg.group.member_speeds[k]);
                spawn_unit(cfg, cells, speeds, generated);
                sp.pending -= static_cast<long long>(size);
                sp.produced += size;
            }
        }
    }

    void spawn_unit(const StartConfig& cfg, const std::vector<Cell>& cells, const std::vector<double>& speeds,
                    std::vector<PedId>& generated) {
        std::vector<PedestrianInit> inits;
        for (std::size_t k = 0; k < cells.size(); ++k) inits.push_back({cells[k], cfg.destination, speeds[k], Action::X});
        switch (cfg.group.kind) {
            case GroupSpec::Kind::None:
                for (const auto& in : inits) generated.push_back(create(in, std::nullopt));
                return;
            case GroupSpec::Kind::Simple: {
                Group g{next_group_id_++, {}, {}};
                for (const auto& in : inits) g.members.push_back(create(in, GroupRef{g.id, g.id}));
                generated.insert(generated.end(), g.members.begin(), g.members.end());
                groups_.push_back(std::move(g));
                return;
            }
            case GroupSpec::Kind::Structured: {
                Group top{next_group_id_++, {}, {}};
                const auto per = static_cast<std::size_t>(cfg.group.size);
                for (std::size_t start = 0; start < inits.size(); start += per) {
                    Group leaf{next_group_id_++, {}, {}};
                    for (std::size_t k = start; k < std::min(inits.size(), start + per); ++k)
                        leaf.members.push_back(create(inits[k], GroupRef{top.id, leaf.id}));
                    generated.insert(generated.end(), leaf.members.begin(), leaf.members.end());
                    top.subgroups.push_back(std::move(leaf));
                }
                groups_.push_back(std::move(top));
                return;
            }
        }
    }

    void refresh() {
        index_.clear();
        for (std::size_t i = 0; i < peds_.size(); ++i) index_[peds_[i].id] = i;
        std::fill(occupancy_.data().begin(), occupancy_.data().end(), Occupancy{});
        positions_.clear();
        for (const auto& p : peds_) {
            auto& o = occupancy_[p.position];
            if (o.first == kNoPed) o.first = p.id;
            else if (o.second == kNoPed) o.second = p.id;
            else throw InconsistencyError(fmt::format("more than two pedestrians in cell ({}, {})", p.position.x, p.position.y));
            positions_.push_back(p.position);
        }
        density_.rebuild(positions_);
    }

    ScenarioSpec spec_;
    std::map<int, FloorField> path_fields_;
    FloorField obstacle_field_;
    DensityField density_;
    Grid<Occupancy> occupancy_;
    std::vector<Pedestrian> peds_;
    std::unordered_map<PedId, std::size_t> index_;
    std::vector<Group> groups_;
    std::vector<Spawner> spawners_;
    std::vector<Cell> positions_;
    std::uint64_t step_ = 0;
    PedId next_id_ = 0;
    int next_group_id_ = 1;
    std::size_t generated_total_ = 0;
    std::size_t absorbed_total_ = 0;
};

/// Rescales block generation so the start areas together emit `total` pedestrians (proportional split).
inline ScenarioSpec override_population(ScenarioSpec spec, long long total) {
    double sum = 0.0;
    std::vector<SpatialMarker*> blocks;
    for (auto& m : spec.markers)
        if (m.kind == MarkerKind::StartArea && m.start->generation.mode == Generation::Mode::Block) {
            blocks.push_back(&m);
            sum += m.start->generation.amount;
        }
    if (blocks.empty()) throw ScenarioSemanticError("population override needs at least one block start area");
    long long assigned = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const double share = sum > 0.0 ? blocks[i]->start->generation.amount / sum : 1.0 / static_cast<double>(blocks.size());
        const long long n = i + 1 == blocks.size() ? total - assigned : std::llround(share * static_cast<double>(total));
        blocks[i]->start->generation.amount = static_cast<double>(n);
        assigned += n;
    }
    return spec;
}

/// Multiplies every frequency start area's rate by `factor`.
inline ScenarioSpec scale_inflow(ScenarioSpec spec, double factor) {
    for (auto& m : spec.markers)
        if (m.kind == MarkerKind::StartArea && m.start->generation.mode == Generation::Mode::Frequency)
            m.start->generation.amount *= factor;
    return spec;
}

}  // namespace pedsim
