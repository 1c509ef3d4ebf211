#pragma once
// Static path/obstacle fields and the per-step density field.

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include <spdlog/spdlog.h>

#include "pedsim/scenario.hpp"
#include "pedsim/types.hpp"

namespace pedsim {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

inline bool is_unreachable(double v) noexcept { return v == kUnreachable; }

struct FloorField {
    enum class Kind : std::uint8_t { Path, Obstacle, Density };
    Kind kind = Kind::Path;
    int destination = 0;  // Path fields only
    Grid<double> values;

    int width() const noexcept { return values.width(); }
    int height() const noexcept { return values.height(); }
};

/// Value lookup; unreachable path cells return kUnreachable. Throws std::out_of_range outside the grid.
inline double val(const FloorField& field, Cell c) { return field.values.at(c); }

namespace detail {

struct QueueEntry {
    double dist;
    std::size_t index;
    bool operator>(const QueueEntry& o) const noexcept { return dist > o.dist || (dist == o.dist && index > o.index); }
};

/// 8-connected Dijkstra with unit/sqrt(2) costs. `passable(c)` gates both expansion and entry;
/// with `no_corner_cutting`, a diagonal step is rejected when either shared orthogonal neighbour is impassable.
inline void spread(Grid<double>& dist, BoundaryMode mode, const std::function<bool(Cell)>& passable, bool no_corner_cutting) {
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> open;
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (dist.data()[i] < kUnreachable) open.push({dist.data()[i], i});
    const int w = dist.width(), h = dist.height();
    while (!open.empty()) {
        const auto [d, i] = open.top();
        open.pop();
        if (d > dist.data()[i]) continue;
        const Cell from = dist.cell(i);
        for (Action a : kActions) {
            if (a == Action::X) continue;
            Cell to;
            if (!neighbour(from, a, w, h, mode, to) || !passable(to)) continue;
            if (no_corner_cutting && is_diagonal(a)) {
                Cell side1, side2;
                const bool ok1 = neighbour(from, action_from_offset(dx(a), 0), w, h, mode, side1) && passable(side1);
                const bool ok2 = neighbour(from, action_from_offset(0, dy(a)), w, h, mode, side2) && passable(side2);
                if (!ok1 || !ok2) continue;
            }
            const double nd = d + step_length(a);
            auto& slot = dist[to];
            if (nd < slot) {
                slot = nd;
                open.push({nd, dist.index(to)});
            }
        }
    }
}

}  // namespace detail

/// Shortest 8-connected walking distance (1 orthogonal, sqrt 2 diagonal) to the nearest cell of `destination`.
/// Obstacles block propagation and corner-cutting diagonals are excluded. The field does not wrap in
/// periodic-x mode; callers compare values across the seam with `periodic_path_value`.
inline FloorField compute_path_field(const ScenarioSpec& spec, int destination) {
    const auto* marker = spec.find(MarkerKind::DestinationArea, destination);
    if (!marker) throw std::invalid_argument(fmt::format("unknown destination {}", destination));
    FloorField f{FloorField::Kind::Path, destination, Grid<double>(spec.geometry.width, spec.geometry.height, kUnreachable)};
    for (const auto& c : marker->cells) f.values[c] = 0.0;
    detail::spread(f.values, BoundaryMode::Open, [&](Cell c) { return spec.layout[c].walkable(); }, true);

    bool any_open = false;
    for (const auto& c : marker->cells) {
        for (Action a : kActions) {
            Cell n;
            if (a != Action::X && neighbour(c, a, spec.geometry.width, spec.geometry.height, BoundaryMode::Open, n) &&
                spec.layout[n].walkable() && !is_unreachable(f.values[n]) && f.values[n] > 0.0)
                any_open = true;
        }
    }
    if (!any_open && spec.walkable_count() > marker->cells.size())
        spdlog::warn("destination {} is enclosed by obstacles; its path field is unreachable everywhere else", destination);
    return f;
}

/// Distance to the nearest obstacle or boundary wall, same metric as the path field.
/// Walls sit just outside the grid (x in open mode, y always), so border cells hold at most 1.
inline FloorField compute_obstacle_field(const ScenarioSpec& spec) {
    const int w = spec.geometry.width, h = spec.geometry.height;
    const bool periodic = spec.geometry.boundary == BoundaryMode::PeriodicX;
    FloorField f{FloorField::Kind::Obstacle, 0, Grid<double>(w, h, kUnreachable)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Cell c{x, y};
            if (!spec.layout[c].walkable()) {
                f.values[c] = 0.0;
                continue;
            }
            const bool wall_x = !periodic && (x == 0 || x == w - 1);
            const bool wall_y = y == 0 || y == h - 1;
            if (wall_x || wall_y) f.values[c] = 1.0;
        }
    }
    detail::spread(f.values, spec.geometry.boundary, [](Cell) { return true; }, false);
    return f;
}

/// Precomputed density-kernel offsets: every cell within `radius_cells` (Euclidean, centre to centre) except the origin.
class DensityKernel {
public:
    struct Tap {
        int ox, oy;
        double weight;
    };

    DensityKernel() = default;
    DensityKernel(double radius_m, double cell_side = kCellSide) {
        if (!(radius_m > 0.0)) throw std::invalid_argument("density radius must be positive");
        const double r = radius_m / cell_side;
        const int reach = static_cast<int>(std::floor(r + 1e-9));
        for (int oy = -reach; oy <= reach; ++oy) {
            for (int ox = -reach; ox <= reach; ++ox) {
                if (ox == 0 && oy == 0) continue;
                const double d2 = static_cast<double>(ox * ox + oy * oy);
                if (std::sqrt(d2) * cell_side <= radius_m + 1e-9) taps_.push_back({ox, oy, 1.0 / d2});
            }
        }
    }

    std::span<const Tap> taps() const noexcept { return taps_; }

    /// Contribution of a pedestrian at offset (ox, oy) from the evaluated cell.
    double weight(int ox, int oy) const noexcept {
        if (ox == 0 && oy == 0) return 1.0;
        for (const auto& t : taps_)
            if (t.ox == ox && t.oy == oy) return t.weight;
        return 0.0;
    }

private:
    std::vector<Tap> taps_;
};

/// Incrementally rebuilt density field: each rebuild clears only the cells the previous one touched.
class DensityField {
public:
    DensityField() = default;
    DensityField(int width, int height, BoundaryMode mode, DensityKernel kernel)
        : field_{FloorField::Kind::Density, 0, Grid<double>(width, height, 0.0)}, mode_(mode), kernel_(std::move(kernel)) {}

    void rebuild(std::span<const Cell> positions) {
        auto& v = field_.values;
        for (auto i : touched_) v.data()[i] = 0.0;
        touched_.clear();
        const int w = v.width(), h = v.height();
        for (const Cell& p : positions) {
            add(p, 1.0);
            for (const auto& t : kernel_.taps()) {
                Cell c{p.x + t.ox, p.y + t.oy};
                if (mode_ == BoundaryMode::PeriodicX) c.x = ((c.x % w) + w) % w;
                if (c.x < 0 || c.y < 0 || c.x >= w || c.y >= h) continue;
                add(c, t.weight);
            }
        }
    }

    const FloorField& field() const noexcept { return field_; }
    const DensityKernel& kernel() const noexcept { return kernel_; }

private:
    void add(Cell c, double amount) {
        auto& slot = field_.values[c];
        if (slot == 0.0) touched_.push_back(field_.values.index(c));
        slot += amount;
    }

    FloorField field_;
    BoundaryMode mode_ = BoundaryMode::Open;
    DensityKernel kernel_;
    std::vector<std::size_t> touched_;
};

/// One-shot density field from pedestrian positions (1 on the own cell, 1/d^2 within `radius_m`).
inline FloorField compute_density_field(int width, int height, std::span<const Cell> positions, double radius_m,
                                        BoundaryMode mode = BoundaryMode::Open) {
    DensityField d(width, height, mode, DensityKernel(radius_m));
    d.rebuild(positions);
    return d.field();
}

/// Path value of `target` as seen from `from`, unrolling the periodic seam so neighbouring values stay comparable.
inline double periodic_path_value(const FloorField& path, Cell from, Cell target, BoundaryMode mode) {
    const double raw = path.values[target];
    if (mode != BoundaryMode::PeriodicX || std::abs(target.x - from.x) <= 1 || is_unreachable(raw)) return raw;
    const double period = static_cast<double>(path.width());
    const double here = path.values[from];
    const double lo = raw - period, hi = raw + period;
    double best = raw;
    if (std::abs(lo - here) < std::abs(best - here)) best = lo;
    if (std::abs(hi - here) < std::abs(best - here)) best = hi;
    return best;
}

}  // namespace pedsim
