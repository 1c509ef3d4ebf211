#pragma once
// Density/speed measurement, per-class speed statistics and cumulative mean density.

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "pedsim/engine.hpp"
#include "pedsim/scenario.hpp"

namespace pedsim {

struct MeasurementArea {
    CellRect rect;
    double area_m2 = 0.0;

    /// Walkable part of `rect`.
    static MeasurementArea of(const ScenarioSpec& spec, CellRect rect) {
        int walkable = 0;
        for (int y = rect.min.y; y <= rect.max.y; ++y)
            for (int x = rect.min.x; x <= rect.max.x; ++x)
                if (spec.layout.at({x, y}).walkable()) ++walkable;
        return {rect, walkable * spec.geometry.cell_area()};
    }
    /// The configured [measure] area, or the whole grid.
    static MeasurementArea from_spec(const ScenarioSpec& spec) {
        return of(spec, spec.measure.area.value_or(CellRect{{0, 0}, {spec.geometry.width - 1, spec.geometry.height - 1}}));
    }
};

/// Remembers the last `window + 1` unwrapped positions of every pedestrian.
class SpeedTracker {
public:
    explicit SpeedTracker(int window = 10) : window_(window) {}

    int window() const noexcept { return window_; }

    void observe(const World& world) {
        std::unordered_map<PedId, std::deque<std::pair<long long, long long>>> next;
        next.reserve(world.pedestrians().size());
        for (const auto& p : world.pedestrians()) {
            auto it = history_.find(p.id);
            auto& h = next[p.id];
            if (it != history_.end()) h = std::move(it->second);
            h.emplace_back(p.travel_x, p.travel_y);
            while (h.size() > static_cast<std::size_t>(window_) + 1) h.pop_front();
        }
        history_ = std::move(next);
    }

    /// Mean speed over the last window in m/s, once a full window is available.
    std::optional<double> speed(PedId id, double cell_side, double step_duration) const {
        auto it = history_.find(id);
        if (it == history_.end() || it->second.size() < static_cast<std::size_t>(window_) + 1) return std::nullopt;
        const auto& [x0, y0] = it->second.front();
        const auto& [x1, y1] = it->second.back();
        const double cells = std::hypot(static_cast<double>(x1 - x0), static_cast<double>(y1 - y0));
        return cells * cell_side / (window_ * step_duration);
    }

private:
    int window_;
    std::unordered_map<PedId, std::deque<std::pair<long long, long long>>> history_;
};

struct FundamentalSample {
    double density = 0.0;     // persons / m^2
    double mean_speed = 0.0;  // m/s
    std::size_t n_samples = 0;  // pedestrians contributing a speed
};

struct ClassSample {
    double class_speed = 0.0;
    double density = 0.0;
    double speed = 0.0;
};

/// Density and mean windowed speed inside `area`; empty when the area holds nobody with a full window.
inline std::optional<FundamentalSample> sample_fundamental(const World& world, const SpeedTracker& tracker,
                                                           const MeasurementArea& area,
                                                           std::vector<ClassSample>* per_pedestrian = nullptr) {
    std::size_t inside = 0;
    double sum = 0.0;
    std::vector<std::pair<double, double>> speeds;
    for (const auto& p : world.pedestrians()) {
        if (!area.rect.contains(p.position)) continue;
        ++inside;
        if (auto v = tracker.speed(p.id, world.spec().geometry.cell_side, world.step_duration())) {
            sum += *v;
            speeds.emplace_back(p.class_speed, *v);
        }
    }
    if (inside == 0 || speeds.empty() || area.area_m2 <= 0.0) return std::nullopt;
    FundamentalSample s{static_cast<double>(inside) / area.area_m2, sum / static_cast<double>(speeds.size()), speeds.size()};
    if (per_pedestrian)
        for (const auto& [cls, v] : speeds) per_pedestrian->push_back({cls, s.density, v});
    return s;
}

/// Per-cell running sum of perceived density (persons/m^2) and visit count.
class CmdGrid {
public:
    CmdGrid() = default;
    CmdGrid(int width, int height) : sum_(width, height, 0.0), count_(width, height, 0) {}

    /// Adds (val(density, position) - 1) / 4 for every pedestrian at its cell.
    void update(const World& world) {
        const auto& density = world.density_field();
        for (const auto& p : world.pedestrians()) {
            sum_[p.position] += (val(density, p.position) - 1.0) / 4.0;
            ++count_[p.position];
        }
    }

    std::optional<double> value(Cell c) const {
        if (count_.at(c) == 0) return std::nullopt;
        return sum_[c] / static_cast<double>(count_[c]);
    }
    std::uint64_t visits(Cell c) const { return count_.at(c); }

    /// Mean grid with unvisited cells set to NaN.
    Grid<double> means() const {
        Grid<double> out(sum_.width(), sum_.height(), std::nan(""));
        for (std::size_t i = 0; i < out.size(); ++i)
            if (count_.data()[i] > 0) out.data()[i] = sum_.data()[i] / static_cast<double>(count_.data()[i]);
        return out;
    }

private:
    Grid<double> sum_;
    Grid<std::uint64_t> count_;
};

inline void update_cmd(CmdGrid& cmd, const World& world) { cmd.update(world); }

struct ClassSpeedRow {
    double class_speed = 0.0;
    double density_bin = 0.0;  // lower edge, persons/m^2
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

/// Groups samples by speed class and density bin; sd is the sample standard deviation (0 when n == 1).
inline std::vector<ClassSpeedRow> per_class_speeds(const std::vector<ClassSample>& samples, double bin_width = 0.5) {
    struct Acc {
        double sum = 0.0, sum_sq = 0.0;
        std::size_t n = 0;
    };
    std::map<std::pair<double, long long>, Acc> acc;
    for (const auto& s : samples) {
        auto& a = acc[{s.class_speed, static_cast<long long>(std::floor(s.density / bin_width))}];
        a.sum += s.speed;
        a.sum_sq += s.speed * s.speed;
        ++a.n;
    }
    std::vector<ClassSpeedRow> rows;
    for (const auto& [key, a] : acc) {
        const double mean = a.sum / static_cast<double>(a.n);
        const double var = a.n > 1 ? std::max(0.0, (a.sum_sq - a.n * mean * mean) / static_cast<double>(a.n - 1)) : 0.0;
        rows.push_back({key.first, static_cast<double>(key.second) * bin_width, mean, std::sqrt(var), a.n});
    }
    return rows;
}

/// Overall mean observed speed of a class, across density bins.
inline std::optional<double> class_mean(const std::vector<ClassSample>& samples, double class_speed) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples)
        if (std::abs(s.class_speed - class_speed) < 1e-9) {
            sum += s.speed;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

/// Owns every run-time accumulator; observations before `warmup_steps` only feed the speed tracker.
class MetricsAccumulator {
public:
    MetricsAccumulator(const ScenarioSpec& spec, std::uint64_t warmup_steps)
        : area_(MeasurementArea::from_spec(spec)), tracker_(spec.measure.window),
          cmd_(spec.geometry.width, spec.geometry.height), warmup_(warmup_steps) {}

    void observe(const World& world) {
        tracker_.observe(world);
        if (world.step_count() < warmup_) return;
        if (auto s = sample_fundamental(world, tracker_, area_, &class_samples_)) fd_.push_back(*s);
        cmd_.update(world);
    }

    const MeasurementArea& area() const noexcept { return area_; }
    const std::vector<FundamentalSample>& fundamental() const noexcept { return fd_; }
    const std::vector<ClassSample>& class_samples() const noexcept { return class_samples_; }
    const CmdGrid& cmd() const noexcept { return cmd_; }

private:
    MeasurementArea area_;
    SpeedTracker tracker_;
    CmdGrid cmd_;
    std::uint64_t warmup_;
    std::vector<FundamentalSample> fd_;
    std::vector<ClassSample> class_samples_;
};

inline void write_fd_csv(std::ostream& out, const std::vector<FundamentalSample>& samples, bool header = true) {
    if (header) out << "density,mean_speed,n_samples\n";
    for (const auto& s : samples) out << fmt::format("{:.6f},{:.6f},{}\n", s.density, s.mean_speed, s.n_samples);
}

inline void write_classes_csv(std::ostream& out, const std::vector<ClassSpeedRow>& rows) {
    out << "class,density_bin,mean,sd,n\n";
    for (const auto& r : rows)
        out << fmt::format("{:.4f},{:.4f},{:.6f},{:.6f},{}\n", r.class_speed, r.density_bin, r.mean, r.sd, r.n);
}

/// trajectories.csv rows: step, id, x, y, action, speed_d, area (empty outside slopes).
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(std::ostream& out) : out_(out) { out_ << "step,id,x,y,action,speed_d,area\n"; }

    void write(const World& world) {
        for (const auto& p : world.pedestrians()) {
            out_ << fmt::format("{},{},{},{},{},{:.6f},{}\n", world.step_count(), p.id, p.position.x, p.position.y,
                                to_string(p.last_action), p.speed_d,
                                p.current_area ? fmt::format("{}", *p.current_area) : std::string());
        }
    }

private:
    std::ostream& out_;
};

}  // namespace pedsim
