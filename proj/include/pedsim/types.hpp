#pragma once
// Basic grid vocabulary shared by every pedsim module.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace pedsim {

inline constexpr double kCellSide = 0.4;  // metres
inline constexpr double kSqrt2 = std::numbers::sqrt2;

using PedId = std::int32_t;
inline constexpr PedId kNoPed = -1;

struct Cell {
    int x = 0;
    int y = 0;
    friend constexpr bool operator==(const Cell&, const Cell&) = default;
    friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

/// Moore-neighbourhood actions, in the canonical order NW,N,NE,W,X,E,SW,S,SE.
/// North is decreasing y (row 0 is the top row of a map).
enum class Action : std::uint8_t { NW, N, NE, W, X, E, SW, S, SE };

inline constexpr std::array<Action, 9> kActions = {Action::NW, Action::N, Action::NE, Action::W, Action::X,
                                                   Action::E,  Action::SW, Action::S, Action::SE};

constexpr int index_of(Action a) noexcept { return static_cast<int>(a); }
constexpr int dx(Action a) noexcept { return index_of(a) % 3 - 1; }
constexpr int dy(Action a) noexcept { return index_of(a) / 3 - 1; }
constexpr bool is_diagonal(Action a) noexcept { return dx(a) != 0 && dy(a) != 0; }

constexpr Action action_from_offset(int ox, int oy) {
    if (ox < -1 || ox > 1 || oy < -1 || oy > 1) throw std::invalid_argument("offset outside Moore neighbourhood");
    return kActions[static_cast<std::size_t>((oy + 1) * 3 + (ox + 1))];
}

/// Divisor applied to an action's utility: sqrt(2) for diagonals, 1 otherwise.
constexpr double step_length(Action a) noexcept { return is_diagonal(a) ? kSqrt2 : 1.0; }

/// Number of 45 degree turns between two movement actions (0..4); -1 when either is X.
constexpr int turn_distance(Action a, Action b) noexcept {
    // Position of each action on the compass ring N,NE,E,SE,S,SW,W,NW.
    constexpr std::array<int, 9> ring = {7, 0, 1, 6, -1, 2, 5, 4, 3};
    const int ra = ring[static_cast<std::size_t>(index_of(a))];
    const int rb = ring[static_cast<std::size_t>(index_of(b))];
    if (ra < 0 || rb < 0) return -1;
    const int d = ra > rb ? ra - rb : rb - ra;
    return d > 4 ? 8 - d : d;
}

constexpr std::string_view to_string(Action a) noexcept {
    constexpr std::array<std::string_view, 9> names = {"NW", "N", "NE", "W", "X", "E", "SW", "S", "SE"};
    return names[static_cast<std::size_t>(index_of(a))];
}

enum class BoundaryMode : std::uint8_t { Open, PeriodicX };

/// Dense row-major grid.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
        if (width < 1 || height < 1) throw std::invalid_argument("grid dimensions must be >= 1");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    bool contains(Cell c) const noexcept { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
    std::size_t index(Cell c) const noexcept {
        return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.x);
    }
    Cell cell(std::size_t i) const noexcept {
        return {static_cast<int>(i % static_cast<std::size_t>(width_)), static_cast<int>(i / static_cast<std::size_t>(width_))};
    }

    T& operator[](Cell c) noexcept { return data_[index(c)]; }
    const T& operator[](Cell c) const noexcept { return data_[index(c)]; }
    T& at(Cell c) {
        if (!contains(c)) throw std::out_of_range("cell outside grid");
        return data_[index(c)];
    }
    const T& at(Cell c) const {
        if (!contains(c)) throw std::out_of_range("cell outside grid");
        return data_[index(c)];
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Resolves the cell reached from `from` by `a`, wrapping x in periodic mode.
/// Returns false when the move leaves an open grid.
inline bool neighbour(Cell from, Action a, int width, int height, BoundaryMode mode, Cell& out) noexcept {
    Cell c{from.x + dx(a), from.y + dy(a)};
    if (mode == BoundaryMode::PeriodicX) {
        if (c.x < 0) c.x += width;
        if (c.x >= width) c.x -= width;
    }
    if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) return false;
    out = c;
    return true;
}

}  // namespace pedsim
