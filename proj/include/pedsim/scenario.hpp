#pragma once
// Scenario description: grid geometry, spatial markers, calibration parameters,
// and the plain-text scenario file format.
//
// File layout (one section per bracketed header; `;` starts a comment that runs to the end of the line):
//
//   [map]            one row per line; `.` free, `#` obstacle, `S<n>` start,
//                    `D<n>` destination, `A<n>a` / `A<n>b` slope boundaries.
//                    Cells may be comma separated; otherwise marker ids are read greedily.
//   [params]         key = value calibration parameters
//   [start.<n>]      generation, speeds, destination, group, group_speeds
//   [slope.<n>]      k_enter_a, k_exit_a, k_enter_b, k_exit_b
//   [measure]        area = x0 y0 x1 y1 (inclusive), window = steps
//
// Numeric values accept decimals or simple fractions (`1/3`).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "pedsim/types.hpp"

namespace pedsim {

class ScenarioSyntaxError : public std::runtime_error {
public:
    ScenarioSyntaxError(int line, int column, const std::string& message)
        : std::runtime_error(fmt::format("line {}, column {}: {}", line, column, message)), line_(line), column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

class ScenarioSemanticError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridGeometry {
    int width = 1;
    int height = 1;
    double cell_side = kCellSide;
    BoundaryMode boundary = BoundaryMode::Open;

    double cell_area() const noexcept { return cell_side * cell_side; }
    /// Persons per square metre when every cell holds one pedestrian.
    double max_density() const noexcept { return 1.0 / cell_area(); }
    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

enum class MarkerKind : std::uint8_t { StartArea, DestinationArea, Obstacle, SlopeBoundary };

struct SpeedClass {
    double speed = 0.0;  // m/s
    double probability = 0.0;
    friend bool operator==(const SpeedClass&, const SpeedClass&) = default;
};

struct Generation {
    enum class Mode : std::uint8_t { Block, Frequency };
    Mode mode = Mode::Block;
    double amount = 0.0;  // pedestrian count for Block, persons per second for Frequency
    friend bool operator==(const Generation&, const Generation&) = default;
};

struct GroupSpec {
    enum class Kind : std::uint8_t { None, Simple, Structured };
    Kind kind = Kind::None;
    int subgroups = 0;  // structured only
    int size = 0;       // members per simple group (or per subgroup)
    std::vector<double> member_speeds;  // optional, overrides sampled speeds in member order

    int members() const noexcept {
        switch (kind) {
            case Kind::None: return 1;
            case Kind::Simple: return size;
            case Kind::Structured: return subgroups * size;
        }
        return 1;
    }
    friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

struct StartConfig {
    Generation generation;
    std::vector<SpeedClass> speeds;
    int destination = 0;
    GroupSpec group;
    friend bool operator==(const StartConfig&, const StartConfig&) = default;
};

enum class SlopeSide : std::uint8_t { A, B };

struct SlopeConfig {
    SlopeSide side = SlopeSide::A;
    double k_enter = 1.0;
    double k_exit = 1.0;
    friend bool operator==(const SlopeConfig&, const SlopeConfig&) = default;
};

struct SpatialMarker {
    MarkerKind kind = MarkerKind::Obstacle;
    int id = 0;  // start/destination id, slope area id; 0 for the obstacle marker
    std::vector<Cell> cells;
    std::optional<StartConfig> start;
    std::optional<SlopeConfig> slope;
    friend bool operator==(const SpatialMarker&, const SpatialMarker&) = default;
};

/// Behavioural weights and model constants. Defaults are the values the shipped scenarios are tuned with.
struct CalibrationParams {
    double kappa_goal = 14.0;
    double kappa_obstacle = 1.0;
    double kappa_social = 3.0;
    double kappa_cohesion = 45.0;
    double kappa_structured = 2.0;
    double kappa_direction = 3.0;
    double kappa_overlap = 4.0;
    double delta = 2.5;              // dispersion scale, m^2 per person
    double density_radius = 1.2;     // metres
    double frict_l = 0.4;
    double frict_h = 0.9;
    double speed_max = 1.6;          // m/s
    double perception_distance = 5.0;  // metres
    std::uint64_t seed = 1;
    double rho_sat = 4.0;            // density-field value at which social repulsion saturates
    double obstacle_span = 2.0;      // cells over which obstacle repulsion decays to zero
    double overlap_threshold = 10.0;  // density at the current cell required to step onto an occupied cell (about a full neighbourhood)
    int urn_max_denominator = 1000;

    double step_duration(double cell_side = kCellSide) const noexcept { return cell_side / speed_max; }
    friend bool operator==(const CalibrationParams&, const CalibrationParams&) = default;
};

struct CellRect {
    Cell min;
    Cell max;  // inclusive
    bool contains(Cell c) const noexcept { return c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y; }
    int cell_count() const noexcept { return (max.x - min.x + 1) * (max.y - min.y + 1); }
    friend bool operator==(const CellRect&, const CellRect&) = default;
};

struct MeasureConfig {
    std::optional<CellRect> area;
    int window = 10;
    friend bool operator==(const MeasureConfig&, const MeasureConfig&) = default;
};

/// What a single map cell carries.
struct CellTag {
    enum class Kind : std::uint8_t { Free, Obstacle, Start, Destination, Slope };
    Kind kind = Kind::Free;
    int id = 0;
    SlopeSide side = SlopeSide::A;
    bool walkable() const noexcept { return kind != Kind::Obstacle; }
    friend bool operator==(const CellTag&, const CellTag&) = default;
};

struct ScenarioSpec {
    GridGeometry geometry;
    std::vector<SpatialMarker> markers;
    CalibrationParams params;
    MeasureConfig measure;
    Grid<CellTag> layout;

    bool walkable(Cell c) const { return layout.at(c).walkable(); }

    const SpatialMarker* find(MarkerKind kind, int id) const noexcept {
        for (const auto& m : markers)
            if (m.kind == kind && m.id == id && (kind != MarkerKind::SlopeBoundary)) return &m;
        return nullptr;
    }
    const SpatialMarker* find_slope(int area, SlopeSide side) const noexcept {
        for (const auto& m : markers)
            if (m.kind == MarkerKind::SlopeBoundary && m.id == area && m.slope && m.slope->side == side) return &m;
        return nullptr;
    }
    std::vector<const SpatialMarker*> of_kind(MarkerKind kind) const {
        std::vector<const SpatialMarker*> out;
        for (const auto& m : markers)
            if (m.kind == kind) out.push_back(&m);
        return out;
    }
    std::size_t walkable_count() const {
        return static_cast<std::size_t>(
            std::count_if(layout.data().begin(), layout.data().end(), [](const CellTag& t) { return t.walkable(); }));
    }

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) noexcept {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        const auto start = i;
        while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
        if (i > start) parts.push_back(s.substr(start, i - start));
    }
    return parts;
}

inline std::optional<double> parse_real(std::string_view s) {
    s = trim(s);
    const auto slash = s.find('/');
    if (slash != std::string_view::npos) {
        auto num = parse_real(s.substr(0, slash));
        auto den = parse_real(s.substr(slash + 1));
        if (!num || !den || *den == 0.0) return std::nullopt;
        return *num / *den;
    }
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return v;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct Line {
    int number;
    std::string_view text;
};

class Parser {
public:
    explicit Parser(std::string_view text) {
        int n = 0;
        std::size_t start = 0;
        while (start <= text.size()) {
            auto pos = text.find('\n', start);
            if (pos == std::string_view::npos) pos = text.size();
            ++n;
            lines_.push_back({n, text.substr(start, pos - start)});
            start = pos + 1;
        }
    }

    ScenarioSpec run() {
        std::string section;
        std::vector<Line> map_rows;
        for (const auto& line : lines_) {
            auto t = trim(line.text);
            if (const auto semi = t.find(';'); semi != std::string_view::npos) t = trim(t.substr(0, semi));
            if (t.empty()) continue;
            if (t.front() == '[') {
                if (t.back() != ']') fail(line, column_of(line, t) + static_cast<int>(t.size()) - 1, "unterminated section header");
                section = std::string(trim(t.substr(1, t.size() - 2)));
                if (!seen_sections_.insert(section).second) fail(line, column_of(line, t), "duplicate section [" + section + "]");
                open_section(line, section);
                continue;
            }
            if (section.empty()) fail(line, column_of(line, t), "content outside of any section");
            if (section == "map") {
                map_rows.push_back({line.number, t});
            } else {
                key_value(line, t, section);
            }
        }
        if (map_rows.empty()) throw ScenarioSyntaxError(1, 1, "missing or empty [map] section");
        build_map(map_rows);
        return finish();
    }

private:
    [[noreturn]] static void fail(const Line& line, int column, const std::string& message) {
        throw ScenarioSyntaxError(line.number, column, message);
    }
    static int column_of(const Line& line, std::string_view part) noexcept {
        return static_cast<int>(part.data() - line.text.data()) + 1;
    }

    void open_section(const Line& line, const std::string& name) {
        if (name == "map" || name == "params" || name == "measure") return;
        const auto dot = name.find('.');
        if (dot != std::string::npos) {
            const auto kind = name.substr(0, dot);
            const auto id = parse_int(std::string_view(name).substr(dot + 1));
            if (id && *id > 0 && (kind == "start" || kind == "slope")) {
                if (kind == "start") starts_[static_cast<int>(*id)] = {};
                else slopes_[static_cast<int>(*id)] = {};
                return;
            }
        }
        fail(line, 1, "unknown section [" + name + "]");
    }

    double real(const Line& line, std::string_view v) {
        auto r = parse_real(v);
        if (!r) fail(line, column_of(line, v), "expected a number, got '" + std::string(v) + "'");
        return *r;
    }

    void key_value(const Line& line, std::string_view t, const std::string& section) {
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) fail(line, column_of(line, t), "expected key = value");
        const auto key = trim(t.substr(0, eq));
        const auto value = trim(t.substr(eq + 1));
        if (key.empty()) fail(line, column_of(line, t), "empty key");
        if (value.empty()) fail(line, column_of(line, t) + static_cast<int>(eq) + 1, "empty value");
        if (section == "params") param(line, key, value);
        else if (section == "measure") measure(line, key, value);
        else if (section.starts_with("start.")) start(line, std::stoi(section.substr(6)), key, value);
        else slope(line, std::stoi(section.substr(6)), key, value);
    }

    void param(const Line& line, std::string_view key, std::string_view value) {
        auto& p = spec_.params;
        const std::map<std::string_view, double*> reals = {
            {"kappa_g", &p.kappa_goal},          {"kappa_ob", &p.kappa_obstacle},
            {"kappa_s", &p.kappa_social},        {"kappa_c", &p.kappa_cohesion},
            {"kappa_i", &p.kappa_structured},    {"kappa_d", &p.kappa_direction},
            {"kappa_ov", &p.kappa_overlap},      {"delta", &p.delta},
            {"density_radius", &p.density_radius}, {"frict_l", &p.frict_l},
            {"frict_h", &p.frict_h},             {"speed_max", &p.speed_max},
            {"perception_distance", &p.perception_distance}, {"rho_sat", &p.rho_sat},
            {"obstacle_span", &p.obstacle_span}, {"overlap_threshold", &p.overlap_threshold},
        };
        if (auto it = reals.find(key); it != reals.end()) {
            *it->second = real(line, value);
        } else if (key == "seed") {
            auto v = parse_int(value);
            if (!v || *v < 0) fail(line, column_of(line, value), "seed must be a non-negative integer");
            p.seed = static_cast<std::uint64_t>(*v);
        } else if (key == "urn_max_denominator") {
            auto v = parse_int(value);
            if (!v || *v < 1) fail(line, column_of(line, value), "urn_max_denominator must be a positive integer");
            p.urn_max_denominator = static_cast<int>(*v);
        } else if (key == "boundary") {
            if (value == "open") spec_.geometry.boundary = BoundaryMode::Open;
            else if (value == "periodic-x") spec_.geometry.boundary = BoundaryMode::PeriodicX;
            else fail(line, column_of(line, value), "boundary must be 'open' or 'periodic-x'");
        } else if (key == "cell_side") {
            const double side = real(line, value);
            if (std::abs(side - kCellSide) > 1e-12) fail(line, column_of(line, value), "cell_side is fixed at 0.4 m");
        } else {
            fail(line, column_of(line, key), "unknown parameter '" + std::string(key) + "'");
        }
    }

    void measure(const Line& line, std::string_view key, std::string_view value) {
        if (key == "area") {
            const auto parts = split_ws(value);
            if (parts.size() != 4) fail(line, column_of(line, value), "area expects x0 y0 x1 y1");
            std::array<int, 4> v{};
            for (std::size_t i = 0; i < 4; ++i) {
                auto n = parse_int(parts[i]);
                if (!n) fail(line, column_of(line, parts[i]), "expected an integer");
                v[i] = static_cast<int>(*n);
            }
            spec_.measure.area = CellRect{{v[0], v[1]}, {v[2], v[3]}};
        } else if (key == "window") {
            auto n = parse_int(value);
            if (!n || *n < 1) fail(line, column_of(line, value), "window must be a positive integer");
            spec_.measure.window = static_cast<int>(*n);
        } else {
            fail(line, column_of(line, key), "unknown measure key '" + std::string(key) + "'");
        }
    }

    void start(const Line& line, int id, std::string_view key, std::string_view value) {
        auto& s = starts_[id];
        if (key == "generation") {
            const auto parts = split_ws(value);
            if (parts.size() != 2) fail(line, column_of(line, value), "generation expects 'block <n>' or 'frequency <r>'");
            if (parts[0] == "block") {
                auto n = parse_int(parts[1]);
                if (!n || *n < 0) fail(line, column_of(line, parts[1]), "block count must be a non-negative integer");
                s.generation = {Generation::Mode::Block, static_cast<double>(*n)};
            } else if (parts[0] == "frequency") {
                const double r = real(line, parts[1]);
                if (r < 0.0) fail(line, column_of(line, parts[1]), "frequency must be non-negative");
                s.generation = {Generation::Mode::Frequency, r};
            } else {
                fail(line, column_of(line, parts[0]), "unknown generation mode '" + std::string(parts[0]) + "'");
            }
        } else if (key == "speeds") {
            s.speeds.clear();
            for (auto entry : split(value, ',')) {
                const auto colon = entry.find(':');
                if (colon == std::string_view::npos) fail(line, column_of(line, entry), "speed class expects speed:probability");
                s.speeds.push_back({real(line, trim(entry.substr(0, colon))), real(line, trim(entry.substr(colon + 1)))});
            }
        } else if (key == "destination") {
            auto n = parse_int(value);
            if (!n) fail(line, column_of(line, value), "destination must be an integer id");
            s.destination = static_cast<int>(*n);
        } else if (key == "group") {
            const auto parts = split_ws(value);
            if (parts.size() == 1 && parts[0] == "none") {
                s.group.kind = GroupSpec::Kind::None;
            } else if (parts.size() == 2 && parts[0] == "simple") {
                auto n = parse_int(parts[1]);
                if (!n || *n < 1) fail(line, column_of(line, parts[1]), "group size must be a positive integer");
                s.group.kind = GroupSpec::Kind::Simple;
                s.group.size = static_cast<int>(*n);
            } else if (parts.size() == 2 && parts[0] == "structured") {
                const auto x = parts[1].find('x');
                std::optional<long long> m, n;
                if (x != std::string_view::npos) {
                    m = parse_int(parts[1].substr(0, x));
                    n = parse_int(parts[1].substr(x + 1));
                }
                if (!m || !n || *m < 1 || *n < 1) fail(line, column_of(line, parts[1]), "structured group expects <subgroups>x<size>");
                s.group.kind = GroupSpec::Kind::Structured;
                s.group.subgroups = static_cast<int>(*m);
                s.group.size = static_cast<int>(*n);
            } else {
                fail(line, column_of(line, value), "group expects 'none', 'simple <n>' or 'structured <m>x<n>'");
            }
        } else if (key == "group_speeds") {
            s.group.member_speeds.clear();
            for (auto entry : split(value, ',')) s.group.member_speeds.push_back(real(line, entry));
        } else {
            fail(line, column_of(line, key), "unknown start key '" + std::string(key) + "'");
        }
    }

    void slope(const Line& line, int id, std::string_view key, std::string_view value) {
        auto& s = slopes_[id];
        const double v = real(line, value);
        if (key == "k_enter_a") s.enter_a = v;
        else if (key == "k_exit_a") s.exit_a = v;
        else if (key == "k_enter_b") s.enter_b = v;
        else if (key == "k_exit_b") s.exit_b = v;
        else fail(line, column_of(line, key), "unknown slope key '" + std::string(key) + "'");
    }

    void build_map(const std::vector<Line>& rows) {
        std::vector<std::vector<CellTag>> tags;
        for (const auto& row : rows) {
            std::vector<CellTag> cells;
            if (row.text.find(',') != std::string_view::npos) {
                for (auto token : split(row.text, ',')) cells.push_back(tag(row, token));
            } else {
                // Marker ids are read greedily: `S12` is one cell, a bare digit never is.
                for (std::size_t i = 0; i < row.text.size();) {
                    std::size_t end = i + 1;
                    const char c = row.text[i];
                    if (c == 'S' || c == 'D' || c == 'A') {
                        while (end < row.text.size() && std::isdigit(static_cast<unsigned char>(row.text[end]))) ++end;
                        if (c == 'A' && end < row.text.size() && (row.text[end] == 'a' || row.text[end] == 'b')) ++end;
                    }
                    cells.push_back(tag(row, row.text.substr(i, end - i)));
                    i = end;
                }
            }
            if (!tags.empty() && cells.size() != tags.front().size())
                fail(row, 1, fmt::format("map row has {} cells, expected {}", cells.size(), tags.front().size()));
            tags.push_back(std::move(cells));
        }
        spec_.geometry.width = static_cast<int>(tags.front().size());
        spec_.geometry.height = static_cast<int>(tags.size());
        spec_.layout = Grid<CellTag>(spec_.geometry.width, spec_.geometry.height);
        for (int y = 0; y < spec_.geometry.height; ++y)
            for (int x = 0; x < spec_.geometry.width; ++x)
                spec_.layout[{x, y}] = tags[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
    }

    CellTag tag(const Line& row, std::string_view token) {
        using K = CellTag::Kind;
        if (token == ".") return {K::Free, 0};
        if (token == "#") return {K::Obstacle, 0};
        if (token.size() >= 2 && (token[0] == 'S' || token[0] == 'D')) {
            auto id = parse_int(token.substr(1));
            if (!id || *id < 1) fail(row, column_of(row, token), "bad marker id in '" + std::string(token) + "'");
            return {token[0] == 'S' ? K::Start : K::Destination, static_cast<int>(*id)};
        }
        if (token.size() >= 3 && token[0] == 'A' && (token.back() == 'a' || token.back() == 'b')) {
            auto id = parse_int(token.substr(1, token.size() - 2));
            if (!id || *id < 1) fail(row, column_of(row, token), "bad slope id in '" + std::string(token) + "'");
            return {K::Slope, static_cast<int>(*id), token.back() == 'a' ? SlopeSide::A : SlopeSide::B};
        }
        fail(row, column_of(row, token), "unknown map cell '" + std::string(token) + "'");
    }

    ScenarioSpec finish();

    struct SlopeValues {
        std::optional<double> enter_a, exit_a, enter_b, exit_b;
    };

    std::vector<Line> lines_;
    std::set<std::string> seen_sections_;
    std::map<int, StartConfig> starts_;
    std::map<int, SlopeValues> slopes_;
    ScenarioSpec spec_;
};

inline ScenarioSpec Parser::finish() {
    using K = CellTag::Kind;
    const auto& p = spec_.params;
    if (!(p.frict_l > 0.0 && p.frict_l < p.frict_h && p.frict_h <= 1.0))
        throw ScenarioSemanticError("friction thresholds out of order (need 0 < frict_l < frict_h <= 1)");
    if (!(p.speed_max > 0.0)) throw ScenarioSemanticError("speed_max must be positive");
    if (!(p.delta > 0.0)) throw ScenarioSemanticError("delta must be positive");
    if (!(p.density_radius > 0.0)) throw ScenarioSemanticError("density_radius must be positive");
    if (!(p.perception_distance >= 0.0)) throw ScenarioSemanticError("perception_distance must be non-negative");
    if (!(p.rho_sat > 0.0) || !(p.obstacle_span > 0.0)) throw ScenarioSemanticError("rho_sat and obstacle_span must be positive");

    std::map<int, std::vector<Cell>> start_cells, dest_cells;
    std::map<std::pair<int, int>, std::vector<Cell>> slope_cells;
    std::vector<Cell> obstacle_cells;
    for (int y = 0; y < spec_.geometry.height; ++y) {
        for (int x = 0; x < spec_.geometry.width; ++x) {
            const auto& t = spec_.layout[{x, y}];
            switch (t.kind) {
                case K::Free: break;
                case K::Obstacle: obstacle_cells.push_back({x, y}); break;
                case K::Start: start_cells[t.id].push_back({x, y}); break;
                case K::Destination: dest_cells[t.id].push_back({x, y}); break;
                case K::Slope: slope_cells[{t.id, static_cast<int>(t.side)}].push_back({x, y}); break;
            }
        }
    }

    if (!obstacle_cells.empty()) spec_.markers.push_back({MarkerKind::Obstacle, 0, std::move(obstacle_cells), {}, {}});
    for (auto& [id, cells] : dest_cells) spec_.markers.push_back({MarkerKind::DestinationArea, id, std::move(cells), {}, {}});

    for (const auto& [id, cells] : start_cells)
        if (!starts_.count(id)) throw ScenarioSemanticError(fmt::format("start area {} has no [start.{}] section", id, id));
    for (auto& [id, cfg] : starts_) {
        auto it = start_cells.find(id);
        if (it == start_cells.end()) throw ScenarioSemanticError(fmt::format("[start.{}] has no S{} cells in the map", id, id));
        if (!dest_cells.count(cfg.destination))
            throw ScenarioSemanticError(fmt::format("start area {} references unknown destination_id {}", id, cfg.destination));
        if (cfg.speeds.empty()) throw ScenarioSemanticError(fmt::format("start area {} has no speed classes", id));
        double sum = 0.0;
        for (const auto& sc : cfg.speeds) {
            if (!(sc.speed > 0.0 && sc.speed <= p.speed_max))
                throw ScenarioSemanticError(fmt::format("start area {}: desired speed {} outside (0, speed_max]", id, sc.speed));
            if (sc.probability < 0.0) throw ScenarioSemanticError(fmt::format("start area {}: negative probability", id));
            sum += sc.probability;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ScenarioSemanticError(fmt::format("start area {}: speed probabilities sum to {}, expected 1", id, sum));
        const auto& g = cfg.group;
        if (!g.member_speeds.empty()) {
            if (g.kind == GroupSpec::Kind::None || static_cast<int>(g.member_speeds.size()) != g.members())
                throw ScenarioSemanticError(fmt::format("start area {}: group_speeds must list one speed per group member", id));
            for (double s : g.member_speeds)
                if (!(s > 0.0 && s <= p.speed_max))
                    throw ScenarioSemanticError(fmt::format("start area {}: group speed {} outside (0, speed_max]", id, s));
        }
        spec_.markers.push_back({MarkerKind::StartArea, id, std::move(it->second), cfg, {}});
    }

    for (const auto& [key, cells] : slope_cells)
        if (!slopes_.count(key.first))
            throw ScenarioSemanticError(fmt::format("slope area {} has no [slope.{}] section", key.first, key.first));
    for (const auto& [id, v] : slopes_) {
        const bool has_a = slope_cells.count({id, 0}) > 0;
        const bool has_b = slope_cells.count({id, 1}) > 0;
        if (!has_a && !has_b) throw ScenarioSemanticError(fmt::format("[slope.{}] has no boundary cells in the map", id));
        auto constant = [&](const std::optional<double>& k, const char* name) {
            if (!k) throw ScenarioSemanticError(fmt::format("slope area {}: missing {}", id, name));
            if (!(*k > 0.0)) throw ScenarioSemanticError(fmt::format("slope area {}: {} must be positive", id, name));
            return *k;
        };
        if (has_a)
            spec_.markers.push_back({MarkerKind::SlopeBoundary, id, slope_cells[{id, 0}], {},
                                     SlopeConfig{SlopeSide::A, constant(v.enter_a, "k_enter_a"), constant(v.exit_a, "k_exit_a")}});
        if (has_b)
            spec_.markers.push_back({MarkerKind::SlopeBoundary, id, slope_cells[{id, 1}], {},
                                     SlopeConfig{SlopeSide::B, constant(v.enter_b, "k_enter_b"), constant(v.exit_b, "k_exit_b")}});
    }

    if (spec_.measure.area) {
        const auto& a = *spec_.measure.area;
        if (!spec_.layout.contains(a.min) || !spec_.layout.contains(a.max) || a.min.x > a.max.x || a.min.y > a.max.y)
            throw ScenarioSemanticError("measurement area out of bounds");
    }
    return std::move(spec_);
}

}  // namespace detail

/// Parses and validates scenario text. Throws ScenarioSyntaxError or ScenarioSemanticError.
inline ScenarioSpec parse_scenario(std::string_view text) { return detail::Parser(text).run(); }

/// Writes `spec` in the scenario file format; parse_scenario(serialize_scenario(s)) == s.
inline std::string serialize_scenario(const ScenarioSpec& spec) {
    using detail::format_real;
    std::ostringstream out;
    out << "[map]\n";
    for (int y = 0; y < spec.geometry.height; ++y) {
        for (int x = 0; x < spec.geometry.width; ++x) {
            const auto& t = spec.layout[{x, y}];
            if (x > 0) out << ',';
            switch (t.kind) {
                case CellTag::Kind::Free: out << '.'; break;
                case CellTag::Kind::Obstacle: out << '#'; break;
                case CellTag::Kind::Start: out << 'S' << t.id; break;
                case CellTag::Kind::Destination: out << 'D' << t.id; break;
                case CellTag::Kind::Slope: out << 'A' << t.id << (t.side == SlopeSide::A ? 'a' : 'b'); break;
            }
        }
        out << '\n';
    }
    const auto& p = spec.params;
    out << "\n[params]\n";
    out << "boundary = " << (spec.geometry.boundary == BoundaryMode::Open ? "open" : "periodic-x") << '\n';
    const std::pair<const char*, double> reals[] = {
        {"kappa_g", p.kappa_goal},       {"kappa_ob", p.kappa_obstacle},  {"kappa_s", p.kappa_social},
        {"kappa_c", p.kappa_cohesion},   {"kappa_i", p.kappa_structured}, {"kappa_d", p.kappa_direction},
        {"kappa_ov", p.kappa_overlap},   {"delta", p.delta},              {"density_radius", p.density_radius},
        {"frict_l", p.frict_l},          {"frict_h", p.frict_h},          {"speed_max", p.speed_max},
        {"perception_distance", p.perception_distance}, {"rho_sat", p.rho_sat},
        {"obstacle_span", p.obstacle_span}, {"overlap_threshold", p.overlap_threshold},
    };
    for (const auto& [k, v] : reals) out << k << " = " << format_real(v) << '\n';
    out << "seed = " << p.seed << '\n';
    out << "urn_max_denominator = " << p.urn_max_denominator << '\n';

    for (const auto& m : spec.markers) {
        if (m.kind != MarkerKind::StartArea) continue;
        const auto& s = *m.start;
        out << "\n[start." << m.id << "]\n";
        out << "generation = " << (s.generation.mode == Generation::Mode::Block ? "block " : "frequency ")
            << format_real(s.generation.amount) << '\n';
        out << "speeds = ";
        for (std::size_t i = 0; i < s.speeds.size(); ++i)
            out << (i ? ", " : "") << format_real(s.speeds[i].speed) << ':' << format_real(s.speeds[i].probability);
        out << "\ndestination = " << s.destination << '\n';
        switch (s.group.kind) {
            case GroupSpec::Kind::None: out << "group = none\n"; break;
            case GroupSpec::Kind::Simple: out << "group = simple " << s.group.size << '\n'; break;
            case GroupSpec::Kind::Structured:
                out << "group = structured " << s.group.subgroups << 'x' << s.group.size << '\n';
                break;
        }
        if (!s.group.member_speeds.empty()) {
            out << "group_speeds = ";
            for (std::size_t i = 0; i < s.group.member_speeds.size(); ++i)
                out << (i ? ", " : "") << format_real(s.group.member_speeds[i]);
            out << '\n';
        }
    }
    std::set<int> slope_ids;
    for (const auto& m : spec.markers)
        if (m.kind == MarkerKind::SlopeBoundary) slope_ids.insert(m.id);
    for (int id : slope_ids) {
        out << "\n[slope." << id << "]\n";
        if (const auto* a = spec.find_slope(id, SlopeSide::A))
            out << "k_enter_a = " << format_real(a->slope->k_enter) << "\nk_exit_a = " << format_real(a->slope->k_exit) << '\n';
        if (const auto* b = spec.find_slope(id, SlopeSide::B))
            out << "k_enter_b = " << format_real(b->slope->k_enter) << "\nk_exit_b = " << format_real(b->slope->k_exit) << '\n';
    }
    if (spec.measure.area || spec.measure.window != MeasureConfig{}.window) {
        out << "\n[measure]\n";
        if (const auto& a = spec.measure.area)
            out << "area = " << a->min.x << ' ' << a->min.y << ' ' << a->max.x << ' ' << a->max.y << '\n';
        out << "window = " << spec.measure.window << '\n';
    }
    return out.str();
}

struct SlopeViolation {
    int area_id = 0;
    std::string message;
};

/// Checks k_a2 = 1/k_b1 and k_b2 = 1/k_a1 for every slope area.
/// Throws ScenarioSemanticError when an area does not have exactly one `a` and one `b` boundary.
inline std::vector<SlopeViolation> validate_slope_pairs(const ScenarioSpec& spec) {
    std::map<int, std::vector<const SpatialMarker*>> areas;
    for (const auto& m : spec.markers)
        if (m.kind == MarkerKind::SlopeBoundary) areas[m.id].push_back(&m);

    std::vector<SlopeViolation> out;
    for (const auto& [id, ms] : areas) {
        const SpatialMarker* a = nullptr;
        const SpatialMarker* b = nullptr;
        for (const auto* m : ms) (m->slope->side == SlopeSide::A ? a : b) = m;
        if (ms.size() != 2 || !a || !b)
            throw ScenarioSemanticError(fmt::format("slope area {} needs exactly two boundary markers, found {}", id, ms.size()));
        const double ka1 = a->slope->k_enter, ka2 = a->slope->k_exit;
        const double kb1 = b->slope->k_enter, kb2 = b->slope->k_exit;
        if (std::abs(ka2 - 1.0 / kb1) > 1e-9)
            out.push_back({id, fmt::format("slope {}: k_exit_a = {} but 1/k_enter_b = {}", id, ka2, 1.0 / kb1)});
        if (std::abs(kb2 - 1.0 / ka1) > 1e-9)
            out.push_back({id, fmt::format("slope {}: k_exit_b = {} but 1/k_enter_a = {}", id, kb2, 1.0 / ka1)});
    }
    return out;
}

}  // namespace pedsim
