#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace pedsim;
using testing_support::parse;

namespace {

/// Label-correcting relaxation (repeated full sweeps) on the 8-connected graph; no priority queue.
Grid<double> sweep_oracle(const ScenarioSpec& spec, int destination) {
    const int w = spec.geometry.width, h = spec.geometry.height;
    Grid<double> d(w, h, kUnreachable);
    for (const auto& c : spec.find(MarkerKind::DestinationArea, destination)->cells) d[c] = 0.0;
    auto open = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && spec.layout[{x, y}].walkable(); };
    bool changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!open(x, y)) continue;
                for (int oy = -1; oy <= 1; ++oy) {
                    for (int ox = -1; ox <= 1; ++ox) {
                        if ((ox == 0 && oy == 0) || !open(x + ox, y + oy)) continue;
                        if (ox != 0 && oy != 0 && (!open(x + ox, y) || !open(x, y + oy))) continue;
                        const double cand = d[{x + ox, y + oy}] + ((ox != 0 && oy != 0) ? std::sqrt(2.0) : 1.0);
                        if (cand < d[{x, y}] - 1e-12) {
                            d[{x, y}] = cand;
                            changed = true;
                        }
                    }
                }
            }
        }
    }
    return d;
}

/// Octile distance between cells, optionally wrapping in x.
double octile(int ax, int ay, int bx, int by, int width, bool wrap) {
    int ddx = std::abs(ax - bx);
    if (wrap) ddx = std::min(ddx, width - ddx);
    const int ddy = std::abs(ay - by);
    return std::abs(ddx - ddy) + std::sqrt(2.0) * std::min(ddx, ddy);
}

/// Closed-form obstacle distance: nearest obstacle cell by octile metric, or the nearest virtual wall row/column.
Grid<double> obstacle_oracle(const ScenarioSpec& spec) {
    const int w = spec.geometry.width, h = spec.geometry.height;
    const bool wrap = spec.geometry.boundary == BoundaryMode::PeriodicX;
    Grid<double> d(w, h, kUnreachable);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = std::min(y + 1, h - y);
            if (!wrap) best = std::min<double>(best, std::min(x + 1, w - x));
            for (int oy = 0; oy < h; ++oy)
                for (int ox = 0; ox < w; ++ox)
                    if (!spec.layout[{ox, oy}].walkable()) best = std::min(best, octile(x, y, ox, oy, w, wrap));
            d[{x, y}] = best;
        }
    }
    return d;
}

std::string random_map(std::mt19937_64& rng, int w, int h, double obstacle_p) {
    std::bernoulli_distribution block(obstacle_p);
    const int dx = static_cast<int>(rng() % static_cast<std::uint64_t>(w));
    const int dy = static_cast<int>(rng() % static_cast<std::uint64_t>(h));
    std::string rows;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x) rows += ',';
            rows += (x == dx && y == dy) ? "D1" : (block(rng) ? "#" : ".");
        }
        rows += '\n';
    }
    return rows;
}

}  // namespace

TEST(PathField, OneStepDistances) {
    const auto spec = parse("[map]\n...\n.D1.\n...\n");
    const auto f = compute_path_field(spec, 1);
    EXPECT_EQ(val(f, {1, 1}), 0.0);
    EXPECT_DOUBLE_EQ(val(f, {1, 0}), 1.0);
    EXPECT_DOUBLE_EQ(val(f, {0, 1}), 1.0);
    EXPECT_DOUBLE_EQ(val(f, {0, 0}), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(val(f, {2, 2}), std::sqrt(2.0));
}

TEST(PathField, CornerToCornerDiagonal) {
    const auto spec = parse("[map]\nD1....\n.....\n.....\n.....\n.....\n");
    const auto f = compute_path_field(spec, 1);
    EXPECT_NEAR(val(f, {4, 4}), 4.0 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(val(f, {4, 4}), 5.657, 1e-3);
}

TEST(PathField, FullWallLeavesFarSideUnreachable) {
    const auto spec = parse("[map]\nD1.#..\n..#..\n..#..\n");
    const auto f = compute_path_field(spec, 1);
    EXPECT_TRUE(is_unreachable(val(f, {3, 0})));
    EXPECT_TRUE(is_unreachable(val(f, {4, 2})));
    EXPECT_FALSE(is_unreachable(val(f, {1, 2})));
}

TEST(PathField, EnclosedDestinationIsUnreachableEverywhere) {
    const auto spec = parse("[map]\n.###\n.#D1#\n.###\n");
    const auto f = compute_path_field(spec, 1);
    EXPECT_EQ(val(f, {2, 1}), 0.0);
    EXPECT_TRUE(is_unreachable(val(f, {0, 0})));
    EXPECT_TRUE(is_unreachable(val(f, {0, 2})));
}

TEST(PathField, NoCornerCutting) {
    // (0,0) -> (1,1) would cut the obstacle at (1,0).
    const auto spec = parse("[map]\n.#\n.D1\n");
    const auto f = compute_path_field(spec, 1);
    EXPECT_DOUBLE_EQ(val(f, {0, 0}), 2.0);
}

TEST(PathField, ZeroExactlyOnDestinationCells) {
    const auto spec = parse("[map]\nD1,D1,.,.\n.,.,.,D1\n");
    const auto f = compute_path_field(spec, 1);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) {
            const bool dest = spec.layout[{x, y}].kind == CellTag::Kind::Destination;
            EXPECT_EQ(val(f, {x, y}) == 0.0, dest);
        }
}

TEST(PathField, MatchesSweepOracleOnRandomGrids) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 20), h = 1 + static_cast<int>(rng() % 20);
        const auto spec = parse("[map]\n" + random_map(rng, w, h, 0.3));
        const auto f = compute_path_field(spec, 1);
        const auto oracle = sweep_oracle(spec, 1);
        for (std::size_t i = 0; i < oracle.size(); ++i) {
            const double a = f.values.data()[i], b = oracle.data()[i];
            if (is_unreachable(b)) {
                ASSERT_TRUE(is_unreachable(a)) << "trial " << trial << " cell " << i;
            } else {
                ASSERT_NEAR(a, b, 1e-9) << "trial " << trial << " cell " << i;
            }
        }
    }
}

TEST(PathField, AdjacentValuesDifferByAtMostStepCost) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const auto spec = parse("[map]\n" + random_map(rng, 15, 12, 0.2));
        const auto f = compute_path_field(spec, 1);
        for (int y = 0; y < 12; ++y) {
            for (int x = 0; x < 15; ++x) {
                const Cell c{x, y};
                if (!spec.walkable(c) || is_unreachable(val(f, c))) continue;
                for (Action a : kActions) {
                    Cell n;
                    if (a == Action::X || !neighbour(c, a, 15, 12, BoundaryMode::Open, n) || !spec.walkable(n)) continue;
                    if (is_diagonal(a) && (!spec.walkable({x + dx(a), y}) || !spec.walkable({x, y + dy(a)}))) continue;
                    EXPECT_LE(std::abs(val(f, c) - val(f, n)), step_length(a) + 1e-12);
                }
            }
        }
    }
}

TEST(ObstacleField, SpecExamples) {
    const auto spec = parse("[map]\n.......\n.......\n.......\n...D1...\n.......\n.......\n.......\n");
    const auto f = compute_obstacle_field(spec);
    EXPECT_DOUBLE_EQ(val(f, {0, 3}), 1.0);  // next to the wall
    EXPECT_DOUBLE_EQ(val(f, {3, 3}), 4.0);  // centre of a 7x7 room
    const auto walled = parse("[map]\n.#.\n.D1.\n");
    EXPECT_EQ(val(compute_obstacle_field(walled), {1, 0}), 0.0);
    EXPECT_DOUBLE_EQ(val(compute_obstacle_field(walled), {1, 1}), 1.0);
}

TEST(ObstacleField, MatchesClosedFormOnRandomGrids) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 20), h = 1 + static_cast<int>(rng() % 20);
        std::string text = "[map]\n" + random_map(rng, w, h, 0.1);
        if (trial % 2) text += "[params]\nboundary = periodic-x\n";
        const auto spec = parse(text);
        const auto f = compute_obstacle_field(spec);
        const auto oracle = obstacle_oracle(spec);
        for (std::size_t i = 0; i < oracle.size(); ++i)
            ASSERT_NEAR(f.values.data()[i], oracle.data()[i], 1e-9) << "trial " << trial << " cell " << i;
    }
}

TEST(DensityField, SpecExamples) {
    const std::vector<Cell> one = {{5, 5}};
    const auto f = compute_density_field(11, 11, one, 1.2);
    EXPECT_DOUBLE_EQ(val(f, {5, 5}), 1.0);
    EXPECT_DOUBLE_EQ(val(f, {7, 5}), 0.25);   // distance 2 cells = 0.8 m
    EXPECT_DOUBLE_EQ(val(f, {8, 5}), 1.0 / 9.0);  // 1.2 m, on the radius
    EXPECT_DOUBLE_EQ(val(f, {9, 5}), 0.0);    // 1.6 m, outside
    EXPECT_DOUBLE_EQ(val(f, {6, 6}), 0.5);

    const std::vector<Cell> two = {{4, 5}, {6, 5}};
    EXPECT_DOUBLE_EQ(val(compute_density_field(11, 11, two, 1.2), {5, 5}), 2.0);
    EXPECT_EQ(val(compute_density_field(11, 11, {}, 1.2), {3, 3}), 0.0);
}

TEST(DensityField, TotalMassMatchesDirectSummation) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 5 + static_cast<int>(rng() % 20), h = 5 + static_cast<int>(rng() % 20);
        const bool periodic = trial % 2;
        std::vector<Cell> pos;
        for (int k = 0; k < 12; ++k)
            pos.push_back({static_cast<int>(rng() % static_cast<std::uint64_t>(w)), static_cast<int>(rng() % static_cast<std::uint64_t>(h))});
        const double radius = 0.4 * (1 + static_cast<int>(rng() % 4));
        const auto f = compute_density_field(w, h, pos, radius, periodic ? BoundaryMode::PeriodicX : BoundaryMode::Open);
        double expected_total = 0.0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double direct = 0.0;
                for (const auto& p : pos) {
                    int ddx = std::abs(x - p.x);
                    if (periodic) ddx = std::min(ddx, w - ddx);
                    const int ddy = std::abs(y - p.y);
                    const double d2 = ddx * ddx + ddy * ddy;
                    if (d2 == 0) direct += 1.0;
                    else if (std::sqrt(d2) * 0.4 <= radius + 1e-9) direct += 1.0 / d2;
                }
                if (periodic && 2 * (static_cast<int>(radius / 0.4 + 1e-9)) >= w) continue;  // kernel wraps onto itself
                EXPECT_NEAR(val(f, {x, y}), direct, 1e-9);
                expected_total += direct;
            }
        }
        if (!(periodic && 2 * static_cast<int>(radius / 0.4 + 1e-9) >= w)) {
            double total = 0.0;
            for (double v : f.values.data()) total += v;
            EXPECT_NEAR(total, expected_total, 1e-9);
        }
    }
}

TEST(DensityField, RebuildIsPure) {
    const std::vector<Cell> a = {{1, 1}, {3, 4}, {3, 4}, {8, 2}};
    const std::vector<Cell> b = {{0, 0}, {9, 9}};
    DensityField field(10, 10, BoundaryMode::Open, DensityKernel(1.2));
    field.rebuild(a);
    const auto first = field.field().values;
    field.rebuild(b);
    EXPECT_EQ(field.field().values, compute_density_field(10, 10, b, 1.2).values);
    field.rebuild(a);
    EXPECT_EQ(field.field().values, first);
    EXPECT_EQ(compute_density_field(10, 10, a, 1.2).values, compute_density_field(10, 10, a, 1.2).values);
}

TEST(Val, LookupContract) {
    const auto spec = parse("[map]\nD1.#.\n");
    const auto path = compute_path_field(spec, 1);
    EXPECT_EQ(val(path, {0, 0}), 0.0);
    EXPECT_TRUE(is_unreachable(val(path, {3, 0})));
    EXPECT_THROW(val(path, {4, 0}), std::out_of_range);
    EXPECT_THROW(val(path, {0, -1}), std::out_of_range);
}

TEST(PeriodicPathValue, UnrollsTheSeam) {
    // Destination on the last column: the field is a ramp 9..0 that continues across the seam.
    const auto spec = parse("[map]\n.........D1\n[params]\nboundary = periodic-x\n");
    const auto f = compute_path_field(spec, 1);
    EXPECT_DOUBLE_EQ(periodic_path_value(f, {9, 0}, {0, 0}, BoundaryMode::PeriodicX), -1.0);
    EXPECT_DOUBLE_EQ(periodic_path_value(f, {0, 0}, {9, 0}, BoundaryMode::PeriodicX), 10.0);
    EXPECT_DOUBLE_EQ(periodic_path_value(f, {2, 0}, {3, 0}, BoundaryMode::PeriodicX), 6.0);
    EXPECT_DOUBLE_EQ(periodic_path_value(f, {9, 0}, {0, 0}, BoundaryMode::Open), 9.0);
}

TEST(Pgm, SixteenBitWithMaskAndSidecar) {
    const auto dir = testing_support::scratch_dir("pgm");
    Grid<double> g(3, 2, 0.0);
    g[{0, 0}] = 2.0;
    g[{1, 0}] = 1.0;
    g[{2, 0}] = std::nan("");
    g[{0, 1}] = kUnreachable;
    const auto scale = write_pgm16(dir / "f.pgm", g, [](Cell c) { return c == Cell{2, 1}; });
    EXPECT_DOUBLE_EQ(scale.scale, 2.0 / 65534.0);
    const auto bytes = testing_support::read_file(dir / "f.pgm");
    const std::string header = "P5\n3 2\n65535\n";
    ASSERT_EQ(bytes.substr(0, header.size()), header);
    ASSERT_EQ(bytes.size(), header.size() + 12);
    auto level = [&](int i) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + header.size() + 2 * i);
        return (p[0] << 8) | p[1];
    };
    EXPECT_EQ(level(0), 65534);
    EXPECT_EQ(level(1), 32767);
    EXPECT_EQ(level(2), 65535);
    EXPECT_EQ(level(3), 65535);
    EXPECT_EQ(level(4), 0);
    EXPECT_EQ(level(5), 65535);
    EXPECT_NE(testing_support::read_file(dir / "f.pgm.scale").find("masked = 65535"), std::string::npos);
}
