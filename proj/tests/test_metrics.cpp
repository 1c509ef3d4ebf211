#include <gtest/gtest.h>

#include "support.hpp"

using namespace pedsim;
using testing_support::parse;

namespace {

/// Two pockets cut off from the destination: pedestrians placed there can only stand still.
const char* kPockets = "[map]\n..#D1\n";

}  // namespace

TEST(MeasurementArea, WalkableCellsOnly) {
    const auto spec = parse("[map]\n.#..\n..D1.\n");
    const auto a = MeasurementArea::of(spec, {{0, 0}, {3, 1}});
    EXPECT_NEAR(a.area_m2, 7 * 0.16, 1e-12);
    EXPECT_NEAR(MeasurementArea::from_spec(spec).area_m2, 7 * 0.16, 1e-12);
}

TEST(SampleFundamental, OnePedestrianInFourSquareMetres) {
    World w(parse("[map]\n.....\n.....\n.....\n.....\n....D1\n[params]\nboundary = periodic-x\n"));
    w.add_pedestrian({{0, 0}, 1, 1.2});
    const auto area = MeasurementArea::from_spec(w.spec());
    ASSERT_NEAR(area.area_m2, 4.0, 1e-12);
    SpeedTracker tracker(10);
    tracker.observe(w);
    EXPECT_FALSE(sample_fundamental(w, tracker, area).has_value());  // no full window yet
    for (int s = 0; s < 10; ++s) {
        w.step();
        tracker.observe(w);
    }
    const auto sample = sample_fundamental(w, tracker, area);
    ASSERT_TRUE(sample.has_value());
    EXPECT_DOUBLE_EQ(sample->density, 0.25);
    EXPECT_EQ(sample->n_samples, 1u);
}

TEST(SampleFundamental, StationaryCrowdHasZeroSpeed) {
    World w(parse(kPockets));
    w.add_pedestrian({{0, 0}, 1, 1.6});
    w.add_pedestrian({{1, 0}, 1, 1.6});
    SpeedTracker tracker(10);
    const auto area = MeasurementArea::of(w.spec(), {{0, 0}, {1, 0}});
    for (int s = 0; s <= 10; ++s) {
        tracker.observe(w);
        if (s < 10) w.step();
    }
    const auto sample = sample_fundamental(w, tracker, area);
    ASSERT_TRUE(sample.has_value());
    EXPECT_EQ(sample->mean_speed, 0.0);
    EXPECT_DOUBLE_EQ(sample->density, 2.0 / 0.32);
}

TEST(SampleFundamental, EmptyAreaIsSkipped) {
    World w(parse(kPockets));
    SpeedTracker tracker;
    tracker.observe(w);
    EXPECT_FALSE(sample_fundamental(w, tracker, MeasurementArea::from_spec(w.spec())).has_value());
}

TEST(SampleFundamental, LoneAgentFreeFlowSpeed) {
    World w(parse("[map]\n" + std::string(49, '.') + "D1\n[params]\nboundary = periodic-x\n"));
    w.add_pedestrian({{0, 0}, 1, 1.2});
    MetricsAccumulator m(w.spec(), 0);
    for (int s = 0; s < 2000; ++s) {
        w.step();
        m.observe(w);
    }
    double sum = 0.0;
    for (const auto& s : m.fundamental()) sum += s.mean_speed;
    EXPECT_NEAR(sum / static_cast<double>(m.fundamental().size()), 1.2, 1.2 * 0.02);
}

TEST(SampleFundamental, WholePeriodicCorridorDensityIsExact) {
    const auto spec = parse("[map]\nS1" + std::string(28, '.') + "D1\nS1" + std::string(28, '.') + "D1\nS1" +
                            std::string(28, '.') + "D1\n[params]\nboundary = periodic-x\n[start.1]\ngeneration = block 3\n"
                            "speeds = 1.2:0.5, 1.6:0.5\ndestination = 1\n");
    World w(spec);
    MetricsAccumulator m(spec, 0);
    for (int s = 0; s < 200; ++s) {
        w.step();
        m.observe(w);
    }
    ASSERT_FALSE(m.fundamental().empty());
    for (const auto& s : m.fundamental()) {
        EXPECT_DOUBLE_EQ(s.density, 3.0 / (90 * 0.16));
        EXPECT_LE(s.mean_speed, spec.params.speed_max + 1e-12);
    }
}

TEST(Cmd, LonePedestrianIsZero) {
    World w(parse("[map]\n" + std::string(19, '.') + "D1\n"));
    w.add_pedestrian({{0, 0}, 1, 1.0});
    CmdGrid cmd(20, 1);
    for (int s = 0; s < 10; ++s) {
        update_cmd(cmd, w);
        w.step();
    }
    for (int x = 0; x < 20; ++x) {
        if (auto v = cmd.value({x, 0})) {
            EXPECT_EQ(*v, 0.0);
        }
    }
    EXPECT_FALSE(cmd.value({19, 0}).has_value());
    EXPECT_TRUE(std::isnan(cmd.means()[{19, 0}]));
}

TEST(Cmd, TwoAdjacentStaticPedestrians) {
    World w(parse(kPockets));
    w.add_pedestrian({{0, 0}, 1, 1.6});
    w.add_pedestrian({{1, 0}, 1, 1.6});
    CmdGrid cmd(4, 1);
    for (int s = 0; s < 25; ++s) {
        update_cmd(cmd, w);
        w.step();
    }
    EXPECT_DOUBLE_EQ(*cmd.value({0, 0}), 0.25);
    EXPECT_DOUBLE_EQ(*cmd.value({1, 0}), 0.25);
    EXPECT_EQ(cmd.visits({0, 0}), 25u);
    EXPECT_FALSE(cmd.value({3, 0}).has_value());
}

TEST(Cmd, InvariantUnderRelabeling) {
    const char* map = "[map]\n....#D1\n....#.\n";
    const std::vector<Cell> cells = {{0, 0}, {1, 0}, {3, 1}, {2, 1}, {0, 1}};
    World a(parse(map)), b(parse(map));
    for (const auto& c : cells) a.add_pedestrian({c, 1, 1.0});
    for (auto it = cells.rbegin(); it != cells.rend(); ++it) b.add_pedestrian({*it, 1, 1.0});
    CmdGrid ca(6, 2), cb(6, 2);
    update_cmd(ca, a);
    update_cmd(cb, b);
    const auto ma = ca.means(), mb = cb.means();
    for (std::size_t i = 0; i < ma.size(); ++i) {
        if (std::isnan(ma.data()[i])) EXPECT_TRUE(std::isnan(mb.data()[i]));
        else EXPECT_DOUBLE_EQ(ma.data()[i], mb.data()[i]);
    }
}

TEST(PerClassSpeeds, GroupsByClassAndBin) {
    const std::vector<ClassSample> samples = {
        {1.2, 0.1, 1.1}, {1.2, 0.2, 1.3}, {1.6, 0.3, 1.5}, {1.6, 2.6, 0.4}, {1.6, 2.9, 0.6},
    };
    const auto rows = per_class_speeds(samples, 0.5);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_DOUBLE_EQ(rows[0].class_speed, 1.2);
    EXPECT_DOUBLE_EQ(rows[0].mean, 1.2);
    EXPECT_NEAR(rows[0].sd, std::sqrt(0.02), 1e-12);
    EXPECT_EQ(rows[0].n, 2u);
    EXPECT_EQ(rows[1].n, 1u);
    EXPECT_EQ(rows[1].sd, 0.0);
    EXPECT_DOUBLE_EQ(rows[2].density_bin, 2.5);
    EXPECT_DOUBLE_EQ(rows[2].mean, 0.5);
    EXPECT_DOUBLE_EQ(*class_mean(samples, 1.6), 2.5 / 3);
    EXPECT_FALSE(class_mean(samples, 1.4).has_value());
}

TEST(Csv, HeadersAndRows) {
    std::ostringstream fd, classes;
    write_fd_csv(fd, {{0.5, 1.25, 3}});
    EXPECT_EQ(fd.str(), "density,mean_speed,n_samples\n0.500000,1.250000,3\n");
    write_classes_csv(classes, {{1.2, 0.5, 1.1, 0.05, 4}});
    EXPECT_EQ(classes.str(), "class,density_bin,mean,sd,n\n1.2000,0.5000,1.100000,0.050000,4\n");
}

TEST(Runner, WritesEveryOutput) {
    const auto dir = testing_support::scratch_dir("runner");
    const auto spec = parse("[map]\nS1,.,.,.,.,.,D1\nS1,.,.,.,.,.,D1\n[start.1]\ngeneration = frequency 1\nspeeds = 1.2:1\n"
                            "destination = 1\n");
    const auto summary = run_to_directory(spec, {200, 0.1, true, 0.5}, dir);
    for (const char* f : {"fd.csv", "classes.csv", "cmd.pgm", "cmd.pgm.scale", "trajectories.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    EXPECT_GT(summary.generated, 0u);
    EXPECT_NE(summary.line().find("steps=200"), std::string::npos);
    const auto traj = testing_support::read_file(dir / "trajectories.csv");
    EXPECT_EQ(traj.substr(0, traj.find('\n')), "step,id,x,y,action,speed_d,area");
}
