#pragma once
// Batch run loop writing every metric file into one output directory.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "pedsim/engine.hpp"
#include "pedsim/metrics.hpp"
#include "pedsim/pgm.hpp"

namespace pedsim {

struct RunOptions {
    std::uint64_t steps = 1000;
    double warmup_frac = 0.1;
    bool trajectories = true;
    double class_bin_width = 0.5;
};

struct RunSummary {
    std::uint64_t steps = 0;
    std::size_t generated = 0;
    std::size_t absorbed = 0;
    double wall_seconds = 0.0;
    std::vector<FundamentalSample> fundamental;
    std::vector<ClassSample> class_samples;

    double steps_per_second() const noexcept { return wall_seconds > 0.0 ? static_cast<double>(steps) / wall_seconds : 0.0; }
    std::string line() const {
        return fmt::format("steps={} generated={} absorbed={} wall={:.3f}s steps/s={:.1f}", steps, generated, absorbed,
                           wall_seconds, steps_per_second());
    }
};

/// Runs `spec` for `opts.steps` steps and writes fd.csv, classes.csv, cmd.pgm(+.scale) and,
/// when enabled, trajectories.csv under `out_dir`.
inline RunSummary run_to_directory(const ScenarioSpec& spec, const RunOptions& opts, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto started = std::chrono::steady_clock::now();

    World world(spec);
    const auto warmup = static_cast<std::uint64_t>(std::floor(opts.warmup_frac * static_cast<double>(opts.steps)));
    MetricsAccumulator metrics(spec, warmup);

    std::unique_ptr<std::ofstream> traj_file;
    std::optional<TrajectoryWriter> traj;
    if (opts.trajectories) {
        traj_file = std::make_unique<std::ofstream>(out_dir / "trajectories.csv");
        traj.emplace(*traj_file);
        traj->write(world);
    }
    metrics.observe(world);
    for (std::uint64_t s = 0; s < opts.steps; ++s) {
        world.step();
        metrics.observe(world);
        if (traj) traj->write(world);
    }

    {
        std::ofstream fd(out_dir / "fd.csv");
        write_fd_csv(fd, metrics.fundamental());
        std::ofstream classes(out_dir / "classes.csv");
        write_classes_csv(classes, per_class_speeds(metrics.class_samples(), opts.class_bin_width));
    }
    write_pgm16(out_dir / "cmd.pgm", metrics.cmd().means());

    RunSummary summary;
    summary.steps = opts.steps;
    summary.generated = world.generated_total();
    summary.absorbed = world.absorbed_total();
    summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    summary.fundamental = metrics.fundamental();
    summary.class_samples = metrics.class_samples();
    return summary;
}

}  // namespace pedsim
