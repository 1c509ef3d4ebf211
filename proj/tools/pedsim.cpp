// pedsim command-line front end: `run` a scenario or `sweep` it over a population/inflow ladder.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pedsim/pedsim.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kParseError = 1, kValidationError = 2, kRuntimeError = 3 };

struct CommonFlags {
    std::string scenario;
    std::uint64_t steps = 1000;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<long long> agents;
    std::string trajectories = "on";
    double warmup_frac = 0.1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--scenario", f.scenario, "scenario file")->required();
    cmd->add_option("--steps", f.steps, "number of steps")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "RNG seed (overrides the scenario)");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--agents", f.agents, "total population for block start areas");
    cmd->add_option("--trajectories", f.trajectories, "write trajectories.csv (on/off)")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--warmup-frac", f.warmup_frac, "fraction of steps discarded before measuring")->check(CLI::Range(0.0, 1.0));
}

// Loads and validates; exits with the documented code on failure.
pedsim::ScenarioSpec load(const CommonFlags& f, int& code) {
    std::ifstream in(f.scenario);
    if (!in) {
        spdlog::error("cannot read scenario '{}'", f.scenario);
        code = kParseError;
        return {};
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        auto spec = pedsim::parse_scenario(buf.str());
        if (auto violations = pedsim::validate_slope_pairs(spec); !violations.empty()) {
            for (const auto& v : violations) spdlog::error("{}", v.message);
            code = kValidationError;
            return {};
        }
        if (f.seed) spec.params.seed = *f.seed;
        if (f.agents) spec = pedsim::override_population(std::move(spec), *f.agents);
        code = kOk;
        return spec;
    } catch (const pedsim::ScenarioSyntaxError& e) {
        spdlog::error("{}: {}", f.scenario, e.what());
        code = kParseError;
    } catch (const pedsim::ScenarioSemanticError& e) {
        spdlog::error("{}: {}", f.scenario, e.what());
        code = kValidationError;
    }
    return {};
}

pedsim::RunOptions options(const CommonFlags& f) {
    return {f.steps, f.warmup_frac, f.trajectories == "on", 0.5};
}

int run_command(const CommonFlags& f) {
    int code = kOk;
    auto spec = load(f, code);
    if (code != kOk) return code;
    try {
        const auto summary = pedsim::run_to_directory(spec, options(f), f.out_dir);
        std::cout << summary.line() << '\n';
    } catch (const pedsim::InconsistencyError& e) {
        spdlog::error("runtime inconsistency: {}", e.what());
        return kRuntimeError;
    }
    return kOk;
}

std::vector<double> parse_ladder(const std::string& text) {
    std::vector<double> out;
    for (auto part : pedsim::detail::split(text, ',')) {
        auto v = pedsim::detail::parse_real(part);
        if (!v) throw CLI::ValidationError("--ladder", "expected comma-separated numbers");
        out.push_back(*v);
    }
    return out;
}

int sweep_command(const CommonFlags& f, const std::string& ladder_text, const std::string& mode) {
    int code = kOk;
    auto base = load(f, code);
    if (code != kOk) return code;
    const auto ladder = parse_ladder(ladder_text);

    std::vector<pedsim::ScenarioSpec> rungs;
    try {
        for (double v : ladder)
            rungs.push_back(mode == "agents" ? pedsim::override_population(base, std::llround(v)) : pedsim::scale_inflow(base, v));
    } catch (const pedsim::ScenarioSemanticError& e) {
        spdlog::error("{}", e.what());
        return kValidationError;
    }

    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PEDSIM_THREADS")) {
        if (const auto n = pedsim::detail::parse_int(env); n && *n > 0) threads = std::min(threads, static_cast<std::size_t>(*n));
    }
    threads = std::min(threads, rungs.size());

    std::vector<pedsim::RunSummary> results(rungs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::string error;
    auto worker = [&] {
        for (std::size_t i = next++; i < rungs.size(); i = next++) {
            try {
                const auto dir = fs::path(f.out_dir) / fmt::format("rung_{:02d}", i);
                results[i] = pedsim::run_to_directory(rungs[i], options(f), dir);
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                error = e.what();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed) {
        spdlog::error("runtime inconsistency: {}", error);
        return kRuntimeError;
    }

    std::ofstream fd(fs::path(f.out_dir) / "fd.csv");
    for (std::size_t i = 0; i < results.size(); ++i) {
        pedsim::write_fd_csv(fd, results[i].fundamental, i == 0);
        std::cout << fmt::format("rung {} ({}={}): {}\n", i, mode, ladder[i], results[i].line());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Floor-field pedestrian simulator with heterogeneous walking speeds"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "run one scenario");
    add_common(run, run_flags);

    CommonFlags sweep_flags;
    std::string ladder;
    std::string mode = "agents";
    auto* sweep = app.add_subcommand("sweep", "run a scenario across a population or inflow ladder");
    add_common(sweep, sweep_flags);
    sweep->add_option("--ladder", ladder, "comma-separated rung values")->required();
    sweep->add_option("--mode", mode, "what the ladder sets: agents (total population) or inflow (frequency factor)")
        ->check(CLI::IsMember({"agents", "inflow"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kParseError;
    }
    if (run->parsed()) return run_command(run_flags);
    return sweep_command(sweep_flags, ladder, mode);
}
