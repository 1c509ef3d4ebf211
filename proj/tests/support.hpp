#pragma once
// Shared helpers for the unit tests.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "pedsim/pedsim.hpp"

namespace testing_support {

inline const bool quiet_logs = [] {
    spdlog::set_level(spdlog::level::off);
    return true;
}();

inline pedsim::ScenarioSpec parse(const std::string& text) { return pedsim::parse_scenario(text); }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("pedsim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// `rows` of single-character cells plus the given extra sections.
inline std::string scenario(const std::string& rows, const std::string& rest = "") {
    return "[map]\n" + rows + "\n" + rest;
}

}  // namespace testing_support
