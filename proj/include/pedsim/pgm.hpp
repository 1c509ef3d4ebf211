#pragma once
// 16-bit binary PGM export with a plain-text scale sidecar (`<file>.scale`).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <fmt/format.h>

#include "pedsim/types.hpp"

namespace pedsim {

inline constexpr std::uint16_t kPgmMasked = 65535;
inline constexpr std::uint16_t kPgmMaxValue = 65534;

struct PgmScale {
    double scale = 1.0;  // physical value per grey level
};

/// Writes `values` row-major as P5 with maxval 65535. Cells where `masked` holds (or non-finite values)
/// become 65535; the rest are value / scale, rounded, with scale chosen so the maximum maps to 65534.
inline PgmScale write_pgm16(const std::filesystem::path& path, const Grid<double>& values,
                            const std::function<bool(Cell)>& masked = {}) {
    auto hidden = [&](std::size_t i) {
        const double v = values.data()[i];
        return !std::isfinite(v) || (masked && masked(values.cell(i)));
    };
    double top = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!hidden(i)) top = std::max(top, values.data()[i]);
    PgmScale s{top > 0.0 ? top / kPgmMaxValue : 1.0};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    out << "P5\n" << values.width() << ' ' << values.height() << "\n65535\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint16_t level = kPgmMasked;
        if (!hidden(i)) {
            const double scaled = std::round(std::max(0.0, values.data()[i]) / s.scale);
            level = static_cast<std::uint16_t>(std::min<double>(scaled, kPgmMaxValue));
        }
        const char bytes[2] = {static_cast<char>(level >> 8), static_cast<char>(level & 0xff)};
        out.write(bytes, 2);
    }

    std::ofstream side(path.string() + ".scale");
    if (!side) throw std::runtime_error(fmt::format("cannot write {}.scale", path.string()));
    side << fmt::format("scale = {:.17g}\noffset = 0\nmasked = {}\nwidth = {}\nheight = {}\n", s.scale, kPgmMasked,
                        values.width(), values.height());
    return s;
}

}  // namespace pedsim
