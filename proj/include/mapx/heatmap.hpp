#pragma once

// Heatmaps as binary PPM (P6). Values map linearly from [-3, 3] to gray
// [0, 255] (clamped); invalid or non-finite cells are pure red. Row 0 of the
// grid (smallest y) is drawn at the bottom.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "mapx/estimate.hpp"

namespace mapx {

inline constexpr double kHeatmapRange = 3.0;

inline std::uint8_t heatmap_intensity(double value) {
    const double t = (std::clamp(value, -kHeatmapRange, kHeatmapRange) + kHeatmapRange) / (2.0 * kHeatmapRange);
    return static_cast<std::uint8_t>(std::lround(255.0 * t));
}

struct HeatmapPanel {
    Eigen::MatrixXd values;
    Mask valid;  // empty: all valid

    static HeatmapPanel of(const GroundEstimate& e) { return {e.values, e.valid}; }
    static HeatmapPanel of(const Eigen::MatrixXd& m) { return {m, Mask()}; }
};

struct RgbImage {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;
};

/// Panels side by side, each upscaled by `scale`, separated by `gap` white columns.
inline RgbImage render_panels(const std::vector<HeatmapPanel>& panels, int scale = 1, int gap = 4) {
    if (panels.empty()) throw std::invalid_argument("render_panels: no panels");
    if (scale < 1) throw std::invalid_argument("render_panels: scale must be >= 1");
    int height = 0, width = 0;
    for (const auto& p : panels) {
        height = std::max(height, static_cast<int>(p.values.rows()) * scale);
        width += static_cast<int>(p.values.cols()) * scale;
    }
    width += gap * static_cast<int>(panels.size() - 1);
    RgbImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3, 255)};
    int x0 = 0;
    for (const auto& p : panels) {
        const int rows = static_cast<int>(p.values.rows()), cols = static_cast<int>(p.values.cols());
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double v = p.values(r, c);
                const bool ok = std::isfinite(v) && (p.valid.size() == 0 || p.valid(r, c));
                const std::array<std::uint8_t, 3> px =
                    ok ? std::array<std::uint8_t, 3>{heatmap_intensity(v), heatmap_intensity(v), heatmap_intensity(v)}
                       : std::array<std::uint8_t, 3>{255, 0, 0};
                for (int dy = 0; dy < scale; ++dy)
                    for (int dx = 0; dx < scale; ++dx) {
                        const int y = height - 1 - (r * scale + dy);
                        const int x = x0 + c * scale + dx;
                        auto* dst = &img.rgb[(static_cast<std::size_t>(y) * width + x) * 3];
                        std::copy(px.begin(), px.end(), dst);
                    }
            }
        x0 += cols * scale + gap;
    }
    return img;
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image '" + path.string() + "'");
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!out) throw std::runtime_error("failed writing image '" + path.string() + "'");
}

inline void export_heatmap(const std::filesystem::path& path, const HeatmapPanel& panel, int scale = 4) {
    write_ppm(path, render_panels({panel}, scale, 0));
}

}  // namespace mapx
