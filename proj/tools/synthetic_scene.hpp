#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "chplane/image_io.hpp"
#include "chplane/rng.hpp"

namespace chplane::synth {

struct SceneStyle {
    int min_shapes = 8;
    int max_shapes = 24;
    double texture = 12.0;  // amplitude of smooth value noise
    double grain = 0.0;     // per-pixel white noise amplitude
    double palette_spread = 1.0;
};

namespace detail {

inline double smoothstep(double t) { return t * t * (3 - 2 * t); }

// Bilinear value noise on a coarse lattice.
inline double value_noise(const std::vector<double>& lattice, int lw, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = smoothstep(x - x0), fy = smoothstep(y - y0);
    auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * lw + i]; };
    const double a = at(x0, y0) * (1 - fx) + at(x0 + 1, y0) * fx;
    const double b = at(x0, y0 + 1) * (1 - fx) + at(x0 + 1, y0 + 1) * fx;
    return a * (1 - fy) + b * fy;
}

}  // namespace detail

/// Random piecewise-smooth RGB scene: gradient background, anti-aliased
/// ellipses and rotated rectangles, low-frequency texture.
inline ImageMatrix scene(std::size_t width, std::size_t height, std::uint64_t seed, const SceneStyle& style = {}) {
    Rng rng(seed);
    const double w = static_cast<double>(width), h = static_cast<double>(height);

    struct Shape {
        bool ellipse;
        double cx, cy, a, b, angle, ca, sa;
        double rgb[3];
    };
    std::vector<Shape> shapes(static_cast<std::size_t>(style.min_shapes) +
                              rng.below(static_cast<std::uint64_t>(style.max_shapes - style.min_shapes + 1)));
    const double base_hue = rng.uniform();
    for (auto& s : shapes) {
        s.ellipse = rng.uniform() < 0.55;
        s.cx = rng.uniform() * w;
        s.cy = rng.uniform() * h;
        const double r = std::min(w, h) * (0.04 + 0.22 * rng.uniform());
        s.a = r;
        s.b = r * (0.3 + 0.7 * rng.uniform());
        s.angle = rng.uniform() * std::numbers::pi;
        s.ca = std::cos(s.angle);
        s.sa = std::sin(s.angle);
        for (int c = 0; c < 3; ++c) {
            const double mid = 128 + 90 * std::sin(2 * std::numbers::pi * (base_hue + c / 3.0));
            s.rgb[c] = std::clamp(mid + style.palette_spread * 110 * (rng.uniform() - 0.5) * 2, 0.0, 255.0);
        }
    }
    double bg0[3], bg1[3];
    for (int c = 0; c < 3; ++c) {
        bg0[c] = 40 + 170 * rng.uniform();
        bg1[c] = 40 + 170 * rng.uniform();
    }
    const double bg_angle = rng.uniform() * 2 * std::numbers::pi;
    const double bg_c = std::cos(bg_angle), bg_s = std::sin(bg_angle);

    const int lw = 10, lh = 10;
    std::vector<double> lattice(lw * lh);
    for (auto& v : lattice) v = rng.uniform() * 2 - 1;

    std::vector<std::uint8_t> px(width * height * 3);
    const int ss = 3;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            double acc[3] = {0, 0, 0};
            for (int sy = 0; sy < ss; ++sy) {
                for (int sx = 0; sx < ss; ++sx) {
                    const double fx = x + (sx + 0.5) / ss, fy = y + (sy + 0.5) / ss;
                    const double t = std::clamp(
                        0.5 + ((fx / w - 0.5) * bg_c + (fy / h - 0.5) * bg_s), 0.0, 1.0);
                    double col[3];
                    for (int c = 0; c < 3; ++c) col[c] = bg0[c] * (1 - t) + bg1[c] * t;
                    for (const auto& s : shapes) {
                        const double dx = fx - s.cx, dy = fy - s.cy;
                        const double u = dx * s.ca + dy * s.sa;
                        const double v = -dx * s.sa + dy * s.ca;
                        const bool inside = s.ellipse ? (u * u) / (s.a * s.a) + (v * v) / (s.b * s.b) <= 1.0
                                                      : std::abs(u) <= s.a && std::abs(v) <= s.b;
                        if (inside)
                            for (int c = 0; c < 3; ++c) col[c] = s.rgb[c];
                    }
                    for (int c = 0; c < 3; ++c) acc[c] += col[c];
                }
            }
            const double tex = style.texture *
                               detail::value_noise(lattice, lw, (x + 0.5) / w * (lw - 1.001), (y + 0.5) / h * (lh - 1.001));
            const double grain = style.grain > 0 ? style.grain * (rng.uniform() * 2 - 1) : 0.0;
            for (int c = 0; c < 3; ++c)
                px[(y * width + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(std::lround(acc[c] / (ss * ss) + tex + grain), 0L, 255L));
        }
    }
    return ImageMatrix(width, height, std::move(px));
}

/// Rotate 90 degrees counter-clockwise.
inline GrayMatrix rotate90(const GrayMatrix& m) {
    GrayMatrix out(m.height(), m.width(), 0.0);
    for (std::size_t y = 0; y < m.height(); ++y)
        for (std::size_t x = 0; x < m.width(); ++x) out(y, m.width() - 1 - x) = m(x, y);
    return out;
}

}  // namespace chplane::synth
