// Deterministic synthetic data shared by the test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "clickmask/core.hpp"

namespace fixtures {

/// Portable RNG: std::mt19937's raw output sequence is fixed by the standard,
/// unlike the std distributions, so everything is derived from raw draws.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : engine_(seed) {}
    std::uint32_t next() { return engine_(); }
    int uniform_int(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint32_t>(hi - lo + 1)); }
    double uniform() { return next() / 4294967296.0; }
    bool coin(double p = 0.5) { return uniform() < p; }

private:
    std::mt19937 engine_;
};

inline clickmask::RasterImage two_tone(int w, int h, int split_x, std::uint16_t left = 0, std::uint16_t right = 255,
                                       int channels = 1) {
    clickmask::RasterImage img(w, h, channels, 8);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) img.set(x, y, c, x < split_x ? left : right);
    return img;
}

inline clickmask::LabelMask left_block(int w, int h, int split_x) {
    clickmask::LabelMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < split_x; ++x) m.set(x, y, 1);
    return m;
}

inline clickmask::LabelMask rect_mask(int w, int h, int x0, int y0, int rw, int rh, std::uint16_t label = 1) {
    clickmask::LabelMask m(w, h);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x)
            if (x >= 0 && y >= 0 && x < w && y < h) m.set(x, y, label);
    return m;
}

inline clickmask::LabelMask random_mask(Rng& rng, int w, int h, double density) {
    clickmask::LabelMask m(w, h);
    for (std::size_t i = 0; i < m.pixel_count(); ++i) m[i] = rng.coin(density) ? 1 : 0;
    return m;
}

inline clickmask::RasterImage random_image(Rng& rng, int w, int h, int channels, int levels = 256) {
    clickmask::RasterImage img(w, h, channels, 8);
    for (auto& s : img.samples()) s = static_cast<std::uint16_t>(rng.uniform_int(0, levels - 1) * (255 / (levels - 1)));
    return img;
}

/// Filled ellipse mask.
inline clickmask::LabelMask ellipse_mask(int w, int h, double cx, double cy, double rx, double ry) {
    clickmask::LabelMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5 - cx) / rx, v = (y + 0.5 - cy) / ry;
            if (u * u + v * v <= 1.0) m.set(x, y, 1);
        }
    return m;
}

/// Smooth star-shaped blob: r(t) = r0 (1 + a sin(2t + p) + b sin(3t + q)),
/// with min radius >= r0 * 0.7.
inline clickmask::LabelMask random_blob(Rng& rng, int size, double r0) {
    const double a = 0.15 * rng.uniform(), b = 0.15 * rng.uniform();
    const double p = 6.283185307179586 * rng.uniform(), q = 6.283185307179586 * rng.uniform();
    const double cx = size / 2.0 + rng.uniform() - 0.5, cy = size / 2.0 + rng.uniform() - 0.5;
    clickmask::LabelMask m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double t = std::atan2(dy, dx);
            const double r = r0 * (1.0 + a * std::sin(2 * t + p) + b * std::sin(3 * t + q));
            if (dx * dx + dy * dy <= r * r) m.set(x, y, 1);
        }
    return m;
}

struct Instance {
    clickmask::RasterImage image;
    clickmask::LabelMask gt;
};

/// Two-tone blob on a contrasting background with mild uniform noise.
inline Instance two_tone_blob(std::uint32_t seed, int size = 64) {
    Rng rng(seed);
    const double rx = rng.uniform_int(9, 18), ry = rng.uniform_int(9, 18);
    const double cx = rng.uniform_int(static_cast<int>(rx) + 3, size - static_cast<int>(rx) - 3);
    const double cy = rng.uniform_int(static_cast<int>(ry) + 3, size - static_cast<int>(ry) - 3);
    Instance inst{clickmask::RasterImage(size, size, 3, 8), ellipse_mask(size, size, cx, cy, rx, ry)};
    const int fg[3] = {rng.uniform_int(170, 230), rng.uniform_int(120, 230), rng.uniform_int(20, 90)};
    const int bg[3] = {rng.uniform_int(20, 80), rng.uniform_int(40, 100), rng.uniform_int(120, 200)};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c) {
                const int base = inst.gt.at(x, y) ? fg[c] : bg[c];
                const int v = std::clamp(base + rng.uniform_int(-8, 8), 0, 255);
                inst.image.set(x, y, c, static_cast<std::uint16_t>(v));
            }
    return inst;
}

/// Frame with a bright square at (x0,y0) on a dark background.
inline clickmask::RasterImage square_frame(int w, int h, int x0, int y0, int side, int channels = 3) {
    clickmask::RasterImage img(w, h, channels, 8);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool in = x >= x0 && x < x0 + side && y >= y0 && y < y0 + side;
            for (int c = 0; c < channels; ++c) img.set(x, y, c, in ? static_cast<std::uint16_t>(200 + 10 * c) : 30);
        }
    return img;
}

}  // namespace fixtures

namespace clickmask {
inline void PrintTo(const LabelMask& m, std::ostream* os) {
    *os << m.width() << "x" << m.height() << "\n";
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) *os << m.at(x, y);
        *os << "\n";
    }
}
}  // namespace clickmask
