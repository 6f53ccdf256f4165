#include "clickmask/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace clickmask {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::OutOfRange: return "out-of-range";
        case ErrorCode::NoPositiveClick: return "no-positive-click";
        case ErrorCode::SolverNonConvergence: return "solver-nonconvergence";
        case ErrorCode::EmptyInput: return "empty-input";
        case ErrorCode::ParseError: return "parse-error";
        case ErrorCode::UnsupportedFormat: return "unsupported-format";
        case ErrorCode::CorruptFile: return "corrupt-file";
        case ErrorCode::IoFailure: return "io-failure";
        case ErrorCode::NotFound: return "not-found";
        case ErrorCode::Conflict: return "conflict";
    }
    return "unknown";
}

namespace {

void check_image_shape(int width, int height, int channels, int bit_depth) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    if (channels < 1 || channels > 16) {
        throw Error(ErrorCode::InvalidArgument, "channel count must be in [1,16]");
    }
    if (bit_depth != 8 && bit_depth != 16) {
        throw Error(ErrorCode::InvalidArgument, "bit depth must be 8 or 16");
    }
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels, int bit_depth)
    : width_(width), height_(height), channels_(channels), bit_depth_(bit_depth) {
    check_image_shape(width, height, channels, bit_depth);
    samples_.assign(static_cast<std::size_t>(width) * height * channels, 0);
}

RasterImage::RasterImage(int width, int height, int channels, int bit_depth,
                         std::vector<std::uint16_t> samples)
    : width_(width), height_(height), channels_(channels), bit_depth_(bit_depth),
      samples_(std::move(samples)) {
    check_image_shape(width, height, channels, bit_depth);
    if (samples_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw Error(ErrorCode::DimensionMismatch, "sample count does not match width*height*channels");
    }
    if (bit_depth == 8) {
        for (auto s : samples_) {
            if (s > 255) throw Error(ErrorCode::InvalidArgument, "8-bit sample exceeds 255");
        }
    }
}

void RasterImage::set(int x, int y, int c, std::uint16_t v) {
    if (v > max_value()) throw Error(ErrorCode::InvalidArgument, "sample exceeds bit depth");
    samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c] = v;
}

std::vector<double> RasterImage::scaled_features() const {
    std::vector<double> out(samples_.size());
    const double inv = 1.0 / static_cast<double>(max_value());
    for (std::size_t i = 0; i < samples_.size(); ++i) out[i] = samples_[i] * inv;
    return out;
}

RasterImage RasterImage::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width_ || y0 + h > height_) {
        throw Error(ErrorCode::OutOfRange, "crop rectangle outside image");
    }
    std::vector<std::uint16_t> out;
    out.reserve(static_cast<std::size_t>(w) * h * channels_);
    for (int y = y0; y < y0 + h; ++y) {
        auto row = samples_.begin() + (static_cast<std::ptrdiff_t>(y) * width_ + x0) * channels_;
        out.insert(out.end(), row, row + static_cast<std::ptrdiff_t>(w) * channels_);
    }
    return RasterImage(w, h, channels_, bit_depth_, std::move(out));
}

LabelMask::LabelMask(int width, int height, std::uint16_t fill)
    : width_(width), height_(height),
      labels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
}

LabelMask::LabelMask(int width, int height, std::vector<std::uint16_t> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    if (labels_.size() != static_cast<std::size_t>(width) * height) {
        throw Error(ErrorCode::DimensionMismatch, "label count does not match width*height");
    }
}

std::size_t LabelMask::count_nonzero() const {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](auto v) { return v != 0; }));
}

std::uint16_t LabelMask::max_label() const {
    return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

LabelMask LabelMask::binarized() const {
    LabelMask out = *this;
    for (auto& v : out.labels_) v = v != 0 ? 1 : 0;
    return out;
}

LabelMask LabelMask::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width_ || y0 + h > height_) {
        throw Error(ErrorCode::OutOfRange, "crop rectangle outside mask");
    }
    LabelMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.set(x, y, at(x0 + x, y0 + y));
    return out;
}

const Click& ClickSet::add(int x, int y, Polarity polarity) {
    clicks_.push_back(Click{x, y, polarity, static_cast<int>(clicks_.size())});
    return clicks_.back();
}

void ClickSet::undo() {
    if (clicks_.empty()) throw Error(ErrorCode::Conflict, "nothing to undo");
    clicks_.pop_back();
}

bool ClickSet::has_positive() const {
    return std::any_of(clicks_.begin(), clicks_.end(), [](const Click& c) { return c.positive(); });
}

ClickSet ClickSet::prefix(std::size_t n) const {
    ClickSet out;
    out.clicks_.assign(clicks_.begin(), clicks_.begin() + static_cast<std::ptrdiff_t>(std::min(n, clicks_.size())));
    return out;
}

void ClickSet::check_bounds(int width, int height) const {
    for (const auto& c : clicks_) {
        if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) {
            throw Error(ErrorCode::OutOfRange, "click (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                                                   ") outside " + std::to_string(width) + "x" +
                                                   std::to_string(height) + " image");
        }
    }
}

EdgeMap::EdgeMap(int width, int height)
    : width_(width), height_(height), values_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 0.0) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "edge map dimensions must be positive");
}

EdgeMap::EdgeMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "edge map dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width) * height) {
        throw Error(ErrorCode::DimensionMismatch, "edge value count does not match width*height");
    }
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "edge values must lie in [0,1]");
    }
}

double iou(const LabelMask& a, const LabelMask& b) {
    if (!a.same_size(b)) throw Error(ErrorCode::DimensionMismatch, "iou: mask dimensions differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        const bool fa = a[i] != 0, fb = b[i] != 0;
        inter += (fa && fb);
        uni += (fa || fb);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

LabelMask Components::component_mask(int id) const {
    LabelMask out(width, height);
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) out[i] = 1;
    return out;
}

Components connected_components(const LabelMask& mask, Connectivity connectivity) {
    const int w = mask.width(), h = mask.height();
    Components out;
    out.width = w;
    out.height = h;
    out.ids.assign(mask.pixel_count(), -1);

    static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
    static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
    const int nbrs = connectivity == Connectivity::Four ? 4 : 8;

    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (mask[idx] == 0 || out.ids[idx] != -1) continue;
            const int id = static_cast<int>(out.areas.size());
            std::size_t area = 0;
            out.ids[idx] = id;
            stack.push_back(static_cast<int>(idx));
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                ++area;
                const int px = p % w, py = p / w;
                for (int k = 0; k < nbrs; ++k) {
                    const int nx = px + dx8[k], ny = py + dy8[k];
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                    if (mask[n] != 0 && out.ids[n] == -1) {
                        out.ids[n] = id;
                        stack.push_back(static_cast<int>(n));
                    }
                }
            }
            out.areas.push_back(area);
        }
    }
    return out;
}

namespace {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) over one line.
// f[0] must be finite; the padded grid guarantees it.
void squared_distance_1d(std::span<const double> f, std::span<double> d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == inf) continue;
        while (true) {
            const int p = v[k];
            const double s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                             (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = inf;
            break;
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double diff = q - v[k];
        d[q] = f[v[k]] == inf ? inf : diff * diff + f[v[k]];
    }
}

}  // namespace

std::vector<double> distance_transform(const LabelMask& mask) {
    // Pad by one background pixel on every side so the border counts as background.
    const int w = mask.width() + 2, h = mask.height() + 2;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            grid[static_cast<std::size_t>(y + 1) * w + x + 1] = mask.at(x, y) != 0 ? inf : 0.0;

    std::vector<int> v;
    std::vector<double> z;
    std::vector<double> line(std::max(w, h)), out(std::max(w, h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) line[y] = grid[static_cast<std::size_t>(y) * w + x];
        squared_distance_1d(std::span(line.data(), h), std::span(out.data(), h), v, z);
        for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = out[y];
    }
    for (int y = 0; y < h; ++y) {
        std::span<double> row(grid.data() + static_cast<std::size_t>(y) * w, w);
        std::copy(row.begin(), row.end(), line.begin());
        squared_distance_1d(std::span(line.data(), w), std::span(out.data(), w), v, z);
        std::copy(out.begin(), out.begin() + w, row.begin());
    }

    std::vector<double> result(mask.pixel_count());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            result[static_cast<std::size_t>(y) * mask.width() + x] =
                std::sqrt(grid[static_cast<std::size_t>(y + 1) * w + x + 1]);
    return result;
}

}  // namespace clickmask
