#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clickmask/error.hpp"

namespace clickmask {

/// Multi-channel 8/16-bit pixel grid, row-major, channel-interleaved.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(int width, int height, int channels, int bit_depth);
    RasterImage(int width, int height, int channels, int bit_depth, std::vector<std::uint16_t> samples);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    int bit_depth() const noexcept { return bit_depth_; }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const noexcept { return samples_.empty(); }

    /// Largest representable sample, 2^bit_depth - 1.
    std::uint32_t max_value() const noexcept { return (1u << bit_depth_) - 1u; }

    std::uint16_t at(int x, int y, int c = 0) const {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    void set(int x, int y, int c, std::uint16_t v);

    /// Sample scaled to [0,1] by the bit depth.
    double scaled(int x, int y, int c) const { return at(x, y, c) / static_cast<double>(max_value()); }

    std::span<const std::uint16_t> samples() const noexcept { return samples_; }
    std::span<std::uint16_t> samples() noexcept { return samples_; }

    /// Per-pixel channel vectors scaled to [0,1], pixel-major.
    std::vector<double> scaled_features() const;

    RasterImage crop(int x0, int y0, int w, int h) const;

    bool operator==(const RasterImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    int bit_depth_ = 8;
    std::vector<std::uint16_t> samples_;
};

/// Row-major 16-bit label grid. A binary mask uses labels {0,1}.
class LabelMask {
public:
    LabelMask() = default;
    LabelMask(int width, int height, std::uint16_t fill = 0);
    LabelMask(int width, int height, std::vector<std::uint16_t> labels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return labels_.size(); }

    std::uint16_t at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, std::uint16_t v) { labels_[static_cast<std::size_t>(y) * width_ + x] = v; }
    std::uint16_t operator[](std::size_t i) const { return labels_[i]; }
    std::uint16_t& operator[](std::size_t i) { return labels_[i]; }

    std::span<const std::uint16_t> labels() const noexcept { return labels_; }
    std::span<std::uint16_t> labels() noexcept { return labels_; }

    bool same_size(const LabelMask& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }
    std::size_t count_nonzero() const;
    bool empty_foreground() const { return count_nonzero() == 0; }
    std::uint16_t max_label() const;

    /// Binary view: 1 where the label is nonzero.
    LabelMask binarized() const;

    LabelMask crop(int x0, int y0, int w, int h) const;

    bool operator==(const LabelMask&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint16_t> labels_;
};

enum class Polarity { Positive, Negative };

struct Click {
    int x = 0;
    int y = 0;
    Polarity polarity = Polarity::Positive;
    int ordinal = 0;

    bool positive() const noexcept { return polarity == Polarity::Positive; }
    bool operator==(const Click&) const = default;
};

/// Clicks in placement order; ordinals are assigned on insertion.
class ClickSet {
public:
    ClickSet() = default;

    const Click& add(int x, int y, Polarity polarity);
    void undo();

    std::span<const Click> clicks() const noexcept { return clicks_; }
    std::size_t size() const noexcept { return clicks_.size(); }
    bool empty() const noexcept { return clicks_.empty(); }
    const Click& operator[](std::size_t i) const { return clicks_[i]; }
    bool has_positive() const;

    /// First n clicks as a new set.
    ClickSet prefix(std::size_t n) const;

    /// Throws OutOfRange if any click falls outside [0,width) x [0,height).
    void check_bounds(int width, int height) const;

    bool operator==(const ClickSet&) const = default;

private:
    std::vector<Click> clicks_;
};

/// Boundary prior in [0,1]; the initial prior is all zeros.
class EdgeMap {
public:
    EdgeMap() = default;
    EdgeMap(int width, int height);
    EdgeMap(int width, int height, std::vector<double> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const EdgeMap&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

struct Category {
    int id = 0;
    std::string comment;
    std::array<std::uint8_t, 3> color{0, 0, 0};
    bool deleted = false;

    bool operator==(const Category&) const = default;
};

/// |a ∩ b| / |a ∪ b| over nonzero pixels; 1.0 when both are empty.
double iou(const LabelMask& a, const LabelMask& b);

enum class Connectivity { Four = 4, Eight = 8 };

struct Components {
    int width = 0;
    int height = 0;
    /// Component id per pixel, -1 for background. Ids follow raster order of each component's first pixel.
    std::vector<int> ids;
    std::vector<std::size_t> areas;

    std::size_t count() const noexcept { return areas.size(); }
    LabelMask component_mask(int id) const;
};

Components connected_components(const LabelMask& mask, Connectivity connectivity);

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel; pixels outside the image count as background.
std::vector<double> distance_transform(const LabelMask& mask);

}  // namespace clickmask
