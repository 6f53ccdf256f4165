#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clickmask/core.hpp"

namespace clickmask {

// Image decoding ------------------------------------------------------------
//
// Supported inputs: PNG (8/16-bit, 1-4 channels), binary PPM/PGM (P6/P5,
// 8/16-bit) and the multi-band container: a `<name>.bands` text header
// (key=value lines: width, height, channels, bit_depth, byte_order=little,
// optional data=<file>) next to `<name>.raw` holding channel-interleaved
// little-endian samples.

RasterImage load_image(const std::filesystem::path& path);

/// Decodes an in-memory PNG or PPM/PGM stream.
RasterImage decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const RasterImage& image);
void save_png(const RasterImage& image, const std::filesystem::path& path);
void save_ppm(const RasterImage& image, const std::filesystem::path& path);
void save_bands(const RasterImage& image, const std::filesystem::path& header_path);

/// Reads an 8/16-bit mask image; every nonzero sample becomes label 1.
LabelMask load_binary_mask(const std::filesystem::path& path);

// Display transforms ----------------------------------------------------------

/// Linear window: clamp(round_half_up((v - (level - width/2)) / width * 255), 0, 255).
RasterImage apply_window(const RasterImage& image, double level, double width);
std::uint8_t window_value(double v, double level, double width);

/// Maps three bands to an 8-bit RGB display image; 16-bit bands are min-max
/// rescaled per band (a constant band maps to 0).
RasterImage select_bands(const RasterImage& image, std::array<int, 3> bands);

// Grid patching ---------------------------------------------------------------

inline constexpr int kGridTriggerPixels = 2000;

struct GridPatch {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
    bool operator==(const GridPatch&) const = default;
};

struct GridLayout {
    int patch_size = 1024;
    int overlap = 128;
    int source_width = 0;
    int source_height = 0;
    int columns = 0;
    int rows = 0;
    /// Row-major patch rectangles.
    std::vector<GridPatch> patches;
};

bool needs_grid(int width, int height);
GridLayout grid_layout(int width, int height, int patch_size = 1024, int overlap = 128);
std::pair<std::vector<RasterImage>, GridLayout> grid_split(const RasterImage& image, int patch_size = 1024,
                                                           int overlap = 128);

/// Stitches per-patch masks in layout order. In overlaps a later patch only
/// fills pixels an earlier patch left at 0.
LabelMask grid_stitch(std::span<const LabelMask> patch_masks, const GridLayout& layout);

// Mask export -----------------------------------------------------------------

using Rgb = std::array<std::uint8_t, 3>;

/// Bit-interleaving pseudo-colour palette, n <= 256.
std::vector<Rgb> voc_palette(int n);

enum class MaskMode { Grayscale, Pseudocolor };

void write_mask(const LabelMask& mask, MaskMode mode, const std::filesystem::path& path);
/// Reads either mode back into label ids (palette indices for pseudo-colour).
LabelMask read_mask(const std::filesystem::path& path);

}  // namespace clickmask
