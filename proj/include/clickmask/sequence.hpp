#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "clickmask/core.hpp"

namespace clickmask {

struct FrameSequence {
    std::vector<RasterImage> frames;
    double spacing = 1.0;  // frame interval or slice spacing

    std::size_t size() const noexcept { return frames.size(); }
    /// Throws unless non-empty with uniform width, height, channels and depth.
    void validate() const;
};

/// frame index -> reference mask
using ReferenceSet = std::map<int, LabelMask>;

struct PropagationParams {
    int grid_stride = 4;
    int patch_size = 7;
    int search_window = 48;
    int knn = 5;
    double tau = 10.0;
    bool refine_with_graphcut = true;
    double refine_lambda = 2.0;
    /// Propagated frames kept in the rolling memory next to the reference.
    int memory_frames = 8;

    void validate() const;
};

/// Hand-crafted patch descriptors on a regular grid. Grid points sit at
/// stride/2 + i*stride along each axis.
struct DescriptorSet {
    int width = 0;
    int height = 0;
    int stride = 1;
    int columns = 0;
    int rows = 0;
    int dim = 0;
    /// Row-major, `dim` values per grid point, each in [0,1].
    std::vector<double> values;
    /// Mask label at each grid point; empty when extracted without a mask.
    std::vector<std::uint16_t> labels;

    std::size_t count() const noexcept { return static_cast<std::size_t>(columns) * rows; }
    int grid_x(int column) const;
    int grid_y(int row) const;
    std::span<const double> descriptor(std::size_t i) const {
        return std::span<const double>(values).subspan(i * dim, dim);
    }
};

inline constexpr int kOrientationBins = 8;

/// Per-channel patch mean and standard deviation followed by an 8-bin
/// magnitude-weighted gradient-orientation histogram (normalised to sum 1).
DescriptorSet extract_descriptors(const RasterImage& frame, const LabelMask* mask, const PropagationParams& params);

/// Labelled descriptors of the frames a propagation currently remembers.
class MemoryBank {
public:
    struct Entry {
        int frame_index = 0;
        RasterImage frame;
        DescriptorSet descriptors;
        LabelMask mask;
    };

    explicit MemoryBank(std::size_t max_recent = 8) : max_recent_(max_recent) {}

    /// The reference is kept for the lifetime of the bank.
    void set_reference(int frame_index, RasterImage frame, LabelMask mask, const PropagationParams& params);
    /// Adds a propagated frame, evicting the oldest beyond the cap.
    void push(int frame_index, RasterImage frame, LabelMask mask, const PropagationParams& params);

    bool empty() const noexcept { return !reference_ && recent_.empty(); }
    std::size_t size() const noexcept { return (reference_ ? 1 : 0) + recent_.size(); }
    /// Reference first, then recent frames oldest to newest.
    std::vector<const Entry*> entries() const;

private:
    std::size_t max_recent_;
    std::optional<Entry> reference_;
    std::deque<Entry> recent_;
};

struct TransferResult {
    LabelMask mask;
    std::vector<double> confidence;
};

/// Label transfer by windowed k-nearest-neighbour descriptor matching. Each
/// match's grid displacement is refined to the pixel by patch SSD within
/// +-stride/2. A pixel takes the weighted vote of memory_mask(p + displacement)
/// over its nearest grid point's matches; an exact zero-displacement match is
/// used on its own. Optionally refined with a binary graph cut.
TransferResult transfer_labels(const RasterImage& target, const MemoryBank& memory, const PropagationParams& params);

struct FusionCandidate {
    LabelMask mask;
    std::vector<double> confidence;
    int dt = 0;  // frames from the reference
    int reference = 0;
};

struct FusedFrame {
    LabelMask mask;
    std::vector<double> confidence;
    int source_reference = 0;
};

/// Per-pixel weighted vote, weight = confidence * exp(-dt / tau). Ties go to
/// the temporally nearer candidate, then to the lower reference index.
FusedFrame fuse(std::span<const FusionCandidate> candidates, double tau);

using ProgressFn = std::function<void(int done, int total)>;

/// Propagates every reference outward in both directions up to the next
/// reference (or the sequence end), then fuses per frame. Reference frames
/// keep their masks with confidence 1.
std::vector<FusedFrame> propagate(const FrameSequence& sequence, const ReferenceSet& references,
                                  const PropagationParams& params, const ProgressFn& progress = {});

// Volumes -----------------------------------------------------------------------

/// 16-bit scalar grid indexed x + X*(y + Y*z).
struct Volume {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<std::uint16_t> data;

    std::size_t voxel_count() const noexcept {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::uint16_t at(int x, int y, int z) const {
        return data[static_cast<std::size_t>(x) + static_cast<std::size_t>(dims[0]) * (y + static_cast<std::size_t>(dims[1]) * z)];
    }
    bool operator==(const Volume&) const = default;
};

/// Header: key=value lines `dims=X,Y,Z`, `spacing=sx,sy,sz`, `bit_depth=16`,
/// `byte_order=little`, `data=<raw file>` (default: header stem + .raw).
Volume load_volume(const std::filesystem::path& header_path);
void save_volume(const Volume& volume, const std::filesystem::path& header_path);
/// Directory of 16-bit single-channel PNG slices (sorted by name) along z.
Volume load_volume_slices(const std::filesystem::path& directory);

/// Axis 2: Z frames of X x Y; axis 0: X frames of Y x Z; axis 1: Y frames of X x Z.
FrameSequence volume_to_frames(const Volume& volume, int axis);
Volume frames_to_volume(std::span<const RasterImage> frames, int axis);
Volume frames_to_volume(std::span<const LabelMask> masks, int axis);

/// Frames from a directory of PNG/PPM images sorted by file name.
FrameSequence load_frames(const std::filesystem::path& directory);
/// Writes `frame_00000.png`, ... as 8-bit grayscale label images.
std::vector<std::filesystem::path> save_frame_masks(std::span<const LabelMask> masks,
                                                    const std::filesystem::path& directory);

}  // namespace clickmask
