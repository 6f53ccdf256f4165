#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "clickmask/io.hpp"
#include "clickmask/sequence.hpp"

namespace clickmask {
namespace fs = std::filesystem;
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(item);
    return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& what) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw Error(ErrorCode::ParseError, "volume header: bad " + what + " '" + s + "'");
    return v;
}

void check_axis(int axis) {
    if (axis < 0 || axis > 2) throw Error(ErrorCode::OutOfRange, "axis must be 0, 1 or 2");
}

// Frame shape and voxel mapping for a slicing axis.
struct Slicing {
    int axis;
    std::array<int, 3> dims;

    int count() const { return dims[axis]; }
    int frame_width() const { return axis == 0 ? dims[1] : dims[0]; }
    int frame_height() const { return axis == 2 ? dims[1] : dims[2]; }
    std::size_t voxel(int k, int u, int v) const {
        int x = 0, y = 0, z = 0;
        if (axis == 2) x = u, y = v, z = k;
        else if (axis == 0) x = k, y = u, z = v;
        else x = u, y = k, z = v;
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(dims[0]) * (y + static_cast<std::size_t>(dims[1]) * z);
    }
};

// Inverse of Slicing: volume dims from frame shape and count.
std::array<int, 3> dims_from_frames(int axis, int count, int width, int height) {
    if (axis == 2) return {width, height, count};
    if (axis == 0) return {count, width, height};
    return {width, count, height};
}

template <class Frame, class Get>
Volume stack(std::span<const Frame> frames, int axis, Get get) {
    check_axis(axis);
    if (frames.empty()) throw Error(ErrorCode::EmptyInput, "frames_to_volume: no frames");
    const int w = frames[0].width(), h = frames[0].height();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].width() != w || frames[i].height() != h)
            throw Error(ErrorCode::DimensionMismatch, "frames_to_volume: frame " + std::to_string(i) + " differs in size");
    }
    Volume vol;
    vol.dims = dims_from_frames(axis, static_cast<int>(frames.size()), w, h);
    vol.data.assign(vol.voxel_count(), 0);
    const Slicing s{axis, vol.dims};
    for (int k = 0; k < s.count(); ++k)
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) vol.data[s.voxel(k, u, v)] = get(frames[static_cast<std::size_t>(k)], u, v);
    return vol;
}

bool is_image_file(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::vector<fs::path> sorted_images(const fs::path& directory) {
    if (!fs::is_directory(directory)) throw Error(ErrorCode::NotFound, "not a directory: " + directory.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(directory))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::EmptyInput, "no images in " + directory.string());
    return files;
}

}  // namespace

Volume load_volume(const fs::path& header_path) {
    std::ifstream in(header_path);
    if (!in) throw Error(fs::exists(header_path) ? ErrorCode::IoFailure : ErrorCode::NotFound,
                         "cannot open volume header " + header_path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, header_path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!kv.count("dims")) throw Error(ErrorCode::ParseError, "volume header: missing dims");
    const auto dims = split(kv["dims"], ',');
    if (dims.size() != 3) throw Error(ErrorCode::ParseError, "volume header: dims needs three values");
    Volume vol;
    for (int i = 0; i < 3; ++i) {
        vol.dims[i] = parse_number<int>(dims[i], "dims");
        if (vol.dims[i] <= 0) throw Error(ErrorCode::ParseError, "volume header: dims must be positive");
    }
    if (kv.count("spacing")) {
        const auto sp = split(kv["spacing"], ',');
        if (sp.size() != 3) throw Error(ErrorCode::ParseError, "volume header: spacing needs three values");
        for (int i = 0; i < 3; ++i) vol.spacing[i] = parse_number<double>(sp[i], "spacing");
    }
    if (kv.count("bit_depth") && kv["bit_depth"] != "16")
        throw Error(ErrorCode::UnsupportedFormat, "volume header: only bit_depth=16 is supported");
    if (kv.count("byte_order") && kv["byte_order"] != "little")
        throw Error(ErrorCode::UnsupportedFormat, "volume header: only little-endian data is supported");
    fs::path data_path = header_path;
    data_path.replace_extension(".raw");
    if (kv.count("data")) data_path = header_path.parent_path() / kv["data"];

    std::ifstream raw(data_path, std::ios::binary);
    if (!raw) throw Error(ErrorCode::NotFound, "cannot open volume data " + data_path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    if (bytes.size() != vol.voxel_count() * 2)
        throw Error(ErrorCode::CorruptFile, data_path.string() + ": expected " + std::to_string(vol.voxel_count() * 2) +
                                                " bytes, found " + std::to_string(bytes.size()));
    vol.data.resize(vol.voxel_count());
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        vol.data[i] = static_cast<std::uint16_t>(bytes[2 * i] | bytes[2 * i + 1] << 8);
    return vol;
}

void save_volume(const Volume& volume, const fs::path& header_path) {
    if (volume.data.size() != volume.voxel_count() || volume.data.empty())
        throw Error(ErrorCode::InvalidArgument, "save_volume: data size does not match dims");
    fs::path data_path = header_path;
    data_path.replace_extension(".raw");
    std::ofstream raw(data_path, std::ios::binary | std::ios::trunc);
    if (!raw) throw Error(ErrorCode::IoFailure, "cannot write " + data_path.string());
    for (auto v : volume.data) {
        raw.put(static_cast<char>(v & 0xff));
        raw.put(static_cast<char>(v >> 8));
    }
    raw.close();
    std::ofstream out(header_path, std::ios::trunc);
    if (!out || !raw) throw Error(ErrorCode::IoFailure, "cannot write " + header_path.string());
    std::ostringstream spacing;
    spacing.precision(17);
    spacing << volume.spacing[0] << ',' << volume.spacing[1] << ',' << volume.spacing[2];
    out << "dims=" << volume.dims[0] << ',' << volume.dims[1] << ',' << volume.dims[2] << '\n'
        << "spacing=" << spacing.str() << '\n'
        << "bit_depth=16\nbyte_order=little\n"
        << "data=" << data_path.filename().string() << '\n';
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + header_path.string());
}

Volume load_volume_slices(const fs::path& directory) {
    std::vector<RasterImage> slices;
    for (const auto& p : sorted_images(directory)) {
        RasterImage img = load_image(p);
        if (img.channels() != 1) throw Error(ErrorCode::UnsupportedFormat, p.string() + ": slices must be single-channel");
        slices.push_back(std::move(img));
    }
    return frames_to_volume(std::span<const RasterImage>(slices), 2);
}

FrameSequence volume_to_frames(const Volume& volume, int axis) {
    check_axis(axis);
    if (volume.data.size() != volume.voxel_count() || volume.data.empty())
        throw Error(ErrorCode::InvalidArgument, "volume data size does not match dims");
    const Slicing s{axis, volume.dims};
    FrameSequence seq;
    seq.spacing = volume.spacing[axis];
    for (int k = 0; k < s.count(); ++k) {
        RasterImage frame(s.frame_width(), s.frame_height(), 1, 16);
        for (int v = 0; v < s.frame_height(); ++v)
            for (int u = 0; u < s.frame_width(); ++u) frame.set(u, v, 0, volume.data[s.voxel(k, u, v)]);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

Volume frames_to_volume(std::span<const RasterImage> frames, int axis) {
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (frames[i].channels() != 1)
            throw Error(ErrorCode::InvalidArgument, "frames_to_volume: frame " + std::to_string(i) + " is not single-channel");
    return stack(frames, axis, [](const RasterImage& f, int u, int v) { return f.at(u, v, 0); });
}

Volume frames_to_volume(std::span<const LabelMask> masks, int axis) {
    return stack(masks, axis, [](const LabelMask& m, int u, int v) { return m.at(u, v); });
}

FrameSequence load_frames(const fs::path& directory) {
    FrameSequence seq;
    for (const auto& p : sorted_images(directory)) seq.frames.push_back(load_image(p));
    seq.validate();
    return seq;
}

std::vector<fs::path> save_frame_masks(std::span<const LabelMask> masks, const fs::path& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + directory.string() + ": " + ec.message());
    std::vector<fs::path> written;
    for (std::size_t k = 0; k < masks.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.png", k);
        write_mask(masks[k], MaskMode::Grayscale, directory / name);
        written.push_back(directory / name);
    }
    return written;
}

}  // namespace clickmask
