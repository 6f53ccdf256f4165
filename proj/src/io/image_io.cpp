#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "clickmask/io.hpp"

namespace clickmask {
namespace fs = std::filesystem;

namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) throw Error(ErrorCode::NotFound, "no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
    return data;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

// libpng ---------------------------------------------------------------------

struct PngContext {
    std::span<const std::uint8_t> input;
    std::size_t pos = 0;
    std::vector<std::uint8_t>* output = nullptr;
    std::vector<std::uint8_t> row;
    char message[256] = {};
};

void png_fail(png_structp png, png_const_charp msg) {
    auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
    std::snprintf(ctx->message, sizeof ctx->message, "%s", msg);
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

void png_read_bytes(png_structp png, png_bytep out, png_size_t n) {
    auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
    if (ctx->pos + n > ctx->input.size()) png_error(png, "truncated stream");
    std::memcpy(out, ctx->input.data() + ctx->pos, n);
    ctx->pos += n;
}

void png_write_bytes(png_structp png, png_bytep data, png_size_t n) {
    auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
    ctx->output->insert(ctx->output->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

struct DecodedPng {
    int width = 0, height = 0, channels = 0, bit_depth = 8;
    bool paletted = false;
    std::vector<std::uint16_t> samples;
    // Scratch kept off the setjmp frame.
    std::vector<std::uint8_t> buffer;
    std::vector<png_bytep> rows;
};

// The setjmp frame holds only trivially destructible locals; everything
// allocated goes through `out`, which outlives any longjmp.
bool decode_png_raw(PngContext* ctx, bool keep_palette, DecodedPng* out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx, png_fail, png_warn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, ctx, png_read_bytes);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    out->paletted = color_type == PNG_COLOR_TYPE_PALETTE;
    if (out->paletted) {
        if (keep_palette) {
            if (depth < 8) png_set_packing(png);
        } else {
            png_set_palette_to_rgb(png);
            if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        }
    } else {
        if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    }
    if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    out->width = static_cast<int>(png_get_image_width(png, info));
    out->height = static_cast<int>(png_get_image_height(png, info));
    out->channels = png_get_channels(png, info);
    out->bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out->buffer.resize(rowbytes * out->height);
    out->rows.resize(out->height);
    for (int y = 0; y < out->height; ++y) out->rows[y] = out->buffer.data() + rowbytes * y;
    png_read_image(png, out->rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t row_samples = static_cast<std::size_t>(out->width) * out->channels;
    out->samples.resize(row_samples * out->height);
    for (int y = 0; y < out->height; ++y) {
        std::uint16_t* dst = out->samples.data() + row_samples * y;
        if (out->bit_depth == 16) std::memcpy(dst, out->rows[y], row_samples * 2);
        else std::copy(out->rows[y], out->rows[y] + row_samples, dst);
    }
    return true;
}

DecodedPng decode_png(std::span<const std::uint8_t> bytes, bool keep_palette) {
    PngContext ctx;
    ctx.input = bytes;
    DecodedPng out;
    if (!decode_png_raw(&ctx, keep_palette, &out)) {
        throw Error(ErrorCode::CorruptFile, std::string("corrupt PNG: ") + (ctx.message[0] ? ctx.message : "decode failed"));
    }
    return out;
}

struct PngSpec {
    int width, height, channels, bit_depth;
    const std::uint16_t* samples;
    const std::vector<Rgb>* palette;  // non-null writes a paletted image
};

bool encode_png_raw(PngContext* ctx, const PngSpec* spec) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, ctx, png_fail, png_warn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, ctx, png_write_bytes, png_flush_noop);
    static constexpr int kColorTypes[] = {0, PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                          PNG_COLOR_TYPE_RGB_ALPHA};
    const int color_type = spec->palette ? PNG_COLOR_TYPE_PALETTE : kColorTypes[spec->channels];
    png_set_IHDR(png, info, spec->width, spec->height, spec->bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    if (spec->palette) {
        png_color pal[256];
        const int n = static_cast<int>(std::min<std::size_t>(spec->palette->size(), 256));
        for (int i = 0; i < n; ++i) pal[i] = {(*spec->palette)[i][0], (*spec->palette)[i][1], (*spec->palette)[i][2]};
        png_set_PLTE(png, info, pal, n);
    }
    png_write_info(png, info);

    const std::size_t row_samples = static_cast<std::size_t>(spec->width) * spec->channels;
    const std::size_t bytes_per = spec->bit_depth == 16 ? 2 : 1;
    ctx->row.resize(row_samples * bytes_per);
    for (int y = 0; y < spec->height; ++y) {
        const std::uint16_t* src = spec->samples + static_cast<std::size_t>(y) * row_samples;
        std::uint8_t* dst = ctx->row.data();
        for (std::size_t i = 0; i < row_samples; ++i) {
            if (bytes_per == 2) {
                dst[2 * i] = static_cast<std::uint8_t>(src[i] >> 8);  // PNG is big-endian
                dst[2 * i + 1] = static_cast<std::uint8_t>(src[i] & 0xff);
            } else {
                dst[i] = static_cast<std::uint8_t>(src[i]);
            }
        }
        png_write_row(png, dst);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

std::vector<std::uint8_t> encode_png_spec(const PngSpec& spec) {
    std::vector<std::uint8_t> bytes;
    PngContext ctx;
    ctx.output = &bytes;
    if (!encode_png_raw(&ctx, &spec)) throw Error(ErrorCode::IoFailure, std::string("PNG encode failed: ") + ctx.message);
    return bytes;
}

// PPM / PGM -------------------------------------------------------------------

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::string token() {
        skip_space_and_comments();
        std::string t;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) t.push_back(static_cast<char>(bytes_[pos_++]));
        if (t.empty()) throw Error(ErrorCode::CorruptFile, "truncated PNM header");
        return t;
    }

    int number() {
        const std::string t = token();
        int v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size() || v <= 0)
            throw Error(ErrorCode::CorruptFile, "bad PNM header field '" + t + "'");
        return v;
    }

    /// Consumes the single whitespace byte that ends the header.
    std::size_t data_offset() {
        if (pos_ >= bytes_.size()) throw Error(ErrorCode::CorruptFile, "truncated PNM header");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
    HeaderReader header(bytes);
    const std::string magic = header.token();
    const int channels = magic == "P6" ? 3 : magic == "P5" ? 1 : 0;
    if (channels == 0) throw Error(ErrorCode::UnsupportedFormat, "only binary P5/P6 PNM is supported");
    const int w = header.number(), h = header.number(), maxval = header.number();
    if (maxval > 65535) throw Error(ErrorCode::CorruptFile, "PNM maxval out of range");
    const int depth = maxval > 255 ? 16 : 8;
    const std::size_t offset = header.data_offset();
    const std::size_t count = static_cast<std::size_t>(w) * h * channels;
    const std::size_t need = count * (depth == 16 ? 2 : 1);
    if (bytes.size() < offset + need) throw Error(ErrorCode::CorruptFile, "truncated PNM data");
    std::vector<std::uint16_t> samples(count);
    const std::uint8_t* p = bytes.data() + offset;
    for (std::size_t i = 0; i < count; ++i) {
        samples[i] = depth == 16 ? static_cast<std::uint16_t>(p[2 * i] << 8 | p[2 * i + 1]) : p[i];
        if (samples[i] > maxval) throw Error(ErrorCode::CorruptFile, "PNM sample exceeds maxval");
    }
    return RasterImage(w, h, channels, depth, std::move(samples));
}

// Multi-band container ----------------------------------------------------------

std::map<std::string, std::string> parse_key_values(const fs::path& path) {
    const auto bytes = read_file(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

int header_int(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& path) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::ParseError, path.string() + ": missing key '" + key + "'");
    int v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, path.string() + ": bad integer for '" + key + "'");
    return v;
}

RasterImage load_bands(const fs::path& header_path) {
    const auto kv = parse_key_values(header_path);
    const int w = header_int(kv, "width", header_path), h = header_int(kv, "height", header_path);
    const int channels = header_int(kv, "channels", header_path), depth = header_int(kv, "bit_depth", header_path);
    if (const auto it = kv.find("byte_order"); it != kv.end() && it->second != "little")
        throw Error(ErrorCode::UnsupportedFormat, header_path.string() + ": only little-endian data is supported");
    if (w <= 0 || h <= 0 || channels < 1 || (depth != 8 && depth != 16))
        throw Error(ErrorCode::ParseError, header_path.string() + ": invalid dimensions or bit depth");
    fs::path data_path = header_path;
    data_path.replace_extension(".raw");
    if (const auto it = kv.find("data"); it != kv.end()) data_path = header_path.parent_path() / it->second;

    const auto raw = read_file(data_path);
    const std::size_t count = static_cast<std::size_t>(w) * h * channels;
    const std::size_t bytes_per = depth == 16 ? 2 : 1;
    if (raw.size() != count * bytes_per)
        throw Error(ErrorCode::CorruptFile, data_path.string() + ": expected " + std::to_string(count * bytes_per) +
                                                " bytes, found " + std::to_string(raw.size()));
    std::vector<std::uint16_t> samples(count);
    for (std::size_t i = 0; i < count; ++i)
        samples[i] = bytes_per == 2 ? static_cast<std::uint16_t>(raw[2 * i] | raw[2 * i + 1] << 8) : raw[i];
    return RasterImage(w, h, channels, depth, std::move(samples));
}

void check_encodable(const RasterImage& image, int max_channels, const char* what) {
    if (image.empty()) throw Error(ErrorCode::EmptyInput, std::string(what) + ": empty image");
    if (image.channels() > max_channels)
        throw Error(ErrorCode::UnsupportedFormat, std::string(what) + ": too many channels (" +
                                                      std::to_string(image.channels()) + ")");
}

bool has_png_signature(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && std::equal(std::begin(kPngSignature), std::end(kPngSignature), bytes.begin());
}

}  // namespace

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    if (has_png_signature(bytes)) {
        DecodedPng d = decode_png(bytes, false);
        if (d.channels < 1 || d.channels > 4) throw Error(ErrorCode::UnsupportedFormat, "unsupported PNG layout");
        return RasterImage(d.width, d.height, d.channels, d.bit_depth, std::move(d.samples));
    }
    if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes);
    throw Error(ErrorCode::UnsupportedFormat, "unrecognised image stream");
}

RasterImage load_image(const fs::path& path) {
    if (path.extension() == ".bands") return load_bands(path);
    const auto bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_png(const RasterImage& image) {
    check_encodable(image, 4, "encode_png");
    const auto samples = image.samples();
    return encode_png_spec(PngSpec{image.width(), image.height(), image.channels(), image.bit_depth(), samples.data(), nullptr});
}

void save_png(const RasterImage& image, const fs::path& path) { write_file(path, encode_png(image)); }

void save_ppm(const RasterImage& image, const fs::path& path) {
    check_encodable(image, 3, "save_ppm");
    if (image.channels() == 2) throw Error(ErrorCode::UnsupportedFormat, "save_ppm: needs 1 or 3 channels");
    const std::string header = std::string(image.channels() == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width()) +
                               " " + std::to_string(image.height()) + "\n" + std::to_string(image.max_value()) + "\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (auto v : image.samples()) {
        if (image.bit_depth() == 16) bytes.push_back(static_cast<std::uint8_t>(v >> 8));
        bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    write_file(path, bytes);
}

void save_bands(const RasterImage& image, const fs::path& header_path) {
    check_encodable(image, 16, "save_bands");
    fs::path data_path = header_path;
    data_path.replace_extension(".raw");
    std::vector<std::uint8_t> raw;
    raw.reserve(image.samples().size() * 2);
    for (auto v : image.samples()) {
        raw.push_back(static_cast<std::uint8_t>(v & 0xff));
        if (image.bit_depth() == 16) raw.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    write_file(data_path, raw);
    const std::string header = "width=" + std::to_string(image.width()) + "\nheight=" + std::to_string(image.height()) +
                               "\nchannels=" + std::to_string(image.channels()) +
                               "\nbit_depth=" + std::to_string(image.bit_depth()) +
                               "\nbyte_order=little\ndata=" + data_path.filename().string() + "\n";
    write_file(header_path, std::span(reinterpret_cast<const std::uint8_t*>(header.data()), header.size()));
}

LabelMask load_binary_mask(const fs::path& path) {
    const RasterImage img = load_image(path);
    LabelMask mask(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) mask.set(x, y, img.at(x, y, 0) != 0 ? 1 : 0);
    return mask;
}

// Display transforms ----------------------------------------------------------

std::uint8_t window_value(double v, double level, double width) {
    if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "window width must be positive");
    const double t = std::floor((v - (level - width / 2.0)) / width * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(t, 0.0, 255.0));
}

RasterImage apply_window(const RasterImage& image, double level, double width) {
    if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "window width must be positive");
    if (image.channels() != 1) throw Error(ErrorCode::InvalidArgument, "apply_window expects a single-channel image");
    RasterImage out(image.width(), image.height(), 1, 8);
    auto dst = out.samples();
    auto src = image.samples();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = window_value(src[i], level, width);
    return out;
}

RasterImage select_bands(const RasterImage& image, std::array<int, 3> bands) {
    for (int b : bands) {
        if (b < 0 || b >= image.channels())
            throw Error(ErrorCode::OutOfRange, "band index " + std::to_string(b) + " out of range for " +
                                                   std::to_string(image.channels()) + " channels");
    }
    RasterImage out(image.width(), image.height(), 3, 8);
    auto dst = out.samples();
    const auto src = image.samples();
    const std::size_t n = image.pixel_count();
    const int ch = image.channels();
    for (int k = 0; k < 3; ++k) {
        const int b = bands[k];
        if (image.bit_depth() == 8) {
            for (std::size_t p = 0; p < n; ++p) dst[p * 3 + k] = src[p * ch + b];
            continue;
        }
        std::uint16_t lo = 65535, hi = 0;
        for (std::size_t p = 0; p < n; ++p) {
            lo = std::min(lo, src[p * ch + b]);
            hi = std::max(hi, src[p * ch + b]);
        }
        for (std::size_t p = 0; p < n; ++p) {
            dst[p * 3 + k] = hi == lo ? 0
                                      : static_cast<std::uint16_t>(std::floor(
                                            (src[p * ch + b] - lo) * 255.0 / static_cast<double>(hi - lo) + 0.5));
        }
    }
    return out;
}

// Grid patching ---------------------------------------------------------------

bool needs_grid(int width, int height) { return width > kGridTriggerPixels || height > kGridTriggerPixels; }

GridLayout grid_layout(int width, int height, int patch_size, int overlap) {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "grid_layout: empty image");
    if (!(patch_size > overlap && overlap >= 0)) throw Error(ErrorCode::InvalidArgument, "grid_layout: need patch_size > overlap >= 0");
    GridLayout layout;
    layout.patch_size = patch_size;
    layout.overlap = overlap;
    layout.source_width = width;
    layout.source_height = height;
    const int step = patch_size - overlap;
    auto count = [&](int extent) { return std::max(1, (extent - overlap + step - 1) / step); };
    auto origin = [&](int i, int extent) { return std::max(0, std::min(i * step, extent - patch_size)); };
    layout.columns = count(width);
    layout.rows = count(height);
    for (int r = 0; r < layout.rows; ++r) {
        for (int c = 0; c < layout.columns; ++c) {
            const int x = origin(c, width), y = origin(r, height);
            layout.patches.push_back(GridPatch{x, y, std::min(patch_size, width - x), std::min(patch_size, height - y)});
        }
    }
    return layout;
}

std::pair<std::vector<RasterImage>, GridLayout> grid_split(const RasterImage& image, int patch_size, int overlap) {
    GridLayout layout = grid_layout(image.width(), image.height(), patch_size, overlap);
    std::vector<RasterImage> patches;
    patches.reserve(layout.patches.size());
    for (const auto& p : layout.patches) patches.push_back(image.crop(p.x, p.y, p.width, p.height));
    return {std::move(patches), std::move(layout)};
}

LabelMask grid_stitch(std::span<const LabelMask> patch_masks, const GridLayout& layout) {
    if (patch_masks.size() != layout.patches.size())
        throw Error(ErrorCode::DimensionMismatch, "grid_stitch: expected " + std::to_string(layout.patches.size()) +
                                                      " patch masks, got " + std::to_string(patch_masks.size()));
    LabelMask out(layout.source_width, layout.source_height);
    for (std::size_t i = 0; i < patch_masks.size(); ++i) {
        const auto& p = layout.patches[i];
        const auto& m = patch_masks[i];
        if (m.width() != p.width || m.height() != p.height)
            throw Error(ErrorCode::DimensionMismatch, "grid_stitch: patch " + std::to_string(i) + " has wrong size");
        for (int y = 0; y < p.height; ++y)
            for (int x = 0; x < p.width; ++x)
                if (out.at(p.x + x, p.y + y) == 0) out.set(p.x + x, p.y + y, m.at(x, y));
    }
    return out;
}

// Masks -----------------------------------------------------------------------

std::vector<Rgb> voc_palette(int n) {
    if (n < 0 || n > 256) throw Error(ErrorCode::OutOfRange, "voc_palette: n must be in [0,256]");
    std::vector<Rgb> palette(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int c = i;
        Rgb rgb{0, 0, 0};
        for (int j = 7; j >= 0; --j) {
            for (int k = 0; k < 3; ++k) rgb[k] |= static_cast<std::uint8_t>(((c >> k) & 1) << j);
            c >>= 3;
        }
        palette[i] = rgb;
    }
    return palette;
}

void write_mask(const LabelMask& mask, MaskMode mode, const fs::path& path) {
    if (mask.pixel_count() == 0) throw Error(ErrorCode::EmptyInput, "write_mask: empty mask");
    if (mask.max_label() > 255) throw Error(ErrorCode::OutOfRange, "write_mask: labels must be < 256");
    const auto labels = mask.labels();
    const auto palette = voc_palette(256);
    write_file(path, encode_png_spec(PngSpec{mask.width(), mask.height(), 1, 8, labels.data(),
                                             mode == MaskMode::Pseudocolor ? &palette : nullptr}));
}

LabelMask read_mask(const fs::path& path) {
    const auto bytes = read_file(path);
    if (!has_png_signature(bytes)) throw Error(ErrorCode::UnsupportedFormat, path.string() + ": masks must be PNG");
    DecodedPng d = decode_png(bytes, true);
    if (d.channels != 1)
        throw Error(ErrorCode::UnsupportedFormat, path.string() + ": mask must be grayscale or paletted");
    return LabelMask(d.width, d.height, std::move(d.samples));
}

}  // namespace clickmask
