#include "clickmask/project.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"

#include "clickmask/io.hpp"

namespace clickmask {
namespace fs = std::filesystem;
using nlohmann::json;
namespace {

// Even-odd test at a point, same crossing rule as rasterize().
bool contains(const Polygon& poly, double px, double py) {
    bool inside = false;
    const auto& v = poly.vertices;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > py) == (v[j].y > py)) continue;
        const Point& lo = v[i].y < v[j].y ? v[i] : v[j];
        const Point& hi = v[i].y < v[j].y ? v[j] : v[i];
        const double xcross = lo.x + (py - lo.y) * (hi.x - lo.x) / (hi.y - lo.y);
        if (px < xcross) inside = !inside;
    }
    return inside;
}

// A pixel centre inside the polygon, falling back to its first vertex.
Point interior_sample(const Polygon& poly) {
    double x0 = poly.vertices[0].x, x1 = x0, y0 = poly.vertices[0].y, y1 = y0;
    for (const auto& p : poly.vertices) {
        x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    for (double y = std::floor(y0) + 0.5; y < y1; y += 1.0)
        for (double x = std::floor(x0) + 0.5; x < x1; x += 1.0)
            if (contains(poly, x, y)) return {x, y};
    return poly.vertices[0];
}

struct Group {
    std::size_t outer;
    std::vector<std::size_t> holes;
};

// Pairs each hole with the latest preceding outer polygon containing it.
std::vector<Group> group_polygons(const std::vector<Polygon>& polygons, const std::string& image) {
    std::vector<Group> groups;
    std::vector<std::size_t> group_of(polygons.size(), 0);
    for (std::size_t i = 0; i < polygons.size(); ++i) {
        if (!polygons[i].hole) {
            group_of[i] = groups.size();
            groups.push_back(Group{i, {}});
            continue;
        }
        const Point s = interior_sample(polygons[i]);
        std::size_t owner = polygons.size();
        for (std::size_t j = i; j-- > 0;) {
            if (!polygons[j].hole && contains(polygons[j], s.x, s.y)) {
                owner = j;
                break;
            }
        }
        if (owner == polygons.size())
            throw Error(ErrorCode::InvalidArgument, image + ": hole polygon " + std::to_string(i) + " has no enclosing polygon");
        groups[group_of[owner]].holes.push_back(i);
    }
    return groups;
}

json ring(const Polygon& poly) {
    json flat = json::array();
    for (const auto& p : poly.vertices) {
        flat.push_back(p.x);
        flat.push_back(p.y);
    }
    return flat;
}

std::size_t group_area(const ImageEntry& entry, const Group& g) {
    std::vector<Polygon> polys{entry.polygons[g.outer]};
    for (auto h : g.holes) polys.push_back(entry.polygons[h]);
    for (auto& p : polys) p.category_id = 1;
    return rasterize(polys, entry.width, entry.height).count_nonzero();
}

json image_document(const ProjectState& project, std::span<const std::size_t> image_indices) {
    json doc{{"images", json::array()}, {"categories", json::array()}, {"annotations", json::array()}};
    for (const auto& c : project.categories)
        if (!c.deleted) doc["categories"].push_back(json{{"id", c.id}, {"name", c.comment}});
    int image_id = 0, annotation_id = 0;
    for (std::size_t index : image_indices) {
        const ImageEntry& entry = project.images[index];
        ++image_id;
        doc["images"].push_back(
            json{{"id", image_id}, {"file_name", entry.path}, {"width", entry.width}, {"height", entry.height}});
        for (const auto& p : entry.polygons) {
            if (!project.find_category(p.category_id))
                throw Error(ErrorCode::InvalidArgument, entry.path + ": polygon references missing category " +
                                                            std::to_string(p.category_id));
        }
        for (const Group& g : group_polygons(entry.polygons, entry.path)) {
            const Polygon& outer = entry.polygons[g.outer];
            json segmentation = json::array({ring(outer)});
            for (auto h : g.holes) segmentation.push_back(ring(entry.polygons[h]));
            double x0 = outer.vertices[0].x, x1 = x0, y0 = outer.vertices[0].y, y1 = y0;
            for (const auto& v : outer.vertices) {
                x0 = std::min(x0, v.x), x1 = std::max(x1, v.x);
                y0 = std::min(y0, v.y), y1 = std::max(y1, v.y);
            }
            doc["annotations"].push_back(json{{"id", ++annotation_id},
                                              {"image_id", image_id},
                                              {"category_id", outer.category_id},
                                              {"segmentation", std::move(segmentation)},
                                              {"area", static_cast<double>(group_area(entry, g))},
                                              {"bbox", json::array({x0, y0, x1 - x0, y1 - y0})},
                                              {"iscrowd", 0}});
        }
    }
    return doc;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorCode::ParseError, where + ": missing '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::ParseError, where + ": bad '" + key + "'");
    }
}

Polygon parse_ring(const json& flat, int category_id, bool hole, const std::string& where) {
    if (!flat.is_array() || flat.size() < 6 || flat.size() % 2 != 0)
        throw Error(ErrorCode::ParseError, where + ": segmentation rings need an even number (>= 6) of coordinates");
    Polygon poly;
    poly.category_id = category_id;
    poly.hole = hole;
    for (std::size_t i = 0; i < flat.size(); i += 2) {
        if (!flat[i].is_number() || !flat[i + 1].is_number())
            throw Error(ErrorCode::ParseError, where + ": non-numeric coordinate");
        poly.vertices.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
    }
    return poly;
}

std::mutex& path_lock(const fs::path& path) {
    static std::mutex registry_mutex;
    static std::map<std::string, std::mutex> locks;
    std::lock_guard guard(registry_mutex);
    return locks[fs::absolute(path).lexically_normal().string()];
}

template <class Write>
void atomic_write(const fs::path& path, Write write) {
    std::lock_guard guard(path_lock(path));
    fs::path tmp = path;
    tmp += ".tmp";
    try {
        write(tmp);
        fs::rename(tmp, path);
    } catch (const fs::filesystem_error& e) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw Error(ErrorCode::IoFailure, "cannot write " + path.string() + ": " + e.what());
    } catch (...) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw;
    }
}

void write_bytes(const fs::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

void ensure_directory(const fs::path& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec || !fs::is_directory(directory))
        throw Error(ErrorCode::IoFailure, "cannot create " + directory.string() + (ec ? ": " + ec.message() : ""));
}

int parse_int(std::string_view s, const std::string& where) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::ParseError, where + ": expected an integer, got '" + std::string(s) + "'");
    return v;
}

}  // namespace

ImageEntry& ProjectState::add_image(std::string path, int width, int height) {
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    for (const auto& e : images)
        if (e.path == path) throw Error(ErrorCode::InvalidArgument, "duplicate image path " + path);
    images.push_back(ImageEntry{std::move(path), width, height, false, {}});
    return images.back();
}

const Category* ProjectState::find_category(int id) const {
    for (const auto& c : categories)
        if (c.id == id && !c.deleted) return &c;
    return nullptr;
}

void ProjectState::validate() const {
    std::set<int> ids;
    for (const auto& c : categories) {
        if (c.id <= 0) throw Error(ErrorCode::InvalidArgument, "category ids must be positive");
        if (!ids.insert(c.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate category id " + std::to_string(c.id));
    }
    std::set<std::string> paths;
    for (const auto& e : images) {
        if (!paths.insert(e.path).second) throw Error(ErrorCode::InvalidArgument, "duplicate image path " + e.path);
        for (const auto& p : e.polygons) {
            validate_polygon(p);
            if (!find_category(p.category_id))
                throw Error(ErrorCode::InvalidArgument,
                            e.path + ": polygon references missing category " + std::to_string(p.category_id));
        }
    }
}

LabelMask rasterize_entry(const ImageEntry& entry) { return rasterize(entry.polygons, entry.width, entry.height); }

std::string export_coco(const ProjectState& project) {
    std::vector<std::size_t> all(project.images.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return dump(image_document(project, all));
}

ProjectState import_coco(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("COCO document: ") + e.what());
    }
    for (const char* key : {"images", "categories", "annotations"}) {
        if (!doc.is_object() || !doc.contains(key) || !doc[key].is_array())
            throw Error(ErrorCode::ParseError, std::string("COCO document: missing array '") + key + "'");
    }
    ProjectState project;
    const auto palette = voc_palette(256);
    for (const auto& c : doc["categories"]) {
        const int id = field<int>(c, "id", "category");
        project.categories.push_back(
            Category{id, field<std::string>(c, "name", "category " + std::to_string(id)), palette[static_cast<std::size_t>(id) % 256], false});
    }
    std::map<long long, std::size_t> image_index;
    for (const auto& img : doc["images"]) {
        const auto id = field<long long>(img, "id", "image");
        const std::string where = "image " + std::to_string(id);
        if (!image_index.emplace(id, project.images.size()).second)
            throw Error(ErrorCode::ParseError, where + ": duplicate id");
        project.add_image(field<std::string>(img, "file_name", where), field<int>(img, "width", where),
                          field<int>(img, "height", where));
    }
    for (const auto& a : doc["annotations"]) {
        const std::string where = "annotation " + std::to_string(field<long long>(a, "id", "annotation"));
        const auto it = image_index.find(field<long long>(a, "image_id", where));
        if (it == image_index.end()) throw Error(ErrorCode::ParseError, where + ": unknown image_id");
        const int category = field<int>(a, "category_id", where);
        const json& seg = a.contains("segmentation") ? a["segmentation"] : json();
        if (!seg.is_array() || seg.empty())
            throw Error(ErrorCode::ParseError, where + ": segmentation must be a non-empty list of polygons");
        ImageEntry& entry = project.images[it->second];
        for (std::size_t r = 0; r < seg.size(); ++r) entry.polygons.push_back(parse_ring(seg[r], category, r > 0, where));
        entry.annotated = true;
    }
    project.validate();
    return project;
}

std::string format_categories(std::span<const Category> categories) {
    std::string out;
    for (const auto& c : categories) {
        if (c.deleted) continue;
        if (c.comment.find_first_of("|\n\r") != std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "category " + std::to_string(c.id) + ": comment may not contain '|' or line breaks");
        out += std::to_string(c.id) + "|" + c.comment + "|" + std::to_string(c.color[0]) + "," +
               std::to_string(c.color[1]) + "," + std::to_string(c.color[2]) + "\n";
    }
    return out;
}

std::vector<Category> parse_categories(std::string_view text) {
    std::vector<Category> out;
    std::set<int> ids;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = "line " + std::to_string(lineno);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto bar1 = line.find('|'), bar2 = bar1 == std::string::npos ? bar1 : line.find('|', bar1 + 1);
        if (bar2 == std::string::npos || line.find('|', bar2 + 1) != std::string::npos)
            throw Error(ErrorCode::ParseError, where + ": expected id|comment|r,g,b");
        Category c;
        c.id = parse_int(std::string_view(line).substr(0, bar1), where);
        if (c.id <= 0) throw Error(ErrorCode::ParseError, where + ": category id must be positive");
        if (!ids.insert(c.id).second) throw Error(ErrorCode::ParseError, where + ": duplicate category id");
        c.comment = line.substr(bar1 + 1, bar2 - bar1 - 1);
        const std::string_view rgb = std::string_view(line).substr(bar2 + 1);
        const auto c1 = rgb.find(','), c2 = c1 == std::string_view::npos ? c1 : rgb.find(',', c1 + 1);
        if (c2 == std::string_view::npos || rgb.find(',', c2 + 1) != std::string_view::npos)
            throw Error(ErrorCode::ParseError, where + ": colour must be r,g,b");
        const std::string_view parts[3] = {rgb.substr(0, c1), rgb.substr(c1 + 1, c2 - c1 - 1), rgb.substr(c2 + 1)};
        for (int k = 0; k < 3; ++k) {
            const int v = parse_int(parts[k], where);
            if (v < 0 || v > 255) throw Error(ErrorCode::ParseError, where + ": colour components must be 0-255");
            c.color[k] = static_cast<std::uint8_t>(v);
        }
        out.push_back(std::move(c));
    }
    return out;
}

void save_categories(std::span<const Category> categories, const fs::path& path) {
    write_text_file(path, format_categories(categories));
}

std::vector<Category> load_categories(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fs::exists(path) ? ErrorCode::IoFailure : ErrorCode::NotFound, "cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_categories(text.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_text_file(const fs::path& path, std::string_view text) {
    atomic_write(path, [&](const fs::path& tmp) { write_bytes(tmp, text); });
}

std::vector<fs::path> save_image_annotations(const ProjectState& project, std::size_t image_index,
                                             const fs::path& directory, const SaveFormats& formats) {
    if (image_index >= project.images.size()) throw Error(ErrorCode::OutOfRange, "image index out of range");
    const ImageEntry& entry = project.images[image_index];
    ensure_directory(directory);
    const std::string stem = fs::path(entry.path).stem().string();
    std::vector<fs::path> written;
    if (formats.grayscale || formats.pseudocolor) {
        const LabelMask mask = rasterize_entry(entry);
        if (formats.grayscale) {
            const fs::path p = directory / (stem + ".png");
            atomic_write(p, [&](const fs::path& tmp) { write_mask(mask, MaskMode::Grayscale, tmp); });
            written.push_back(p);
        }
        if (formats.pseudocolor) {
            const fs::path p = directory / (stem + "_pseudo.png");
            atomic_write(p, [&](const fs::path& tmp) { write_mask(mask, MaskMode::Pseudocolor, tmp); });
            written.push_back(p);
        }
    }
    if (formats.coco) {
        const fs::path p = directory / (stem + ".json");
        const std::size_t only[] = {image_index};
        write_text_file(p, dump(image_document(project, only)));
        written.push_back(p);
    }
    return written;
}

std::vector<fs::path> autosave(const ProjectState& project, std::size_t image_index) {
    if (!project.settings.autosave) return {};
    if (project.settings.save_directory.empty()) throw Error(ErrorCode::InvalidArgument, "autosave: no save directory");
    auto written = save_image_annotations(project, image_index, project.settings.save_directory, SaveFormats{});
    const fs::path coco = project.settings.save_directory / "annotations.json";
    write_text_file(coco, export_coco(project));
    written.push_back(coco);
    return written;
}

}  // namespace clickmask
