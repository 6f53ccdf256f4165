#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clickmask/core.hpp"
#include "clickmask/geometry.hpp"

namespace clickmask {

struct ImageEntry {
    std::string path;
    int width = 0;
    int height = 0;
    bool annotated = false;
    /// Painted in order; a hole belongs to the latest preceding outer polygon
    /// that contains it.
    std::vector<Polygon> polygons;

    bool operator==(const ImageEntry&) const = default;
};

struct ProjectSettings {
    std::string engine = "graphcut";
    double epsilon = kDefaultEpsilon;
    bool autosave = true;
    std::filesystem::path save_directory;
};

struct ProjectState {
    std::vector<ImageEntry> images;
    std::vector<Category> categories;
    ProjectSettings settings;

    /// Throws on duplicate image paths.
    ImageEntry& add_image(std::string path, int width, int height);
    /// Live (not deleted) category with this id, or nullptr.
    const Category* find_category(int id) const;
    /// Unique image paths, unique positive category ids, valid polygons
    /// referencing live categories.
    void validate() const;
};

/// Label image of one entry: rasterize() of its polygons.
LabelMask rasterize_entry(const ImageEntry& entry);

// COCO ------------------------------------------------------------------------
//
// Subset of the detection schema: images (id, file_name, width, height),
// categories (id, name), annotations (id, image_id, category_id,
// segmentation, area, bbox, iscrowd). Every outer polygon becomes one
// annotation whose segmentation lists the outer ring first and its holes
// after it; area counts the rasterized pixels, bbox is the outer ring's
// vertex extent. Image and annotation ids follow insertion order from 1.

/// Pretty-printed UTF-8 JSON. Throws on dangling category references.
std::string export_coco(const ProjectState& project);
/// Inverse of export_coco; category colours come from voc_palette(id).
ProjectState import_coco(std::string_view json);

// Category files --------------------------------------------------------------

/// One `id|comment|r,g,b` line per live category, LF line endings.
std::string format_categories(std::span<const Category> categories);
/// Blank lines are skipped; errors name the 1-based line.
std::vector<Category> parse_categories(std::string_view text);
void save_categories(std::span<const Category> categories, const std::filesystem::path& path);
std::vector<Category> load_categories(const std::filesystem::path& path);

// Saving ----------------------------------------------------------------------

struct SaveFormats {
    bool grayscale = true;   // <stem>.png
    bool pseudocolor = false;  // <stem>_pseudo.png
    bool coco = false;       // <stem>.json, single-image document
};

/// Writes the chosen files for one image and returns their paths. Writes go
/// through a temporary file and are serialized per target path.
std::vector<std::filesystem::path> save_image_annotations(const ProjectState& project, std::size_t image_index,
                                                          const std::filesystem::path& directory,
                                                          const SaveFormats& formats);

/// Image-switch autosave: `<stem>.png` plus the whole-project
/// `annotations.json` in settings.save_directory. No-op when autosave is off.
std::vector<std::filesystem::path> autosave(const ProjectState& project, std::size_t image_index);

/// Atomic write (temporary file + rename) serialized per target path.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace clickmask
