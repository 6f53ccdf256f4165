// clickmask command-line tool: eval, segment, propagate, convert, serve.
// Exit codes: 0 success, 1 input error, 2 runtime failure.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "clickmask/engines.hpp"
#include "clickmask/geometry.hpp"
#include "clickmask/io.hpp"
#include "clickmask/project.hpp"
#include "clickmask/sequence.hpp"
#include "clickmask/service.hpp"
#include "clickmask/simclick.hpp"

namespace fs = std::filesystem;
using namespace clickmask;

namespace {

constexpr int kInputError = 1;
constexpr int kRuntimeFailure = 2;

// Input problems detected by the tool itself.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string valid_engines(bool with_oracle) {
    std::string out;
    for (const auto& n : engine_id_names()) out += (out.empty() ? "" : ", ") + n;
    return with_oracle ? out + ", oracle" : out;
}

struct EngineFlags {
    std::string engine = "graphcut";
    EngineParams params;

    void add(CLI::App& cmd) {
        cmd.add_option("--engine", engine, "Engine id (" + valid_engines(false) + ")")->capture_default_str();
        cmd.add_option("--seed-radius", params.seed_radius, "Seed disk radius in pixels")->capture_default_str();
        cmd.add_option("--lambda", params.lambda, "Graph-cut pairwise weight")->capture_default_str();
        cmd.add_option("--beta", params.beta, "Random-walker contrast sensitivity")->capture_default_str();
        cmd.add_option("--edge-prior-weight", params.edge_prior_weight, "Boundary prior attenuation")->capture_default_str();
    }

    EngineParams resolve() {
        const auto id = parse_engine_id(engine);
        if (!id) throw InputError("unknown engine '" + engine + "'; valid ids: " + valid_engines(false));
        params.engine_id = *id;
        try {
            params.validate();
        } catch (const Error& e) {
            throw InputError(e.what());
        }
        return params;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, text);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// "x,y,+;x,y,-"
ClickSet parse_clicks(const std::string& text) {
    ClickSet clicks;
    std::stringstream all(text);
    std::string item;
    while (std::getline(all, item, ';')) {
        if (item.empty()) continue;
        int x = 0, y = 0;
        char sign = 0, extra = 0;
        if (std::sscanf(item.c_str(), "%d,%d,%c%c", &x, &y, &sign, &extra) != 3 || (sign != '+' && sign != '-'))
            throw InputError("bad click '" + item + "'; expected x,y,+ or x,y,-");
        clicks.add(x, y, sign == '+' ? Polarity::Positive : Polarity::Negative);
    }
    if (clicks.empty()) throw InputError("no clicks given");
    if (!clicks[0].positive()) throw InputError("the first click must be positive");
    return clicks;
}

std::vector<double> parse_thresholds(const std::string& text) {
    std::vector<double> out;
    std::stringstream all(text);
    std::string item;
    while (std::getline(all, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("bad threshold '" + item + "'");
        }
    }
    return out;
}

// "0:a.png,5:b.png"
ReferenceSet parse_references(const std::string& text) {
    ReferenceSet refs;
    std::stringstream all(text);
    std::string item;
    while (std::getline(all, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InputError("bad reference '" + item + "'; expected frame:mask.png");
        int frame = 0;
        try {
            frame = std::stoi(item.substr(0, colon));
        } catch (const std::exception&) {
            throw InputError("bad reference frame in '" + item + "'");
        }
        refs[frame] = read_mask(item.substr(colon + 1));
    }
    if (refs.empty()) throw InputError("at least one reference is required");
    return refs;
}

// Returns the ground truth: reaches every threshold on the first click.
Segmenter oracle_segmenter(const LabelMask& gt) {
    return [gt](const RasterImage&, const ClickSet&, const EdgeMap&) {
        EngineOutput out{gt.binarized(), {}, edge_from_mask(gt)};
        for (auto v : out.mask.labels()) out.confidence.push_back(v ? 1.0 : 0.0);
        return out;
    };
}

int cmd_eval(const fs::path& dataset, EngineFlags& flags, int max_clicks, const std::string& thresholds, int workers,
             const fs::path& out, fs::path curve) {
    ProtocolParams protocol;
    protocol.max_clicks = max_clicks;
    protocol.thresholds = parse_thresholds(thresholds);
    protocol.workers = workers;
    const bool oracle = flags.engine == "oracle";
    const EngineParams params = oracle ? EngineParams{} : flags.resolve();
    try {
        const DatasetListing listing = list_dataset(dataset);
        if (listing.instances.empty()) throw InputError("no image/mask pairs under " + dataset.string());
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    BenchmarkReport report;
    try {
        report = oracle ? evaluate_dataset(oracle_segmenter, "oracle", dataset, protocol)
                        : evaluate_dataset(params, dataset, protocol);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument) throw InputError(e.what());
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    if (curve.empty()) curve = out.parent_path() / (out.stem().string() + "_miou.csv");
    write_text(out, report_csv(report));
    write_text(curve, miou_curve_csv(report));
    std::cout << "dataset " << report.dataset_id << ", engine " << report.engine_id << ", " << report.traces.size()
              << " instances\n";
    for (double t : report.thresholds) {
        char line[96];
        std::snprintf(line, sizeof line, "mean NoC@%g: %.4f (failures: %d)\n", t * 100, report.mean_noc.at(t),
                      report.failure_count.at(t));
        std::cout << line;
    }
    for (const auto& s : report.skipped) std::cerr << "skipped: " << s << "\n";
    return report.skipped.empty() ? 0 : kInputError;
}

int cmd_segment(const fs::path& image_path, const std::string& clicks_text, EngineFlags& flags, const fs::path& out) {
    const ClickSet clicks = parse_clicks(clicks_text);
    const EngineParams params = flags.resolve();
    RasterImage image;
    try {
        image = load_image(image_path);
        clicks.check_bounds(image.width(), image.height());
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    EngineOutput result;
    try {
        result = segment(params, image, clicks, EdgeMap(image.width(), image.height()));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_mask(result.mask, MaskMode::Grayscale, out);
    std::cout << out.string() << ": " << result.mask.count_nonzero() << " foreground pixels\n";
    return 0;
}

int cmd_propagate(const fs::path& frames_dir, const fs::path& volume, int axis, const std::string& refs_text,
                  const PropagationParams& params, const fs::path& out) {
    const ReferenceSet refs = parse_references(refs_text);
    FrameSequence seq;
    try {
        seq = volume.empty() ? load_frames(frames_dir) : volume_to_frames(load_volume(volume), axis);
        params.validate();
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    std::vector<FusedFrame> result;
    try {
        result = propagate(seq, refs, params, [](int done, int total) { std::cerr << "\rpropagated " << done << "/" << total; });
        std::cerr << "\n";
    } catch (const Error& e) {
        std::cerr << "\nerror: " << e.what() << "\n";
        return e.code() == ErrorCode::OutOfRange || e.code() == ErrorCode::DimensionMismatch ? kInputError : kRuntimeFailure;
    }
    std::vector<LabelMask> masks;
    for (auto& f : result) masks.push_back(std::move(f.mask));
    const auto written = save_frame_masks(masks, out);
    std::cout << "wrote " << written.size() << " masks to " << out.string() << "\n";
    return 0;
}

int cmd_volume2frames(const fs::path& volume, int axis, const fs::path& out) {
    FrameSequence seq;
    try {
        seq = volume_to_frames(load_volume(volume), axis);
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    fs::create_directories(out);
    for (std::size_t k = 0; k < seq.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.png", k);
        save_png(seq.frames[k], out / name);
    }
    std::cout << "wrote " << seq.size() << " frames to " << out.string() << "\n";
    return 0;
}

int cmd_frames2volume(const fs::path& frames_dir, int axis, const std::vector<double>& spacing, const fs::path& out) {
    Volume vol;
    try {
        const FrameSequence seq = load_frames(frames_dir);
        vol = frames_to_volume(std::span<const RasterImage>(seq.frames), axis);
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    if (!spacing.empty()) {
        if (spacing.size() != 3) throw InputError("--spacing needs three values");
        for (int i = 0; i < 3; ++i) vol.spacing[i] = spacing[i];
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_volume(vol, out);
    std::cout << "wrote " << vol.dims[0] << "x" << vol.dims[1] << "x" << vol.dims[2] << " volume to " << out.string() << "\n";
    return 0;
}

int cmd_mask2coco(const fs::path& masks_dir, const fs::path& categories, double epsilon, const fs::path& out) {
    ProjectState project;
    if (!categories.empty()) {
        try {
            project.categories = load_categories(categories);
        } catch (const Error& e) {
            throw InputError(e.what());
        }
    }
    std::vector<fs::path> files;
    if (!fs::is_directory(masks_dir)) throw InputError("not a directory: " + masks_dir.string());
    for (const auto& e : fs::directory_iterator(masks_dir))
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no .png masks in " + masks_dir.string());
    const auto palette = voc_palette(256);
    for (const auto& f : files) {
        LabelMask mask;
        try {
            mask = read_mask(f);
        } catch (const Error& e) {
            throw InputError(e.what());
        }
        ImageEntry& entry = project.add_image(f.filename().string(), mask.width(), mask.height());
        std::vector<bool> present(65536, false);
        for (auto v : mask.labels()) present[v] = true;
        for (int label = 1; label < 65536; ++label) {
            if (!present[static_cast<std::size_t>(label)]) continue;
            if (!project.find_category(label)) {
                if (!categories.empty())
                    throw InputError(f.string() + ": label " + std::to_string(label) + " is not in the category file");
                project.categories.push_back(
                    Category{label, "class_" + std::to_string(label), palette[static_cast<std::size_t>(label) % 256], false});
            }
            LabelMask one(mask.width(), mask.height());
            for (std::size_t i = 0; i < mask.pixel_count(); ++i) one[i] = mask[i] == label;
            for (auto& p : extract_polygons(one, epsilon, label)) entry.polygons.push_back(std::move(p));
        }
        entry.annotated = !entry.polygons.empty();
    }
    std::sort(project.categories.begin(), project.categories.end(),
              [](const Category& a, const Category& b) { return a.id < b.id; });
    write_text(out, export_coco(project));
    std::cout << "wrote " << project.images.size() << " images to " << out.string() << "\n";
    return 0;
}

int cmd_coco2masks(const fs::path& coco, const fs::path& out) {
    ProjectState project;
    try {
        project = import_coco(read_text(coco));
    } catch (const Error& e) {
        throw InputError(e.what());
    }
    fs::create_directories(out);
    for (const auto& entry : project.images) {
        const fs::path p = out / (fs::path(entry.path).stem().string() + ".png");
        write_mask(rasterize_entry(entry), MaskMode::Grayscale, p);
    }
    std::cout << "wrote " << project.images.size() << " masks to " << out.string() << "\n";
    return 0;
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

int cmd_serve(const std::string& host, int port, EngineFlags& flags, const fs::path& image_root, const fs::path& save_dir,
              bool autosave, int workers) {
    ServiceConfig config;
    config.engine = flags.resolve();
    config.image_root = image_root;
    config.save_directory = save_dir;
    config.autosave = autosave;
    config.workers = workers;
    Service service(config);
    HttpServer server(service);
    int bound = 0;
    try {
        bound = server.bind(host, port);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    std::cout << "listening on http://" << host << ":" << bound << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        server.stop();
    });
    try {
        server.listen();
    } catch (const Error& e) {
        if (!g_stop.load()) {
            g_stop.store(true);
            watcher.join();
            std::cerr << "error: " << e.what() << "\n";
            return kRuntimeFailure;
        }
    }
    g_stop.store(true);
    watcher.join();
    // Queued propagation jobs finish before the service is destroyed.
    service.wait_idle();
    std::cout << "stopped" << std::endl;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive segmentation annotation toolkit"};
    app.require_subcommand(1);

    auto* eval = app.add_subcommand("eval", "Run the simulated-click benchmark over a dataset");
    fs::path dataset, eval_out, curve_out;
    EngineFlags eval_engine;
    int max_clicks = 20, workers = 1;
    std::string thresholds = "0.85,0.90";
    eval->add_option("--dataset", dataset, "Directory with images/ and masks/")->required();
    eval_engine.add(*eval);
    eval->get_option("--engine")->description("Engine id (" + valid_engines(true) + ")");
    eval->add_option("--max-clicks", max_clicks, "Click budget per instance")->capture_default_str();
    eval->add_option("--thresholds", thresholds, "Comma-separated IoU thresholds")->capture_default_str();
    eval->add_option("--workers", workers, "Parallel instances")->capture_default_str();
    eval->add_option("--out", eval_out, "Per-instance CSV")->required();
    eval->add_option("--curve", curve_out, "mIoU-per-click CSV (default: <out stem>_miou.csv)");

    auto* seg = app.add_subcommand("segment", "Segment one image from a click list");
    fs::path seg_image, seg_out;
    std::string clicks;
    EngineFlags seg_engine;
    seg->add_option("--image", seg_image, "Input image")->required();
    seg->add_option("--clicks", clicks, "Clicks as x,y,+ or x,y,- separated by ';'")->required();
    seg_engine.add(*seg);
    seg->add_option("--out", seg_out, "Grayscale mask PNG")->required();

    auto* prop = app.add_subcommand("propagate", "Propagate reference masks through a frame sequence");
    fs::path frames_dir, prop_volume, prop_out;
    int prop_axis = 2;
    std::string refs;
    PropagationParams prop_params;
    prop->add_option("--frames", frames_dir, "Directory of frames sorted by name");
    prop->add_option("--volume", prop_volume, "Volume header instead of a frame directory");
    prop->add_option("--axis", prop_axis, "Slicing axis for --volume")->capture_default_str();
    prop->add_option("--refs", refs, "References as frame:mask.png[,frame:mask.png]")->required();
    prop->add_option("--out", prop_out, "Output directory")->required();
    prop->add_option("--stride", prop_params.grid_stride, "Descriptor grid stride")->capture_default_str();
    prop->add_option("--patch", prop_params.patch_size, "Descriptor patch size (odd)")->capture_default_str();
    prop->add_option("--window", prop_params.search_window, "Search window radius")->capture_default_str();
    prop->add_option("--knn", prop_params.knn, "Matches per grid point")->capture_default_str();
    prop->add_option("--tau", prop_params.tau, "Temporal decay for fusion")->capture_default_str();
    prop->add_option("--memory", prop_params.memory_frames, "Propagated frames kept in memory")->capture_default_str();
    prop->add_flag("!--no-refine", prop_params.refine_with_graphcut, "Skip graph-cut refinement");
    prop->add_option("--refine-lambda", prop_params.refine_lambda, "Refinement pairwise weight")->capture_default_str();
    auto* frames_opt = prop->get_option("--frames");
    auto* volume_opt = prop->get_option("--volume");
    frames_opt->excludes(volume_opt);

    auto* conv = app.add_subcommand("convert", "Format conversions");
    conv->require_subcommand(1);
    auto* v2f = conv->add_subcommand("volume2frames", "Slice a volume into 16-bit PNG frames");
    auto* f2v = conv->add_subcommand("frames2volume", "Stack single-channel frames into a volume");
    auto* m2c = conv->add_subcommand("mask2coco", "Label masks to a COCO document");
    auto* c2m = conv->add_subcommand("coco2masks", "COCO document to grayscale label masks");
    fs::path conv_volume, conv_frames, conv_out, conv_masks, conv_categories, conv_coco;
    int conv_axis = 2;
    double epsilon = kDefaultEpsilon;
    std::vector<double> spacing;
    v2f->add_option("--volume", conv_volume, "Volume header")->required();
    v2f->add_option("--axis", conv_axis, "Slicing axis (0, 1, 2)")->capture_default_str();
    v2f->add_option("--out", conv_out, "Output directory")->required();
    f2v->add_option("--frames", conv_frames, "Frame directory")->required();
    f2v->add_option("--axis", conv_axis, "Stacking axis (0, 1, 2)")->capture_default_str();
    f2v->add_option("--spacing", spacing, "Voxel spacing sx sy sz")->expected(3);
    f2v->add_option("--out", conv_out, "Volume header to write")->required();
    m2c->add_option("--masks", conv_masks, "Directory of label PNGs")->required();
    m2c->add_option("--categories", conv_categories, "Category file (id|comment|r,g,b)");
    m2c->add_option("--epsilon", epsilon, "Polygon simplification tolerance")->capture_default_str();
    m2c->add_option("--out", conv_out, "COCO JSON to write")->required();
    c2m->add_option("--coco", conv_coco, "COCO JSON")->required();
    c2m->add_option("--out", conv_out, "Output directory")->required();

    auto* serve = app.add_subcommand("serve", "Run the HTTP annotation service");
    std::string host = "127.0.0.1";
    int port = 8080, serve_workers = 2;
    fs::path image_root = ".", save_dir;
    bool autosave = false;
    EngineFlags serve_engine;
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    serve_engine.add(*serve);
    serve->add_option("--image-root", image_root, "Base directory for relative paths")->capture_default_str();
    serve->add_option("--save-dir", save_dir, "Default save and autosave directory");
    serve->add_flag("--autosave", autosave, "Save annotations when a session is closed");
    serve->add_option("--workers", serve_workers, "Propagation workers")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    try {
        if (*eval) return cmd_eval(dataset, eval_engine, max_clicks, thresholds, workers, eval_out, curve_out);
        if (*seg) return cmd_segment(seg_image, clicks, seg_engine, seg_out);
        if (*prop) {
            if (frames_dir.empty() && prop_volume.empty()) throw InputError("give --frames or --volume");
            return cmd_propagate(frames_dir, prop_volume, prop_axis, refs, prop_params, prop_out);
        }
        if (*v2f) return cmd_volume2frames(conv_volume, conv_axis, conv_out);
        if (*f2v) return cmd_frames2volume(conv_frames, conv_axis, spacing, conv_out);
        if (*m2c) return cmd_mask2coco(conv_masks, conv_categories, epsilon, conv_out);
        if (*c2m) return cmd_coco2masks(conv_coco, conv_out);
        if (*serve) return cmd_serve(host, port, serve_engine, image_root, save_dir, autosave, serve_workers);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool input = e.code() == ErrorCode::NotFound || e.code() == ErrorCode::ParseError ||
                           e.code() == ErrorCode::UnsupportedFormat || e.code() == ErrorCode::CorruptFile ||
                           e.code() == ErrorCode::InvalidArgument;
        return input ? kInputError : kRuntimeFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kInputError;
}
