#include "clickmask/simclick.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "clickmask/io.hpp"

namespace clickmask {
namespace {

// Raster-order argmax of the distance transform over `region`; strict
// comparison keeps the smallest (y, x) on ties.
Click interior_point(const LabelMask& region, Polarity polarity) {
    const auto dt = distance_transform(region);
    std::size_t best = 0;
    double best_value = -1.0;
    for (std::size_t i = 0; i < dt.size(); ++i) {
        if (region[i] != 0 && dt[i] > best_value) {
            best_value = dt[i];
            best = i;
        }
    }
    const int w = region.width();
    return Click{static_cast<int>(best % w), static_cast<int>(best / w), polarity, 0};
}

void validate_protocol(const ProtocolParams& protocol) {
    if (protocol.max_clicks < 1) throw Error(ErrorCode::InvalidArgument, "max_clicks must be at least 1");
    if (protocol.thresholds.empty()) throw Error(ErrorCode::InvalidArgument, "at least one threshold required");
    for (double t : protocol.thresholds) {
        if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidArgument, "thresholds must lie in (0,1]");
    }
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

Segmenter make_segmenter(const EngineParams& params) {
    params.validate();
    return [params](const RasterImage& image, const ClickSet& clicks, const EdgeMap& prior) {
        return segment(params, image, clicks, prior);
    };
}

Click first_click(const LabelMask& gt) {
    if (gt.empty_foreground()) throw Error(ErrorCode::EmptyInput, "first_click: ground truth is empty");
    return interior_point(gt.binarized(), Polarity::Positive);
}

Click next_click(const LabelMask& pred, const LabelMask& gt) {
    if (!pred.same_size(gt)) throw Error(ErrorCode::DimensionMismatch, "next_click: mask dimensions differ");
    LabelMask fn(gt.width(), gt.height()), fp(gt.width(), gt.height());
    bool any = false;
    for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
        const bool g = gt[i] != 0, p = pred[i] != 0;
        fn[i] = g && !p;
        fp[i] = p && !g;
        any |= g != p;
    }
    if (!any) throw Error(ErrorCode::InvalidArgument, "next_click: prediction equals ground truth");

    const Components fn_cc = connected_components(fn, Connectivity::Eight);
    const Components fp_cc = connected_components(fp, Connectivity::Eight);
    const Components* best_set = nullptr;
    int best_id = -1;
    std::size_t best_area = 0;
    for (const Components* set : {&fn_cc, &fp_cc}) {
        for (int id = 0; id < static_cast<int>(set->count()); ++id) {
            if (set->areas[id] > best_area) {
                best_area = set->areas[id];
                best_set = set;
                best_id = id;
            }
        }
    }
    return interior_point(best_set->component_mask(best_id),
                          best_set == &fn_cc ? Polarity::Positive : Polarity::Negative);
}

SessionTrace run_session(const Segmenter& segmenter, const RasterImage& image, const LabelMask& gt,
                         const ProtocolParams& protocol, std::string instance_id) {
    validate_protocol(protocol);
    if (gt.width() != image.width() || gt.height() != image.height()) {
        throw Error(ErrorCode::DimensionMismatch, "run_session: image and ground truth dimensions differ");
    }
    const LabelMask truth = gt.binarized();

    SessionTrace trace;
    trace.instance_id = std::move(instance_id);
    for (double t : protocol.thresholds) {
        trace.noc[t] = protocol.max_clicks;
        trace.reached[t] = false;
    }

    EdgeMap prior(image.width(), image.height());
    LabelMask pred(image.width(), image.height());
    for (int k = 1; k <= protocol.max_clicks; ++k) {
        const Click c = k == 1 ? first_click(truth) : next_click(pred, truth);
        trace.clicks.add(c.x, c.y, c.polarity);
        EngineOutput out;
        try {
            out = segmenter(image, trace.clicks, prior);
        } catch (const Error& e) {
            throw Error(e.code(), "session '" + trace.instance_id + "' click " + std::to_string(k) + ": " + e.what());
        }
        prior = out.edge;
        pred = out.mask.binarized();
        const double score = iou(pred, truth);
        trace.iou_after_click.push_back(score);

        bool all_reached = true;
        for (double t : protocol.thresholds) {
            if (!trace.reached[t] && score >= t) {
                trace.reached[t] = true;
                trace.noc[t] = k;
            }
            all_reached &= trace.reached[t];
        }
        if (all_reached) break;
    }
    trace.iou_after_click.resize(static_cast<std::size_t>(protocol.max_clicks), trace.iou_after_click.back());
    return trace;
}

SessionTrace run_session(const EngineParams& engine, const RasterImage& image, const LabelMask& gt,
                         const ProtocolParams& protocol, std::string instance_id) {
    return run_session(make_segmenter(engine), image, gt, protocol, std::move(instance_id));
}

DatasetListing list_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    const fs::path images_dir = root / "images", masks_dir = root / "masks";
    if (!fs::is_directory(images_dir)) throw Error(ErrorCode::NotFound, "dataset: missing directory " + images_dir.string());
    if (!fs::is_directory(masks_dir)) throw Error(ErrorCode::NotFound, "dataset: missing directory " + masks_dir.string());

    std::map<std::string, fs::path> images;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".ppm") images.emplace(entry.path().stem().string(), entry.path());
    }

    DatasetListing listing;
    std::vector<fs::path> masks;
    for (const auto& entry : fs::directory_iterator(masks_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") masks.push_back(entry.path());
    }
    std::sort(masks.begin(), masks.end());
    for (const auto& mask : masks) {
        const std::string stem = mask.stem().string();
        const auto sep = stem.rfind("__");
        const std::string name = sep == std::string::npos ? stem : stem.substr(0, sep);
        const auto it = images.find(name);
        if (it == images.end()) {
            listing.problems.push_back(mask.filename().string() + ": no matching image '" + name + "'");
            continue;
        }
        listing.instances.push_back(DatasetInstance{stem, it->second, mask});
    }
    return listing;
}

BenchmarkReport aggregate(std::vector<SessionTrace> traces, const ProtocolParams& protocol) {
    validate_protocol(protocol);
    std::sort(traces.begin(), traces.end(),
              [](const SessionTrace& a, const SessionTrace& b) { return a.instance_id < b.instance_id; });
    BenchmarkReport report;
    report.thresholds = protocol.thresholds;
    report.miou_curve.assign(static_cast<std::size_t>(protocol.max_clicks), 0.0);
    for (double t : protocol.thresholds) {
        double sum = 0.0;
        int failures = 0;
        for (const auto& tr : traces) {
            sum += tr.noc.at(t);
            failures += tr.reached.at(t) ? 0 : 1;
        }
        report.mean_noc[t] = traces.empty() ? 0.0 : sum / static_cast<double>(traces.size());
        report.failure_count[t] = failures;
    }
    for (std::size_t k = 0; k < report.miou_curve.size(); ++k) {
        double sum = 0.0;
        for (const auto& tr : traces) sum += tr.iou_after_click[k];
        report.miou_curve[k] = traces.empty() ? 0.0 : sum / static_cast<double>(traces.size());
    }
    report.traces = std::move(traces);
    return report;
}

BenchmarkReport evaluate_dataset(const SegmenterFactory& factory, const std::string& engine_id,
                                 const std::filesystem::path& root, const ProtocolParams& protocol) {
    validate_protocol(protocol);
    DatasetListing listing = list_dataset(root);
    if (listing.instances.empty()) {
        throw Error(ErrorCode::EmptyInput, "dataset: no image/mask pairs under " + root.string());
    }

    const std::size_t n = listing.instances.size();
    std::vector<std::optional<SessionTrace>> results(n);
    std::vector<std::string> load_errors(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            const auto& inst = listing.instances[i];
            RasterImage image;
            LabelMask gt;
            try {
                image = load_image(inst.image_path);
                gt = load_binary_mask(inst.mask_path);
                if (gt.width() != image.width() || gt.height() != image.height()) {
                    throw Error(ErrorCode::DimensionMismatch, "mask and image dimensions differ");
                }
                if (gt.empty_foreground()) throw Error(ErrorCode::EmptyInput, "mask has no foreground");
            } catch (const Error& e) {
                load_errors[i] = inst.instance_id + ": " + e.what();
                continue;
            }
            try {
                results[i] = run_session(factory(gt), image, gt, protocol, inst.instance_id);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };

    const int workers = std::max(1, std::min<int>(protocol.workers, static_cast<int>(n)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<SessionTrace> traces;
    for (auto& r : results)
        if (r) traces.push_back(std::move(*r));
    BenchmarkReport report = aggregate(std::move(traces), protocol);
    report.dataset_id = std::filesystem::absolute(root).lexically_normal().filename().string();
    if (report.dataset_id.empty()) report.dataset_id = std::filesystem::absolute(root).parent_path().filename().string();
    report.engine_id = engine_id;
    report.skipped = std::move(listing.problems);
    for (auto& e : load_errors)
        if (!e.empty()) report.skipped.push_back(std::move(e));
    return report;
}

BenchmarkReport evaluate_dataset(const EngineParams& engine, const std::filesystem::path& root,
                                 const ProtocolParams& protocol) {
    const Segmenter seg = make_segmenter(engine);
    return evaluate_dataset([seg](const LabelMask&) { return seg; }, std::string(to_string(engine.engine_id)), root,
                            protocol);
}

std::string report_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "instance";
    for (double t : report.thresholds) out << ",noc" << std::lround(t * 100.0);
    for (std::size_t k = 1; k <= report.miou_curve.size(); ++k) out << ",iou" << k;
    out << '\n';
    for (const auto& tr : report.traces) {
        out << tr.instance_id;
        for (double t : report.thresholds) out << ',' << tr.noc.at(t);
        for (double v : tr.iou_after_click) out << ',' << format_fixed(v, 6);
        out << '\n';
    }
    out << "mean";
    for (double t : report.thresholds) out << ',' << format_fixed(report.mean_noc.at(t), 4);
    for (double v : report.miou_curve) out << ',' << format_fixed(v, 6);
    out << '\n';
    return out.str();
}

std::string miou_curve_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "click,miou\n";
    for (std::size_t k = 0; k < report.miou_curve.size(); ++k) out << k + 1 << ',' << format_fixed(report.miou_curve[k], 6) << '\n';
    return out.str();
}

std::vector<std::pair<std::uint16_t, LabelMask>> split_instances(const LabelMask& labels) {
    std::vector<std::uint16_t> ids(labels.labels().begin(), labels.labels().end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<std::pair<std::uint16_t, LabelMask>> out;
    for (auto id : ids) {
        if (id == 0 || id == 255) continue;
        LabelMask m(labels.width(), labels.height());
        for (std::size_t i = 0; i < labels.pixel_count(); ++i) m[i] = labels[i] == id ? 1 : 0;
        out.emplace_back(id, std::move(m));
    }
    return out;
}

}  // namespace clickmask
