#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "clickmask/core.hpp"
#include "clickmask/engines.hpp"

namespace clickmask {

/// Anything that maps (image, clicks, prior) to an engine output. The
/// evaluation harness accepts any segmenter, so oracle and degenerate test
/// engines plug in next to the real backends.
using Segmenter = std::function<EngineOutput(const RasterImage&, const ClickSet&, const EdgeMap&)>;

Segmenter make_segmenter(const EngineParams& params);

struct ProtocolParams {
    int max_clicks = 20;
    std::vector<double> thresholds{0.85, 0.90};
    int workers = 1;
};

struct SessionTrace {
    std::string instance_id;
    /// Exactly max_clicks entries; trailing entries repeat the last value when
    /// the session stopped early.
    std::vector<double> iou_after_click;
    std::map<double, int> noc;
    std::map<double, bool> reached;
    /// Clicks actually placed, in order.
    ClickSet clicks;
};

/// Positive click at the interior-most pixel of gt (distance-transform
/// argmax, ties to the smallest (y, x)).
Click first_click(const LabelMask& gt);

/// Click at the interior-most pixel of the largest 8-connected error region.
/// Ties go to false negatives, then to the lower component id.
Click next_click(const LabelMask& pred, const LabelMask& gt);

SessionTrace run_session(const Segmenter& segmenter, const RasterImage& image, const LabelMask& gt,
                         const ProtocolParams& protocol = {}, std::string instance_id = {});

SessionTrace run_session(const EngineParams& engine, const RasterImage& image, const LabelMask& gt,
                         const ProtocolParams& protocol = {}, std::string instance_id = {});

// Dataset evaluation ------------------------------------------------------

struct DatasetInstance {
    std::string instance_id;  // mask stem, e.g. "name" or "name__2"
    std::filesystem::path image_path;
    std::filesystem::path mask_path;
};

struct DatasetListing {
    std::vector<DatasetInstance> instances;
    /// Masks without a matching image and similar layout problems.
    std::vector<std::string> problems;
};

/// Scans `<root>/images/<name>.(png|ppm)` and `<root>/masks/<name>[__k].png`.
DatasetListing list_dataset(const std::filesystem::path& root);

struct BenchmarkReport {
    std::string dataset_id;
    std::string engine_id;
    std::vector<double> thresholds;
    std::map<double, double> mean_noc;
    std::vector<double> miou_curve;
    std::map<double, int> failure_count;
    /// Sorted by instance_id.
    std::vector<SessionTrace> traces;
    /// Unreadable or mismatched pairs that were skipped.
    std::vector<std::string> skipped;
};

/// Builds a segmenter for one instance; receives the ground truth so that
/// oracle engines can be expressed.
using SegmenterFactory = std::function<Segmenter(const LabelMask& gt)>;

BenchmarkReport evaluate_dataset(const SegmenterFactory& factory, const std::string& engine_id,
                                 const std::filesystem::path& root, const ProtocolParams& protocol);

BenchmarkReport evaluate_dataset(const EngineParams& engine, const std::filesystem::path& root,
                                 const ProtocolParams& protocol);

/// Aggregates traces (any order) into a report; traces are sorted first.
BenchmarkReport aggregate(std::vector<SessionTrace> traces, const ProtocolParams& protocol);

/// Per-instance CSV: header `instance,noc85,noc90,iou1..iouN` plus a `mean` summary row.
std::string report_csv(const BenchmarkReport& report);
/// Two columns: `click,miou`.
std::string miou_curve_csv(const BenchmarkReport& report);

/// Splits a multi-object label mask into one binary mask per label id
/// (ascending), ignoring 0 and the 255 "void" label.
std::vector<std::pair<std::uint16_t, LabelMask>> split_instances(const LabelMask& labels);

}  // namespace clickmask
