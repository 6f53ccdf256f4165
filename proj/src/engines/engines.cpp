#include "engine_common.hpp"

namespace clickmask {

std::string_view to_string(EngineId id) {
    switch (id) {
        case EngineId::GraphCut: return "graphcut";
        case EngineId::RandomWalker: return "randomwalker";
        case EngineId::Geodesic: return "geodesic";
    }
    return "unknown";
}

std::optional<EngineId> parse_engine_id(std::string_view text) {
    if (text == "graphcut") return EngineId::GraphCut;
    if (text == "randomwalker") return EngineId::RandomWalker;
    if (text == "geodesic") return EngineId::Geodesic;
    return std::nullopt;
}

std::vector<std::string> engine_id_names() { return {"graphcut", "randomwalker", "geodesic"}; }

void EngineParams::validate() const {
    if (seed_radius < 0) throw Error(ErrorCode::InvalidArgument, "seed_radius must be non-negative");
    if (!(lambda > 0) || !(beta > 0) || !(solver_tolerance > 0) || solver_max_iterations <= 0) {
        throw Error(ErrorCode::InvalidArgument, "engine scalars must be positive");
    }
    if (!(edge_prior_weight >= 0.0 && edge_prior_weight <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "edge_prior_weight must lie in [0,1]");
    }
}

SeedMasks rasterize_clicks(const ClickSet& clicks, int width, int height, int seed_radius) {
    clicks.check_bounds(width, height);
    SeedMasks seeds{LabelMask(width, height), LabelMask(width, height)};
    const int r2 = seed_radius * seed_radius;
    for (const Click& c : clicks.clicks()) {
        LabelMask& paint = c.positive() ? seeds.positive : seeds.negative;
        LabelMask& erase = c.positive() ? seeds.negative : seeds.positive;
        for (int y = std::max(0, c.y - seed_radius); y <= std::min(height - 1, c.y + seed_radius); ++y) {
            for (int x = std::max(0, c.x - seed_radius); x <= std::min(width - 1, c.x + seed_radius); ++x) {
                const int dx = x - c.x, dy = y - c.y;
                if (dx * dx + dy * dy > r2) continue;
                paint.set(x, y, 1);
                erase.set(x, y, 0);
            }
        }
    }
    return seeds;
}

EdgeMap edge_from_mask(const LabelMask& mask) {
    const int w = mask.width(), h = mask.height();
    std::vector<double> values(mask.pixel_count(), 0.0);
    auto bg = [&](int x, int y) { return x < 0 || y < 0 || x >= w || y >= h || mask.at(x, y) == 0; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y) == 0) continue;
            if (bg(x - 1, y) || bg(x + 1, y) || bg(x, y - 1) || bg(x, y + 1)) {
                values[static_cast<std::size_t>(y) * w + x] = 1.0;
            }
        }
    }
    return EdgeMap(w, h, std::move(values));
}

EngineOutput segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                     const EdgeMap& prior) {
    switch (params.engine_id) {
        case EngineId::GraphCut: return graphcut_segment(params, image, clicks, prior);
        case EngineId::RandomWalker: return random_walker_segment(params, image, clicks, prior);
        case EngineId::Geodesic: return geodesic_segment(params, image, clicks, prior);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown engine id");
}

namespace detail {

SeedMasks prepare_engine_inputs(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                                const EdgeMap& prior) {
    params.validate();
    if (image.empty()) throw Error(ErrorCode::InvalidArgument, "segment: empty image");
    if (prior.width() != image.width() || prior.height() != image.height()) {
        throw Error(ErrorCode::DimensionMismatch, "segment: edge prior and image dimensions differ");
    }
    clicks.check_bounds(image.width(), image.height());
    if (!clicks.has_positive()) throw Error(ErrorCode::NoPositiveClick, "segment: at least one positive click required");
    return rasterize_clicks(clicks, image.width(), image.height(), params.seed_radius);
}

EngineOutput make_output(LabelMask mask, std::vector<double> confidence) {
    EngineOutput out;
    out.edge = edge_from_mask(mask);
    out.mask = std::move(mask);
    out.confidence = std::move(confidence);
    return out;
}

}  // namespace detail
}  // namespace clickmask
