#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "engine_common.hpp"

namespace clickmask {

std::vector<double> geodesic_distance_map(const RasterImage& image, const LabelMask& seeds) {
    if (seeds.width() != image.width() || seeds.height() != image.height()) {
        throw Error(ErrorCode::DimensionMismatch, "geodesic: seed mask and image dimensions differ");
    }
    const int w = image.width(), h = image.height(), ch = image.channels();
    const std::size_t n = image.pixel_count();
    const std::vector<double> features = image.scaled_features();
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> dist(n, inf);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    for (std::size_t p = 0; p < n; ++p) {
        if (seeds[p]) {
            dist[p] = 0.0;
            queue.emplace(0.0, p);
        }
    }

    static constexpr int dx[] = {-1, 0, 1, -1, 1, -1, 0, 1};
    static constexpr int dy[] = {-1, -1, -1, 0, 0, 1, 1, 1};
    while (!queue.empty()) {
        const auto [d, p] = queue.top();
        queue.pop();
        if (d > dist[p]) continue;
        const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
        for (int k = 0; k < 8; ++k) {
            const int qx = px + dx[k], qy = py + dy[k];
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
            const double length = (dx[k] != 0 && dy[k] != 0) ? std::sqrt(2.0) : 1.0;
            const double cost = length * (1.0 + std::sqrt(detail::feature_distance2(features, ch, p, q)));
            const double nd = d + cost;
            if (nd < dist[q]) {
                dist[q] = nd;
                queue.emplace(nd, q);
            }
        }
    }
    return dist;
}

EngineOutput geodesic_segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                              const EdgeMap& prior) {
    const SeedMasks seeds = detail::prepare_engine_inputs(params, image, clicks, prior);
    const std::vector<double> dpos = geodesic_distance_map(image, seeds.positive);
    const bool has_negative = seeds.negative.count_nonzero() > 0;
    const std::vector<double> dneg =
        has_negative ? geodesic_distance_map(image, seeds.negative) : std::vector<double>(image.pixel_count(), 0.0);

    const std::size_t n = image.pixel_count();
    std::vector<double> confidence(n);
    LabelMask mask(image.width(), image.height());
    for (std::size_t p = 0; p < n; ++p) {
        if (!has_negative || std::isinf(dneg[p])) {
            confidence[p] = std::isinf(dpos[p]) ? 0.0 : 1.0;
        } else {
            confidence[p] = dneg[p] / (dpos[p] + dneg[p]);
        }
        mask[p] = confidence[p] >= 0.5 ? 1 : 0;
    }
    return detail::make_output(std::move(mask), std::move(confidence));
}

}  // namespace clickmask
