#include <algorithm>
#include <cmath>

#include "clickmask/maxflow.hpp"
#include "engine_common.hpp"

namespace clickmask {
namespace {

constexpr int kBinsPerChannel = 16;
constexpr int kJointChannelLimit = 3;
constexpr int kBorderRing = 2;
constexpr double kSigmaFloor = 1e-6;

int bin_of(double v) { return std::min(kBinsPerChannel - 1, static_cast<int>(v * kBinsPerChannel)); }

// Colour likelihood model over seed pixels: a joint 16^C histogram for up to
// three channels, otherwise a product of per-channel 16-bin marginals.
class ColorModel {
public:
    ColorModel(const std::vector<double>& features, int channels, const LabelMask& samples)
        : channels_(channels), joint_(channels <= kJointChannelLimit) {
        const std::size_t bins = joint_ ? static_cast<std::size_t>(std::pow(kBinsPerChannel, channels))
                                        : static_cast<std::size_t>(kBinsPerChannel) * channels;
        counts_.assign(bins, 0.0);
        for (std::size_t p = 0; p < samples.pixel_count(); ++p) {
            if (samples[p] == 0) continue;
            ++total_;
            if (joint_) {
                counts_[joint_bin(features, p)] += 1.0;
            } else {
                for (int c = 0; c < channels_; ++c)
                    counts_[static_cast<std::size_t>(c) * kBinsPerChannel + bin_of(features[p * channels_ + c])] += 1.0;
            }
        }
    }

    /// Log-likelihood of pixel p; one pseudo-count is spread over all bins.
    double log_likelihood(const std::vector<double>& features, std::size_t p) const {
        if (joint_) {
            const double alpha = 1.0 / static_cast<double>(counts_.size());
            return std::log((counts_[joint_bin(features, p)] + alpha) / (total_ + 1.0));
        }
        double s = 0.0;
        constexpr double alpha = 1.0 / kBinsPerChannel;
        for (int c = 0; c < channels_; ++c) {
            const double n = counts_[static_cast<std::size_t>(c) * kBinsPerChannel + bin_of(features[p * channels_ + c])];
            s += std::log((n + alpha) / (total_ + 1.0));
        }
        return s;
    }

private:
    std::size_t joint_bin(const std::vector<double>& features, std::size_t p) const {
        std::size_t idx = 0;
        for (int c = 0; c < channels_; ++c) idx = idx * kBinsPerChannel + bin_of(features[p * channels_ + c]);
        return idx;
    }

    int channels_;
    bool joint_;
    double total_ = 0.0;
    std::vector<double> counts_;
};

LabelMask background_samples(const SeedMasks& seeds) {
    if (seeds.negative.count_nonzero() > 0) return seeds.negative;
    const int w = seeds.positive.width(), h = seeds.positive.height();
    LabelMask ring(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool on_ring = x < kBorderRing || y < kBorderRing || x >= w - kBorderRing || y >= h - kBorderRing;
            if (on_ring && seeds.positive.at(x, y) == 0) ring.set(x, y, 1);
        }
    }
    return ring;
}

struct Neighbour {
    int dx, dy;
    double length;
};

constexpr Neighbour kForwardNeighbours[] = {
    {1, 0, 1.0}, {0, 1, 1.0}, {1, 1, 1.4142135623730951}, {-1, 1, 1.4142135623730951}};

}  // namespace

std::vector<GraphEdge> contrast_edges(const RasterImage& image, double lambda, const EdgeMap& prior,
                                      double prior_weight) {
    const int w = image.width(), h = image.height(), ch = image.channels();
    const bool use_prior = !prior.values().empty();
    if (use_prior && (prior.width() != w || prior.height() != h))
        throw Error(ErrorCode::DimensionMismatch, "edge prior dimensions differ from the image");
    const std::vector<double> features = image.scaled_features();

    std::vector<GraphEdge> edges;
    std::vector<double> diff2;
    edges.reserve(image.pixel_count() * 4);
    diff2.reserve(image.pixel_count() * 4);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (const auto& nb : kForwardNeighbours) {
                const int qx = x + nb.dx, qy = y + nb.dy;
                if (qx < 0 || qx >= w || qy >= h) continue;
                const std::size_t p = static_cast<std::size_t>(y) * w + x, q = static_cast<std::size_t>(qy) * w + qx;
                diff2.push_back(detail::feature_distance2(features, ch, p, q));
                edges.push_back(GraphEdge{static_cast<int>(p), static_cast<int>(q), nb.length});
            }
        }
    }
    double sigma2 = 0.0;
    for (double d : diff2) sigma2 += d;
    sigma2 = diff2.empty() ? kSigmaFloor : std::max(kSigmaFloor, sigma2 / static_cast<double>(diff2.size()));

    for (std::size_t e = 0; e < edges.size(); ++e) {
        GraphEdge& edge = edges[e];
        const double prior_pq =
            use_prior ? std::max(prior[static_cast<std::size_t>(edge.a)], prior[static_cast<std::size_t>(edge.b)]) : 0.0;
        edge.cap = lambda * std::exp(-diff2[e] / (2.0 * sigma2)) / edge.cap * (1.0 - prior_weight * prior_pq);
    }
    return edges;
}

GraphCutProblem build_graphcut_problem(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                                       const EdgeMap& prior) {
    const SeedMasks seeds = detail::prepare_engine_inputs(params, image, clicks, prior);
    const int ch = image.channels();
    const std::size_t n = image.pixel_count();
    const std::vector<double> features = image.scaled_features();

    GraphCutProblem problem;
    problem.width = image.width();
    problem.height = image.height();
    problem.edges = contrast_edges(image, params.lambda, prior, params.edge_prior_weight);

    std::vector<double> incident(n, 0.0);
    for (const auto& edge : problem.edges) {
        incident[static_cast<std::size_t>(edge.a)] += edge.cap;
        incident[static_cast<std::size_t>(edge.b)] += edge.cap;
    }
    const double hard = 1.0 + *std::max_element(incident.begin(), incident.end());

    // Colour t-links; seeds are hard-constrained.
    const ColorModel fg(features, ch, seeds.positive);
    const ColorModel bg(features, ch, background_samples(seeds));
    problem.source_cap.assign(n, 0.0);
    problem.sink_cap.assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        if (seeds.positive[p]) {
            problem.source_cap[p] = hard;
        } else if (seeds.negative[p]) {
            problem.sink_cap[p] = hard;
        } else {
            problem.source_cap[p] = -bg.log_likelihood(features, p);
            problem.sink_cap[p] = -fg.log_likelihood(features, p);
        }
    }
    return problem;
}

GraphCutSolution solve_graphcut(const GraphCutProblem& problem) {
    const int n = problem.width * problem.height;
    MaxFlowGraph<double> graph(n, problem.edges.size());
    for (int p = 0; p < n; ++p) graph.add_terminal(p, problem.source_cap[p], problem.sink_cap[p]);
    for (const auto& e : problem.edges) graph.add_edge(e.a, e.b, e.cap, e.cap);
    GraphCutSolution out;
    out.cut_value = graph.solve();
    out.source_side.resize(n);
    for (int p = 0; p < n; ++p) out.source_side[p] = graph.in_source_set(p) ? 1 : 0;
    return out;
}

EngineOutput graphcut_segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                              const EdgeMap& prior) {
    const GraphCutProblem problem = build_graphcut_problem(params, image, clicks, prior);
    const GraphCutSolution solution = solve_graphcut(problem);

    const std::size_t n = image.pixel_count();
    LabelMask mask(image.width(), image.height());
    std::vector<double> confidence(n);
    const double below_half = std::nextafter(0.5, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const bool fg = solution.source_side[p] != 0;
        mask[p] = fg ? 1 : 0;
        // Colour posterior, clamped to the side of 0.5 the cut chose.
        const double lf = -problem.sink_cap[p], lb = -problem.source_cap[p];
        const double posterior = 1.0 / (1.0 + std::exp(lb - lf));
        confidence[p] = fg ? std::max(posterior, 0.5) : std::min(posterior, below_half);
    }
    // Seed pixels are certain.
    const SeedMasks seeds = rasterize_clicks(clicks, image.width(), image.height(), params.seed_radius);
    for (std::size_t p = 0; p < n; ++p) {
        if (seeds.positive[p]) confidence[p] = 1.0;
        else if (seeds.negative[p]) confidence[p] = 0.0;
    }
    return detail::make_output(std::move(mask), std::move(confidence));
}

}  // namespace clickmask
