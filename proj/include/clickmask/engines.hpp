#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clickmask/core.hpp"

namespace clickmask {

enum class EngineId { GraphCut, RandomWalker, Geodesic };

std::string_view to_string(EngineId id);
/// Parses "graphcut", "randomwalker" or "geodesic".
std::optional<EngineId> parse_engine_id(std::string_view text);
std::vector<std::string> engine_id_names();

struct EngineParams {
    EngineId engine_id = EngineId::GraphCut;
    int seed_radius = 5;
    /// Pairwise weight of the graph-cut energy.
    double lambda = 50.0;
    /// Random-walker contrast sensitivity on [0,1]-scaled intensities.
    double beta = 90.0;
    /// Random-walker CG stop: bound on the multigrid-preconditioned residual
    /// max|M^-1 r|, an estimate of the potential error.
    double solver_tolerance = 1e-6;
    int solver_max_iterations = 2000;
    /// Attenuation applied to pairwise weights on prior boundary pixels.
    double edge_prior_weight = 0.3;

    void validate() const;
};

struct EngineOutput {
    LabelMask mask;
    /// Per-pixel foreground probability; mask == (confidence >= 0.5).
    std::vector<double> confidence;
    EdgeMap edge;
};

struct SeedMasks {
    LabelMask positive;
    LabelMask negative;
};

/// Paints a filled disk of seed_radius per click in ordinal order; a later
/// click overrides earlier opposite-polarity pixels.
SeedMasks rasterize_clicks(const ClickSet& clicks, int width, int height, int seed_radius);

/// 1.0 on foreground pixels with a background or out-of-image 4-neighbour.
EdgeMap edge_from_mask(const LabelMask& mask);

/// Runs the backend selected by params.engine_id. The returned edge map is
/// meant to be passed back as `prior` on the next interaction round.
EngineOutput segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                     const EdgeMap& prior);

EngineOutput graphcut_segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                              const EdgeMap& prior);
EngineOutput random_walker_segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                                   const EdgeMap& prior);
EngineOutput geodesic_segment(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                              const EdgeMap& prior);

// Graph-cut internals, exposed so the energy can be checked against an
// independent max-flow solver.

struct GraphEdge {
    int a = 0;
    int b = 0;
    double cap = 0.0;  // symmetric
};

/// Terminal capacities (source = foreground) and 8-neighbour n-links.
struct GraphCutProblem {
    int width = 0;
    int height = 0;
    std::vector<double> source_cap;
    std::vector<double> sink_cap;
    std::vector<GraphEdge> edges;
};

/// Contrast-sensitive 8-neighbour n-links scaled by lambda:
/// w = exp(-d^2 / (2 sigma^2)) / dist * (1 - prior_weight * max(prior_p, prior_q)),
/// sigma^2 = mean d^2 over all edges. An empty prior means no attenuation.
std::vector<GraphEdge> contrast_edges(const RasterImage& image, double lambda, const EdgeMap& prior = {},
                                      double prior_weight = 0.0);

GraphCutProblem build_graphcut_problem(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                                       const EdgeMap& prior);

struct GraphCutSolution {
    double cut_value = 0.0;
    /// 1 for nodes on the source (foreground) side.
    std::vector<std::uint8_t> source_side;
};

GraphCutSolution solve_graphcut(const GraphCutProblem& problem);

/// Geodesic distance from the nonzero pixels of `seeds` over the 8-neighbour
/// grid; unreachable pixels are +inf.
std::vector<double> geodesic_distance_map(const RasterImage& image, const LabelMask& seeds);

}  // namespace clickmask
