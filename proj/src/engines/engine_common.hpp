#pragma once

#include <cmath>
#include <vector>

#include "clickmask/engines.hpp"

namespace clickmask::detail {

/// Shared precondition checks for every backend; returns the seed masks.
SeedMasks prepare_engine_inputs(const EngineParams& params, const RasterImage& image, const ClickSet& clicks,
                                const EdgeMap& prior);

/// Squared Euclidean distance between two pixels of a pixel-major feature array.
inline double feature_distance2(const std::vector<double>& features, int channels, std::size_t p, std::size_t q) {
    double s = 0.0;
    const double* a = features.data() + p * channels;
    const double* b = features.data() + q * channels;
    for (int c = 0; c < channels; ++c) {
        const double d = a[c] - b[c];
        s += d * d;
    }
    return s;
}

EngineOutput make_output(LabelMask mask, std::vector<double> confidence);

}  // namespace clickmask::detail
