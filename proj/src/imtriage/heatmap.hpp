#pragma once

#include "imtriage/features.hpp"
#include "imtriage/grouping.hpp"
#include "imtriage/image.hpp"

#include <cstdint>
#include <vector>

namespace imtriage {

/// 8-bit level closest to mid gray (0.5).
inline constexpr std::uint8_t kOcclusionFill = 128;

struct Heatmap {
    int rows = 0;
    int cols = 0;
    double baseline = 0.0;      // group probability of the unoccluded image
    std::vector<double> values; // row-major, baseline - occluded probability

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// Occlusion saliency: slides a mid-gray patch over the image and records how
/// much the group membership probability drops at each placement.
Heatmap occlusion_heatmap(const PairScorer& score, const ImageRecord& image, const std::vector<FeatureVector>& members,
                          int patch, int stride, const ExtractorSpec& extractor = {});
Heatmap occlusion_heatmap(const RelationModel& model, const ImageRecord& image,
                          const std::vector<FeatureVector>& members, int patch, int stride,
                          const ExtractorSpec& extractor = {});

} // namespace imtriage
