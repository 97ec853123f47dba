#include "imtriage/heatmap.hpp"

#include "imtriage/error.hpp"
#include "imtriage/relation_model.hpp"

#include <algorithm>

namespace imtriage {

Heatmap occlusion_heatmap(const PairScorer& score, const ImageRecord& image, const std::vector<FeatureVector>& members,
                          int patch, int stride, const ExtractorSpec& extractor) {
    validate(image);
    if (patch < 1 || patch > std::min(image.width, image.height))
        throw_invalid("occlusion patch must fit inside the image");
    if (stride < 1)
        throw_invalid("occlusion stride must be positive");

    Heatmap map;
    map.rows = (image.height - patch) / stride + 1;
    map.cols = (image.width - patch) / stride + 1;
    map.baseline = group_probability(score, extract_features(image, extractor), members);
    map.values.reserve(static_cast<std::size_t>(map.rows) * map.cols);

    ImageRecord work = image;
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            const int x0 = c * stride;
            const int y0 = r * stride;
            work.fill_rect(x0, y0, patch, patch, kOcclusionFill, kOcclusionFill, kOcclusionFill);
            const double occluded = group_probability(score, extract_features(work, extractor), members);
            map.values.push_back(map.baseline - occluded);
            // restore the patch
            for (int y = y0; y < y0 + patch; ++y)
                std::copy_n(image.pixel(x0, y), static_cast<std::size_t>(patch) * 3, work.pixel(x0, y));
        }
    }
    return map;
}

Heatmap occlusion_heatmap(const RelationModel& model, const ImageRecord& image,
                          const std::vector<FeatureVector>& members, int patch, int stride,
                          const ExtractorSpec& extractor) {
    return occlusion_heatmap(scorer_for(model), image, members, patch, stride, extractor);
}

} // namespace imtriage
