#pragma once

#include "imtriage/image.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace imtriage {

using FeatureVector = std::vector<double>;

enum class ExtractorKind {
    /// 16x16 average-pooled luma, D = 256.
    GrayPool16,
    /// 3 x 32-bin RGB histograms followed by GrayPool16, D = 352.
    ColorHistGray,
};

struct ExtractorSpec {
    ExtractorKind kind = ExtractorKind::GrayPool16;

    std::size_t dim() const noexcept;
    std::string id() const;
    static ExtractorSpec from_id(std::string_view id);

    bool operator==(const ExtractorSpec&) const = default;
};

inline constexpr int kPoolSide = 16;
inline constexpr int kHistogramBins = 32;

/// Rec. 601 luma in [0, 1].
double luma(const std::uint8_t* rgb) noexcept;

/// Area-weighted resize of a grayscale plane to kPoolSide x kPoolSide.
/// Inputs below kPoolSide on either axis are first upsampled by nearest neighbour.
std::vector<double> pool_gray(const ImageRecord& image);

FeatureVector extract_features(const ImageRecord& image, const ExtractorSpec& extractor = {});

struct Standardization {
    std::vector<FeatureVector> standardized;
    FeatureVector mean;
    FeatureVector stddev; // 1.0 where the population stddev is below 1e-12
};

/// Per-dimension z-score with population statistics.
Standardization standardize_collection(const std::vector<FeatureVector>& features);

FeatureVector apply_standardization(const FeatureVector& x, const FeatureVector& mean, const FeatureVector& stddev);

/// Reads the `#dim=D` text format. Rows are returned in file order.
struct FeatureTable {
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<FeatureVector> rows;

    std::map<std::string, FeatureVector> to_map() const;
};

FeatureTable read_feature_table(std::istream& in);
FeatureTable load_feature_table(const std::filesystem::path& path);
std::map<std::string, FeatureVector> load_precomputed_features(const std::filesystem::path& path);

void write_feature_table(std::ostream& out, const FeatureTable& table);
void save_feature_table(const std::filesystem::path& path, const FeatureTable& table);

} // namespace imtriage
