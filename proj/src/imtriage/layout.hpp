#pragma once

#include "imtriage/canvas.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace imtriage {

/// Ridge map from reduced feature space to canvas coordinates.
struct PositionRegressor {
    Eigen::VectorXd feature_mean; // k'
    Eigen::MatrixXd weights;      // k' x 2
    Point intercept;              // mean exemplar position
    double lambda = 1e-2;

    Point predict(const Eigen::VectorXd& x) const;
};

struct Exemplar {
    Eigen::VectorXd features;
    Point position;
};

inline constexpr double kDefaultRidge = 1e-2;
inline constexpr double kDefaultMinSeparation = 8.0;
inline constexpr double kDefaultMinGroupRadius = 32.0;
inline constexpr double kProximityFactor = 1.5;

/// Per-coordinate ridge least squares on centred features. lambda = 0 yields
/// the minimum-norm least-squares solution.
PositionRegressor fit_position_regressor(const std::vector<Exemplar>& exemplars, double lambda = kDefaultRidge);

/// FNV-1a; stable across platforms, used to seed spiral offsets.
std::uint64_t stable_hash(std::string_view s) noexcept;

/// Pushes apart points closer than `min_sep`, processing them in order: a
/// point that collides with an earlier one walks a golden-angle spiral
/// (phase from its id hash) until it is clear, staying inside `bounds`.
std::vector<Point> resolve_collisions(const std::vector<std::string>& ids, std::vector<Point> points,
                                      const CanvasBounds& bounds, double min_sep = kDefaultMinSeparation);

struct PlacementQuery {
    std::string image_id;
    Eigen::VectorXd features;
};

std::vector<Point> predict_positions(const PositionRegressor& reg, const std::vector<PlacementQuery>& queries,
                                     const CanvasBounds& bounds, double min_sep = kDefaultMinSeparation);

struct GroupFootprint {
    std::string group_id;
    std::vector<Point> member_positions;
};

struct LocatedImage {
    std::string image_id;
    Point position;
};

struct ProximitySuggestion {
    std::string image_id;
    std::string group_id;
    double distance = 0.0;

    bool operator==(const ProximitySuggestion&) const = default;
};

/// Radius of a footprint's bounding circle about its centroid (floored).
double footprint_radius(const GroupFootprint& group, Point centroid, double min_radius = kDefaultMinGroupRadius);
Point centroid(const std::vector<Point>& points);

/// Nearest qualifying group per image, sorted by distance then image id.
std::vector<ProximitySuggestion> proximity_suggestions(const std::vector<GroupFootprint>& groups,
                                                       const std::vector<LocatedImage>& ungrouped,
                                                       double min_radius = kDefaultMinGroupRadius);

} // namespace imtriage
