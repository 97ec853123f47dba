#include "imtriage/layout.hpp"

#include "imtriage/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace imtriage {

Point PositionRegressor::predict(const Eigen::VectorXd& x) const {
    if (x.size() != feature_mean.size())
        throw_invalid("regressor expects " + std::to_string(feature_mean.size()) + " features, got " +
                      std::to_string(x.size()));
    const Eigen::RowVector2d delta = (x - feature_mean).transpose() * weights;
    return {intercept.x + delta(0), intercept.y + delta(1)};
}

PositionRegressor fit_position_regressor(const std::vector<Exemplar>& exemplars, double lambda) {
    if (exemplars.empty())
        throw_precondition("position regression needs at least one exemplar");
    if (!(lambda >= 0))
        throw_invalid("ridge penalty must be non-negative");
    const Eigen::Index n = static_cast<Eigen::Index>(exemplars.size());
    const Eigen::Index k = exemplars.front().features.size();

    Eigen::MatrixXd x(n, k);
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = exemplars[static_cast<std::size_t>(i)];
        if (e.features.size() != k)
            throw_invalid("exemplar feature lengths differ");
        x.row(i) = e.features.transpose();
        y(i, 0) = e.position.x;
        y(i, 1) = e.position.y;
    }

    PositionRegressor reg;
    reg.lambda = lambda;
    reg.feature_mean = x.colwise().mean().transpose();
    const Eigen::RowVector2d ymean = y.colwise().mean();
    reg.intercept = {ymean(0), ymean(1)};
    x.rowwise() -= reg.feature_mean.transpose();
    y.rowwise() -= ymean;

    // [X; sqrt(lambda) I] W = [Y; 0]
    Eigen::MatrixXd a(n + k, k);
    a.topRows(n) = x;
    a.bottomRows(k) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(k, k);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + k, 2);
    b.topRows(n) = y;
    reg.weights = a.completeOrthogonalDecomposition().solve(b);
    return reg;
}

std::uint64_t stable_hash(std::string_view s) noexcept {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<Point> resolve_collisions(const std::vector<std::string>& ids, std::vector<Point> points,
                                      const CanvasBounds& bounds, double min_sep) {
    if (ids.size() != points.size())
        throw_invalid("ids and points differ in length");
    constexpr double golden_angle = 2.399963229728653;
    constexpr int max_steps = 100000;

    std::vector<Point> placed;
    placed.reserve(points.size());
    auto clear = [&](Point p) {
        return std::all_of(placed.begin(), placed.end(), [&](Point q) { return distance(p, q) >= min_sep; });
    };
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point origin = bounds.clamp(points[i]);
        Point p = origin;
        if (!clear(p)) {
            const double phase =
                2 * std::numbers::pi * static_cast<double>(stable_hash(ids[i]) % 1000000) / 1000000.0;
            for (int s = 1; s <= max_steps; ++s) {
                const double r = min_sep * std::sqrt(static_cast<double>(s));
                const double theta = phase + s * golden_angle;
                p = bounds.clamp({origin.x + r * std::cos(theta), origin.y + r * std::sin(theta)});
                if (clear(p))
                    break;
            }
        }
        points[i] = p;
        placed.push_back(p);
    }
    return points;
}

std::vector<Point> predict_positions(const PositionRegressor& reg, const std::vector<PlacementQuery>& queries,
                                     const CanvasBounds& bounds, double min_sep) {
    std::vector<std::string> ids;
    std::vector<Point> raw;
    ids.reserve(queries.size());
    raw.reserve(queries.size());
    for (const auto& q : queries) {
        ids.push_back(q.image_id);
        raw.push_back(bounds.clamp(reg.predict(q.features)));
    }
    return resolve_collisions(ids, std::move(raw), bounds, min_sep);
}

Point centroid(const std::vector<Point>& points) {
    Point c;
    for (const auto& p : points) {
        c.x += p.x;
        c.y += p.y;
    }
    const double n = static_cast<double>(points.size());
    return {c.x / n, c.y / n};
}

double footprint_radius(const GroupFootprint& group, Point center, double min_radius) {
    double r = 0.0;
    for (const auto& p : group.member_positions)
        r = std::max(r, distance(p, center));
    return std::max(r, min_radius);
}

std::vector<ProximitySuggestion> proximity_suggestions(const std::vector<GroupFootprint>& groups,
                                                       const std::vector<LocatedImage>& ungrouped,
                                                       double min_radius) {
    struct Circle {
        const std::string* id;
        Point center;
        double reach;
    };
    std::vector<Circle> circles;
    for (const auto& g : groups) {
        if (g.member_positions.empty())
            continue;
        const Point c = centroid(g.member_positions);
        circles.push_back({&g.group_id, c, kProximityFactor * footprint_radius(g, c, min_radius)});
    }

    std::vector<ProximitySuggestion> out;
    for (const auto& img : ungrouped) {
        const Circle* best = nullptr;
        double best_d = 0.0;
        for (const auto& c : circles) {
            const double d = distance(img.position, c.center);
            if (d <= c.reach && (best == nullptr || d < best_d)) {
                best = &c;
                best_d = d;
            }
        }
        if (best != nullptr)
            out.push_back({img.image_id, *best->id, best_d});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.image_id < b.image_id;
    });
    return out;
}

} // namespace imtriage
