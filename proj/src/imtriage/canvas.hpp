#pragma once

#include <Eigen/Dense>

#include <vector>

namespace imtriage {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

double distance(Point a, Point b) noexcept;

struct CanvasBounds {
    double width = 1000.0;
    double height = 1000.0;

    Point clamp(Point p) const noexcept;
    bool contains(Point p) const noexcept;
    Point center() const noexcept { return {width / 2, height / 2}; }

    bool operator==(const CanvasBounds&) const = default;
};

/// Aspect-preserving affine map of 2-D coordinates into the canvas, centred,
/// with the longer spread axis touching both margins. All-equal input maps to
/// the canvas centre.
std::vector<Point> scale_to_canvas(const Eigen::MatrixXd& coords, double canvas_width, double canvas_height,
                                   double margin);

} // namespace imtriage
