#include "imtriage/canvas.hpp"

#include "imtriage/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imtriage {

double distance(Point a, Point b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Point CanvasBounds::clamp(Point p) const noexcept {
    return {std::clamp(p.x, 0.0, width), std::clamp(p.y, 0.0, height)};
}

bool CanvasBounds::contains(Point p) const noexcept {
    return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
}

std::vector<Point> scale_to_canvas(const Eigen::MatrixXd& coords, double canvas_width, double canvas_height,
                                   double margin) {
    if (coords.cols() != 2)
        throw_invalid("canvas scaling expects n x 2 coordinates");
    if (!(margin >= 0) || !(canvas_width > 2 * margin) || !(canvas_height > 2 * margin))
        throw_invalid("canvas must be larger than twice the margin");

    const Eigen::Index n = coords.rows();
    std::vector<Point> out(static_cast<std::size_t>(n), Point{canvas_width / 2, canvas_height / 2});
    if (n == 0)
        return out;

    const double minx = coords.col(0).minCoeff();
    const double maxx = coords.col(0).maxCoeff();
    const double miny = coords.col(1).minCoeff();
    const double maxy = coords.col(1).maxCoeff();
    const double spanx = maxx - minx;
    const double spany = maxy - miny;
    if (spanx == 0.0 && spany == 0.0)
        return out;

    const double inf = std::numeric_limits<double>::infinity();
    const double sx = spanx > 0 ? (canvas_width - 2 * margin) / spanx : inf;
    const double sy = spany > 0 ? (canvas_height - 2 * margin) / spany : inf;
    const double scale = std::min(sx, sy);
    const double cx = 0.5 * (minx + maxx);
    const double cy = 0.5 * (miny + maxy);
    for (Eigen::Index i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = {canvas_width / 2 + (coords(i, 0) - cx) * scale,
                                            canvas_height / 2 + (coords(i, 1) - cy) * scale};
    }
    return out;
}

} // namespace imtriage
