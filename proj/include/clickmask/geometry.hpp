#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clickmask/core.hpp"

namespace clickmask {

/// Pixel (x, y) covers [x, x+1] x [y, y+1]; traced vertices land on integer
/// pixel corners and pixel centres sit at half-integers.
struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

struct Polygon {
    std::vector<Point> vertices;  // implicitly closed
    int category_id = 1;
    bool hole = false;
    bool operator==(const Polygon&) const = default;
};

inline constexpr double kDefaultEpsilon = 1.0;
inline constexpr double kInsertSnapDistance = 2.0;

/// Throws InvalidArgument unless the polygon has >= 3 vertices, no
/// consecutive duplicates (including last/first) and, when width/height are
/// positive, all vertices within the image extended by 0.5 px.
void validate_polygon(const Polygon& polygon, int width = 0, int height = 0);

double signed_area(std::span<const Point> vertices);
double point_segment_distance(Point p, Point a, Point b);

/// Traces outer and hole contours of the nonzero pixels (8-connected
/// foreground, 4-connected background) and simplifies each with
/// simplify_preserving_coverage. Outer contours precede their holes and holes
/// precede anything nested inside them, so rasterize() of the result
/// reproduces the mask exactly for every epsilon.
std::vector<Polygon> extract_polygons(const LabelMask& mask, double epsilon = kDefaultEpsilon, int category_id = 1);

/// Closed-contour Douglas-Peucker. Returns the input unchanged when fewer
/// than three vertices would survive.
Polygon simplify(const Polygon& polygon, double epsilon);

/// Douglas-Peucker that additionally keeps a vertex whenever dropping it
/// would move a pixel centre across the outline.
Polygon simplify_preserving_coverage(const Polygon& polygon, double epsilon);

Polygon move_vertex(const Polygon& polygon, std::size_t index, Point position, int width, int height);
Polygon delete_vertex(const Polygon& polygon, std::size_t index);
/// Inserts the projection of `position` onto edge (index, index+1) after
/// `index`. Fails when the position is farther than `snap` from the edge.
Polygon insert_vertex_on_edge(const Polygon& polygon, std::size_t edge_index, Point position,
                              double snap = kInsertSnapDistance);

/// Even-odd fill at pixel centres, painted in list order. Hole polygons clear
/// to 0, others write their category id.
LabelMask rasterize(std::span<const Polygon> polygons, int width, int height);

}  // namespace clickmask
