#include "clickmask/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace clickmask {
namespace {

// Directions in y-down image coordinates: E, S, W, N. Turning right is +1.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

class CrackTracer {
public:
    explicit CrackTracer(const LabelMask& mask)
        : mask_(mask), w_(mask.width()), h_(mask.height()),
          visited_(static_cast<std::size_t>(w_) * (h_ + 1), 0) {}

    std::vector<Polygon> trace(int category_id) {
        std::vector<Polygon> loops;
        for (int y = 0; y <= h_; ++y) {
            for (int x = 0; x < w_; ++x) {
                const bool above = fg(x, y - 1), below = fg(x, y);
                if (above == below || visited_[crack(x, y)]) continue;
                Polygon p;
                p.category_id = category_id;
                p.hole = above;
                // Foreground stays on the right: eastward along an outer top
                // edge, westward along a hole's top edge.
                p.vertices = below ? follow(x, y, 0) : follow(x + 1, y, 2);
                loops.push_back(std::move(p));
            }
        }
        return loops;
    }

private:
    bool fg(int x, int y) const { return x >= 0 && y >= 0 && x < w_ && y < h_ && mask_.at(x, y) != 0; }
    std::size_t crack(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }

    // Next direction at corner (vx, vy) after travelling in d. Keeps
    // diagonal foreground neighbours on the same contour.
    int turn(int vx, int vy, int d) const {
        // Pixel ahead-left / ahead-right of the corner for each heading.
        static constexpr int kLeft[4][2] = {{0, -1}, {0, 0}, {-1, 0}, {-1, -1}};
        static constexpr int kRight[4][2] = {{0, 0}, {-1, 0}, {-1, -1}, {0, -1}};
        if (fg(vx + kLeft[d][0], vy + kLeft[d][1])) return (d + 3) % 4;
        if (fg(vx + kRight[d][0], vy + kRight[d][1])) return d;
        return (d + 1) % 4;
    }

    std::vector<Point> follow(int sx, int sy, int sd) {
        std::vector<Point> corners;
        int x = sx, y = sy, d = sd;
        do {
            if (d == 0) visited_[crack(x, y)] = 1;
            if (d == 2) visited_[crack(x - 1, y)] = 1;
            x += kDx[d];
            y += kDy[d];
            const int nd = turn(x, y, d);
            if (nd != d) corners.push_back(Point{static_cast<double>(x), static_cast<double>(y)});
            d = nd;
        } while (x != sx || y != sy || d != sd);
        // The start corner is emitted last; list it first.
        std::rotate(corners.rbegin(), corners.rbegin() + 1, corners.rend());
        return corners;
    }

    const LabelMask& mask_;
    int w_, h_;
    std::vector<std::uint8_t> visited_;
};

// x where edge (p, q) crosses the horizontal line y = py; computed from the
// lower endpoint so both orientations of an edge agree bit-exactly.
double crossing_x(Point p, Point q, double py) {
    if (q.y < p.y || (q.y == p.y && q.x < p.x)) std::swap(p, q);
    return p.x + (py - p.y) * (q.x - p.x) / (q.y - p.y);
}

// Number of pixel centres whose even-odd coverage flips when the chain
// pts[a..b] is replaced by its chord, i.e. the centres inside the loop the
// chain forms with that chord.
std::size_t coverage_flips(std::span<const Point> pts, std::size_t a, std::size_t b) {
    const std::size_t n = pts.size();
    auto at = [&](std::size_t i) { return pts[i % n]; };
    double lo = at(a).y, hi = lo;
    for (std::size_t i = a; i <= b; ++i) {
        lo = std::min(lo, at(i).y);
        hi = std::max(hi, at(i).y);
    }
    std::size_t flips = 0;
    std::vector<double> xs;
    for (int y = static_cast<int>(std::floor(lo - 0.5)); y + 0.5 <= hi; ++y) {
        const double py = y + 0.5;
        xs.clear();
        for (std::size_t i = a; i <= b; ++i) {
            const Point p = at(i), q = i == b ? at(a) : at(i + 1);
            if ((p.y > py) != (q.y > py)) xs.push_back(crossing_x(p, q, py));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // Centres px with xs[k] <= px < xs[k+1], matching rasterize's parity rule.
            const double first = std::ceil(xs[k] - 0.5), last = std::ceil(xs[k + 1] - 0.5) - 1.0;
            if (last >= first) flips += static_cast<std::size_t>(last - first + 1.0);
        }
    }
    return flips;
}

// Douglas-Peucker over pts[first..last] (indices taken modulo the size).
// With preserve_coverage a chord is also rejected when it would move any
// pixel centre across the outline.
void douglas_peucker(std::span<const Point> pts, std::size_t first, std::size_t last, double epsilon,
                     bool preserve_coverage, std::vector<std::uint8_t>& keep) {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
    while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        if (b <= a + 1) continue;
        double best = -1.0;
        std::size_t idx = a;
        const Point pb = pts[b % pts.size()];
        for (std::size_t i = a + 1; i < b; ++i) {
            const double dist = point_segment_distance(pts[i], pts[a], pb);
            if (dist > best) {
                best = dist;
                idx = i;
            }
        }
        if (best > epsilon || (preserve_coverage && coverage_flips(pts, a, b) > 0)) {
            keep[idx] = 1;
            stack.emplace_back(a, idx);
            stack.emplace_back(idx, b);
        }
    }
}

Polygon simplify_impl(const Polygon& polygon, double epsilon, bool preserve_coverage) {
    if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be non-negative");
    const auto& v = polygon.vertices;
    const std::size_t n = v.size();
    if (n <= 3) return polygon;

    // Anchor at vertex 0 and the vertex farthest from it, then simplify both
    // open chains; index n stands for vertex 0 closing the loop.
    std::size_t far = 1;
    double best = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = std::hypot(v[i].x - v[0].x, v[i].y - v[0].y);
        if (d > best) {
            best = d;
            far = i;
        }
    }
    std::vector<std::uint8_t> keep(n, 0);
    keep[0] = keep[far] = 1;
    douglas_peucker(v, 0, far, epsilon, preserve_coverage, keep);
    douglas_peucker(v, far, n, epsilon, preserve_coverage, keep);

    Polygon out = polygon;
    out.vertices.clear();
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.vertices.push_back(v[i]);
    if (out.vertices.size() < 3) return polygon;
    return out;
}

bool in_extended_bounds(Point p, int width, int height) {
    return p.x >= -0.5 && p.y >= -0.5 && p.x <= width + 0.5 && p.y <= height + 0.5;
}

}  // namespace

void validate_polygon(const Polygon& polygon, int width, int height) {
    const auto& v = polygon.vertices;
    if (v.size() < 3) throw Error(ErrorCode::InvalidArgument, "polygon needs at least 3 vertices");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i].x) || !std::isfinite(v[i].y))
            throw Error(ErrorCode::InvalidArgument, "polygon vertex " + std::to_string(i) + " is not finite");
        if (v[i] == v[(i + 1) % v.size()])
            throw Error(ErrorCode::InvalidArgument, "polygon has duplicate consecutive vertices at " + std::to_string(i));
        if (width > 0 && height > 0 && !in_extended_bounds(v[i], width, height))
            throw Error(ErrorCode::OutOfRange, "polygon vertex " + std::to_string(i) + " outside image bounds");
    }
}

double signed_area(std::span<const Point> v) {
    double a = 0.0;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) a += v[j].x * v[i].y - v[i].x * v[j].y;
    return 0.5 * a;
}

double point_segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

std::vector<Polygon> extract_polygons(const LabelMask& mask, double epsilon, int category_id) {
    if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be non-negative");
    std::vector<Polygon> loops = CrackTracer(mask).trace(category_id);
    for (auto& p : loops) p = simplify_preserving_coverage(p, epsilon);
    return loops;
}

Polygon simplify(const Polygon& polygon, double epsilon) { return simplify_impl(polygon, epsilon, false); }

Polygon simplify_preserving_coverage(const Polygon& polygon, double epsilon) {
    return simplify_impl(polygon, epsilon, true);
}

Polygon move_vertex(const Polygon& polygon, std::size_t index, Point position, int width, int height) {
    const std::size_t n = polygon.vertices.size();
    if (index >= n) throw Error(ErrorCode::OutOfRange, "vertex index " + std::to_string(index) + " out of range");
    if (!in_extended_bounds(position, width, height))
        throw Error(ErrorCode::OutOfRange, "vertex target outside image bounds");
    if (position == polygon.vertices[(index + 1) % n] || position == polygon.vertices[(index + n - 1) % n])
        throw Error(ErrorCode::InvalidArgument, "vertex target duplicates a neighbouring vertex");
    Polygon out = polygon;
    out.vertices[index] = position;
    return out;
}

Polygon delete_vertex(const Polygon& polygon, std::size_t index) {
    const std::size_t n = polygon.vertices.size();
    if (index >= n) throw Error(ErrorCode::OutOfRange, "vertex index " + std::to_string(index) + " out of range");
    if (n <= 3) throw Error(ErrorCode::InvalidArgument, "cannot delete: polygon would have fewer than 3 vertices");
    Polygon out = polygon;
    out.vertices.erase(out.vertices.begin() + static_cast<std::ptrdiff_t>(index));
    if (out.vertices[(index + out.vertices.size() - 1) % out.vertices.size()] ==
        out.vertices[index % out.vertices.size()])
        throw Error(ErrorCode::InvalidArgument, "cannot delete: neighbours would coincide");
    return out;
}

Polygon insert_vertex_on_edge(const Polygon& polygon, std::size_t edge_index, Point position, double snap) {
    const std::size_t n = polygon.vertices.size();
    if (edge_index >= n) throw Error(ErrorCode::OutOfRange, "edge index " + std::to_string(edge_index) + " out of range");
    const Point a = polygon.vertices[edge_index], b = polygon.vertices[(edge_index + 1) % n];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double t = std::clamp(((position.x - a.x) * dx + (position.y - a.y) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    const Point projected{a.x + t * dx, a.y + t * dy};
    const double dist = std::hypot(position.x - projected.x, position.y - projected.y);
    if (dist > snap)
        throw Error(ErrorCode::InvalidArgument, "position is " + std::to_string(dist) + " px from the edge (snap " +
                                                    std::to_string(snap) + ")");
    // A click exactly on the edge is kept verbatim so insert/delete round-trip.
    const Point q = dist <= 1e-12 ? position : projected;
    if (q == a || q == b) throw Error(ErrorCode::InvalidArgument, "inserted vertex would duplicate an edge endpoint");
    Polygon out = polygon;
    out.vertices.insert(out.vertices.begin() + static_cast<std::ptrdiff_t>(edge_index) + 1, q);
    return out;
}

LabelMask rasterize(std::span<const Polygon> polygons, int width, int height) {
    if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "rasterize: negative size");
    LabelMask out(width, height);
    std::vector<double> xs;
    for (const auto& poly : polygons) {
        const auto& v = poly.vertices;
        if (v.size() < 3) continue;
        const auto label = static_cast<std::uint16_t>(poly.hole ? 0 : poly.category_id);
        for (int y = 0; y < height; ++y) {
            const double py = y + 0.5;
            xs.clear();
            for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
                if ((v[i].y > py) != (v[j].y > py)) xs.push_back(crossing_x(v[j], v[i], py));
            }
            if (xs.empty()) continue;
            std::sort(xs.begin(), xs.end());
            for (int x = 0; x < width; ++x) {
                // Inside when an odd number of crossings lie strictly right of the centre.
                const double px = x + 0.5;
                const auto right = xs.end() - std::upper_bound(xs.begin(), xs.end(), px);
                if (right % 2 == 1) out.set(x, y, label);
            }
        }
    }
    return out;
}

}  // namespace clickmask
