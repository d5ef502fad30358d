#include "trapdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace trapdet::geometry {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw validation_error(std::string(what) + " must be finite");
}

// Solid angle contribution of one corner rectangle [0,x] x [0,y] seen from
// height z above the corner origin. Signs of x and y carry through, which
// is what makes the four-corner decomposition work for any viewpoint.
double corner_term(double x, double y, double z) {
    return std::atan2(x * y, z * std::sqrt(x * x + y * y + z * z));
}

// Signed solid angle of the triangle (a, b, c) in the z = 0 plane seen from
// p, using the closed-form triangle formula: tan(omega/2) expressed through
// the scalar triple product and pairwise dot products of the vertex vectors.
double triangle_solid_angle_signed(const Point3& p, const Vertex2& a, const Vertex2& b,
                                   const Vertex2& c) {
    const double r1[3] = {a.x - p.x, a.y - p.y, -p.z};
    const double r2[3] = {b.x - p.x, b.y - p.y, -p.z};
    const double r3[3] = {c.x - p.x, c.y - p.y, -p.z};
    const double l1 = std::sqrt(r1[0] * r1[0] + r1[1] * r1[1] + r1[2] * r1[2]);
    const double l2 = std::sqrt(r2[0] * r2[0] + r2[1] * r2[1] + r2[2] * r2[2]);
    const double l3 = std::sqrt(r3[0] * r3[0] + r3[1] * r3[1] + r3[2] * r3[2]);
    const double triple = r1[0] * (r2[1] * r3[2] - r2[2] * r3[1]) -
                          r1[1] * (r2[0] * r3[2] - r2[2] * r3[0]) +
                          r1[2] * (r2[0] * r3[1] - r2[1] * r3[0]);
    const double d12 = r1[0] * r2[0] + r1[1] * r2[1] + r1[2] * r2[2];
    const double d13 = r1[0] * r3[0] + r1[1] * r3[1] + r1[2] * r3[2];
    const double d23 = r2[0] * r3[0] + r2[1] * r3[1] + r2[2] * r3[2];
    const double denom = l1 * l2 * l3 + d12 * l3 + d13 * l2 + d23 * l1;
    return 2.0 * std::atan2(triple, denom);
}

double cross2(const Vertex2& o, const Vertex2& a, const Vertex2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Proper or improper intersection test for segments (a,b) and (c,d),
// tolerant to the shared-endpoint case which the caller excludes.
bool segments_intersect(const Vertex2& a, const Vertex2& b, const Vertex2& c,
                        const Vertex2& d) {
    const double d1 = cross2(c, d, a);
    const double d2 = cross2(c, d, b);
    const double d3 = cross2(a, b, c);
    const double d4 = cross2(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    auto on_segment = [](const Vertex2& p, const Vertex2& q, const Vertex2& r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

void validate_polygon(const PlanarPolygon& poly) {
    if (poly.vertices.size() < 3)
        throw validation_error("polygon needs at least 3 vertices");
    for (const auto& v : poly.vertices) {
        require_finite(v.x, "polygon vertex");
        require_finite(v.y, "polygon vertex");
    }
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = poly.vertices[i];
        const auto& b = poly.vertices[(i + 1) % n];
        if (a.x == b.x && a.y == b.y)
            throw validation_error("polygon has a zero-length edge");
    }
    if (std::abs(polygon_signed_area(poly)) == 0.0)
        throw validation_error("polygon is degenerate (zero area)");
    if (!polygon_is_simple(poly))
        throw validation_error("polygon is self-intersecting");
}

}  // namespace

double polygon_signed_area(const PlanarPolygon& poly) {
    double twice_area = 0.0;
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = poly.vertices[i];
        const auto& b = poly.vertices[(i + 1) % n];
        twice_area += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice_area;
}

bool polygon_is_simple(const PlanarPolygon& poly) {
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // Skip edges sharing a vertex (adjacent or identical).
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_intersect(poly.vertices[i], poly.vertices[(i + 1) % n],
                                   poly.vertices[j], poly.vertices[(j + 1) % n]))
                return false;
        }
    }
    return true;
}

namespace {

// Area of the intersection of two counterclockwise triangles via
// Sutherland-Hodgman clipping (both are convex, so the clip is exact).
double triangle_clip_area(const std::array<Vertex2, 3>& subject,
                          const std::array<Vertex2, 3>& clip) {
    std::vector<Vertex2> poly(subject.begin(), subject.end());
    std::vector<Vertex2> next;
    for (std::size_t e = 0; e < 3 && !poly.empty(); ++e) {
        const Vertex2& c1 = clip[e];
        const Vertex2& c2 = clip[(e + 1) % 3];
        next.clear();
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vertex2& p = poly[i];
            const Vertex2& q = poly[(i + 1) % n];
            const double dp = cross2(c1, c2, p);
            const double dq = cross2(c1, c2, q);
            if (dp >= 0) next.push_back(p);
            if ((dp >= 0) != (dq >= 0)) {
                const double t = dp / (dp - dq);
                next.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
            }
        }
        poly = next;
    }
    if (poly.size() < 3) return 0.0;
    double twice_area = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vertex2& a = poly[i];
        const Vertex2& b = poly[(i + 1) % poly.size()];
        twice_area += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(twice_area);
}

std::array<Vertex2, 3> ccw_triangle(std::array<Vertex2, 3> t) {
    if (cross2(t[0], t[1], t[2]) < 0) std::swap(t[1], t[2]);
    return t;
}

}  // namespace

double polygon_intersection_area(const PlanarPolygon& a, const PlanarPolygon& b) {
    const auto tris_a = triangulate(a);
    const auto tris_b = triangulate(b);
    double total = 0.0;
    for (const auto& ta : tris_a) {
        const auto ca = ccw_triangle(ta);
        for (const auto& tb : tris_b) total += triangle_clip_area(ca, ccw_triangle(tb));
    }
    return total;
}

bool point_in_polygon(const PlanarPolygon& poly, double x, double y) {
    // Crossing-number test; points exactly on the boundary may land either way.
    bool inside = false;
    const std::size_t n = poly.vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& a = poly.vertices[i];
        const auto& b = poly.vertices[j];
        if ((a.y > y) != (b.y > y)) {
            const double x_cross = a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (x < x_cross) inside = !inside;
        }
    }
    return inside;
}

std::vector<std::array<Vertex2, 3>> triangulate(const PlanarPolygon& poly) {
    validate_polygon(poly);

    // Work on a counterclockwise copy so ear tests have a fixed orientation.
    std::vector<Vertex2> verts = poly.vertices;
    if (polygon_signed_area(poly) < 0.0) std::reverse(verts.begin(), verts.end());

    double scale = 0.0;
    for (const auto& v : verts) scale = std::max({scale, std::abs(v.x), std::abs(v.y)});
    const double area_eps = scale * scale * 1e-14;

    std::vector<std::size_t> idx(verts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    std::vector<std::array<Vertex2, 3>> tris;
    tris.reserve(verts.size() - 2);

    auto point_in_closed_triangle = [&](const Vertex2& p, const Vertex2& a, const Vertex2& b,
                                        const Vertex2& c) {
        const double c1 = cross2(a, b, p);
        const double c2 = cross2(b, c, p);
        const double c3 = cross2(c, a, p);
        return c1 >= -area_eps && c2 >= -area_eps && c3 >= -area_eps;
    };

    while (idx.size() > 3) {
        bool clipped = false;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t ip = idx[(k + idx.size() - 1) % idx.size()];
            const std::size_t ic = idx[k];
            const std::size_t in = idx[(k + 1) % idx.size()];
            const Vertex2& a = verts[ip];
            const Vertex2& b = verts[ic];
            const Vertex2& c = verts[in];
            if (cross2(a, b, c) <= area_eps) continue;  // reflex or collinear corner
            bool contains_other = false;
            for (std::size_t other : idx) {
                if (other == ip || other == ic || other == in) continue;
                if (point_in_closed_triangle(verts[other], a, b, c)) {
                    contains_other = true;
                    break;
                }
            }
            if (contains_other) continue;
            tris.push_back({a, b, c});
            idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(k));
            clipped = true;
            break;
        }
        if (!clipped)
            throw solver_error("polygon triangulation failed to find an ear");
    }
    tris.push_back({verts[idx[0]], verts[idx[1]], verts[idx[2]]});
    return tris;
}

double solid_angle_rect(const PlanarRect& rect, const Point3& viewpoint) {
    require_finite(rect.center_x, "rect center");
    require_finite(rect.center_y, "rect center");
    require_finite(rect.width, "rect width");
    require_finite(rect.height, "rect height");
    require_finite(viewpoint.x, "viewpoint");
    require_finite(viewpoint.y, "viewpoint");
    require_finite(viewpoint.z, "viewpoint");
    if (rect.width <= 0.0 || rect.height <= 0.0)
        throw validation_error("rectangle width and height must be positive");
    if (viewpoint.z <= 0.0)
        throw validation_error("viewpoint must lie strictly above the plane (z > 0)");

    const double x1 = rect.center_x - 0.5 * rect.width - viewpoint.x;
    const double x2 = rect.center_x + 0.5 * rect.width - viewpoint.x;
    const double y1 = rect.center_y - 0.5 * rect.height - viewpoint.y;
    const double y2 = rect.center_y + 0.5 * rect.height - viewpoint.y;
    const double z = viewpoint.z;

    return corner_term(x2, y2, z) - corner_term(x1, y2, z) - corner_term(x2, y1, z) +
           corner_term(x1, y1, z);
}

double solid_angle_polygon(const PlanarPolygon& poly, const Point3& viewpoint) {
    require_finite(viewpoint.x, "viewpoint");
    require_finite(viewpoint.y, "viewpoint");
    require_finite(viewpoint.z, "viewpoint");
    if (viewpoint.z == 0.0)
        throw validation_error("viewpoint must lie off the polygon plane (z != 0)");

    double total = 0.0;
    for (const auto& tri : triangulate(poly))
        total += triangle_solid_angle_signed(viewpoint, tri[0], tri[1], tri[2]);
    return std::abs(total);
}

double fraction_to_na(double fraction) {
    require_finite(fraction, "fraction");
    if (fraction < 0.0 || fraction > 0.5)
        throw validation_error("solid-angle fraction must lie in [0, 0.5]");
    // sqrt(1 - (1-2f)^2) rewritten to avoid cancellation at small f.
    return 2.0 * std::sqrt(fraction * (1.0 - fraction));
}

double crosstalk(const PlanarRect& detector, double ion_height, double spacing_factor) {
    require_finite(ion_height, "ion height");
    require_finite(spacing_factor, "spacing factor");
    if (ion_height <= 0.0) throw validation_error("ion height must be positive");
    if (spacing_factor < 0.0) throw validation_error("spacing factor must be non-negative");

    const Point3 own{detector.center_x, detector.center_y, ion_height};
    const Point3 neighbor{detector.center_x + spacing_factor * ion_height, detector.center_y,
                          ion_height};
    return solid_angle_rect(detector, neighbor) / solid_angle_rect(detector, own);
}

ZoneArrayResult zone_array(const ZoneArraySpec& spec) {
    require_finite(spec.ion_height, "ion height");
    require_finite(spec.wavelength, "wavelength");
    require_finite(spec.waist_factor, "waist factor");
    require_finite(spec.spacing_factor, "spacing factor");
    if (spec.ion_height <= 0.0) throw validation_error("ion height must be positive");
    if (spec.wavelength <= 0.0) throw validation_error("wavelength must be positive");
    if (spec.waist_factor <= 0.0 || spec.waist_factor >= 1.0)
        throw validation_error("waist factor must lie in (0, 1)");
    if (spec.spacing_factor <= 0.0)
        throw validation_error("spacing factor must be positive");

    ZoneArrayResult out;
    out.waist = spec.waist_factor * spec.ion_height;
    out.rayleigh_length = M_PI * out.waist * out.waist / spec.wavelength;
    // Zones sit spacing_factor * ion_height apart; the array spans at most one
    // Rayleigh length centered on the focus, hence floor(span/pitch) + 1 zones.
    const double pitch = spec.spacing_factor * spec.ion_height;
    out.zone_count = static_cast<int>(std::floor(out.rayleigh_length / pitch)) + 1;
    return out;
}

}  // namespace trapdet::geometry
