#pragma once

#include <array>
#include <vector>

#include "trapdet/errors.hpp"

namespace trapdet::geometry {

struct Point3 {
    double x = 0.0;  // meters
    double y = 0.0;
    double z = 0.0;
};

// Axis-aligned rectangle in the z = 0 plane (the chip surface).
struct PlanarRect {
    double center_x = 0.0;  // meters
    double center_y = 0.0;
    double width = 0.0;   // extent along x, meters
    double height = 0.0;  // extent along y, meters
};

struct Vertex2 {
    double x = 0.0;  // meters
    double y = 0.0;
};

// Simple (non-self-intersecting) polygon in the z = 0 plane.
// Vertices may wind in either direction.
struct PlanarPolygon {
    std::vector<Vertex2> vertices;
};

// Parameters of a linear array of detection zones along a laser beam
// running parallel to the chip surface at the ion height.
struct ZoneArraySpec {
    double ion_height = 0.0;      // meters
    double wavelength = 0.0;      // meters
    double waist_factor = 0.0;    // beam waist = waist_factor * ion_height, < 1
    double spacing_factor = 0.0;  // zone spacing = spacing_factor * ion_height
};

struct ZoneArrayResult {
    double waist = 0.0;            // meters
    double rayleigh_length = 0.0;  // meters
    int zone_count = 0;
};

// Solid angle of the rectangle seen from a viewpoint strictly above the
// plane, via the signed four-corner arctangent decomposition. Result in
// steradians, in (0, 2*pi).
double solid_angle_rect(const PlanarRect& rect, const Point3& viewpoint);

// Solid angle of a simple polygon seen from a viewpoint off the plane
// (either side). Triangulates and sums closed-form triangle solid angles;
// returns the magnitude.
double solid_angle_polygon(const PlanarPolygon& poly, const Point3& viewpoint);

// Numerical aperture of the equivalent cone subtending the given fraction
// of the full sphere: NA = sqrt(1 - (1 - 2f)^2), valid for 0 <= f <= 0.5.
double fraction_to_na(double fraction);

// Ratio of the solid angle the detector subtends at a neighboring ion
// (displaced laterally by spacing_factor * ion_height) to the solid angle
// at its own ion directly above the detector center.
double crosstalk(const PlanarRect& detector, double ion_height, double spacing_factor);

// Beam waist, Rayleigh length and zone count for a detection-zone array.
// Zones are spaced spacing_factor * ion_height apart within one Rayleigh
// length centered on the focus.
ZoneArrayResult zone_array(const ZoneArraySpec& spec);

// Polygon helpers shared with the field solver and with test oracles.
double polygon_signed_area(const PlanarPolygon& poly);
bool polygon_is_simple(const PlanarPolygon& poly);
bool point_in_polygon(const PlanarPolygon& poly, double x, double y);
std::vector<std::array<Vertex2, 3>> triangulate(const PlanarPolygon& poly);

// Area of the intersection of two simple polygons, by clipping every
// triangle of one triangulation against every triangle of the other.
// Abutting shapes overlap in a set of measure zero and return 0.
double polygon_intersection_area(const PlanarPolygon& a, const PlanarPolygon& b);

}  // namespace trapdet::geometry
