#include "trapdet/trapfields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trapdet/constants.hpp"

namespace trapdet::trapfields {

namespace {

void require_finite(double value, const char* what) {
    if (!std::isfinite(value))
        throw validation_error(std::string(what) + " must be finite");
}

void require_point_above_plane(const Point3& p) {
    require_finite(p.x, "point coordinate");
    require_finite(p.y, "point coordinate");
    require_finite(p.z, "point coordinate");
    if (p.z <= 0.0)
        throw validation_error("field point must satisfy z > 0 (above the electrode plane)");
}

Point3 offset(const Point3& p, int axis, double step) {
    Point3 q = p;
    switch (axis) {
        case 0: q.x += step; break;
        case 1: q.y += step; break;
        default: q.z += step; break;
    }
    return q;
}

double polygon_area(const PlanarPolygon& poly) {
    return std::abs(geometry::polygon_signed_area(poly));
}

double pair_intersection_area(const std::vector<PlanarPolygon>& as,
                              const std::vector<PlanarPolygon>& bs) {
    double total = 0.0;
    for (const auto& a : as)
        for (const auto& b : bs) total += geometry::polygon_intersection_area(a, b);
    return total;
}

// Relative slack for the exact-area overlap and containment tests, to
// absorb clipping roundoff on shapes that merely touch.
constexpr double kAreaSlack = 1e-9;

void validate_electrode(const Electrode& e, std::size_t index) {
    const std::string label = "electrode " + std::to_string(index);
    if (e.outlines.empty())
        throw validation_error(label + " has no outline polygon");
    require_finite(e.rf_amplitude, "rf_amplitude");
    require_finite(e.static_potential, "static_potential");
    auto check_polygon = [&](const PlanarPolygon& poly, const char* role) {
        try {
            geometry::triangulate(poly);
        } catch (const validation_error& err) {
            throw validation_error(label + " " + role + ": " + err.what());
        } catch (const solver_error& err) {
            throw validation_error(label + " " + role + ": " + err.what());
        }
    };
    for (const auto& o : e.outlines) check_polygon(o, "outline");
    for (const auto& h : e.holes) check_polygon(h, "hole");

    // Outlines of one electrode may abut but not overlap; same for holes.
    auto check_disjoint = [&](const std::vector<PlanarPolygon>& polys, const char* role) {
        for (std::size_t i = 0; i < polys.size(); ++i)
            for (std::size_t j = i + 1; j < polys.size(); ++j) {
                const double shared =
                    geometry::polygon_intersection_area(polys[i], polys[j]);
                const double smaller = std::min(polygon_area(polys[i]),
                                                polygon_area(polys[j]));
                if (shared > kAreaSlack * smaller)
                    throw validation_error(label + ": " + role + " regions overlap");
            }
    };
    check_disjoint(e.outlines, "outline");
    check_disjoint(e.holes, "hole");

    // Every hole must be covered by the union of the outlines (the
    // outlines are disjoint, so their intersections with the hole add up).
    for (const auto& h : e.holes) {
        const double area = polygon_area(h);
        double covered = 0.0;
        for (const auto& o : e.outlines)
            covered += geometry::polygon_intersection_area(h, o);
        if (covered < (1.0 - kAreaSlack) * area)
            throw validation_error(label + ": hole is not inside the electrode outlines");
    }
}

// Area of the overlap of two electrodes' filled regions. With holes
// contained in their outlines and outlines (and holes) pairwise disjoint,
// the indicator of a filled region is sum(outlines) - sum(holes), so the
// overlap expands into four pairwise intersection terms.
double electrode_overlap_area(const Electrode& a, const Electrode& b) {
    return pair_intersection_area(a.outlines, b.outlines) -
           pair_intersection_area(a.outlines, b.holes) -
           pair_intersection_area(a.holes, b.outlines) +
           pair_intersection_area(a.holes, b.holes);
}

double electrode_area(const Electrode& e) {
    double area = 0.0;
    for (const auto& o : e.outlines) area += polygon_area(o);
    for (const auto& h : e.holes) area -= polygon_area(h);
    return area;
}

void validate_layout(const ElectrodeLayout& layout) {
    if (layout.electrodes.empty())
        throw validation_error("layout has no electrodes");
    for (std::size_t i = 0; i < layout.electrodes.size(); ++i)
        validate_electrode(layout.electrodes[i], i);

    const auto& es = layout.electrodes;
    for (std::size_t i = 0; i < es.size(); ++i) {
        for (std::size_t j = i + 1; j < es.size(); ++j) {
            const double shared = electrode_overlap_area(es[i], es[j]);
            const double smaller = std::min(electrode_area(es[i]), electrode_area(es[j]));
            if (shared > kAreaSlack * smaller)
                throw validation_error("electrodes " + std::to_string(i) + " and " +
                                       std::to_string(j) + " overlap");
        }
    }
}

void validate_drive(const RfDrive& drive) {
    require_finite(drive.v_pk, "v_pk");
    require_finite(drive.omega_rf, "omega_rf");
    if (drive.v_pk <= 0.0) throw validation_error("v_pk must be > 0");
    if (drive.omega_rf <= 0.0) throw validation_error("omega_rf must be > 0");
}

void validate_species(const IonSpecies& species) {
    require_finite(species.mass, "ion mass");
    require_finite(species.charge, "ion charge");
    if (species.mass <= 0.0) throw validation_error("ion mass must be > 0");
    if (species.charge <= 0.0) throw validation_error("ion charge must be > 0");
}

// Evaluators below assume a validated layout; the public entry points
// validate once and the iterative solvers reuse these directly.

double potential_unchecked(const ElectrodeLayout& layout, const Point3& p,
                           PotentialKind kind) {
    require_point_above_plane(p);
    double phi = 0.0;
    for (const auto& e : layout.electrodes) {
        const double v = (kind == PotentialKind::rf) ? e.rf_amplitude : e.static_potential;
        if (v == 0.0) continue;
        double omega = 0.0;
        for (const auto& o : e.outlines) omega += geometry::solid_angle_polygon(o, p);
        for (const auto& h : e.holes) omega -= geometry::solid_angle_polygon(h, p);
        phi += v * omega;
    }
    return phi / (2.0 * std::numbers::pi);
}

std::array<double, 3> efield_unchecked(const ElectrodeLayout& layout, const Point3& p,
                                       PotentialKind kind) {
    require_point_above_plane(p);
    const double h = std::max(1e-9, 1e-4 * p.z);
    if (p.z <= h)
        throw validation_error("field point too close to the plane for the difference step");
    std::array<double, 3> field{};
    for (int axis = 0; axis < 3; ++axis) {
        auto phi_at = [&](double s) {
            return potential_unchecked(layout, offset(p, axis, s), kind);
        };
        const double d_full = (phi_at(h) - phi_at(-h)) / (2.0 * h);
        const double d_half = (phi_at(h / 2.0) - phi_at(-h / 2.0)) / h;
        field[axis] = -(4.0 * d_half - d_full) / 3.0;
    }
    return field;
}

double pseudopotential_unchecked(const ElectrodeLayout& layout, const RfDrive& drive,
                                 const IonSpecies& species, const Point3& p) {
    const auto e = efield_unchecked(layout, p, PotentialKind::rf);
    const double e2 = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
    const double amp = species.charge * drive.v_pk;
    return amp * amp * e2 /
           (4.0 * species.mass * drive.omega_rf * drive.omega_rf);
}

struct ScanRange {
    double z_lo = 0.0;
    double z_hi = 0.0;
    double lateral_extent = 0.0;
};

ScanRange scan_range(const ElectrodeLayout& layout) {
    double lo_x = std::numeric_limits<double>::infinity();
    double hi_x = -lo_x;
    double lo_y = lo_x;
    double hi_y = hi_x;
    for (const auto& e : layout.electrodes)
        for (const auto& o : e.outlines)
            for (const auto& v : o.vertices) {
                lo_x = std::min(lo_x, v.x);
                hi_x = std::max(hi_x, v.x);
                lo_y = std::min(lo_y, v.y);
                hi_y = std::max(hi_y, v.y);
            }
    const double extent = std::max(hi_x - lo_x, hi_y - lo_y);
    ScanRange r;
    r.lateral_extent = extent;
    r.z_lo = 1e-3 * extent;
    r.z_hi = 4.0 * extent;
    return r;
}

}  // namespace

double potential(const ElectrodeLayout& layout, const Point3& p, PotentialKind kind) {
    validate_layout(layout);
    return potential_unchecked(layout, p, kind);
}

std::array<double, 3> efield(const ElectrodeLayout& layout, const Point3& p,
                             PotentialKind kind) {
    validate_layout(layout);
    return efield_unchecked(layout, p, kind);
}

double pseudopotential(const ElectrodeLayout& layout, const RfDrive& drive,
                       const IonSpecies& species, const Point3& p) {
    validate_layout(layout);
    validate_drive(drive);
    validate_species(species);
    return pseudopotential_unchecked(layout, drive, species, p);
}

double pseudopotential_ev(const ElectrodeLayout& layout, const RfDrive& drive,
                          const IonSpecies& species, const Point3& p) {
    return pseudopotential(layout, drive, species, p) / constants::joules_per_ev;
}

TrapSolution find_trap(const ElectrodeLayout& layout, const RfDrive& drive,
                       const IonSpecies& species, const Point3& search_axis_origin) {
    validate_layout(layout);
    validate_drive(drive);
    validate_species(species);
    require_finite(search_axis_origin.x, "search axis origin");
    require_finite(search_axis_origin.y, "search axis origin");

    const double x0 = search_axis_origin.x;
    const double y0 = search_axis_origin.y;
    auto ps = [&](const Point3& p) {
        return pseudopotential_unchecked(layout, drive, species, p);
    };
    auto ps_at = [&](double x, double y, double z) { return ps(Point3{x, y, z}); };

    // Coarse log-spaced scan of the vertical line for a bracketed minimum.
    const ScanRange range = scan_range(layout);
    const int n_scan = 400;
    std::vector<double> zs(n_scan);
    std::vector<double> vals(n_scan);
    const double ratio = range.z_hi / range.z_lo;
    for (int k = 0; k < n_scan; ++k) {
        zs[k] = range.z_lo * std::pow(ratio, static_cast<double>(k) / (n_scan - 1));
        vals[k] = ps_at(x0, y0, zs[k]);
    }
    int best = -1;
    for (int k = 1; k + 1 < n_scan; ++k) {
        if (vals[k] < vals[k - 1] && vals[k] < vals[k + 1] &&
            (best < 0 || vals[k] < vals[best]))
            best = k;
    }
    if (best < 0)
        throw solver_error("no pseudopotential minimum found along the vertical search line");

    // Golden-section refinement of the bracket.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = zs[best - 1];
    double b = zs[best + 1];
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = ps_at(x0, y0, c);
    double fd = ps_at(x0, y0, d);
    for (int it = 0; it < 40; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ps_at(x0, y0, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ps_at(x0, y0, d);
        }
    }
    Eigen::Vector3d x(x0, y0, (a + b) / 2.0);

    // Damped Newton refinement in three dimensions. Steps and difference
    // spacings scale with the current height so behaviour is independent
    // of the absolute layout scale.
    auto ps_vec = [&](const Eigen::Vector3d& q) { return ps_at(q[0], q[1], q[2]); };
    auto gradient = [&](const Eigen::Vector3d& q, double h) {
        Eigen::Vector3d g;
        for (int i = 0; i < 3; ++i) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[i] = h;
            g[i] = (ps_vec(q + e) - ps_vec(q - e)) / (2.0 * h);
        }
        return g;
    };
    auto hessian = [&](const Eigen::Vector3d& q, double h) {
        Eigen::Matrix3d m;
        const double f0 = ps_vec(q);
        for (int i = 0; i < 3; ++i) {
            Eigen::Vector3d ei = Eigen::Vector3d::Zero();
            ei[i] = h;
            m(i, i) = (ps_vec(q + ei) - 2.0 * f0 + ps_vec(q - ei)) / (h * h);
            for (int j = i + 1; j < 3; ++j) {
                Eigen::Vector3d ej = Eigen::Vector3d::Zero();
                ej[j] = h;
                m(i, j) = m(j, i) = (ps_vec(q + ei + ej) - ps_vec(q + ei - ej) -
                                     ps_vec(q - ei + ej) + ps_vec(q - ei - ej)) /
                                    (4.0 * h * h);
            }
        }
        return m;
    };

    for (int iter = 0; iter < 60; ++iter) {
        const double h = 1e-3 * x[2];
        const double f0 = ps_vec(x);
        const Eigen::Vector3d g = gradient(x, h);
        const Eigen::Matrix3d hess = hessian(x, h);
        Eigen::Vector3d step = hess.ldlt().solve(-g);
        if (!step.allFinite() || g.dot(step) > 0.0)
            step = -g * (h / std::max(g.norm(), 1e-300));
        const double cap = 0.2 * x[2];
        if (step.norm() > cap) step *= cap / step.norm();
        double lambda = 1.0;
        double f_new = ps_vec(x + step);
        while (f_new > f0 && lambda > 1e-4) {
            lambda /= 2.0;
            f_new = ps_vec(x + lambda * step);
        }
        if (f_new > f0) break;
        x += lambda * step;
        if ((lambda * step).norm() < 1e-7 * h) break;
    }
    if (x[2] <= 0.0)
        throw solver_error("pseudopotential minimum search left the z > 0 half-space");

    const double f_min = ps_vec(x);
    const double h_min = 1e-3 * x[2];
    const Eigen::Matrix3d hess_min = hessian(x, h_min);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(hess_min);
    const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
    if (lambda[0] <= 0.0)
        throw solver_error("pseudopotential Hessian is not positive definite at the "
                           "reported minimum (saddle or degenerate point)");

    TrapSolution sol;
    sol.minimum_position = Point3{x[0], x[1], x[2]};
    sol.ion_height = x[2];
    for (int i = 0; i < 3; ++i)
        sol.secular_frequencies[i] =
            std::sqrt(lambda[i] / species.mass) / (2.0 * std::numbers::pi);

    // Escape saddle: steepest ascent from just off the minimum along each
    // Hessian eigenvector direction, softest first. A path contributes a
    // barrier when its value tops out and starts to fall; paths that dive
    // toward the plane singularity or wander out of the search region are
    // dropped.
    // Floor comfortably above the difference stencils so ascent paths are
    // cut off before any evaluation can reach the plane.
    const double z_floor = 1e-2 * x[2];
    const double r_max = 10.0 * std::max(range.lateral_extent, x[2]);
    const double eta = x[2] / 500.0;
    const double delta = 1e-3 * x[2];
    const double h_path = 1e-3 * x[2];
    double best_barrier = std::numeric_limits<double>::infinity();
    Eigen::Vector3d best_peak = x;

    for (int mode = 0; mode < 3; ++mode) {
        for (double sign : {1.0, -1.0}) {
            Eigen::Vector3d p = x + sign * delta * eig.eigenvectors().col(mode);
            if (p[2] <= z_floor) continue;
            double f_prev = f_min;
            double f_cur = ps_vec(p);
            Eigen::Vector3d dir = sign * eig.eigenvectors().col(mode);
            for (int step_i = 0; step_i < 30000; ++step_i) {
                const Eigen::Vector3d g = gradient(p, h_path);
                const double gn = g.norm();
                if (gn == 0.0) break;
                dir = g / gn;
                const Eigen::Vector3d p_next = p + eta * dir;
                if (p_next[2] <= z_floor) break;
                if ((p_next - x).norm() > r_max) break;
                const double f_next = ps_vec(p_next);
                if (f_next < f_cur) {
                    // Parabolic peak through the last three path values.
                    const double denom = f_prev - 2.0 * f_cur + f_next;
                    double t_peak = 0.0;
                    double f_peak = f_cur;
                    if (denom < 0.0) {
                        t_peak = 0.5 * (f_prev - f_next) / denom * eta;
                        f_peak = f_cur - (f_prev - f_next) * (f_prev - f_next) /
                                             (8.0 * denom);
                    }
                    const Eigen::Vector3d peak = p + t_peak * dir;
                    const double barrier = std::max(f_peak - f_min, 0.0);
                    if (barrier < best_barrier) {
                        best_barrier = barrier;
                        best_peak = peak;
                    }
                    break;
                }
                f_prev = f_cur;
                f_cur = f_next;
                p = p_next;
            }
        }
    }

    if (std::isfinite(best_barrier)) {
        sol.well_depth = best_barrier / constants::joules_per_ev;
        sol.escape_position = Point3{best_peak[0], best_peak[1], best_peak[2]};
    } else {
        sol.well_depth = 0.0;
        sol.escape_position = sol.minimum_position;
    }
    return sol;
}

}  // namespace trapdet::trapfields
