#pragma once

#include <array>
#include <vector>

#include "trapdet/errors.hpp"
#include "trapdet/geometry.hpp"

namespace trapdet::trapfields {

using geometry::PlanarPolygon;
using geometry::Point3;

// Planar electrode on the z = 0 chip surface. Its filled region is the
// union of the outlines minus the holes; every hole must lie strictly
// inside one outline. Outlines of the same electrode may share edges
// (composite shapes built from abutting pieces) but must not overlap.
//
// rf_amplitude is the electrode's share of the rf drive per volt of
// RfDrive::v_pk, so the physical peak rf voltage on the electrode is
// rf_amplitude * v_pk. A driven rail is typically 1 and everything else
// 0. static_potential is the dc voltage in volts.
struct Electrode {
    std::vector<PlanarPolygon> outlines;
    std::vector<PlanarPolygon> holes;
    double rf_amplitude = 0.0;
    double static_potential = 0.0;
};

// Electrode set on an otherwise grounded plane (inter-electrode gaps are
// treated as ground). Electrodes may abut edge to edge; their interiors
// must not overlap. An electrode sitting inside another's hole is fine.
struct ElectrodeLayout {
    std::vector<Electrode> electrodes;
};

struct RfDrive {
    double v_pk = 0.0;      // peak rf amplitude, volts
    double omega_rf = 0.0;  // angular rf frequency, rad/s
};

struct IonSpecies {
    double mass = 0.0;    // kg
    double charge = 0.0;  // coulombs, > 0
};

enum class PotentialKind { rf, dc };

// Trap characterization at a pseudopotential minimum.
struct TrapSolution {
    Point3 minimum_position;
    double ion_height = 0.0;  // meters above the plane
    double well_depth = 0.0;  // eV; 0 when no escape saddle was found
    std::array<double, 3> secular_frequencies{};  // Hz, ascending
    Point3 escape_position;  // equals minimum_position when well_depth is 0
};

// Electrostatic potential of the layout at p (p.z > 0 required), from the
// exact solution for charged patches on a grounded plane:
// phi(p) = sum_e V_e * Omega_e(p) / (2 pi), with Omega_e the solid angle
// of electrode e seen from p. PotentialKind::rf takes V_e = rf_amplitude
// (the per-volt drive pattern), PotentialKind::dc takes static_potential.
double potential(const ElectrodeLayout& layout, const Point3& p, PotentialKind kind);

// Electric field -grad(potential) at p by central differences with step
// max(1e-9 m, 1e-4 * p.z) and one level of Richardson extrapolation.
// p.z must exceed the step so the stencil stays above the plane.
std::array<double, 3> efield(const ElectrodeLayout& layout, const Point3& p,
                             PotentialKind kind);

// Time-averaged rf pseudopotential energy of the ion at p, in joules:
// (q v_pk)^2 |E_rf(p)|^2 / (4 m omega_rf^2), with E_rf the per-volt rf
// field pattern of the layout.
double pseudopotential(const ElectrodeLayout& layout, const RfDrive& drive,
                       const IonSpecies& species, const Point3& p);

// Same energy in electron-volts.
double pseudopotential_ev(const ElectrodeLayout& layout, const RfDrive& drive,
                          const IonSpecies& species, const Point3& p);

// Locates the pseudopotential minimum on the vertical line through
// search_axis_origin (its z component is ignored) by a coarse bracketing
// scan plus golden-section refinement, then polishes it with a damped 3-D
// Newton iteration. Secular frequencies come from the eigenvalues of the
// finite-difference Hessian. Well depth is measured at the lowest escape
// saddle found by steepest ascent seeded along each Hessian eigenvector
// direction, softest first; ascent paths that run into the plane or leave
// the search region are discarded, and if no path tops out the depth is
// reported as 0.
//
// Throws solver_error when the scan finds no minimum or when the Hessian
// at the converged point is not positive definite.
TrapSolution find_trap(const ElectrodeLayout& layout, const RfDrive& drive,
                       const IonSpecies& species, const Point3& search_axis_origin);

}  // namespace trapdet::trapfields
