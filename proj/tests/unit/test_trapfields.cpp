#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "field_oracles.hpp"
#include "fixtures.hpp"
#include "trapdet/constants.hpp"
#include "trapdet/geometry.hpp"
#include "trapdet/trapfields.hpp"

using namespace trapdet;
using namespace trapdet::trapfields;
using geometry::PlanarRect;
using geometry::PlanarPolygon;
using trapdet::testing::panel_potential;
using trapdet::testing::rect_electrode_field;
using trapdet::testing::ring_trap_fixture;

namespace {

constexpr double kUm = 1e-6;

PlanarPolygon rect_polygon(double cx, double cy, double w, double h) {
    const double x1 = cx - w / 2.0;
    const double x2 = cx + w / 2.0;
    const double y1 = cy - h / 2.0;
    const double y2 = cy + h / 2.0;
    return PlanarPolygon{{{x1, y1}, {x2, y1}, {x2, y2}, {x1, y2}}};
}

Electrode rect_electrode(double cx_um, double cy_um, double w_um, double h_um,
                         double v_dc, double v_rf = 0.0) {
    Electrode e;
    e.outlines = {rect_polygon(cx_um * kUm, cy_um * kUm, w_um * kUm, h_um * kUm)};
    e.static_potential = v_dc;
    e.rf_amplitude = v_rf;
    return e;
}

// Three-electrode layout with mixed shapes for the oracle comparisons:
// an L-shaped pad, a plain rectangle, and a rectangle with a hole.
ElectrodeLayout mixed_layout() {
    ElectrodeLayout layout;

    Electrode l_pad;
    l_pad.outlines = {PlanarPolygon{{{-70 * kUm, -60 * kUm},
                                     {-10 * kUm, -60 * kUm},
                                     {-10 * kUm, -30 * kUm},
                                     {-40 * kUm, -30 * kUm},
                                     {-40 * kUm, 10 * kUm},
                                     {-70 * kUm, 10 * kUm}}}};
    l_pad.static_potential = 3.0;
    layout.electrodes.push_back(l_pad);

    layout.electrodes.push_back(rect_electrode(35, -20, 50, 40, -2.0));

    Electrode ringed = rect_electrode(0, 45, 80, 36, 5.0);
    ringed.holes = {rect_polygon(5 * kUm, 47 * kUm, 24 * kUm, 14 * kUm)};
    layout.electrodes.push_back(ringed);

    return layout;
}

}  // namespace

TEST_SUITE("trapfields") {

TEST_CASE("potential approaches the electrode voltage just above its surface") {
    ElectrodeLayout layout;
    layout.electrodes.push_back(rect_electrode(0, 0, 100, 100, 7.0));
    const double phi = potential(layout, {0, 0, 1e-9}, PotentialKind::dc);
    CHECK(phi == doctest::Approx(7.0).epsilon(1e-4));
    const double phi_off = potential(layout, {20 * kUm, -15 * kUm, 1e-9}, PotentialKind::dc);
    CHECK(phi_off == doctest::Approx(7.0).epsilon(1e-4));
}

TEST_CASE("potential vanishes far above the layout") {
    ElectrodeLayout layout;
    layout.electrodes.push_back(rect_electrode(0, 0, 100, 100, 7.0));
    CHECK(std::abs(potential(layout, {0, 0, 10.0}, PotentialKind::dc)) < 1e-9);
}

TEST_CASE("large equipotential sheet shields the field above its center") {
    ElectrodeLayout layout;
    layout.electrodes.push_back(rect_electrode(0, 0, 1e6, 1e6, 3.0));  // 1 m x 1 m
    const Point3 p{0, 0, 1e-4};
    CHECK(potential(layout, p, PotentialKind::dc) == doctest::Approx(3.0).epsilon(1e-3));
    const auto e = efield(layout, p, PotentialKind::dc);
    const double naive = 3.0 / p.z;  // field scale of an unshielded gap
    CHECK(std::abs(e[0]) < 1e-9 * naive);
    CHECK(std::abs(e[1]) < 1e-9 * naive);
    CHECK(std::abs(e[2]) < 1e-3 * naive);
}

TEST_CASE("lateral field vanishes on the symmetry axis of the ring layout") {
    const auto fix = ring_trap_fixture();
    const auto e = efield(fix.layout, {0, 0, 40 * kUm}, PotentialKind::rf);
    CHECK(std::abs(e[0]) < 1e-9 * std::abs(e[2]));
    CHECK(std::abs(e[1]) < 1e-9 * std::abs(e[2]));
}

TEST_CASE("potential matches brute-force panel integration within 0.1%") {
    const ElectrodeLayout layout = mixed_layout();
    std::mt19937_64 rng(411);
    std::uniform_real_distribution<double> lat(-80.0, 80.0);
    std::uniform_real_distribution<double> height(20.0, 120.0);
    for (int i = 0; i < 20; ++i) {
        const Point3 p{lat(rng) * kUm, lat(rng) * kUm, height(rng) * kUm};
        const double phi = potential(layout, p, PotentialKind::dc);
        const double oracle = panel_potential(layout, p, PotentialKind::dc);
        CHECK(std::abs(phi - oracle) < 1e-3 * std::max(std::abs(oracle), 0.01));
    }
}

TEST_CASE("field matches analytic rectangle derivatives to 1e-6 relative") {
    ElectrodeLayout layout;
    struct RectSpec {
        PlanarRect rect;
        double volts;
    };
    const RectSpec specs[] = {
        {{-30 * kUm, 10 * kUm, 44 * kUm, 28 * kUm}, 4.0},
        {{25 * kUm, -35 * kUm, 60 * kUm, 26 * kUm}, -3.0},
        {{15 * kUm, 42 * kUm, 34 * kUm, 52 * kUm}, 6.5},
    };
    for (const auto& s : specs)
        layout.electrodes.push_back(rect_electrode(
            s.rect.center_x / kUm, s.rect.center_y / kUm, s.rect.width / kUm,
            s.rect.height / kUm, s.volts));

    std::mt19937_64 rng(902);
    std::uniform_real_distribution<double> lat(-70.0, 70.0);
    std::uniform_real_distribution<double> height(8.0, 90.0);
    for (int i = 0; i < 15; ++i) {
        const Point3 p{lat(rng) * kUm, lat(rng) * kUm, height(rng) * kUm};
        const auto e = efield(layout, p, PotentialKind::dc);
        std::array<double, 3> exact{};
        for (const auto& s : specs) {
            const auto part = rect_electrode_field(s.rect, s.volts, p);
            for (int k = 0; k < 3; ++k) exact[k] += part[k];
        }
        double diff2 = 0.0;
        double norm2 = 0.0;
        for (int k = 0; k < 3; ++k) {
            diff2 += (e[k] - exact[k]) * (e[k] - exact[k]);
            norm2 += exact[k] * exact[k];
        }
        CHECK(std::sqrt(diff2) < 1e-6 * std::sqrt(norm2));
    }
}

TEST_CASE("finite-difference Laplacian shrinks fourfold when the step halves") {
    const ElectrodeLayout layout = mixed_layout();
    std::mt19937_64 rng(517);
    std::uniform_real_distribution<double> lat(-60.0, 60.0);
    std::uniform_real_distribution<double> height(25.0, 90.0);
    std::vector<double> ratios;
    for (int i = 0; i < 12; ++i) {
        const Point3 p{lat(rng) * kUm, lat(rng) * kUm, height(rng) * kUm};
        auto laplacian = [&](double h) {
            const double f0 = potential(layout, p, PotentialKind::dc);
            double sum = -6.0 * f0;
            for (int axis = 0; axis < 3; ++axis) {
                Point3 a = p;
                Point3 b = p;
                (axis == 0 ? a.x : axis == 1 ? a.y : a.z) += h;
                (axis == 0 ? b.x : axis == 1 ? b.y : b.z) -= h;
                sum += potential(layout, a, PotentialKind::dc) +
                       potential(layout, b, PotentialKind::dc);
            }
            return sum / (h * h);
        };
        const double h = 0.05 * p.z;
        const double coarse = laplacian(h);
        const double fine = laplacian(h / 2.0);
        if (std::abs(fine) > 0.0) ratios.push_back(std::abs(coarse / fine));
    }
    REQUIRE(ratios.size() >= 10);
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios[ratios.size() / 2];
    CHECK(median > 3.5);
    CHECK(median < 4.5);
}

TEST_CASE("two-electrode potential is the sum of the single-electrode potentials") {
    ElectrodeLayout both = mixed_layout();
    both.electrodes.resize(2);
    ElectrodeLayout first;
    first.electrodes = {both.electrodes[0]};
    ElectrodeLayout second;
    second.electrodes = {both.electrodes[1]};
    const Point3 pts[] = {{0, 0, 30 * kUm}, {-20 * kUm, 10 * kUm, 55 * kUm},
                          {40 * kUm, -40 * kUm, 18 * kUm}};
    for (const auto& p : pts) {
        const double sum = potential(first, p, PotentialKind::dc) +
                           potential(second, p, PotentialKind::dc);
        const double joint = potential(both, p, PotentialKind::dc);
        CHECK(joint == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("a hole subtracts exactly the potential of the matching patch") {
    ElectrodeLayout with_hole;
    Electrode e = rect_electrode(0, 0, 90, 70, 4.0);
    e.holes = {rect_polygon(10 * kUm, -5 * kUm, 30 * kUm, 22 * kUm)};
    with_hole.electrodes.push_back(e);

    ElectrodeLayout full;
    full.electrodes.push_back(rect_electrode(0, 0, 90, 70, 4.0));
    ElectrodeLayout patch;
    patch.electrodes.push_back(rect_electrode(10, -5, 30, 22, 4.0));

    const Point3 pts[] = {{0, 0, 25 * kUm}, {12 * kUm, -4 * kUm, 40 * kUm},
                          {-30 * kUm, 20 * kUm, 60 * kUm}};
    for (const auto& p : pts) {
        const double direct = potential(with_hole, p, PotentialKind::dc);
        const double subtracted = potential(full, p, PotentialKind::dc) -
                                  potential(patch, p, PotentialKind::dc);
        CHECK(direct == doctest::Approx(subtracted).epsilon(1e-12));
    }
}

TEST_CASE("ring built from abutting rectangles matches the C-shaped outlines") {
    const auto fix = ring_trap_fixture();

    constexpr double ax = 40e-6;
    constexpr double ay = 50e-6;
    constexpr double w = 45e-6;
    constexpr double g = 4e-6;
    constexpr double bx = ax + w;
    constexpr double by = ay + w;
    Electrode rects;
    rects.rf_amplitude = 1.0;
    auto span = [](double x1, double x2, double y1, double y2) {
        return PlanarPolygon{{{x1, y1}, {x2, y1}, {x2, y2}, {x1, y2}}};
    };
    rects.outlines = {span(-bx, -ax, -by, by),        span(ax, bx, -by, by),
                      span(-ax, -g / 2, ay, by),      span(g / 2, ax, ay, by),
                      span(-ax, -g / 2, -by, -ay),    span(g / 2, ax, -by, -ay)};
    ElectrodeLayout decomposed;
    decomposed.electrodes.push_back(rects);

    const Point3 pts[] = {{0, 0, 48 * kUm}, {30 * kUm, 20 * kUm, 35 * kUm},
                          {-60 * kUm, -70 * kUm, 80 * kUm}};
    for (const auto& p : pts) {
        const double a = potential(fix.layout, p, PotentialKind::rf);
        const double b = potential(decomposed, p, PotentialKind::rf);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("pseudopotential follows the closed formula and its scalings") {
    const auto fix = ring_trap_fixture();
    const Point3 p{5 * kUm, -3 * kUm, 40 * kUm};

    const double q = fix.ion.charge;
    const double m = fix.ion.mass;
    const double w = fix.drive.omega_rf;

    SUBCASE("wiring against the per-volt field pattern") {
        const auto e = efield(fix.layout, p, PotentialKind::rf);
        const double e2 = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
        const double expected =
            (q * fix.drive.v_pk) * (q * fix.drive.v_pk) * e2 / (4.0 * m * w * w);
        CHECK(pseudopotential(fix.layout, fix.drive, fix.ion, p) ==
              doctest::Approx(expected).epsilon(1e-14));
        CHECK(pseudopotential_ev(fix.layout, fix.drive, fix.ion, p) ==
              doctest::Approx(expected / constants::joules_per_ev).epsilon(1e-14));
    }

    SUBCASE("a 1.9e4 V/m rf field holds a 9Be+ ion at about 11.5 meV") {
        // Independently computed with 30-digit arithmetic.
        const double e_mag = 1.9e4;
        const double ev = q * e_mag * e_mag / (4.0 * m * w * w);
        CHECK(ev == doctest::Approx(0.011451726745226285).epsilon(1e-12));
        CHECK(ev > 0.011);
        CHECK(ev < 0.0125);
    }

    SUBCASE("doubling v_pk quadruples the pseudopotential pointwise") {
        RfDrive doubled = fix.drive;
        doubled.v_pk *= 2.0;
        const double base = pseudopotential(fix.layout, fix.drive, fix.ion, p);
        CHECK(pseudopotential(fix.layout, doubled, fix.ion, p) == 4.0 * base);
    }

    SUBCASE("zero rf amplitude gives exactly zero") {
        ElectrodeLayout layout;
        layout.electrodes.push_back(rect_electrode(0, 0, 60, 60, 5.0, 0.0));
        CHECK(pseudopotential(layout, fix.drive, fix.ion, p) == 0.0);
    }
}

TEST_CASE("ring trap: height, frequencies, depth and saddle match the reference run") {
    // Reference values from an independent implementation of the same
    // physics (root-finding on the axial field for the height, separate
    // eigen-decomposition for the frequencies, 1-D golden-section search
    // for the vertical saddle).
    const auto fix = ring_trap_fixture();
    const TrapSolution sol = find_trap(fix.layout, fix.drive, fix.ion, {0, 0, 0});

    CHECK(std::abs(sol.minimum_position.x) < 1e-9);
    CHECK(std::abs(sol.minimum_position.y) < 1e-9);
    CHECK(sol.ion_height == sol.minimum_position.z);
    CHECK(sol.ion_height == doctest::Approx(48.763863 * kUm).epsilon(1e-4));

    CHECK(sol.secular_frequencies[0] == doctest::Approx(4.980644e6).epsilon(1e-3));
    CHECK(sol.secular_frequencies[1] == doctest::Approx(8.228744e6).epsilon(1e-3));
    CHECK(sol.secular_frequencies[2] == doctest::Approx(13.209400e6).epsilon(1e-3));
    CHECK(sol.secular_frequencies[0] <= sol.secular_frequencies[1]);
    CHECK(sol.secular_frequencies[1] <= sol.secular_frequencies[2]);

    CHECK(sol.well_depth == doctest::Approx(62.037882e-3).epsilon(5e-3));
    CHECK(std::abs(sol.escape_position.x) < 1 * kUm);
    CHECK(std::abs(sol.escape_position.y) < 1 * kUm);
    CHECK(sol.escape_position.z == doctest::Approx(86.962185 * kUm).epsilon(1e-2));
}

TEST_CASE("trap solution scales exactly with drive amplitude and frequency") {
    const auto fix = ring_trap_fixture();
    const TrapSolution base = find_trap(fix.layout, fix.drive, fix.ion, {0, 0, 0});

    SUBCASE("doubling v_pk: same position, 2x frequencies, 4x depth") {
        RfDrive drive = fix.drive;
        drive.v_pk *= 2.0;
        const TrapSolution scaled = find_trap(fix.layout, drive, fix.ion, {0, 0, 0});
        CHECK(std::abs(scaled.minimum_position.z - base.minimum_position.z) < 1e-9);
        for (int i = 0; i < 3; ++i)
            CHECK(scaled.secular_frequencies[i] ==
                  doctest::Approx(2.0 * base.secular_frequencies[i]).epsilon(1e-12));
        CHECK(scaled.well_depth == doctest::Approx(4.0 * base.well_depth).epsilon(1e-12));
    }

    SUBCASE("doubling omega_rf: same position, frequencies and depth both shrink") {
        RfDrive drive = fix.drive;
        drive.omega_rf *= 2.0;
        const TrapSolution scaled = find_trap(fix.layout, drive, fix.ion, {0, 0, 0});
        CHECK(std::abs(scaled.minimum_position.z - base.minimum_position.z) < 1e-9);
        for (int i = 0; i < 3; ++i)
            CHECK(scaled.secular_frequencies[i] ==
                  doctest::Approx(0.5 * base.secular_frequencies[i]).epsilon(1e-12));
        // The pseudopotential is proportional to 1/omega^2, so the depth
        // falls by 4 when the drive frequency doubles.
        CHECK(scaled.well_depth == doctest::Approx(0.25 * base.well_depth).epsilon(1e-12));
    }

    SUBCASE("doubling charge and quadrupling mass leaves the pseudopotential fixed") {
        IonSpecies ion = fix.ion;
        ion.charge *= 2.0;
        ion.mass *= 4.0;
        const TrapSolution scaled = find_trap(fix.layout, fix.drive, ion, {0, 0, 0});
        CHECK(std::abs(scaled.minimum_position.z - base.minimum_position.z) < 1e-9);
        CHECK(scaled.well_depth == doctest::Approx(base.well_depth).epsilon(1e-12));
        // f = sqrt(lambda/m)/2pi with lambda unchanged and m quadrupled.
        for (int i = 0; i < 3; ++i)
            CHECK(scaled.secular_frequencies[i] ==
                  doctest::Approx(0.5 * base.secular_frequencies[i]).epsilon(1e-12));
    }

    SUBCASE("swapping the species moves nothing and rescales as q/m") {
        IonSpecies ca;
        ca.mass = 39.9625909 * constants::atomic_mass_unit;
        ca.charge = constants::elementary_charge;
        const TrapSolution scaled = find_trap(fix.layout, fix.drive, ca, {0, 0, 0});
        CHECK(std::abs(scaled.minimum_position.x - base.minimum_position.x) < 1e-9);
        CHECK(std::abs(scaled.minimum_position.y - base.minimum_position.y) < 1e-9);
        CHECK(std::abs(scaled.minimum_position.z - base.minimum_position.z) < 1e-9);
        for (int i = 0; i < 3; ++i) {
            const double invariant_base = base.secular_frequencies[i] * fix.ion.mass;
            const double invariant_ca = scaled.secular_frequencies[i] * ca.mass;
            CHECK(invariant_ca == doctest::Approx(invariant_base).epsilon(1e-6));
        }
        CHECK(scaled.well_depth * ca.mass ==
              doctest::Approx(base.well_depth * fix.ion.mass).epsilon(1e-6));
    }
}

TEST_CASE("single solid rf pad has no vertical pseudopotential minimum") {
    ElectrodeLayout layout;
    layout.electrodes.push_back(rect_electrode(0, 0, 100, 100, 0.0, 1.0));
    const auto fix = ring_trap_fixture();
    CHECK_THROWS_AS(find_trap(layout, fix.drive, fix.ion, {0, 0, 0}), solver_error);
}

TEST_CASE("an electrode island inside another electrode's hole is accepted") {
    ElectrodeLayout layout;
    Electrode outer = rect_electrode(0, 0, 100, 100, 7.0);
    outer.holes = {rect_polygon(0, 0, 40 * kUm, 40 * kUm)};
    layout.electrodes.push_back(outer);
    layout.electrodes.push_back(rect_electrode(0, 0, 20, 20, 2.0));

    CHECK(potential(layout, {0, 0, 1e-9}, PotentialKind::dc) ==
          doctest::Approx(2.0).epsilon(1e-3));
    CHECK(potential(layout, {40 * kUm, 0, 1e-9}, PotentialKind::dc) ==
          doctest::Approx(7.0).epsilon(1e-3));
    // Above the grounded gap between island and hole edge.
    CHECK(std::abs(potential(layout, {15 * kUm, 0, 1e-9}, PotentialKind::dc)) < 0.02);
}

TEST_CASE("layout and argument validation") {
    const auto fix = ring_trap_fixture();

    SUBCASE("field point must lie above the plane") {
        CHECK_THROWS_AS(potential(fix.layout, {0, 0, 0}, PotentialKind::rf),
                        validation_error);
        CHECK_THROWS_AS(potential(fix.layout, {0, 0, -1 * kUm}, PotentialKind::rf),
                        validation_error);
        CHECK_THROWS_AS(efield(fix.layout, {0, 0, -1 * kUm}, PotentialKind::rf),
                        validation_error);
    }

    SUBCASE("field point too close for the difference stencil") {
        CHECK_THROWS_AS(efield(fix.layout, {0, 0, 5e-10}, PotentialKind::rf),
                        validation_error);
    }

    SUBCASE("empty layouts and electrodes without outlines are rejected") {
        CHECK_THROWS_AS(potential(ElectrodeLayout{}, {0, 0, 1 * kUm}, PotentialKind::dc),
                        validation_error);
        ElectrodeLayout layout;
        layout.electrodes.push_back(Electrode{});
        CHECK_THROWS_AS(potential(layout, {0, 0, 1 * kUm}, PotentialKind::dc),
                        validation_error);
    }

    SUBCASE("overlapping electrodes are rejected") {
        ElectrodeLayout layout;
        layout.electrodes.push_back(rect_electrode(0, 0, 50, 50, 1.0));
        layout.electrodes.push_back(rect_electrode(20, 0, 50, 50, 2.0));
        CHECK_THROWS_AS(potential(layout, {0, 0, 1 * kUm}, PotentialKind::dc),
                        validation_error);
    }

    SUBCASE("abutting electrodes are fine") {
        ElectrodeLayout layout;
        layout.electrodes.push_back(rect_electrode(-25, 0, 50, 50, 1.0));
        layout.electrodes.push_back(rect_electrode(25, 0, 50, 50, 2.0));
        CHECK_NOTHROW(potential(layout, {0, 0, 1 * kUm}, PotentialKind::dc));
    }

    SUBCASE("an electrode fully inside another is rejected") {
        ElectrodeLayout layout;
        layout.electrodes.push_back(rect_electrode(0, 0, 80, 80, 1.0));
        layout.electrodes.push_back(rect_electrode(5, 5, 20, 20, 2.0));
        CHECK_THROWS_AS(potential(layout, {0, 0, 1 * kUm}, PotentialKind::dc),
                        validation_error);
    }

    SUBCASE("hole outside its outline is rejected") {
        ElectrodeLayout layout;
        Electrode e = rect_electrode(0, 0, 40, 40, 1.0);
        e.holes = {rect_polygon(50 * kUm, 0, 10 * kUm, 10 * kUm)};
        layout.electrodes.push_back(e);
        CHECK_THROWS_AS(potential(layout, {0, 0, 1 * kUm}, PotentialKind::dc),
                        validation_error);
    }

    SUBCASE("hole crossing the outline boundary is rejected") {
        ElectrodeLayout layout;
        Electrode e = rect_electrode(0, 0, 40, 40, 1.0);
        e.holes = {rect_polygon(18 * kUm, 0, 12 * kUm, 12 * kUm)};
        layout.electrodes.push_back(e);
        CHECK_THROWS_AS(potential(layout, {0, 0, 1 * kUm}, PotentialKind::dc),
                        validation_error);
    }

    SUBCASE("drive and species parameters must be positive") {
        RfDrive bad_drive{0.0, 1e8};
        CHECK_THROWS_AS(pseudopotential(fix.layout, bad_drive, fix.ion, {0, 0, 40 * kUm}),
                        validation_error);
        RfDrive bad_freq{25.0, 0.0};
        CHECK_THROWS_AS(pseudopotential(fix.layout, bad_freq, fix.ion, {0, 0, 40 * kUm}),
                        validation_error);
        IonSpecies bad_mass{0.0, 1e-19};
        CHECK_THROWS_AS(pseudopotential(fix.layout, fix.drive, bad_mass, {0, 0, 40 * kUm}),
                        validation_error);
        IonSpecies bad_charge{1e-26, -1e-19};
        CHECK_THROWS_AS(pseudopotential(fix.layout, fix.drive, bad_charge, {0, 0, 40 * kUm}),
                        validation_error);
    }
}

}  // TEST_SUITE
