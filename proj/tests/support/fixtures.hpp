#pragma once

#include <numbers>

#include "trapdet/constants.hpp"
#include "trapdet/trapfields.hpp"

namespace trapdet::testing {

struct RingTrapFixture {
    trapfields::ElectrodeLayout layout;
    trapfields::RfDrive drive;
    trapfields::IonSpecies ion;
};

// Rectangular rf ring sized so a 9Be+ ion at 25 V, 46.23 MHz traps near
// 48.8 um above the surface: 80 x 100 um inner opening, 45 um wide rail,
// and two 4 um slots where the readout leads cross the rail. The ring is
// built from two C-shaped outlines meeting at the slots.
inline RingTrapFixture ring_trap_fixture() {
    using geometry::PlanarPolygon;
    constexpr double ax = 40e-6;  // inner half-width along x
    constexpr double ay = 50e-6;  // inner half-height along y
    constexpr double w = 45e-6;   // rail width
    constexpr double g = 4e-6;    // lead slot width, centred on x = 0
    constexpr double bx = ax + w;
    constexpr double by = ay + w;

    PlanarPolygon left{{{-bx, -by},
                        {-g / 2, -by},
                        {-g / 2, -ay},
                        {-ax, -ay},
                        {-ax, ay},
                        {-g / 2, ay},
                        {-g / 2, by},
                        {-bx, by}}};
    PlanarPolygon right{{{bx, -by},
                         {bx, by},
                         {g / 2, by},
                         {g / 2, ay},
                         {ax, ay},
                         {ax, -ay},
                         {g / 2, -ay},
                         {g / 2, -by}}};

    RingTrapFixture f;
    trapfields::Electrode ring;
    ring.outlines = {left, right};
    ring.rf_amplitude = 1.0;
    f.layout.electrodes.push_back(ring);
    f.drive = {25.0, 2.0 * std::numbers::pi * 46.23e6};
    f.ion = {9.0121831 * constants::atomic_mass_unit, constants::elementary_charge};
    return f;
}

}  // namespace trapdet::testing
