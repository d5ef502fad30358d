#pragma once

#include <vector>

#include "trapdet/optics.hpp"

namespace trapdet::testing {

struct StackResponse {
    double reflectance = 0.0;
    double transmittance = 0.0;
    std::vector<double> absorption_per_layer;
    double amplitude_leak = 0.0;  // residual upgoing substrate amplitude, ~0
};

// Independent reference for tmm_solve: reflection from the Parratt
// impedance recursion, per-layer wave amplitudes reconstructed with
// interface Fresnel coefficients, and absorption from the closed-form
// volume integral of Im(eps) |E|^2 instead of boundary flux differences.
StackResponse layered_absorption_oracle(const optics::LayerStack& stack,
                                        const optics::PlaneWave& wave);

// Spacer thickness that parks the center of a thin absorber on the first
// standing-wave antinode above a perfect mirror: the optical path from
// the mirror to the absorber center is a quarter wavelength.
double mirror_antinode_spacer(double wavelength, double spacer_index,
                              double absorber_thickness, double absorber_index);

}  // namespace trapdet::testing
