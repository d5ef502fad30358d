#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "trapdet/errors.hpp"

namespace trapdet::optics {

enum class Polarization { te, tm };

// One (wavelength, n, k) sample of a tabulated refractive index.
struct IndexSample {
    double wavelength = 0.0;  // meters
    double n = 0.0;
    double k = 0.0;
};

// Complex refractive index n + ik, either wavelength-independent or
// linearly interpolated between tabulated samples. Only passive media
// are allowed (k >= 0).
class OpticalMaterial {
public:
    // Vacuum (n = 1) so stacks and gratings can be built field by field.
    OpticalMaterial() : samples_{{0.0, 1.0, 0.0}} {}

    static OpticalMaterial constant(double n, double k = 0.0);

    // samples must be sorted by strictly increasing wavelength, at least
    // two of them; queries outside the tabulated range are rejected.
    static OpticalMaterial table(std::vector<IndexSample> samples);

    std::complex<double> index_at(double wavelength) const;
    std::complex<double> permittivity_at(double wavelength) const;

private:
    std::vector<IndexSample> samples_;  // one entry for a constant material
    bool constant_ = true;
};

struct Layer {
    OpticalMaterial material;
    double thickness = 0.0;  // meters, > 0
};

// Planar stack illuminated from the ambient side; the substrate is
// semi-infinite and may absorb. The ambient must be lossless at the
// wavelengths being solved so the incident flux is well defined.
struct LayerStack {
    OpticalMaterial ambient;
    std::vector<Layer> layers;
    OpticalMaterial substrate;
};

// Lamellar 1D grating occupying one layer of the stack: wires of width
// fill_factor * period alternate with gaps, both spanning the host
// layer's full thickness. The host layer's own material is ignored
// while the grating is active.
struct Grating1D {
    double period = 0.0;        // meters
    double fill_factor = 0.0;   // wire width / period, in [0, 1]
    OpticalMaterial wire;
    OpticalMaterial gap;
    std::size_t host_layer = 0;  // index into LayerStack::layers
};

struct PlaneWave {
    double wavelength = 0.0;       // meters
    double incidence_angle = 0.0;  // radians, in [0, pi/2)
    Polarization polarization = Polarization::te;
};

// Power bookkeeping for one solve, each entry normalized to the
// incident flux. transmittance is the flux crossing into the substrate,
// so reflectance + transmittance + sum(absorption_per_layer) = 1 up to
// solver accuracy. wire/gap splits exist only for grating solves and
// their sum equals the grating layer's absorption_per_layer entry.
struct AbsorptionResult {
    double reflectance = 0.0;
    double transmittance = 0.0;
    std::vector<double> absorption_per_layer;
    double wire_absorption = 0.0;
    double gap_absorption = 0.0;
};

// Plane-wave response of a homogeneous stack by characteristic-matrix
// propagation; per-layer absorption is the difference of the normal
// Poynting flux across each layer's boundaries.
AbsorptionResult tmm_solve(const LayerStack& stack, const PlaneWave& wave);

// Fourier modal solution for a stack containing one lamellar grating
// layer. harmonics is the total number of retained diffraction orders
// and must be odd; TE couples through the direct permittivity Fourier
// factorization and TM through the inverse rule. Layers are combined
// with scattering matrices, so thick absorbing layers cannot overflow.
// Wire and gap absorption come from the modal fields' overlap with each
// region, integrated in closed form over the layer thickness.
AbsorptionResult rcwa_solve(const LayerStack& stack, const Grating1D& grating,
                            const PlaneWave& wave, int harmonics = 51);

struct SpacerSample {
    double thickness = 0.0;
    double reflectance = 0.0;
    double transmittance = 0.0;
    double objective_absorption = 0.0;
};

struct SpacerScan {
    double best_thickness = 0.0;
    double best_absorption = 0.0;
    std::vector<SpacerSample> curve;
};

// Exhaustive scan of layers[spacer_layer]'s thickness over
// [thickness_lo, thickness_hi] at the given step (the last sample is
// thickness_hi when the range is not an exact multiple of step). The
// objective is the wire absorption when a grating is given, otherwise
// the absorption of layers[objective_layer]. Ties keep the thinner
// spacer.
SpacerScan optimize_spacer(const LayerStack& stack,
                           const std::optional<Grating1D>& grating,
                           const PlaneWave& wave, std::size_t spacer_layer,
                           std::size_t objective_layer, double thickness_lo,
                           double thickness_hi, double step, int harmonics = 51);

struct RejectionResult {
    double ratio = 0.0;   // uv absorption / ir absorption
    bool infinite = false;  // set when the ir absorption is exactly zero
};

// Ratio of the objective absorption (wire absorption with a grating,
// layers[objective_layer] otherwise) at the uv wave to the ir wave.
RejectionResult rejection_ratio(const LayerStack& stack,
                                const std::optional<Grating1D>& grating,
                                const PlaneWave& uv, const PlaneWave& ir,
                                std::size_t objective_layer = 0,
                                int harmonics = 51);

}  // namespace trapdet::optics
