#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "trapdet/circuit.hpp"
#include "trapdet/errors.hpp"

namespace trapdet::detector {

// Detection efficiency versus bias current for a superconducting
// nanowire: either a scaled normal CDF (smooth sigmoid saturating at a
// plateau, the shape of the measured dc characteristic) or a table of
// digitized (bias, efficiency) samples joined by a monotone cubic
// (Fritsch-Butland) interpolant. Either way the curve is non-decreasing,
// bounded by [0, 1], and defined only below the switching current: at or
// above it the wire latches normal and produces no counts. Below zero
// bias and outside a table the curve extends naturally (the sigmoid
// tail, or the end sample values held constant).
class SdeCurve {
  public:
    // sigma = 0 degenerates to a step at i_mid whose midpoint value is
    // e_max / 2.
    static SdeCurve parametric(double e_max, double i_mid, double sigma, double i_sw);
    // samples are (bias, efficiency) pairs with strictly increasing bias
    // and non-decreasing efficiency, all at or below i_sw.
    static SdeCurve tabulated(std::vector<std::pair<double, double>> samples,
                              double i_sw);

    double switching_current() const { return i_sw_; }
    double plateau_efficiency() const;  // the curve's saturation value

    // Curve value at any bias below the switching current, including the
    // natural extension below zero (used when an rf swing dips negative).
    double extended_value(double bias) const;

  private:
    SdeCurve() = default;

    bool parametric_ = true;
    double e_max_ = 0.0;
    double i_mid_ = 0.0;
    double sigma_ = 0.0;
    double i_sw_ = 0.0;
    std::vector<double> bias_;        // tabulated form
    std::vector<double> efficiency_;
    std::vector<double> slope_;       // interpolant derivative per node
};

// Efficiency at a dc bias; empty when the bias is at or above the
// switching current (latched, so the efficiency is not a number).
std::optional<double> sde_dc(const SdeCurve& curve, double bias);

// Background count rate B(I) = b0 * exp(I / i_scale): a single
// exponential in bias, matching the measured log-scale rise; the
// low-bias floor is absorbed into b0.
struct BcrModel {
    double b0 = 0.0;       // counts/s
    double i_scale = 0.0;  // amperes
};

// Bias current I_k(t) = i_dc + amplitude[k] * sin(omega t + phase[k])
// per meander segment; a single entry describes a uniform rf modulation.
// The phases never affect full-cycle averages but keep the segment
// description faithful to where it came from.
struct RfBias {
    double i_dc = 0.0;   // amperes
    double omega = 0.0;  // rad/s
    std::vector<double> amplitude;  // amperes, one entry per segment
    std::vector<double> phase;      // radians, same length

    static RfBias uniform(double i_dc, double i_rf, double omega);
    static RfBias segmented(double i_dc, std::vector<double> amplitudes,
                            std::vector<double> phases, double omega);
};

// Plumbing from the circuit model: segment amplitudes and phases taken
// from the induced currents of the meander coupling solve.
RfBias bias_from_induced_currents(double i_dc,
                                  const circuit::InducedCurrentProfile& profile,
                                  double omega);

// Cycle-averaged efficiency under rf modulation. e_hi / e_lo are the
// instantaneous extremes over the cycle (from the curve's monotonicity).
// If any instantaneous current reaches the switching current the device
// latches for good: effective, e_hi and e_lo all report zero with the
// flag set.
struct EffectiveSdeResult {
    double effective = 0.0;
    double e_hi = 0.0;
    double e_lo = 0.0;
    bool latched = false;
};

// Equal-weight average over one rf period on a uniform grid of `samples`
// midpoints (spectrally accurate for the periodic integrand, and
// symmetric drives see symmetric sample pairs). Requires a uniform
// (single-segment) profile and samples >= 16. A zero amplitude returns
// the dc value exactly.
EffectiveSdeResult effective_sde(const SdeCurve& curve, const RfBias& bias,
                                 int samples = 256);

// Gradient extension: photons assumed uniformly distributed along the
// meander, so the result is the mean over segments of each segment's
// cycle average at its local amplitude. Latched if any segment latches.
EffectiveSdeResult effective_sde_gradient(const SdeCurve& curve, const RfBias& bias,
                                          int samples = 256);

// Cycle-averaged background rate under the same modulation, with dark
// counts taken as uniformly distributed along the wire (mean over
// segments, mirroring the photon assumption). The model itself carries
// no switching current, so pass one to enable the latch check; a latched
// device counts nothing.
struct EffectiveBcrResult {
    double rate = 0.0;  // counts/s
    bool latched = false;
};

EffectiveBcrResult effective_bcr(
    const BcrModel& model, const RfBias& bias, int samples = 256,
    double i_sw = std::numeric_limits<double>::infinity());

// Largest dc bias that keeps every segment below the switching current
// for the whole cycle: i_sw minus the largest rf amplitude. A negative
// value means the rf swing alone latches the wire at any dc bias.
struct ObservedSwitchingCurrent {
    double current = 0.0;  // amperes
    bool always_latched = false;
};

ObservedSwitchingCurrent observed_switching_current(double i_sw, const RfBias& bias);

// Wire geometry for kinetic inductance bookkeeping. critical_temperature
// is carried as metadata only.
struct NanowireGeometry {
    double width = 0.0;              // m
    double length = 0.0;             // m
    double sheet_inductance = 0.0;   // H/square
    double critical_temperature = 0.0;  // K, informational
};

// L = sheet inductance times the number of squares (length / width).
double kinetic_inductance(const NanowireGeometry& geometry);

// Output pulse decay time tau = L / Z_load and the count rate ceiling
// 1 / (recovery_factor * tau); after recovery_factor time constants the
// bias current has substantially recovered (~95% at the default 3).
// Zero inductance is degenerate: tau = 0, unbounded rate, flag set.
struct PulseTimescales {
    double time_constant = 0.0;   // s
    double max_count_rate = 0.0;  // counts/s
    bool degenerate = false;
};

PulseTimescales pulse_time_constant(double inductance, double load_impedance,
                                    double recovery_factor = 3.0);

// Photon counting during one readout window: a bright ion fluoresces at
// bright_rate (before detection efficiency), stray light and background
// counts arrive regardless of the ion state.
struct CountingScenario {
    double bright_rate = 0.0;  // photons/s reaching the detector
    double stray_rate = 0.0;   // counts/s
    BcrModel background;
    RfBias bias;
    double integration_time = 0.0;  // s
};

// Threshold discrimination between Poisson count distributions: declare
// bright when n > threshold. threshold minimizes the equal-prior mean
// error (ties broken toward the smaller threshold); fidelity is one
// minus that error. inverted flags a dark mean above the bright mean,
// where the discriminator is flipped (fidelity <= 0.5).
struct FidelityResult {
    int threshold = 0;
    double error_bright = 0.0;  // P(n <= threshold | bright)
    double error_dark = 0.0;    // P(n > threshold | dark)
    double fidelity = 0.0;
    bool inverted = false;
};

FidelityResult poisson_readout_fidelity(double lambda_bright, double lambda_dark);

// Builds the bright/dark means from the scenario: the dark state counts
// stray light plus cycle-averaged background, the bright state adds the
// fluorescence times the effective efficiency. A latched result zeroes
// both (a dead detector cannot distinguish anything).
FidelityResult readout_fidelity(const CountingScenario& scenario,
                                const EffectiveSdeResult& sde);

}  // namespace trapdet::detector
