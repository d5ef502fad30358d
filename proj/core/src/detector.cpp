#include "trapdet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace trapdet::detector {

namespace {

constexpr double kPi = 3.14159265358979323846;

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw validation_error(std::string(what) + " must be finite");
}

void check_positive(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0) {
        throw validation_error(std::string(what) + " must be positive and finite");
    }
}

void check_non_negative(double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0) {
        throw validation_error(std::string(what) + " must be non-negative and finite");
    }
}

void check_bias(const RfBias& bias) {
    check_non_negative(bias.i_dc, "dc bias");
    check_positive(bias.omega, "rf frequency");
    if (bias.amplitude.empty()) {
        throw validation_error("rf profile needs at least one segment");
    }
    if (bias.amplitude.size() != bias.phase.size()) {
        throw validation_error("rf profile amplitudes and phases must pair up");
    }
    for (double a : bias.amplitude) check_non_negative(a, "rf amplitude");
    for (double p : bias.phase) check_finite(p, "rf phase");
}

void check_bcr(const BcrModel& model) {
    check_non_negative(model.b0, "background rate scale");
    check_positive(model.i_scale, "background current scale");
}

void check_samples(int samples) {
    if (samples < 16) {
        throw validation_error("cycle average needs at least 16 samples");
    }
}

// Equal-weight average of f(i_dc + amplitude * sin(theta + phase)) over
// one period, sampled at interval midpoints so symmetric swings land on
// symmetric sample pairs.
template <typename Fn>
double cycle_average(Fn&& f, double i_dc, double amplitude, double phase,
                     int samples) {
    if (amplitude == 0.0) return f(i_dc);
    double sum = 0.0;
    for (int j = 0; j < samples; ++j) {
        const double theta = 2.0 * kPi * (j + 0.5) / samples + phase;
        sum += f(i_dc + amplitude * std::sin(theta));
    }
    return sum / samples;
}

// Fritsch-Butland end slope: one-sided three-point estimate clamped so
// the interpolant cannot overshoot near the boundary.
double edge_slope(double h0, double h1, double m0, double m1) {
    double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (sign_of(d) != sign_of(m0)) {
        d = 0.0;
    } else if (sign_of(m0) != sign_of(m1) && std::abs(d) > 3.0 * std::abs(m0)) {
        d = 3.0 * m0;
    }
    return d;
}

}  // namespace

SdeCurve SdeCurve::parametric(double e_max, double i_mid, double sigma, double i_sw) {
    if (!std::isfinite(e_max) || e_max < 0.0 || e_max > 1.0) {
        throw validation_error("plateau efficiency must lie in [0, 1]");
    }
    check_finite(i_mid, "curve midpoint");
    check_non_negative(sigma, "curve width");
    check_positive(i_sw, "switching current");
    SdeCurve curve;
    curve.parametric_ = true;
    curve.e_max_ = e_max;
    curve.i_mid_ = i_mid;
    curve.sigma_ = sigma;
    curve.i_sw_ = i_sw;
    return curve;
}

SdeCurve SdeCurve::tabulated(std::vector<std::pair<double, double>> samples,
                             double i_sw) {
    check_positive(i_sw, "switching current");
    if (samples.size() < 2) {
        throw validation_error("an efficiency table needs at least two samples");
    }
    SdeCurve curve;
    curve.parametric_ = false;
    curve.i_sw_ = i_sw;
    curve.bias_.reserve(samples.size());
    curve.efficiency_.reserve(samples.size());
    for (const auto& [bias, efficiency] : samples) {
        check_non_negative(bias, "table bias");
        if (bias > i_sw) {
            throw validation_error("table bias values must not exceed the switching current");
        }
        if (!std::isfinite(efficiency) || efficiency < 0.0 || efficiency > 1.0) {
            throw validation_error("table efficiencies must lie in [0, 1]");
        }
        if (!curve.bias_.empty()) {
            if (bias <= curve.bias_.back()) {
                throw validation_error("table bias values must be strictly increasing");
            }
            if (efficiency < curve.efficiency_.back()) {
                throw validation_error("table efficiencies must be non-decreasing");
            }
        }
        curve.bias_.push_back(bias);
        curve.efficiency_.push_back(efficiency);
    }

    // Monotone cubic slopes (Fritsch-Butland): a weighted harmonic mean
    // of adjacent secants, zero wherever the data is locally flat or
    // turns, which keeps the interpolant monotone between samples.
    const std::size_t n = curve.bias_.size();
    std::vector<double> h(n - 1);
    std::vector<double> secant(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = curve.bias_[k + 1] - curve.bias_[k];
        secant[k] = (curve.efficiency_[k + 1] - curve.efficiency_[k]) / h[k];
    }
    curve.slope_.assign(n, 0.0);
    if (n == 2) {
        curve.slope_[0] = secant[0];
        curve.slope_[1] = secant[0];
    } else {
        for (std::size_t k = 1; k + 1 < n; ++k) {
            if (secant[k - 1] * secant[k] <= 0.0) {
                curve.slope_[k] = 0.0;
            } else {
                const double w1 = 2.0 * h[k] + h[k - 1];
                const double w2 = h[k] + 2.0 * h[k - 1];
                curve.slope_[k] = (w1 + w2) / (w1 / secant[k - 1] + w2 / secant[k]);
            }
        }
        curve.slope_[0] = edge_slope(h[0], h[1], secant[0], secant[1]);
        curve.slope_[n - 1] =
            edge_slope(h[n - 2], h[n - 3], secant[n - 2], secant[n - 3]);
    }
    return curve;
}

double SdeCurve::plateau_efficiency() const {
    return parametric_ ? e_max_ : efficiency_.back();
}

double SdeCurve::extended_value(double bias) const {
    if (parametric_) {
        if (sigma_ == 0.0) {
            if (bias < i_mid_) return 0.0;
            if (bias > i_mid_) return e_max_;
            return e_max_ / 2.0;
        }
        const double z = (bias - i_mid_) / sigma_;
        return e_max_ * 0.5 * std::erfc(-z / std::sqrt(2.0));
    }
    if (bias <= bias_.front()) return efficiency_.front();
    if (bias >= bias_.back()) return efficiency_.back();
    const auto it = std::upper_bound(bias_.begin(), bias_.end(), bias);
    const std::size_t k = static_cast<std::size_t>(it - bias_.begin()) - 1;
    const double h = bias_[k + 1] - bias_[k];
    const double t = (bias - bias_[k]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    // Hermite basis grouped around the left sample so flat segments come
    // out exactly flat.
    return efficiency_[k] +
           (efficiency_[k + 1] - efficiency_[k]) * (3.0 * t2 - 2.0 * t3) +
           h * ((t3 - 2.0 * t2 + t) * slope_[k] + (t3 - t2) * slope_[k + 1]);
}

std::optional<double> sde_dc(const SdeCurve& curve, double bias) {
    check_non_negative(bias, "bias current");
    if (bias >= curve.switching_current()) return std::nullopt;
    return curve.extended_value(bias);
}

RfBias RfBias::uniform(double i_dc, double i_rf, double omega) {
    RfBias bias;
    bias.i_dc = i_dc;
    bias.omega = omega;
    bias.amplitude = {i_rf};
    bias.phase = {0.0};
    check_bias(bias);
    return bias;
}

RfBias RfBias::segmented(double i_dc, std::vector<double> amplitudes,
                         std::vector<double> phases, double omega) {
    RfBias bias;
    bias.i_dc = i_dc;
    bias.omega = omega;
    bias.amplitude = std::move(amplitudes);
    bias.phase = std::move(phases);
    check_bias(bias);
    return bias;
}

RfBias bias_from_induced_currents(double i_dc,
                                  const circuit::InducedCurrentProfile& profile,
                                  double omega) {
    std::vector<double> amplitudes;
    std::vector<double> phases;
    amplitudes.reserve(profile.segment_current.size());
    phases.reserve(profile.segment_current.size());
    for (const auto& current : profile.segment_current) {
        amplitudes.push_back(std::abs(current));
        phases.push_back(std::arg(current));
    }
    return RfBias::segmented(i_dc, std::move(amplitudes), std::move(phases), omega);
}

namespace {

// Shared core of the uniform and gradient averages: every segment done
// as its own cycle average, combined with equal weight (photons spread
// uniformly along the meander).
EffectiveSdeResult effective_sde_impl(const SdeCurve& curve, const RfBias& bias,
                                      int samples) {
    check_bias(bias);
    check_samples(samples);
    for (double a : bias.amplitude) {
        if (bias.i_dc + a >= curve.switching_current()) {
            EffectiveSdeResult latched;
            latched.latched = true;
            return latched;
        }
    }
    EffectiveSdeResult result;
    double sum = 0.0;
    double e_hi = 0.0;
    double e_lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bias.amplitude.size(); ++k) {
        const double a = bias.amplitude[k];
        sum += cycle_average([&](double i) { return curve.extended_value(i); },
                             bias.i_dc, a, bias.phase[k], samples);
        // The curve is non-decreasing, so the cycle extremes sit at the
        // current extremes.
        e_hi = std::max(e_hi, curve.extended_value(bias.i_dc + a));
        e_lo = std::min(e_lo, curve.extended_value(bias.i_dc - a));
    }
    result.effective = sum / static_cast<double>(bias.amplitude.size());
    result.e_hi = e_hi;
    result.e_lo = e_lo;
    return result;
}

}  // namespace

EffectiveSdeResult effective_sde(const SdeCurve& curve, const RfBias& bias,
                                 int samples) {
    if (bias.amplitude.size() != 1) {
        throw validation_error(
            "effective_sde needs a uniform (single-segment) rf profile");
    }
    return effective_sde_impl(curve, bias, samples);
}

EffectiveSdeResult effective_sde_gradient(const SdeCurve& curve, const RfBias& bias,
                                          int samples) {
    return effective_sde_impl(curve, bias, samples);
}

EffectiveBcrResult effective_bcr(const BcrModel& model, const RfBias& bias,
                                 int samples, double i_sw) {
    check_bcr(model);
    check_bias(bias);
    check_samples(samples);
    if (std::isnan(i_sw) || i_sw <= 0.0) {
        throw validation_error("switching current must be positive");
    }
    EffectiveBcrResult result;
    for (double a : bias.amplitude) {
        if (bias.i_dc + a >= i_sw) {
            result.latched = true;
            return result;
        }
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < bias.amplitude.size(); ++k) {
        sum += cycle_average(
            [&](double i) { return model.b0 * std::exp(i / model.i_scale); },
            bias.i_dc, bias.amplitude[k], bias.phase[k], samples);
    }
    result.rate = sum / static_cast<double>(bias.amplitude.size());
    return result;
}

ObservedSwitchingCurrent observed_switching_current(double i_sw, const RfBias& bias) {
    check_positive(i_sw, "switching current");
    check_bias(bias);
    const double max_amplitude =
        *std::max_element(bias.amplitude.begin(), bias.amplitude.end());
    ObservedSwitchingCurrent result;
    result.current = i_sw - max_amplitude;
    result.always_latched = result.current < 0.0;
    return result;
}

double kinetic_inductance(const NanowireGeometry& geometry) {
    check_positive(geometry.width, "wire width");
    check_positive(geometry.length, "wire length");
    check_positive(geometry.sheet_inductance, "sheet inductance");
    return geometry.sheet_inductance * (geometry.length / geometry.width);
}

PulseTimescales pulse_time_constant(double inductance, double load_impedance,
                                    double recovery_factor) {
    check_non_negative(inductance, "inductance");
    check_positive(load_impedance, "load impedance");
    check_positive(recovery_factor, "recovery factor");
    PulseTimescales result;
    if (inductance == 0.0) {
        result.degenerate = true;
        result.max_count_rate = std::numeric_limits<double>::infinity();
        return result;
    }
    result.time_constant = inductance / load_impedance;
    result.max_count_rate = 1.0 / (recovery_factor * result.time_constant);
    return result;
}

FidelityResult poisson_readout_fidelity(double lambda_bright, double lambda_dark) {
    check_non_negative(lambda_bright, "bright mean count");
    check_non_negative(lambda_dark, "dark mean count");
    if (lambda_bright > 700.0 || lambda_dark > 700.0) {
        throw validation_error("mean count too large for direct Poisson sums");
    }

    FidelityResult result;
    result.inverted = lambda_bright < lambda_dark;

    // Walk the threshold upward, carrying both distribution functions;
    // the mean error is settled once both tails are exhausted. Strict
    // improvement keeps the smallest threshold on ties.
    double pmf_bright = std::exp(-lambda_bright);
    double pmf_dark = std::exp(-lambda_dark);
    double cdf_bright = 0.0;
    double cdf_dark = 0.0;
    double best_error = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 100000; ++k) {
        cdf_bright += pmf_bright;
        cdf_dark += pmf_dark;
        const double err = 0.5 * (cdf_bright + (1.0 - cdf_dark));
        if (err < best_error) {
            best_error = err;
            result.threshold = k;
            result.error_bright = cdf_bright;
            result.error_dark = 1.0 - cdf_dark;
        }
        if (cdf_bright >= 1.0 - 1e-18 && cdf_dark >= 1.0 - 1e-18) break;
        pmf_bright *= lambda_bright / (k + 1);
        pmf_dark *= lambda_dark / (k + 1);
    }
    result.fidelity = 1.0 - best_error;
    return result;
}

FidelityResult readout_fidelity(const CountingScenario& scenario,
                                const EffectiveSdeResult& sde) {
    check_non_negative(scenario.bright_rate, "bright photon rate");
    check_non_negative(scenario.stray_rate, "stray light rate");
    check_positive(scenario.integration_time, "integration time");
    if (!std::isfinite(sde.effective) || sde.effective < 0.0 || sde.effective > 1.0) {
        throw validation_error("effective efficiency must lie in [0, 1]");
    }
    if (sde.latched) return poisson_readout_fidelity(0.0, 0.0);
    const double background =
        effective_bcr(scenario.background, scenario.bias).rate;
    const double lambda_dark =
        (scenario.stray_rate + background) * scenario.integration_time;
    const double lambda_bright =
        (scenario.bright_rate * sde.effective + scenario.stray_rate + background) *
        scenario.integration_time;
    return poisson_readout_fidelity(lambda_bright, lambda_dark);
}

}  // namespace trapdet::detector
