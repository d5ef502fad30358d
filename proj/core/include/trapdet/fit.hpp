#pragma once

#include <iosfwd>
#include <vector>

#include "trapdet/detector.hpp"
#include "trapdet/errors.hpp"

namespace trapdet::fit {

enum class CurveLabel { rf_off, rf_on, rf_on_cancelled };

// A measured count-rate-versus-bias sweep. counts carries optional raw
// totals per point (empty when the source had none); rates are what the
// fits consume.
struct MeasuredCurve {
    std::vector<double> bias;    // amperes, strictly increasing
    std::vector<double> rate;    // counts/s, >= 0
    std::vector<double> counts;  // raw totals; empty or one per point
    CurveLabel label = CurveLabel::rf_off;
};

// Reads "bias_uA,rate_cps" or "bias_uA,rate_cps,counts" rows. Bias is
// converted to amperes; blank lines are skipped; anything else is a
// validation error naming the line.
MeasuredCurve read_curve_csv(std::istream& in, CurveLabel label);

// The rf-off characteristic: a relative-efficiency curve (plateau
// normalized to one) plus the plateau count rate that scales model
// predictions back to counts/s. plateau_flagged reports that the top
// decile of rates was too scattered to trust as a plateau, in which
// case the maximum rate was used instead.
struct DcCharacteristic {
    detector::SdeCurve curve;
    double plateau_rate = 0.0;  // counts/s
    double bias_lo = 0.0;       // sampled range, amperes
    double bias_hi = 0.0;
    bool plateau_flagged = false;
};

// Builds the dc curve from an rf-off sweep of at least five points:
// rates are normalized by the plateau estimate (mean of the top decile),
// clamped to [0, 1], made non-decreasing by isotonic regression (pool
// adjacent violators), and tabulated with the switching current set one
// grid step past the last sample.
DcCharacteristic build_dc_curve(const MeasuredCurve& rf_off);

struct FitConfig {
    // Cycle-average resolution and (inert) rf frequency for the model.
    int samples = 64;
    double omega = 2.0 * 3.14159265358979323846 * 46.23e6;  // rad/s
    // Multi-start grid: starts_per_axis points placed uniformly and
    // inclusively over each box. The simplex itself is unconstrained.
    double i_rf_lo = 0.0;       // amperes
    double i_rf_hi = 5.0e-6;
    double delta_lo = -1.5e-6;  // amperes
    double delta_hi = 1.5e-6;
    int starts_per_axis = 5;
    // Convergence: simplex diameter below tolerance (amperes for the
    // current parameters; the gradient parameter uses the same numeric
    // tolerance on its microamp-scaled axis).
    double tolerance = 1e-9;
    int max_iterations = 400;
    // Gradient model: segment count and the simplex seed step for g.
    int gradient_segments = 8;
    double gradient_step = 0.3;
};

struct FitResult {
    double i_rf = 0.0;            // amperes, >= 0
    double delta_i_dc = 0.0;      // amperes, added to the applied bias
    double residual = 0.0;        // sqrt of the weighted squared error
    double i_rf_half_width = 0.0;      // confidence half-widths from a
    double delta_half_width = 0.0;     // quadratic expansion at the optimum
    bool converged = false;
};

// The fit objective, exposed so callers can evaluate the model quality
// at arbitrary parameters: sqrt of sum over points of
// (rate - model)^2 / max(rate, 1), where
// model(I) = plateau_rate * effective_sde(curve, I + delta_i_dc, i_rf)
// with the dc bias clamped at zero and a latched cycle counting nothing.
// The rf amplitude enters as |i_rf|.
double weighted_residual(const DcCharacteristic& dc, const MeasuredCurve& data,
                         double i_rf, double delta_i_dc,
                         const FitConfig& config = {});

// Same objective with a linear amplitude gradient along the meander:
// segment k of n gets amplitude |i_rf| * max(0, 1 + g * x_k) with x_k
// spaced uniformly over [-1/2, 1/2], so the mean amplitude stays i_rf.
double weighted_residual_gradient(const DcCharacteristic& dc,
                                  const MeasuredCurve& data, double i_rf,
                                  double delta_i_dc, double gradient,
                                  const FitConfig& config = {});

// Recovers (I_rf, delta_I_dc) by Nelder-Mead simplex from the multi-start
// grid, keeping the lowest residual (ties to the earlier start), then
// polishing to the configured tolerance. Throws solver_error if no start
// yields a finite objective.
FitResult fit_rf_model(const DcCharacteristic& dc, const MeasuredCurve& rf_on,
                       const FitConfig& config = {});

// Three-parameter extension with the amplitude gradient g. Starts reuse
// the uniform grid at g = 0 plus the two-parameter optimum, so its
// residual can never exceed the uniform fit's. Mirrored slopes produce
// the same segment amplitude multiset, making the sign of g
// unobservable in cycle-averaged rates; the reported slope is its
// magnitude.
struct GradientFitResult {
    double i_rf = 0.0;
    double delta_i_dc = 0.0;
    double gradient = 0.0;  // dimensionless slope magnitude across the meander
    double residual = 0.0;
    double uniform_residual = 0.0;      // two-parameter reference fit
    double residual_improvement = 0.0;  // uniform_residual - residual
    double i_rf_half_width = 0.0;
    double delta_half_width = 0.0;
    double gradient_half_width = 0.0;
    bool converged = false;
};

GradientFitResult gradient_model_fit(const DcCharacteristic& dc,
                                     const MeasuredCurve& rf_on,
                                     const FitConfig& config = {});

}  // namespace trapdet::fit
