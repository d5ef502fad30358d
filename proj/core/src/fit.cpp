#include "trapdet/fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace trapdet::fit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMicro = 1e-6;  // simplex coordinates are in microamps

void check_curve(const MeasuredCurve& curve) {
    if (curve.bias.empty()) {
        throw validation_error("measured curve has no points");
    }
    if (curve.rate.size() != curve.bias.size()) {
        throw validation_error("measured curve bias and rate columns must pair up");
    }
    if (!curve.counts.empty() && curve.counts.size() != curve.bias.size()) {
        throw validation_error("measured curve counts column must cover every point");
    }
    for (std::size_t i = 0; i < curve.bias.size(); ++i) {
        if (!std::isfinite(curve.bias[i]) || !std::isfinite(curve.rate[i])) {
            throw validation_error("measured curve values must be finite");
        }
        if (curve.rate[i] < 0.0) {
            throw validation_error("measured curve rates must be non-negative");
        }
        if (i > 0 && curve.bias[i] <= curve.bias[i - 1]) {
            throw validation_error("measured curve biases must be strictly increasing");
        }
        if (!curve.counts.empty() &&
            (!std::isfinite(curve.counts[i]) || curve.counts[i] < 0.0)) {
            throw validation_error("measured curve counts must be non-negative");
        }
    }
}

void check_config(const FitConfig& config) {
    if (config.samples < 16) {
        throw validation_error("cycle average needs at least 16 samples");
    }
    if (!std::isfinite(config.omega) || config.omega <= 0.0) {
        throw validation_error("rf frequency must be positive and finite");
    }
    if (config.starts_per_axis < 1) {
        throw validation_error("multi-start grid needs at least one point per axis");
    }
    if (!std::isfinite(config.tolerance) || config.tolerance <= 0.0) {
        throw validation_error("simplex tolerance must be positive and finite");
    }
    if (config.max_iterations < 1) {
        throw validation_error("simplex iteration budget must be positive");
    }
    if (config.i_rf_hi < config.i_rf_lo || config.delta_hi < config.delta_lo) {
        throw validation_error("multi-start boxes must be ordered");
    }
    if (config.gradient_segments < 2) {
        throw validation_error("gradient model needs at least two segments");
    }
    if (!std::isfinite(config.gradient_step) || config.gradient_step <= 0.0) {
        throw validation_error("gradient simplex step must be positive");
    }
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        std::string field = line.substr(
            start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto first = field.find_first_not_of(" \t");
        if (first == std::string::npos) {
            field.clear();
        } else {
            field = field.substr(first, field.find_last_not_of(" \t") - first + 1);
        }
        fields.push_back(std::move(field));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

double parse_number(const std::string& field, int line_no) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(field, &consumed);
    } catch (const std::exception&) {
        throw validation_error("csv line " + std::to_string(line_no) +
                               ": malformed number '" + field + "'");
    }
    if (consumed != field.size()) {
        throw validation_error("csv line " + std::to_string(line_no) +
                               ": malformed number '" + field + "'");
    }
    return value;
}

// Pool adjacent violators: the least-squares non-decreasing sequence,
// replacing each violating run with its mean.
void make_non_decreasing(std::vector<double>& values) {
    std::vector<double> mean;
    std::vector<std::size_t> count;
    mean.reserve(values.size());
    count.reserve(values.size());
    for (double v : values) {
        mean.push_back(v);
        count.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const double pooled = (mean[mean.size() - 2] * count[count.size() - 2] +
                                   mean.back() * count.back()) /
                                  (count[count.size() - 2] + count.back());
            count[count.size() - 2] += count.back();
            mean[mean.size() - 2] = pooled;
            mean.pop_back();
            count.pop_back();
        }
    }
    std::size_t out = 0;
    for (std::size_t block = 0; block < mean.size(); ++block) {
        for (std::size_t j = 0; j < count[block]; ++j) values[out++] = mean[block];
    }
}

std::vector<double> midpoint_sines(int samples) {
    std::vector<double> sine(samples);
    for (int j = 0; j < samples; ++j) {
        sine[j] = std::sin(2.0 * kPi * (j + 0.5) / samples);
    }
    return sine;
}

double segment_average(const detector::SdeCurve& curve, double i_dc,
                       double amplitude, const std::vector<double>& sine) {
    if (amplitude == 0.0) return curve.extended_value(i_dc);
    double sum = 0.0;
    for (double s : sine) sum += curve.extended_value(i_dc + amplitude * s);
    return sum / static_cast<double>(sine.size());
}

// The weighted squared error of the count-rate model. Matches the
// detector module's cycle averages (same midpoint grid, same latch
// rule); amplitudes enter through |i_rf| and dc biases clamp at zero so
// the simplex can roam freely.
struct Objective {
    const DcCharacteristic& dc;
    const MeasuredCurve& data;
    int segments;  // 1 = uniform model
    std::vector<double> sine;

    double sse(double i_rf, double delta, double gradient) const {
        const double amplitude = std::abs(i_rf);
        std::vector<double> amps(segments);
        if (segments == 1) {
            amps[0] = amplitude;
        } else {
            for (int k = 0; k < segments; ++k) {
                const double x = static_cast<double>(k) / (segments - 1) - 0.5;
                amps[k] = amplitude * std::max(0.0, 1.0 + gradient * x);
            }
        }
        const double max_amp = *std::max_element(amps.begin(), amps.end());
        const double i_sw = dc.curve.switching_current();
        double total = 0.0;
        for (std::size_t i = 0; i < data.bias.size(); ++i) {
            double i_dc = data.bias[i] + delta;
            if (i_dc < 0.0) i_dc = 0.0;
            double eff = 0.0;
            if (i_dc + max_amp < i_sw) {
                for (double a : amps) eff += segment_average(dc.curve, i_dc, a, sine);
                eff /= static_cast<double>(segments);
            }
            const double residual = data.rate[i] - dc.plateau_rate * eff;
            total += residual * residual / std::max(data.rate[i], 1.0);
        }
        return total;
    }

    // Simplex coordinates: currents in microamps, gradient as is.
    double operator()(const std::array<double, 3>& p) const {
        return sse(p[0] * kMicro, p[1] * kMicro, p[2]);
    }
};

struct SimplexResult {
    std::array<double, 3> point{};
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
};

// Plain Nelder-Mead over `dims` leading coordinates. Deterministic:
// stable ordering, no randomness. Convergence is the Chebyshev diameter
// of the simplex falling below tol.
template <typename Fn>
SimplexResult nelder_mead(const Fn& fn, std::array<double, 3> start,
                          std::array<double, 3> step, int dims, double tol,
                          int max_iterations) {
    struct Vertex {
        std::array<double, 3> p;
        double value;
    };
    std::vector<Vertex> simplex;
    simplex.push_back({start, fn(start)});
    for (int d = 0; d < dims; ++d) {
        auto p = start;
        p[d] += step[d];
        simplex.push_back({p, fn(p)});
    }
    const auto by_value = [](const Vertex& a, const Vertex& b) {
        return a.value < b.value;
    };

    SimplexResult result;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::stable_sort(simplex.begin(), simplex.end(), by_value);
        double diameter = 0.0;
        for (int d = 0; d < dims; ++d) {
            double lo = simplex[0].p[d];
            double hi = lo;
            for (const auto& v : simplex) {
                lo = std::min(lo, v.p[d]);
                hi = std::max(hi, v.p[d]);
            }
            diameter = std::max(diameter, hi - lo);
        }
        if (diameter < tol) {
            result.converged = true;
            break;
        }

        std::array<double, 3> centroid{};
        for (int d = 0; d < dims; ++d) {
            for (std::size_t v = 0; v + 1 < simplex.size(); ++v) {
                centroid[d] += simplex[v].p[d];
            }
            centroid[d] /= static_cast<double>(simplex.size() - 1);
        }
        Vertex& worst = simplex.back();
        const auto blend = [&](double weight) {
            auto p = centroid;
            for (int d = 0; d < dims; ++d) {
                p[d] = centroid[d] + weight * (worst.p[d] - centroid[d]);
            }
            return p;
        };

        const auto reflected = blend(-1.0);
        const double f_reflected = fn(reflected);
        if (f_reflected < simplex.front().value) {
            const auto expanded = blend(-2.0);
            const double f_expanded = fn(expanded);
            if (f_expanded < f_reflected) {
                worst = {expanded, f_expanded};
            } else {
                worst = {reflected, f_reflected};
            }
        } else if (f_reflected < simplex[simplex.size() - 2].value) {
            worst = {reflected, f_reflected};
        } else {
            const bool outside = f_reflected < worst.value;
            const auto contracted = blend(outside ? -0.5 : 0.5);
            const double f_contracted = fn(contracted);
            if (f_contracted < std::min(f_reflected, worst.value)) {
                worst = {contracted, f_contracted};
            } else {
                for (std::size_t v = 1; v < simplex.size(); ++v) {
                    for (int d = 0; d < dims; ++d) {
                        simplex[v].p[d] =
                            simplex[0].p[d] + 0.5 * (simplex[v].p[d] - simplex[0].p[d]);
                    }
                    simplex[v].value = fn(simplex[v].p);
                }
            }
        }
    }
    std::stable_sort(simplex.begin(), simplex.end(), by_value);
    result.point = simplex[0].p;
    result.value = simplex[0].value;
    return result;
}

double grid_value(double lo, double hi, int points, int index) {
    if (points == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(index) / (points - 1);
}

// Multi-start sweep: coarse simplexes from the inclusive grid (plus any
// extra seeds), deterministic best-of with ties to the earlier start,
// then one polish at full tolerance from the winner.
template <typename Fn>
SimplexResult multi_start(const Fn& fn, const FitConfig& config, int dims,
                          const std::vector<std::array<double, 3>>& extra_seeds) {
    const double coarse_tol = std::max(config.tolerance / kMicro, 2e-2);
    const std::array<double, 3> coarse_step = {0.4, 0.3, config.gradient_step};
    SimplexResult best;
    const int n = config.starts_per_axis;
    for (int si = 0; si < n; ++si) {
        for (int sj = 0; sj < n; ++sj) {
            const std::array<double, 3> start = {
                grid_value(config.i_rf_lo / kMicro, config.i_rf_hi / kMicro, n, si),
                grid_value(config.delta_lo / kMicro, config.delta_hi / kMicro, n, sj),
                0.0};
            const auto run = nelder_mead(fn, start, coarse_step, dims, coarse_tol, 150);
            if (run.value < best.value) best = run;
        }
    }
    for (const auto& seed : extra_seeds) {
        const auto run = nelder_mead(fn, seed, coarse_step, dims, coarse_tol, 150);
        if (run.value < best.value) best = run;
    }
    if (!std::isfinite(best.value)) {
        throw solver_error("rf model fit found no finite objective across starts");
    }
    const std::array<double, 3> polish_step = {0.05, 0.05,
                                               0.2 * config.gradient_step};
    return nelder_mead(fn, best.point, polish_step, dims, config.tolerance / kMicro,
                       config.max_iterations);
}

// Confidence half-widths from the quadratic expansion of the objective:
// covariance 2 H^-1 scaled by the reduced squared error. Non-positive
// curvature reports an infinite half-width rather than failing the fit.
std::array<double, 3> half_widths(const Objective& objective,
                                  const std::array<double, 3>& optimum, int dims,
                                  double sse, std::size_t points) {
    std::array<double, 3> widths = {
        std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(),
        std::numeric_limits<double>::infinity(),
    };
    if (points <= static_cast<std::size_t>(dims)) return widths;
    const std::array<double, 3> h = {5e-3, 5e-3, 5e-2};
    Eigen::MatrixXd hess(dims, dims);
    const double f0 = objective(optimum);
    for (int a = 0; a < dims; ++a) {
        auto up = optimum;
        auto down = optimum;
        up[a] += h[a];
        down[a] -= h[a];
        hess(a, a) = (objective(up) - 2.0 * f0 + objective(down)) / (h[a] * h[a]);
        for (int b = a + 1; b < dims; ++b) {
            auto pp = optimum;
            auto pm = optimum;
            auto mp = optimum;
            auto mm = optimum;
            pp[a] += h[a];
            pp[b] += h[b];
            pm[a] += h[a];
            pm[b] -= h[b];
            mp[a] -= h[a];
            mp[b] += h[b];
            mm[a] -= h[a];
            mm[b] -= h[b];
            hess(a, b) = hess(b, a) =
                (objective(pp) - objective(pm) - objective(mp) + objective(mm)) /
                (4.0 * h[a] * h[b]);
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(hess);
    if (!lu.isInvertible()) return widths;
    const Eigen::MatrixXd cov =
        2.0 * lu.inverse() * (sse / static_cast<double>(points - dims));
    for (int a = 0; a < dims; ++a) {
        if (cov(a, a) > 0.0) widths[a] = std::sqrt(cov(a, a)) * kMicro;
    }
    // The gradient axis is dimensionless: undo the microamp scaling.
    if (dims == 3 && std::isfinite(widths[2])) widths[2] /= kMicro;
    return widths;
}

void check_overlap(const DcCharacteristic& dc, const MeasuredCurve& rf_on) {
    if (rf_on.bias.front() > dc.bias_hi || rf_on.bias.back() < dc.bias_lo) {
        throw validation_error("rf-on and rf-off bias ranges do not overlap");
    }
}

}  // namespace

MeasuredCurve read_curve_csv(std::istream& in, CurveLabel label) {
    MeasuredCurve curve;
    curve.label = label;
    std::string line;
    int line_no = 0;
    bool seen_header = false;
    bool with_counts = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto fields = split_fields(line);
        if (!seen_header) {
            if (fields.size() == 2 && fields[0] == "bias_uA" &&
                fields[1] == "rate_cps") {
                with_counts = false;
            } else if (fields.size() == 3 && fields[0] == "bias_uA" &&
                       fields[1] == "rate_cps" && fields[2] == "counts") {
                with_counts = true;
            } else {
                throw validation_error(
                    "csv line " + std::to_string(line_no) +
                    ": expected header bias_uA,rate_cps or bias_uA,rate_cps,counts");
            }
            seen_header = true;
            continue;
        }
        const std::size_t expected = with_counts ? 3 : 2;
        if (fields.size() != expected) {
            throw validation_error("csv line " + std::to_string(line_no) +
                                   ": expected " + std::to_string(expected) +
                                   " fields");
        }
        curve.bias.push_back(parse_number(fields[0], line_no) * kMicro);
        curve.rate.push_back(parse_number(fields[1], line_no));
        if (with_counts) curve.counts.push_back(parse_number(fields[2], line_no));
    }
    if (!seen_header) {
        throw validation_error("csv input has no header line");
    }
    check_curve(curve);
    return curve;
}

DcCharacteristic build_dc_curve(const MeasuredCurve& rf_off) {
    check_curve(rf_off);
    const std::size_t n = rf_off.bias.size();
    if (n < 5) {
        throw validation_error("dc curve needs at least five rf-off points");
    }

    // Plateau estimate: mean of the top decile of rates. A scattered top
    // decile means there is no flat plateau to normalize by; fall back
    // to the maximum rate and say so.
    std::vector<double> sorted = rf_off.rate;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t top = std::max<std::size_t>(1, n / 10);
    double plateau = 0.0;
    for (std::size_t i = n - top; i < n; ++i) plateau += sorted[i];
    plateau /= static_cast<double>(top);
    if (plateau <= 0.0) {
        throw validation_error("rf-off curve has no counts to normalize by");
    }
    bool flagged = false;
    if (sorted.back() - sorted[n - top] > 0.25 * plateau) {
        flagged = true;
        plateau = sorted.back();
    }

    std::vector<double> efficiency(n);
    for (std::size_t i = 0; i < n; ++i) {
        efficiency[i] = std::min(1.0, rf_off.rate[i] / plateau);
    }
    make_non_decreasing(efficiency);

    std::vector<std::pair<double, double>> table(n);
    for (std::size_t i = 0; i < n; ++i) {
        table[i] = {rf_off.bias[i], efficiency[i]};
    }
    const double step = rf_off.bias[n - 1] - rf_off.bias[n - 2];
    return DcCharacteristic{
        detector::SdeCurve::tabulated(std::move(table), rf_off.bias.back() + step),
        plateau, rf_off.bias.front(), rf_off.bias.back(), flagged};
}

double weighted_residual(const DcCharacteristic& dc, const MeasuredCurve& data,
                         double i_rf, double delta_i_dc, const FitConfig& config) {
    check_curve(data);
    check_config(config);
    const Objective objective{dc, data, 1, midpoint_sines(config.samples)};
    return std::sqrt(objective.sse(i_rf, delta_i_dc, 0.0));
}

double weighted_residual_gradient(const DcCharacteristic& dc,
                                  const MeasuredCurve& data, double i_rf,
                                  double delta_i_dc, double gradient,
                                  const FitConfig& config) {
    check_curve(data);
    check_config(config);
    const Objective objective{dc, data, config.gradient_segments,
                              midpoint_sines(config.samples)};
    return std::sqrt(objective.sse(i_rf, delta_i_dc, gradient));
}

FitResult fit_rf_model(const DcCharacteristic& dc, const MeasuredCurve& rf_on,
                       const FitConfig& config) {
    check_curve(rf_on);
    check_config(config);
    check_overlap(dc, rf_on);

    const Objective objective{dc, rf_on, 1, midpoint_sines(config.samples)};
    auto run = multi_start(objective, config, 2, {});
    run.point[0] = std::abs(run.point[0]);

    FitResult result;
    result.i_rf = run.point[0] * kMicro;
    result.delta_i_dc = run.point[1] * kMicro;
    result.residual = std::sqrt(run.value);
    result.converged = run.converged;
    const auto widths =
        half_widths(objective, run.point, 2, run.value, rf_on.bias.size());
    result.i_rf_half_width = widths[0];
    result.delta_half_width = widths[1];
    return result;
}

GradientFitResult gradient_model_fit(const DcCharacteristic& dc,
                                     const MeasuredCurve& rf_on,
                                     const FitConfig& config) {
    const FitResult uniform = fit_rf_model(dc, rf_on, config);

    const Objective objective{dc, rf_on, config.gradient_segments,
                              midpoint_sines(config.samples)};
    const std::array<double, 3> seed = {uniform.i_rf / kMicro,
                                        uniform.delta_i_dc / kMicro, 0.0};
    auto run = multi_start(objective, config, 3, {seed});

    // The gradient model contains the uniform one at g = 0, so never
    // report a worse fit than the two-parameter optimum.
    const double uniform_sse = uniform.residual * uniform.residual;
    if (run.value > uniform_sse) {
        run.point = seed;
        run.value = uniform_sse;
    }
    run.point[0] = std::abs(run.point[0]);
    // Mirrored slopes produce the same amplitude multiset, so the sign
    // of g is unobservable; report the magnitude.
    run.point[2] = std::abs(run.point[2]);

    GradientFitResult result;
    result.i_rf = run.point[0] * kMicro;
    result.delta_i_dc = run.point[1] * kMicro;
    result.gradient = run.point[2];
    result.residual = std::sqrt(run.value);
    result.uniform_residual = uniform.residual;
    result.residual_improvement = uniform.residual - result.residual;
    result.converged = run.converged;
    const auto widths =
        half_widths(objective, run.point, 3, run.value, rf_on.bias.size());
    result.i_rf_half_width = widths[0];
    result.delta_half_width = widths[1];
    result.gradient_half_width = widths[2];
    return result;
}

}  // namespace trapdet::fit
