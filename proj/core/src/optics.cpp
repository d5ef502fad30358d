#include "trapdet/optics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

namespace trapdet::optics {
namespace {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

constexpr cd kI{0.0, 1.0};

void require_index_values(double n, double k) {
    if (!std::isfinite(n) || !std::isfinite(k)) {
        throw validation_error("refractive index components must be finite");
    }
    if (n < 0.0 || k < 0.0) {
        throw validation_error("refractive index needs n >= 0 and k >= 0 (passive media only)");
    }
    if (n == 0.0 && k == 0.0) {
        throw validation_error("refractive index must not vanish");
    }
}

void validate_wave(const PlaneWave& wave) {
    if (!std::isfinite(wave.wavelength) || wave.wavelength <= 0.0) {
        throw validation_error("wavelength must be positive");
    }
    if (!std::isfinite(wave.incidence_angle) || wave.incidence_angle < 0.0 ||
        wave.incidence_angle >= std::numbers::pi / 2.0) {
        throw validation_error("incidence angle must lie in [0, pi/2)");
    }
}

void validate_stack(const LayerStack& stack, double wavelength) {
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        const double d = stack.layers[i].thickness;
        if (!std::isfinite(d) || d <= 0.0) {
            throw validation_error("layer " + std::to_string(i) +
                                   ": thickness must be positive");
        }
    }
    if (stack.ambient.index_at(wavelength).imag() != 0.0) {
        throw validation_error("ambient material must be lossless at the solve wavelength");
    }
}

void validate_grating(const Grating1D& grating, const LayerStack& stack) {
    if (!std::isfinite(grating.period) || grating.period <= 0.0) {
        throw validation_error("grating period must be positive");
    }
    if (!std::isfinite(grating.fill_factor) || grating.fill_factor < 0.0 ||
        grating.fill_factor > 1.0) {
        throw validation_error("grating fill factor must lie in [0, 1]");
    }
    if (grating.host_layer >= stack.layers.size()) {
        throw validation_error("grating host layer index is out of range");
    }
}

void validate_harmonics(int harmonics) {
    if (harmonics < 1 || harmonics % 2 == 0) {
        throw validation_error("harmonics count must be a positive odd number");
    }
}

// kz in units of k0. The principal square root keeps Im >= 0 for passive
// media, so forward waves decay downward.
cd kz_unit(cd eps, double sx) { return std::sqrt(eps - sx * sx); }

cd admittance(cd eps, double sx, Polarization pol) {
    const cd kz = kz_unit(eps, sx);
    return pol == Polarization::te ? kz : kz / eps;
}

// ---------------------------------------------------------------------------
// Homogeneous stacks: characteristic matrices on the tangential field pair
// (u, v), where v = q u for a forward wave and the normal flux is Re(u v*)/2.

struct CharMatrix {
    cd m11, m12, m21, m22;
};

AbsorptionResult tmm_solve_impl(const LayerStack& stack, const PlaneWave& wave) {
    const double lambda = wave.wavelength;
    const double k0 = 2.0 * std::numbers::pi / lambda;
    const double n_amb = stack.ambient.index_at(lambda).real();
    const double sx = n_amb * std::sin(wave.incidence_angle);
    const cd qa = admittance(stack.ambient.permittivity_at(lambda), sx, wave.polarization);
    const cd qs = admittance(stack.substrate.permittivity_at(lambda), sx, wave.polarization);

    std::vector<CharMatrix> per_layer;
    per_layer.reserve(stack.layers.size());
    for (const Layer& layer : stack.layers) {
        const cd eps = layer.material.permittivity_at(lambda);
        const cd kz = kz_unit(eps, sx);
        const cd q = wave.polarization == Polarization::te ? kz : kz / eps;
        const cd delta = k0 * kz * layer.thickness;
        const cd c = std::cos(delta);
        const cd s = std::sin(delta);
        per_layer.push_back({c, -kI * s / q, -kI * q * s, c});
    }

    CharMatrix total{1.0, 0.0, 0.0, 1.0};
    for (const CharMatrix& m : per_layer) {
        total = {total.m11 * m.m11 + total.m12 * m.m21,
                 total.m11 * m.m12 + total.m12 * m.m22,
                 total.m21 * m.m11 + total.m22 * m.m21,
                 total.m21 * m.m12 + total.m22 * m.m22};
    }

    const cd denom = qa * total.m11 + qa * qs * total.m12 + total.m21 + qs * total.m22;
    const cd r = (qa * total.m11 + qa * qs * total.m12 - total.m21 - qs * total.m22) / denom;
    const cd t = 2.0 * qa / denom;

    AbsorptionResult result;
    result.reflectance = std::norm(r);
    result.transmittance = qs.real() * std::norm(t) / qa.real();

    // Boundary fields from the substrate upward; boundary j sits on top of
    // layer j, and the flux drop across a layer is what it absorbed.
    const std::size_t count = stack.layers.size();
    std::vector<double> flux(count + 1);
    cd u = t;
    cd v = qs * t;
    flux[count] = 0.5 * (u * std::conj(v)).real();
    for (std::size_t j = count; j-- > 0;) {
        const CharMatrix& m = per_layer[j];
        const cd u_next = m.m11 * u + m.m12 * v;
        const cd v_next = m.m21 * u + m.m22 * v;
        u = u_next;
        v = v_next;
        flux[j] = 0.5 * (u * std::conj(v)).real();
    }
    const double incident = 0.5 * qa.real();
    result.absorption_per_layer.resize(count);
    for (std::size_t j = 0; j < count; ++j) {
        result.absorption_per_layer[j] = (flux[j] - flux[j + 1]) / incident;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Fourier modal pieces. Mode vectors follow the same (u, v) convention as
// the characteristic matrices, one Fourier order per component.

struct LayerModes {
    MatrixXcd W;   // mode shapes in u-space
    MatrixXcd V;   // matching v-space map, columns aligned with W
    VectorXcd g;   // mode constants kz/k0 with Im >= 0
    double phase_thickness = 0.0;  // k0 * d
};

struct ScatterMatrix {
    MatrixXcd tdd, rud, rdu, tuu;

    static ScatterMatrix identity(Eigen::Index n) {
        ScatterMatrix s;
        s.tdd = MatrixXcd::Identity(n, n);
        s.tuu = MatrixXcd::Identity(n, n);
        s.rud = MatrixXcd::Zero(n, n);
        s.rdu = MatrixXcd::Zero(n, n);
        return s;
    }
};

// Redheffer star product: a stacked above b.
ScatterMatrix star(const ScatterMatrix& a, const ScatterMatrix& b) {
    const Eigen::Index n = a.tdd.rows();
    const MatrixXcd eye = MatrixXcd::Identity(n, n);
    const MatrixXcd down = (eye - a.rud * b.rdu).partialPivLu().solve(a.tdd);
    const MatrixXcd up = (eye - b.rdu * a.rud).partialPivLu().solve(b.tuu);
    ScatterMatrix s;
    s.tdd = b.tdd * down;
    s.rdu = a.rdu + a.tuu * b.rdu * down;
    s.rud = b.rud + b.tdd * a.rud * up;
    s.tuu = a.tuu * up;
    return s;
}

ScatterMatrix interface_scatter(const LayerModes& upper, const LayerModes& lower) {
    const MatrixXcd p = upper.W.partialPivLu().solve(lower.W);
    const MatrixXcd q = upper.V.partialPivLu().solve(lower.V);
    const MatrixXcd sum = p + q;
    const MatrixXcd diff = p - q;
    const MatrixXcd inv = sum.partialPivLu().inverse();
    ScatterMatrix s;
    s.tdd = 2.0 * inv;
    s.rud = -inv * diff;
    s.rdu = diff * inv;
    s.tuu = 0.5 * (sum - diff * inv * diff);
    return s;
}

ScatterMatrix propagation_scatter(const LayerModes& modes) {
    const Eigen::Index n = modes.g.size();
    ScatterMatrix s;
    s.tdd = MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.tdd(i, i) = std::exp(kI * modes.g[i] * modes.phase_thickness);
    }
    s.tuu = s.tdd;
    s.rud = MatrixXcd::Zero(n, n);
    s.rdu = MatrixXcd::Zero(n, n);
    return s;
}

VectorXcd mode_constants(const VectorXcd& eigenvalues) {
    VectorXcd g(eigenvalues.size());
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        cd gi = std::sqrt(-eigenvalues[i]);
        if (gi.imag() < 0.0) {
            gi = -gi;
        }
        if (std::abs(gi.imag()) < 1e-14 * std::abs(gi) && gi.real() < 0.0) {
            gi = -gi;
        }
        g[i] = gi;
    }
    return g;
}

LayerModes homogeneous_modes(cd eps, const std::vector<double>& sx, Polarization pol,
                             double phase_thickness) {
    const Eigen::Index n = static_cast<Eigen::Index>(sx.size());
    LayerModes modes;
    modes.W = MatrixXcd::Identity(n, n);
    modes.V = MatrixXcd::Zero(n, n);
    modes.g = VectorXcd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const cd g = kz_unit(eps, sx[static_cast<std::size_t>(i)]);
        modes.g[i] = g;
        modes.V(i, i) = pol == Polarization::te ? g : g / eps;
    }
    modes.phase_thickness = phase_thickness;
    return modes;
}

// Toeplitz matrix whose (m, n) entry is coefficient m - n of the lamellar
// profile taking value vw on the wires and vg in the gaps.
MatrixXcd lamellar_toeplitz(cd vw, cd vg, double fill, Eigen::Index n) {
    MatrixXcd t(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index c = 0; c < n; ++c) {
            const int p = static_cast<int>(m - c);
            if (p == 0) {
                t(m, c) = fill * vw + (1.0 - fill) * vg;
            } else {
                t(m, c) = (vw - vg) * std::sin(std::numbers::pi * p * fill) /
                          (std::numbers::pi * p);
            }
        }
    }
    return t;
}

struct GratingContext {
    MatrixXcd eps_toeplitz;     // [[eps]]
    MatrixXcd wire_indicator;   // wire-region overlap weights
    cd eps_wire, eps_gap;
    double fill = 0.0;
};

LayerModes grating_modes(const GratingContext& ctx, const std::vector<double>& sx,
                         Polarization pol, double phase_thickness) {
    const Eigen::Index n = static_cast<Eigen::Index>(sx.size());
    MatrixXcd kx = MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        kx(i, i) = sx[static_cast<std::size_t>(i)];
    }
    MatrixXcd system;
    MatrixXcd recip;
    if (pol == Polarization::te) {
        system = kx * kx - ctx.eps_toeplitz;
    } else {
        recip = lamellar_toeplitz(1.0 / ctx.eps_wire, 1.0 / ctx.eps_gap, ctx.fill, n);
        const MatrixXcd inner = kx * ctx.eps_toeplitz.partialPivLu().solve(kx.eval()) -
                                MatrixXcd::Identity(n, n);
        system = recip.partialPivLu().solve(inner);
    }
    Eigen::ComplexEigenSolver<MatrixXcd> solver(system);
    if (solver.info() != Eigen::Success) {
        throw solver_error("grating eigenproblem failed to converge");
    }
    LayerModes modes;
    modes.W = solver.eigenvectors();
    modes.g = mode_constants(solver.eigenvalues());
    if (pol == Polarization::te) {
        modes.V = modes.W * modes.g.asDiagonal();
    } else {
        modes.V = recip * modes.W * modes.g.asDiagonal();
    }
    modes.phase_thickness = phase_thickness;
    return modes;
}

// integral_0^d e^{i x t} dt with a series fallback near x = 0.
cd phase_integral(cd x, double d) {
    const cd xd = x * d;
    if (std::abs(xd) < 1e-8) {
        return d * (1.0 + kI * xd / 2.0 - xd * xd / 6.0);
    }
    return (std::exp(kI * xd) - 1.0) / (kI * x);
}

// Overlap integrals of the per-mode z profiles over one layer. psi_i(t) =
// e^{i g_i t} s+_i + e^{i g_i (d - t)} s-_i; same[i][j] multiplies the
// (s+, s+) and (s-, s-) products, cross[i][j] the mixed ones. Only bounded
// exponentials of the decaying constants appear.
void mode_overlaps(const VectorXcd& g, double d, MatrixXcd& same, MatrixXcd& cross) {
    const Eigen::Index n = g.size();
    same.resize(n, n);
    cross.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const cd gi_conj = std::conj(g[i]);
        for (Eigen::Index j = 0; j < n; ++j) {
            same(i, j) = phase_integral(g[j] - gi_conj, d);
            const cd y = gi_conj + g[j];
            if (std::abs(y * d) < 1e-8) {
                cross(i, j) = std::exp(kI * g[j] * d) * d *
                              (1.0 - kI * y * d / 2.0 - y * y * d * d / 6.0);
            } else {
                cross(i, j) = (std::exp(kI * g[j] * d) - std::exp(-kI * gi_conj * d)) /
                              (kI * y);
            }
        }
    }
}

// integral over the layer of x(t)^H weight x(t) for x(t) = P (D+(t) s+ +
// D-(t) s-), given the precomputed per-mode overlaps.
double weighted_field_integral(const MatrixXcd& weight, const MatrixXcd& p,
                               const VectorXcd& splus, const VectorXcd& sminus,
                               const MatrixXcd& same, const MatrixXcd& cross) {
    const MatrixXcd gram = p.adjoint() * weight * p;
    const Eigen::Index n = splus.size();
    cd sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const cd pp = std::conj(splus[i]) * splus[j] + std::conj(sminus[i]) * sminus[j];
            const cd pm = std::conj(splus[i]) * sminus[j] + std::conj(sminus[i]) * splus[j];
            sum += gram(i, j) * (pp * same(i, j) + pm * cross(i, j));
        }
    }
    return sum.real();
}

}  // namespace

OpticalMaterial OpticalMaterial::constant(double n, double k) {
    require_index_values(n, k);
    OpticalMaterial material;
    material.samples_ = {{0.0, n, k}};
    return material;
}

OpticalMaterial OpticalMaterial::table(std::vector<IndexSample> samples) {
    if (samples.size() < 2) {
        throw validation_error("a material table needs at least two samples");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].wavelength) || samples[i].wavelength <= 0.0) {
            throw validation_error("material table wavelengths must be positive");
        }
        if (i > 0 && samples[i].wavelength <= samples[i - 1].wavelength) {
            throw validation_error("material table wavelengths must be strictly increasing");
        }
        require_index_values(samples[i].n, samples[i].k);
    }
    OpticalMaterial material;
    material.samples_ = std::move(samples);
    material.constant_ = false;
    return material;
}

std::complex<double> OpticalMaterial::index_at(double wavelength) const {
    if (samples_.empty()) {
        throw validation_error("optical material is uninitialized");
    }
    if (constant_) {
        return {samples_.front().n, samples_.front().k};
    }
    if (wavelength < samples_.front().wavelength || wavelength > samples_.back().wavelength) {
        throw validation_error("wavelength outside the material table range");
    }
    const auto upper = std::lower_bound(
        samples_.begin(), samples_.end(), wavelength,
        [](const IndexSample& s, double w) { return s.wavelength < w; });
    if (upper == samples_.begin()) {
        return {upper->n, upper->k};
    }
    const IndexSample& hi = *upper;
    const IndexSample& lo = *(upper - 1);
    const double f = (wavelength - lo.wavelength) / (hi.wavelength - lo.wavelength);
    return {lo.n + f * (hi.n - lo.n), lo.k + f * (hi.k - lo.k)};
}

std::complex<double> OpticalMaterial::permittivity_at(double wavelength) const {
    const cd n = index_at(wavelength);
    return n * n;
}

AbsorptionResult tmm_solve(const LayerStack& stack, const PlaneWave& wave) {
    validate_wave(wave);
    validate_stack(stack, wave.wavelength);
    return tmm_solve_impl(stack, wave);
}

AbsorptionResult rcwa_solve(const LayerStack& stack, const Grating1D& grating,
                            const PlaneWave& wave, int harmonics) {
    validate_wave(wave);
    validate_stack(stack, wave.wavelength);
    validate_grating(grating, stack);
    validate_harmonics(harmonics);

    const double lambda = wave.wavelength;
    const double k0 = 2.0 * std::numbers::pi / lambda;
    const Polarization pol = wave.polarization;
    const Eigen::Index n = harmonics;
    const int max_order = harmonics / 2;

    const double sx0 = stack.ambient.index_at(lambda).real() * std::sin(wave.incidence_angle);
    std::vector<double> sx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        sx[static_cast<std::size_t>(i)] =
            sx0 + static_cast<double>(i - max_order) * lambda / grating.period;
    }

    GratingContext ctx;
    ctx.eps_wire = grating.wire.permittivity_at(lambda);
    ctx.eps_gap = grating.gap.permittivity_at(lambda);
    ctx.fill = grating.fill_factor;
    ctx.eps_toeplitz = lamellar_toeplitz(ctx.eps_wire, ctx.eps_gap, ctx.fill, n);
    ctx.wire_indicator = lamellar_toeplitz(1.0, 0.0, ctx.fill, n);

    const cd eps_amb = stack.ambient.permittivity_at(lambda);
    const cd eps_sub = stack.substrate.permittivity_at(lambda);
    const std::size_t count = stack.layers.size();

    std::vector<LayerModes> media;
    media.reserve(count + 2);
    media.push_back(homogeneous_modes(eps_amb, sx, pol, 0.0));
    for (std::size_t i = 0; i < count; ++i) {
        const double pd = k0 * stack.layers[i].thickness;
        if (i == grating.host_layer) {
            media.push_back(grating_modes(ctx, sx, pol, pd));
        } else {
            media.push_back(
                homogeneous_modes(stack.layers[i].material.permittivity_at(lambda), sx, pol, pd));
        }
    }
    media.push_back(homogeneous_modes(eps_sub, sx, pol, 0.0));

    // Sweep downward collecting, for every layer, the scattering matrix of
    // everything above its interior; then upward for everything below.
    std::vector<ScatterMatrix> above(count);
    ScatterMatrix total = ScatterMatrix::identity(n);
    for (std::size_t i = 1; i < media.size(); ++i) {
        total = star(total, interface_scatter(media[i - 1], media[i]));
        if (i <= count) {
            above[i - 1] = total;
            total = star(total, propagation_scatter(media[i]));
        }
    }
    std::vector<ScatterMatrix> below(count);
    ScatterMatrix lower = ScatterMatrix::identity(n);
    for (std::size_t i = count; i >= 1; --i) {
        lower = star(interface_scatter(media[i], media[i + 1]), lower);
        below[i - 1] = lower;
        if (i > 1) {
            lower = star(propagation_scatter(media[i]), lower);
        }
    }

    VectorXcd incident = VectorXcd::Zero(n);
    incident[max_order] = 1.0;
    const VectorXcd reflected = total.rdu * incident;
    const VectorXcd transmitted = total.tdd * incident;

    const auto order_flux = [&](const LayerModes& medium, cd eps, const VectorXcd& amps) {
        double flux = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const cd q = pol == Polarization::te ? medium.g[i] : medium.g[i] / eps;
            flux += q.real() * std::norm(amps[i]);
        }
        return flux;
    };
    const cd q0c = pol == Polarization::te ? media.front().g[max_order]
                                           : media.front().g[max_order] / eps_amb;
    const double q0 = q0c.real();

    AbsorptionResult result;
    result.reflectance = order_flux(media.front(), eps_amb, reflected) / q0;
    result.transmittance = order_flux(media.back(), eps_sub, transmitted) / q0;
    result.absorption_per_layer.resize(count, 0.0);

    MatrixXcd kx = MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        kx(i, i) = sx[static_cast<std::size_t>(i)];
    }
    const MatrixXcd eye = MatrixXcd::Identity(n, n);

    MatrixXcd same;
    MatrixXcd cross;
    for (std::size_t i = 0; i < count; ++i) {
        const bool is_grating = i == grating.host_layer;
        const cd eps_layer =
            is_grating ? cd{} : stack.layers[i].material.permittivity_at(lambda);
        const bool lossy = is_grating
                               ? (ctx.eps_wire.imag() != 0.0 || ctx.eps_gap.imag() != 0.0)
                               : eps_layer.imag() != 0.0;
        if (!lossy) {
            continue;
        }
        const LayerModes& modes = media[i + 1];
        const MatrixXcd phases = propagation_scatter(modes).tdd;
        const MatrixXcd bounce = above[i].rud * phases * below[i].rdu * phases;
        const VectorXcd cplus =
            (eye - bounce).partialPivLu().solve(MatrixXcd(above[i].tdd)) * incident;
        const VectorXcd cminus = below[i].rdu * phases * cplus;
        mode_overlaps(modes.g, modes.phase_thickness, same, cross);

        // E_y overlaps for TE. For TM, E_x is discontinuous at the wire
        // walls, so its weighted integral goes through the continuous
        // D_x = eps E_x (whose Fourier map is W Gamma) with the weight
        // carrying 1/|eps|^2; E_z is continuous and integrates directly.
        if (is_grating) {
            const MatrixXcd gap_indicator = eye - ctx.wire_indicator;
            double wire = 0.0;
            double gap = 0.0;
            if (pol == Polarization::te) {
                wire = ctx.eps_wire.imag() *
                       weighted_field_integral(ctx.wire_indicator, modes.W, cplus, cminus,
                                               same, cross);
                gap = ctx.eps_gap.imag() *
                      weighted_field_integral(gap_indicator, modes.W, cplus, cminus, same,
                                              cross);
            } else {
                const MatrixXcd dx_map = modes.W * modes.g.asDiagonal();
                const MatrixXcd ez_map = -ctx.eps_toeplitz.partialPivLu().solve(kx * modes.W);
                const double wire_dx =
                    weighted_field_integral(ctx.wire_indicator, dx_map, cplus, -cminus, same,
                                            cross);
                const double wire_ez = weighted_field_integral(ctx.wire_indicator, ez_map,
                                                               cplus, cminus, same, cross);
                const double gap_dx = weighted_field_integral(gap_indicator, dx_map, cplus,
                                                              -cminus, same, cross);
                const double gap_ez =
                    weighted_field_integral(gap_indicator, ez_map, cplus, cminus, same, cross);
                wire = ctx.eps_wire.imag() *
                       (wire_dx / std::norm(ctx.eps_wire) + wire_ez);
                gap = ctx.eps_gap.imag() * (gap_dx / std::norm(ctx.eps_gap) + gap_ez);
            }
            result.wire_absorption = wire / q0;
            result.gap_absorption = gap / q0;
            result.absorption_per_layer[i] = (wire + gap) / q0;
        } else {
            double integral = 0.0;
            if (pol == Polarization::te) {
                integral = weighted_field_integral(eye, modes.W, cplus, cminus, same, cross);
            } else {
                const MatrixXcd dx_map = modes.W * modes.g.asDiagonal();
                const MatrixXcd ez_map = -(kx / eps_layer) * modes.W;
                integral = weighted_field_integral(eye, dx_map, cplus, -cminus, same, cross) /
                               std::norm(eps_layer) +
                           weighted_field_integral(eye, ez_map, cplus, cminus, same, cross);
            }
            result.absorption_per_layer[i] = eps_layer.imag() * integral / q0;
        }
    }
    return result;
}

namespace {

double objective_absorption(const AbsorptionResult& result, bool grating,
                            std::size_t objective_layer) {
    return grating ? result.wire_absorption
                   : result.absorption_per_layer.at(objective_layer);
}

AbsorptionResult solve_either(const LayerStack& stack,
                              const std::optional<Grating1D>& grating,
                              const PlaneWave& wave, int harmonics) {
    return grating ? rcwa_solve(stack, *grating, wave, harmonics)
                   : tmm_solve(stack, wave);
}

}  // namespace

SpacerScan optimize_spacer(const LayerStack& stack, const std::optional<Grating1D>& grating,
                           const PlaneWave& wave, std::size_t spacer_layer,
                           std::size_t objective_layer, double thickness_lo,
                           double thickness_hi, double step, int harmonics) {
    if (spacer_layer >= stack.layers.size()) {
        throw validation_error("spacer layer index is out of range");
    }
    if (!grating && objective_layer >= stack.layers.size()) {
        throw validation_error("objective layer index is out of range");
    }
    if (!std::isfinite(thickness_lo) || !std::isfinite(thickness_hi) ||
        !std::isfinite(step) || thickness_lo <= 0.0 || step <= 0.0 ||
        thickness_hi < thickness_lo) {
        throw validation_error("thickness range must satisfy 0 < lo <= hi with step > 0");
    }

    LayerStack trial = stack;
    SpacerScan scan;
    scan.best_absorption = -1.0;
    const auto steps = static_cast<std::size_t>(
        std::floor((thickness_hi - thickness_lo) / step * (1.0 + 1e-12)));
    for (std::size_t i = 0; i <= steps + 1; ++i) {
        double thickness = thickness_lo + static_cast<double>(i) * step;
        if (i == steps + 1) {
            // close the range exactly when the step does not divide it
            if (thickness_lo + static_cast<double>(steps) * step >=
                thickness_hi * (1.0 - 1e-12)) {
                break;
            }
            thickness = thickness_hi;
        }
        trial.layers[spacer_layer].thickness = thickness;
        const AbsorptionResult result = solve_either(trial, grating, wave, harmonics);
        const double objective =
            objective_absorption(result, grating.has_value(), objective_layer);
        scan.curve.push_back(
            {thickness, result.reflectance, result.transmittance, objective});
        if (objective > scan.best_absorption) {
            scan.best_absorption = objective;
            scan.best_thickness = thickness;
        }
    }
    return scan;
}

RejectionResult rejection_ratio(const LayerStack& stack,
                                const std::optional<Grating1D>& grating, const PlaneWave& uv,
                                const PlaneWave& ir, std::size_t objective_layer,
                                int harmonics) {
    if (!grating && objective_layer >= stack.layers.size()) {
        throw validation_error("objective layer index is out of range");
    }
    const double uv_abs = objective_absorption(solve_either(stack, grating, uv, harmonics),
                                               grating.has_value(), objective_layer);
    const double ir_abs = objective_absorption(solve_either(stack, grating, ir, harmonics),
                                               grating.has_value(), objective_layer);
    if (ir_abs == 0.0) {
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {uv_abs / ir_abs, false};
}

}  // namespace trapdet::optics
