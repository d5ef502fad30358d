#include "trapdet/circuit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace trapdet::circuit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

// Below this |sin(theta)| a transmission line is treated as the ideal
// limit V_b = cos(theta) * V_a with an explicit current unknown, because
// the admittance form divides by sin(theta).
constexpr double kDegenerateLineSine = 1e-12;

void check_positive(double v, const char* what) {
    if (!std::isfinite(v) || v <= 0.0) {
        throw validation_error(std::string(what) + " must be positive and finite");
    }
}

void check_element(const Element& el, std::size_t index) {
    const std::string label = "element " + std::to_string(index);
    if (el.node_a < 0 || el.node_b < 0) {
        throw validation_error(label + " references a negative node id");
    }
    if (el.node_a == el.node_b) {
        throw validation_error(label + " connects node " + std::to_string(el.node_a) +
                               " to itself");
    }
    switch (el.kind) {
        case ElementKind::resistor:
            check_positive(el.value, "resistance");
            break;
        case ElementKind::capacitor:
            check_positive(el.value, "capacitance");
            break;
        case ElementKind::inductor:
            check_positive(el.value, "inductance");
            break;
        case ElementKind::transmission_line:
            check_positive(el.z0, "characteristic impedance");
            if (!std::isfinite(el.electrical_length) || el.electrical_length < 0.0) {
                throw validation_error("electrical length must be non-negative and finite");
            }
            break;
        case ElementKind::voltage_source:
        case ElementKind::current_source:
            if (!std::isfinite(el.source.real()) || !std::isfinite(el.source.imag())) {
                throw validation_error(label + " has a non-finite source amplitude");
            }
            break;
    }
}

// Union-find over node ids, used to name floating subcircuits before the
// matrix has a chance to go silently singular.
struct DisjointSet {
    std::map<int, int> parent;

    int find(int x) {
        auto it = parent.find(x);
        if (it == parent.end()) {
            parent[x] = x;
            return x;
        }
        while (it->second != it->first) {
            it->second = parent[it->second];
            it = parent.find(it->second);
        }
        return it->first;
    }

    void unite(int a, int b) { parent[find(a)] = find(b); }
};

void check_connectivity(const Netlist& netlist, const std::set<int>& used) {
    DisjointSet ds;
    for (int n : used) ds.find(n);
    for (const Element& el : netlist.elements) {
        switch (el.kind) {
            case ElementKind::resistor:
            case ElementKind::capacitor:
            case ElementKind::inductor:
            case ElementKind::voltage_source:
                ds.unite(el.node_a, el.node_b);
                break;
            case ElementKind::transmission_line:
                // Both ports are referenced to ground through the shield.
                ds.unite(el.node_a, el.node_b);
                ds.unite(el.node_a, 0);
                break;
            case ElementKind::current_source:
                // Forces a current but provides no voltage reference.
                break;
        }
    }
    const int ground_root = ds.find(0);
    std::vector<int> floating;
    for (int n : used) {
        if (ds.find(n) != ground_root) floating.push_back(n);
    }
    if (!floating.empty()) {
        std::ostringstream msg;
        msg << "nodes {";
        for (std::size_t i = 0; i < floating.size(); ++i) {
            if (i > 0) msg << ", ";
            msg << floating[i];
        }
        msg << "} have no conducting path to ground";
        throw validation_error(msg.str());
    }
}

double wrap_to_two_pi(double phase) {
    double p = std::fmod(phase, 2.0 * kPi);
    if (p < 0.0) p += 2.0 * kPi;
    return p;
}

}  // namespace

void Netlist::add_resistor(int a, int b, double ohms) {
    Element el;
    el.kind = ElementKind::resistor;
    el.node_a = a;
    el.node_b = b;
    el.value = ohms;
    elements.push_back(el);
}

void Netlist::add_capacitor(int a, int b, double farads) {
    Element el;
    el.kind = ElementKind::capacitor;
    el.node_a = a;
    el.node_b = b;
    el.value = farads;
    elements.push_back(el);
}

void Netlist::add_inductor(int a, int b, double henries) {
    Element el;
    el.kind = ElementKind::inductor;
    el.node_a = a;
    el.node_b = b;
    el.value = henries;
    elements.push_back(el);
}

void Netlist::add_transmission_line(int a, int b, double z0, double electrical_length) {
    Element el;
    el.kind = ElementKind::transmission_line;
    el.node_a = a;
    el.node_b = b;
    el.z0 = z0;
    el.electrical_length = electrical_length;
    elements.push_back(el);
}

void Netlist::add_voltage_source(int a, int b, complexd volts) {
    Element el;
    el.kind = ElementKind::voltage_source;
    el.node_a = a;
    el.node_b = b;
    el.source = volts;
    elements.push_back(el);
}

void Netlist::add_current_source(int a, int b, complexd amperes) {
    Element el;
    el.kind = ElementKind::current_source;
    el.node_a = a;
    el.node_b = b;
    el.source = amperes;
    elements.push_back(el);
}

AcSolution ac_solve(const Netlist& netlist, double omega) {
    if (netlist.elements.empty()) {
        throw validation_error("circuit has no elements");
    }
    check_positive(omega, "angular frequency");

    std::set<int> used;
    for (std::size_t i = 0; i < netlist.elements.size(); ++i) {
        check_element(netlist.elements[i], i);
        used.insert(netlist.elements[i].node_a);
        used.insert(netlist.elements[i].node_b);
    }
    if (used.count(0) == 0) {
        throw validation_error("no element references node 0 (ground)");
    }
    check_connectivity(netlist, used);

    // Matrix layout: one KCL row per non-ground node, then one constraint
    // row per extra current unknown (ideal voltage sources and degenerate
    // transmission lines).
    std::map<int, int> row_of;
    int next_row = 0;
    for (int n : used) {
        if (n != 0) row_of[n] = next_row++;
    }

    struct ExtraUnknown {
        std::size_t element;
        int row;
    };
    std::vector<ExtraUnknown> extras;
    for (std::size_t i = 0; i < netlist.elements.size(); ++i) {
        const Element& el = netlist.elements[i];
        const bool degenerate_line =
            el.kind == ElementKind::transmission_line &&
            std::abs(std::sin(el.electrical_length)) < kDegenerateLineSine;
        if (el.kind == ElementKind::voltage_source || degenerate_line) {
            extras.push_back({i, next_row++});
        }
    }
    const int dim = next_row;

    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim);
    const complexd j(0.0, 1.0);

    auto row = [&](int node) { return node == 0 ? -1 : row_of.at(node); };
    auto stamp_admittance = [&](int a, int b, complexd y) {
        const int ra = row(a);
        const int rb = row(b);
        if (ra >= 0) A(ra, ra) += y;
        if (rb >= 0) A(rb, rb) += y;
        if (ra >= 0 && rb >= 0) {
            A(ra, rb) -= y;
            A(rb, ra) -= y;
        }
    };

    std::size_t next_extra = 0;
    for (std::size_t i = 0; i < netlist.elements.size(); ++i) {
        const Element& el = netlist.elements[i];
        const int ra = row(el.node_a);
        const int rb = row(el.node_b);
        switch (el.kind) {
            case ElementKind::resistor:
                stamp_admittance(el.node_a, el.node_b, 1.0 / el.value);
                break;
            case ElementKind::capacitor:
                stamp_admittance(el.node_a, el.node_b, j * omega * el.value);
                break;
            case ElementKind::inductor:
                stamp_admittance(el.node_a, el.node_b, 1.0 / (j * omega * el.value));
                break;
            case ElementKind::transmission_line: {
                const double s = std::sin(el.electrical_length);
                const double c = std::cos(el.electrical_length);
                if (std::abs(s) >= kDegenerateLineSine) {
                    // Lossless two-port admittance with both port currents
                    // taken into the line.
                    const complexd ys = 1.0 / (j * el.z0 * s);
                    const complexd y11 = c * ys;
                    const complexd y12 = -ys;
                    if (ra >= 0) A(ra, ra) += y11;
                    if (rb >= 0) A(rb, rb) += y11;
                    if (ra >= 0 && rb >= 0) {
                        A(ra, rb) += y12;
                        A(rb, ra) += y12;
                    }
                } else {
                    // Ideal limit: V_a = c * V_b with c = +/-1, and the
                    // port-b current is c times the port-a current.
                    const int rx = extras[next_extra++].row;
                    const double c_sign = c < 0.0 ? -1.0 : 1.0;
                    if (ra >= 0) A(rx, ra) += 1.0;
                    if (rb >= 0) A(rx, rb) -= c_sign;
                    if (ra >= 0) A(ra, rx) += 1.0;
                    if (rb >= 0) A(rb, rx) -= c_sign;
                }
                break;
            }
            case ElementKind::voltage_source: {
                const int rx = extras[next_extra++].row;
                if (ra >= 0) A(rx, ra) += 1.0;
                if (rb >= 0) A(rx, rb) -= 1.0;
                rhs(rx) = el.source;
                if (ra >= 0) A(ra, rx) += 1.0;
                if (rb >= 0) A(rb, rx) -= 1.0;
                break;
            }
            case ElementKind::current_source:
                if (ra >= 0) rhs(ra) -= el.source;
                if (rb >= 0) rhs(rb) += el.source;
                break;
        }
    }

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
    const Eigen::VectorXcd x = lu.solve(rhs);

    // LU with partial pivoting does not signal singularity, so check the
    // residual of the solve itself.
    const double matrix_scale = A.cwiseAbs().rowwise().sum().maxCoeff();
    const double denom = std::max({rhs.cwiseAbs().maxCoeff(),
                                   matrix_scale * x.cwiseAbs().maxCoeff(), 1e-300});
    const double residual = (A * x - rhs).cwiseAbs().maxCoeff() / denom;
    if (!std::isfinite(residual) || residual > 1e-8) {
        throw solver_error("circuit matrix is singular");
    }

    AcSolution sol;
    const int max_node = *used.rbegin();
    sol.node_voltage.assign(static_cast<std::size_t>(max_node) + 1, complexd(0.0));
    for (int n : used) {
        if (n != 0) sol.node_voltage[static_cast<std::size_t>(n)] = x(row_of.at(n));
    }

    auto voltage = [&](int node) {
        return node == 0 ? complexd(0.0) : x(row_of.at(node));
    };

    sol.branch_current.resize(netlist.elements.size());
    sol.exit_current.resize(netlist.elements.size());
    next_extra = 0;
    for (std::size_t i = 0; i < netlist.elements.size(); ++i) {
        const Element& el = netlist.elements[i];
        const complexd va = voltage(el.node_a);
        const complexd vb = voltage(el.node_b);
        complexd into_a;
        complexd out_b;
        switch (el.kind) {
            case ElementKind::resistor:
                into_a = (va - vb) / el.value;
                out_b = into_a;
                break;
            case ElementKind::capacitor:
                into_a = (va - vb) * j * omega * el.value;
                out_b = into_a;
                break;
            case ElementKind::inductor:
                into_a = (va - vb) / (j * omega * el.value);
                out_b = into_a;
                break;
            case ElementKind::transmission_line: {
                const double s = std::sin(el.electrical_length);
                const double c = std::cos(el.electrical_length);
                if (std::abs(s) >= kDegenerateLineSine) {
                    const complexd ys = 1.0 / (j * el.z0 * s);
                    into_a = c * ys * va - ys * vb;
                    out_b = -(-ys * va + c * ys * vb);
                } else {
                    const complexd current = x(extras[next_extra++].row);
                    const double c_sign = c < 0.0 ? -1.0 : 1.0;
                    into_a = current;
                    out_b = c_sign * current;
                }
                break;
            }
            case ElementKind::voltage_source:
                into_a = x(extras[next_extra++].row);
                out_b = into_a;
                break;
            case ElementKind::current_source:
                into_a = el.source;
                out_b = el.source;
                break;
        }
        sol.branch_current[i] = into_a;
        sol.exit_current[i] = out_b;
    }
    return sol;
}

// --- meander coupling model -------------------------------------------

Termination Termination::shorted() {
    return Termination{Kind::short_circuit, 0.0};
}

Termination Termination::resistor(double ohms) {
    return Termination{Kind::series_resistor, ohms};
}

Termination Termination::open() {
    return Termination{Kind::open_circuit, 0.0};
}

double parallel_plate_capacitance(double area, double gap) {
    check_positive(area, "plate area");
    check_positive(gap, "plate gap");
    return kVacuumPermittivity * area / gap;
}

MeanderCouplingSpec default_meander_spec() {
    MeanderCouplingSpec spec;
    spec.n_segments = 8;
    spec.total_inductance = 550e-9;
    // Coupling strips estimated as parallel plates: the leads present a
    // 130 x 40 um face to the rf electrode across 25 um, each meander
    // junction a 30 x 4 um face across 10 um.
    spec.tap_capacitance.assign(9, parallel_plate_capacitance(30e-6 * 4e-6, 10e-6));
    spec.lead_capacitance_left = parallel_plate_capacitance(130e-6 * 40e-6, 25e-6);
    spec.lead_capacitance_right = spec.lead_capacitance_left;
    spec.lead_left = TransmissionLineSpec{50.0, 0.05};
    spec.lead_right = TransmissionLineSpec{50.0, 0.10};
    spec.termination_left = Termination::shorted();
    spec.termination_right = Termination::resistor(50.0);
    spec.drive = RfDrive{25.0, 2.0 * kPi * 46.23e6};
    return spec;
}

namespace {

void check_meander_spec(const MeanderCouplingSpec& spec) {
    if (spec.n_segments < 1) {
        throw validation_error("meander needs at least one segment");
    }
    check_positive(spec.total_inductance, "total inductance");
    if (spec.tap_capacitance.size() != static_cast<std::size_t>(spec.n_segments) + 1) {
        throw validation_error("tap capacitance list needs one entry per meander junction (" +
                               std::to_string(spec.n_segments + 1) + ")");
    }
    for (double c : spec.tap_capacitance) {
        if (!std::isfinite(c) || c < 0.0) {
            throw validation_error("tap capacitances must be non-negative and finite");
        }
    }
    for (double c : {spec.lead_capacitance_left, spec.lead_capacitance_right}) {
        if (!std::isfinite(c) || c < 0.0) {
            throw validation_error("lead capacitances must be non-negative and finite");
        }
    }
    for (const TransmissionLineSpec& tl : {spec.lead_left, spec.lead_right}) {
        check_positive(tl.z0, "lead characteristic impedance");
        if (!std::isfinite(tl.electrical_length) || tl.electrical_length < 0.0) {
            throw validation_error("lead electrical length must be non-negative and finite");
        }
    }
    for (const Termination& term : {spec.termination_left, spec.termination_right}) {
        if (term.kind == Termination::Kind::series_resistor) {
            check_positive(term.resistance, "termination resistance");
        }
    }
    check_positive(spec.drive.omega, "drive frequency");
    if (!std::isfinite(spec.drive.v_pk) || spec.drive.v_pk < 0.0) {
        throw validation_error("drive amplitude must be non-negative and finite");
    }
}

constexpr int kGroundNode = 0;
constexpr int kRfNode = 1;

// Appends one lead: two half-length lines device -> mid -> far with a
// third of the lead capacitance tapped to the rf node at each of the
// three joints. A shorted lead ends directly on ground; tone, when
// given, replaces the grounded end of the termination resistor with an
// ideal source (the Thevenin picture of a tone arriving through the
// coupler).
void append_lead(Netlist& net, int device_node, double lead_capacitance,
                 const TransmissionLineSpec& tl, const Termination& term,
                 const complexd* tone, int& next_node) {
    const double c_third = lead_capacitance / 3.0;
    if (c_third > 0.0) net.add_capacitor(device_node, kRfNode, c_third);
    const int mid = next_node++;
    net.add_transmission_line(device_node, mid, tl.z0, tl.electrical_length / 2.0);
    if (c_third > 0.0) net.add_capacitor(mid, kRfNode, c_third);
    const int far =
        term.kind == Termination::Kind::short_circuit ? kGroundNode : next_node++;
    net.add_transmission_line(mid, far, tl.z0, tl.electrical_length / 2.0);
    if (c_third > 0.0) net.add_capacitor(far, kRfNode, c_third);
    if (term.kind == Termination::Kind::series_resistor) {
        if (tone != nullptr) {
            const int tone_node = next_node++;
            net.add_resistor(far, tone_node, term.resistance);
            net.add_voltage_source(tone_node, kGroundNode, *tone);
        } else {
            net.add_resistor(far, kGroundNode, term.resistance);
        }
    }
}

// tone_right, when non-null, is the effective tone voltage behind the
// right termination resistor. drive_v_pk overrides spec.drive.v_pk so
// the cancellation search can solve the tone-only network.
Netlist build_meander_network_impl(const MeanderCouplingSpec& spec, double drive_v_pk,
                                   const complexd* tone_right) {
    check_meander_spec(spec);
    if (tone_right != nullptr &&
        spec.termination_right.kind != Termination::Kind::series_resistor) {
        throw validation_error(
            "cancellation tone needs a resistive right termination to enter through");
    }

    Netlist net;
    net.add_voltage_source(kRfNode, kGroundNode, complexd(drive_v_pk, 0.0));

    const int n = spec.n_segments;
    auto junction = [](int k) { return 2 + k; };
    const double segment_inductance = spec.total_inductance / n;
    for (int k = 0; k < n; ++k) {
        net.add_inductor(junction(k), junction(k + 1), segment_inductance);
    }
    for (int k = 0; k <= n; ++k) {
        if (spec.tap_capacitance[static_cast<std::size_t>(k)] > 0.0) {
            net.add_capacitor(junction(k), kRfNode,
                              spec.tap_capacitance[static_cast<std::size_t>(k)]);
        }
    }

    int next_node = junction(n) + 1;
    append_lead(net, junction(0), spec.lead_capacitance_left, spec.lead_left,
                spec.termination_left, nullptr, next_node);
    append_lead(net, junction(n), spec.lead_capacitance_right, spec.lead_right,
                spec.termination_right, tone_right, next_node);
    return net;
}

InducedCurrentProfile profile_from_segments(std::vector<complexd> segments) {
    InducedCurrentProfile profile;
    profile.segment_current = std::move(segments);
    double min_mag = std::numeric_limits<double>::infinity();
    double max_mag = 0.0;
    complexd mean(0.0);
    for (const complexd& c : profile.segment_current) {
        min_mag = std::min(min_mag, std::abs(c));
        max_mag = std::max(max_mag, std::abs(c));
        mean += c;
    }
    profile.min_magnitude = profile.segment_current.empty() ? 0.0 : min_mag;
    profile.max_magnitude = max_mag;
    if (max_mag == 0.0) {
        profile.phase_span = 0.0;
        return profile;
    }
    // Rotate the mean to zero phase so the span does not depend on the
    // arbitrary overall reference (and cannot straddle the branch cut
    // unless the spread itself approaches pi).
    const double ref = std::abs(mean) > 0.0 ? std::arg(mean) : 0.0;
    const complexd derotate = std::polar(1.0, -ref);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const complexd& c : profile.segment_current) {
        const double angle = std::arg(c * derotate);
        lo = std::min(lo, angle);
        hi = std::max(hi, angle);
    }
    profile.phase_span = hi - lo;
    return profile;
}

std::vector<complexd> segment_currents(const Netlist& net, const AcSolution& sol) {
    std::vector<complexd> segments;
    for (std::size_t i = 0; i < net.elements.size(); ++i) {
        if (net.elements[i].kind == ElementKind::inductor) {
            segments.push_back(sol.branch_current[i]);
        }
    }
    return segments;
}

// Golden-section minimum of fn over [lo, hi]; returns the best x seen.
template <typename Fn>
double golden_section_min(Fn&& fn, double lo, double hi) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = fn(x1);
    double f2 = fn(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = fn(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

}  // namespace

Netlist build_meander_network(const MeanderCouplingSpec& spec) {
    return build_meander_network_impl(spec, spec.drive.v_pk, nullptr);
}

InducedCurrentProfile induced_currents(const MeanderCouplingSpec& spec) {
    const Netlist net = build_meander_network(spec);
    const AcSolution sol = ac_solve(net, spec.drive.omega);
    return profile_from_segments(segment_currents(net, sol));
}

CancellationResult optimize_cancellation(const MeanderCouplingSpec& spec,
                                         const ToneSearch& search) {
    if (spec.termination_right.kind != Termination::Kind::series_resistor) {
        throw validation_error(
            "cancellation tone needs a resistive right termination to enter through");
    }
    if (!std::isfinite(search.amplitude_lo) || !std::isfinite(search.amplitude_hi) ||
        search.amplitude_lo < 0.0 ||
        (search.amplitude_hi > 0.0 && search.amplitude_hi < search.amplitude_lo)) {
        throw validation_error("tone amplitude range must satisfy 0 <= lo <= hi");
    }
    if (!std::isfinite(search.phase_lo) || !std::isfinite(search.phase_hi) ||
        search.phase_hi < search.phase_lo) {
        throw validation_error("tone phase range must satisfy lo <= hi");
    }
    if (search.amplitude_points < 1 || search.phase_points < 1) {
        throw validation_error("tone search needs at least one grid point per axis");
    }
    if (search.refine_rounds < 0) {
        throw validation_error("refine rounds must be non-negative");
    }
    if (!std::isfinite(search.coupling_attenuation_db)) {
        throw validation_error("coupling attenuation must be finite");
    }

    // The network is linear, so segment currents for any tone are the
    // drive-only solution plus the tone amplitude times the unit-tone
    // solution. Two solves cover the whole search.
    const complexd zero_tone(0.0);
    const complexd unit_tone(1.0);
    const Netlist base_net = build_meander_network_impl(spec, spec.drive.v_pk, &zero_tone);
    const Netlist unit_net = build_meander_network_impl(spec, 0.0, &unit_tone);
    const std::vector<complexd> base =
        segment_currents(base_net, ac_solve(base_net, spec.drive.omega));
    const std::vector<complexd> unit =
        segment_currents(unit_net, ac_solve(unit_net, spec.drive.omega));

    const double attenuation = std::pow(10.0, -search.coupling_attenuation_db / 20.0);
    auto cost = [&](double amplitude, double phase) {
        const complexd scale = attenuation * std::polar(amplitude, phase);
        double worst = 0.0;
        for (std::size_t k = 0; k < base.size(); ++k) {
            worst = std::max(worst, std::abs(base[k] + scale * unit[k]));
        }
        return worst;
    };

    // Resolve the automatic amplitude bound: if the tone and drive
    // profiles were proportional, base_max / (attenuation * unit_max)
    // would cancel the largest segment outright; search up to twice that.
    double amplitude_hi = search.amplitude_hi;
    if (amplitude_hi <= 0.0) {
        double base_max = 0.0;
        double unit_max = 0.0;
        for (const complexd& c : base) base_max = std::max(base_max, std::abs(c));
        for (const complexd& c : unit) unit_max = std::max(unit_max, std::abs(c));
        amplitude_hi = unit_max > 0.0
                           ? 2.0 * base_max / (attenuation * unit_max)
                           : search.amplitude_lo;
        amplitude_hi = std::max(amplitude_hi, search.amplitude_lo);
    }

    const double amp_step = search.amplitude_points > 1
                                ? (amplitude_hi - search.amplitude_lo) /
                                      (search.amplitude_points - 1)
                                : 0.0;
    const double phase_step =
        (search.phase_hi - search.phase_lo) / search.phase_points;

    double best_amp = search.amplitude_lo;
    double best_phase = search.phase_lo;
    double best_cost = cost(best_amp, best_phase);
    for (int i = 0; i < search.amplitude_points; ++i) {
        const double a = search.amplitude_lo + amp_step * i;
        for (int p = 0; p < search.phase_points; ++p) {
            const double ph = search.phase_lo + phase_step * p;
            const double c = cost(a, ph);
            if (c < best_cost) {
                best_cost = c;
                best_amp = a;
                best_phase = ph;
            }
        }
    }

    for (int round = 0; round < search.refine_rounds; ++round) {
        if (amp_step > 0.0) {
            const double lo = std::max(search.amplitude_lo, best_amp - amp_step);
            const double hi = std::min(amplitude_hi, best_amp + amp_step);
            const double a = golden_section_min(
                [&](double x) { return cost(x, best_phase); }, lo, hi);
            if (cost(a, best_phase) < best_cost) {
                best_amp = a;
                best_cost = cost(a, best_phase);
            }
        }
        if (phase_step > 0.0) {
            const double p = golden_section_min(
                [&](double x) { return cost(best_amp, x); }, best_phase - phase_step,
                best_phase + phase_step);
            if (cost(best_amp, p) < best_cost) {
                best_phase = p;
                best_cost = cost(best_amp, p);
            }
        }
    }

    CancellationResult result;
    result.tone.amplitude = best_amp;
    result.tone.phase = wrap_to_two_pi(best_phase);
    result.tone.source_impedance = spec.termination_right.resistance;
    result.tone.coupling_attenuation_db = search.coupling_attenuation_db;

    const complexd scale = attenuation * std::polar(best_amp, best_phase);
    std::vector<complexd> residual(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
        residual[k] = base[k] + scale * unit[k];
    }
    result.residual = profile_from_segments(std::move(residual));
    return result;
}

}  // namespace trapdet::circuit
