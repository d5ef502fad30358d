#pragma once

#include <complex>
#include <vector>

#include "trapdet/errors.hpp"

namespace trapdet::circuit {

using complexd = std::complex<double>;

// Frequency-domain linear circuits with the engineering time convention
// e^{+i omega t}: an inductor's impedance is +i*omega*L, so the current
// through an inductor across an ideal source lags the voltage by 90
// degrees. Nodes are non-negative integers and node 0 is ground; a node
// exists once an element references it.
enum class ElementKind {
    resistor,
    capacitor,
    inductor,
    transmission_line,
    voltage_source,
    current_source,
};

// One two-terminal element (or two-port line) between node_a and node_b.
// value holds ohms, farads, or henries depending on kind; transmission
// lines are lossless, characterized by z0 and their electrical length in
// radians at the analysis frequency, with both ports referenced to
// ground. source holds the complex amplitude for sources.
struct Element {
    ElementKind kind = ElementKind::resistor;
    int node_a = 0;
    int node_b = 0;
    double value = 0.0;
    double z0 = 0.0;
    double electrical_length = 0.0;
    complexd source = 0.0;
};

struct Netlist {
    std::vector<Element> elements;

    void add_resistor(int a, int b, double ohms);
    void add_capacitor(int a, int b, double farads);
    void add_inductor(int a, int b, double henries);
    void add_transmission_line(int a, int b, double z0, double electrical_length);
    void add_voltage_source(int a, int b, complexd volts);
    void add_current_source(int a, int b, complexd amperes);
};

// Solution of one AC analysis. node_voltage is indexed by node id (ids
// never referenced by an element read as zero). branch_current[k] is the
// current entering element k at node_a; exit_current[k] is the current
// delivered out of the element into node_b. The two are equal for series
// elements and differ for transmission lines, whose ground-referenced
// shield closes the loop.
struct AcSolution {
    std::vector<complexd> node_voltage;
    std::vector<complexd> branch_current;
    std::vector<complexd> exit_current;
};

// Modified nodal analysis at a single angular frequency: admittance
// stamps for R, L, C and transmission lines, constraint rows with a
// current unknown for ideal voltage sources and for degenerate
// (sin(length) = 0) lines, solved by dense LU with partial pivoting.
// Throws validation_error when a group of nodes has no conducting path
// to ground (the nodes are named in the message) and solver_error if the
// assembled matrix is singular for any other reason.
AcSolution ac_solve(const Netlist& netlist, double omega);

// --- meander coupling model -------------------------------------------

// Drive applied to the rf electrode node.
struct RfDrive {
    double v_pk = 0.0;   // volts, peak
    double omega = 0.0;  // rad/s
};

struct TransmissionLineSpec {
    double z0 = 50.0;
    double electrical_length = 0.0;  // radians at the drive frequency
};

// How a lead ends once it leaves the chip.
struct Termination {
    enum class Kind { short_circuit, series_resistor, open_circuit };
    Kind kind = Kind::short_circuit;
    double resistance = 0.0;  // ohms, series_resistor only

    static Termination shorted();
    static Termination resistor(double ohms);
    static Termination open();
};

// Nanowire meander capacitively coupled to the rf electrode: n_segments
// equal series inductors with a tap capacitor from every junction (and
// both ends) to the rf node, plus two leads. Each lead is two half-length
// transmission lines with a third of the lead capacitance tapped to the
// rf node at the device end, the midpoint, and the far end, which
// approximates the continuously coupled line with lumped elements.
struct MeanderCouplingSpec {
    int n_segments = 8;
    double total_inductance = 0.0;         // henries
    std::vector<double> tap_capacitance;   // farads, n_segments + 1 entries
    double lead_capacitance_left = 0.0;    // farads, total per lead
    double lead_capacitance_right = 0.0;
    TransmissionLineSpec lead_left;
    TransmissionLineSpec lead_right;
    Termination termination_left;
    Termination termination_right;
    RfDrive drive;
};

// Parallel-plate estimate eps0 * area / gap used for the documented
// default coupling capacitances.
double parallel_plate_capacitance(double area, double gap);

// The documented default configuration: 550 nH meander in 8 segments,
// one lead grounded at the package and the other terminated in the 50
// ohm readout, driven at 25 V peak and 46.23 MHz. Coupling capacitances
// are parallel-plate estimates: 130 x 40 um^2 lead strips at a 25 um gap
// and 30 x 4 um^2 tap strips at a 10 um gap. All fields are plain data
// and can be overridden before use.
MeanderCouplingSpec default_meander_spec();

// Netlist realization of the spec: node 0 ground, node 1 the driven rf
// electrode, then the n_segments + 1 meander junctions in order from the
// left (grounded-by-default) end. Zero-valued capacitances are omitted.
Netlist build_meander_network(const MeanderCouplingSpec& spec);

// Per-segment currents of the meander inductors, ordered from the left
// end, positive flowing left to right. phase_span is the spread of the
// segment phases measured after rotating the mean current to zero phase,
// so it is insensitive to the overall reference.
struct InducedCurrentProfile {
    std::vector<complexd> segment_current;  // amperes
    double min_magnitude = 0.0;
    double max_magnitude = 0.0;
    double phase_span = 0.0;  // radians
};

InducedCurrentProfile induced_currents(const MeanderCouplingSpec& spec);

// Tone injected down the output lead through a directional coupler to
// interfere with the induced currents. amplitude is the generator
// setting; the voltage reaching the termination is attenuated by
// coupling_attenuation_db. source_impedance reports the termination
// resistance the tone drives through.
struct CancellationTone {
    double amplitude = 0.0;  // volts
    double phase = 0.0;      // radians
    double source_impedance = 50.0;
    double coupling_attenuation_db = 20.0;
};

// Search box for the tone: a coarse amplitude x phase grid followed by
// refine_rounds of golden-section refinement on each axis in turn. The
// grid always includes amplitude_lo, so with amplitude_lo = 0 the result
// can never be worse than the uncancelled baseline. Leaving amplitude_hi
// at or below zero asks the optimizer to bound the search itself, at
// twice the amplitude that would null the largest segment if the tone
// and drive profiles were proportional.
struct ToneSearch {
    double amplitude_lo = 0.0;      // volts
    double amplitude_hi = 0.0;      // volts, <= 0 means choose automatically
    int amplitude_points = 16;
    double phase_lo = 0.0;          // radians
    double phase_hi = 6.283185307179586;
    int phase_points = 24;
    int refine_rounds = 3;
    double coupling_attenuation_db = 20.0;
};

struct CancellationResult {
    CancellationTone tone;
    InducedCurrentProfile residual;
};

// Minimizes the largest residual segment magnitude over the search box.
// The tone and the rf drive superpose linearly, so the search evaluates
// one drive-only solve plus one unit-tone solve. Requires a resistive
// right termination (the tone enters through it).
CancellationResult optimize_cancellation(const MeanderCouplingSpec& spec,
                                         const ToneSearch& search);

}  // namespace trapdet::circuit
