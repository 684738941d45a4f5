#pragma once

// Quasi-steady phasor model of a mixed overhead/cable line fed from both
// ends. Each section is a nominal pi-equivalent; sequence networks are
// solved with modified nodal analysis so ideal (zero-impedance) sources are
// allowed. Units: kV and MW on the configuration side, V, A and ohm inside.

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mtlfault {

using Complex = std::complex<double>;

enum class SectionKind { kOverhead, kCable };

std::string to_string(SectionKind kind);
SectionKind section_kind_from_string(const std::string& s);

/// Per-km sequence parameters. Resistances and reactances in ohm/km,
/// shunt capacitances in nF/km.
struct SequenceParams {
  double r1 = 0.0;
  double x1 = 0.0;
  double r0 = 0.0;
  double x0 = 0.0;
  double c1_nf = 0.0;
  double c0_nf = 0.0;

  Complex z1() const { return {r1, x1}; }
  Complex z0() const { return {r0, x0}; }

  static SequenceParams overhead_default();
  static SequenceParams cable_default();
};

struct LineSection {
  SectionKind kind = SectionKind::kOverhead;
  double length_km = 0.0;
  SequenceParams params;
};

/// Thevenin equivalent of a generator and its step-up transformer.
struct SourceSpec {
  double emf_kv = 154.0;  // line-to-line magnitude
  double angle_deg = 0.0;
  Complex z1{0.5, 5.0};
  Complex z0{1.0, 10.0};

  /// Phase-to-ground EMF in volts.
  Complex phase_emf() const;
};

struct MixedLineSpec {
  double nominal_kv = 154.0;
  double frequency_hz = 50.0;
  std::vector<LineSection> sections;
  SourceSpec source_s;
  std::optional<SourceSpec> source_r;  // empty: radial feed
  double load_mw = 20.0;               // constant impedance at the receiving bus

  double total_length_km() const;
  /// Sum of positive-sequence series impedance over all sections.
  Complex total_z1() const;

  /// 200 km OHL, 10 km cable, 50 km OHL between two 154 kV sources.
  static MixedLineSpec default_route();
};

/// Phase-a-to-ground fault.
struct FaultScenario {
  std::size_t section_index = 0;
  double distance_in_section_km = 0.0;
  double zf_ohm = 1.0;
};

/// Phase quantities at the relay bus (sending end). Volts to ground, amps
/// flowing into the protected line.
struct RelayPhasors {
  Complex va, vb, vc;
  Complex ia, ib, ic;
};

struct SequenceComponents {
  Complex zero, positive, negative;
};

struct PhaseComponents {
  Complex a, b, c;
};

SequenceComponents to_sequence(const PhaseComponents& p);
PhaseComponents from_sequence(const SequenceComponents& s);

/// Throws ValidationError naming the offending field.
void validate(const MixedLineSpec& spec);

/// Warnings for cable/overhead parameter ratios outside the ranges typical
/// of HV cables (reactance 30-50% lower, capacitance 30-40x higher).
std::vector<std::string> parameter_ratio_warnings(const MixedLineSpec& spec);

/// Balanced load-flow solution at the relay bus.
RelayPhasors prefault_state(const MixedLineSpec& spec);

/// During-fault relay phasors for an a-g fault. Distances are accepted in
/// (0, length]; a fault at the far end of a section sits on the junction
/// node and is attributed to the named section.
RelayPhasors solve_slg_fault(const MixedLineSpec& spec, const FaultScenario& scen);

/// `count` scenarios at start + k*step inside one section. A distance that
/// lands within 1e-9 relative of the section end is snapped onto it.
std::vector<FaultScenario> scenario_grid(const MixedLineSpec& spec, std::size_t section_index,
                                         double start_km, double step_km, std::size_t count,
                                         double zf_ohm);

/// Distance from the relay bus along the route.
double absolute_km(const MixedLineSpec& spec, const FaultScenario& scen);

namespace detail {
/// Dense complex solve; throws DegenerateNetworkError when A is singular.
Eigen::VectorXcd solve_network(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b);
}  // namespace detail

}  // namespace mtlfault
