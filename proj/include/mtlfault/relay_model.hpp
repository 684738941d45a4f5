#pragma once

// Ground-loop impedance measurement and the R-X trajectory a distance relay
// displays as the measuring window slides across fault inception.

#include <cstddef>
#include <vector>

#include "mtlfault/fault_simulator.hpp"

namespace mtlfault {

struct ImpedancePoint {
  double r = 0.0;  // ohm
  double x = 0.0;  // ohm
};

struct RelaySettings {
  Complex k0{};  // residual compensation
  int samples_per_cycle = 20;
  int prefault_cycles = 2;
  int fault_cycles = 4;
  double zone1_reach = 0.8;  // fraction of total positive-sequence line impedance
  double zone2_reach = 1.2;

  /// Defaults with k0 set from the first section's per-km parameters.
  static RelaySettings for_line(const MixedLineSpec& spec);
};

struct ImpedanceLocus {
  std::vector<ImpedancePoint> points;
  std::vector<bool> undefined;  // sample had zero loop current and was clamped
  int samples_per_cycle = 0;
  int prefault_cycles = 0;
  int fault_cycles = 0;
};

/// Substituted for samples whose loop current vanishes; lies outside any
/// sensible view window.
inline constexpr ImpedancePoint kClampPoint{1e9, 1e9};

void validate(const RelaySettings& s);

/// (z0 - z1) / (3 z1). Throws std::domain_error for z1 == 0.
Complex k0_factor(Complex z1, Complex z0);

/// va / (ia + 3 k0 i0). Throws UndefinedImpedanceError for zero loop current.
ImpedancePoint ground_loop_impedance(const RelayPhasors& ph, Complex k0);

/// Linear cross-fade of the phasors over one cycle after inception, each
/// sample mapped through ground_loop_impedance.
ImpedanceLocus impedance_trajectory(const RelayPhasors& pre, const RelayPhasors& fault,
                                    const RelaySettings& s);

/// Window overlap with the post-inception interval for sample `n`.
double inception_overlap(int n, const RelaySettings& s);

/// 360 points of the mho circle through the origin with diameter
/// reach * Z1_total; point 0 is the reach point itself. `zone` is 1 or 2.
std::vector<ImpedancePoint> zone_characteristic(const MixedLineSpec& spec, const RelaySettings& s,
                                                int zone);

}  // namespace mtlfault
