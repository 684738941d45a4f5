#include "mtlfault/relay_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace {

RelayPhasors blend(const RelayPhasors& pre, const RelayPhasors& fault, double alpha) {
  const double keep = 1.0 - alpha;
  return {keep * pre.va + alpha * fault.va, keep * pre.vb + alpha * fault.vb,
          keep * pre.vc + alpha * fault.vc, keep * pre.ia + alpha * fault.ia,
          keep * pre.ib + alpha * fault.ib, keep * pre.ic + alpha * fault.ic};
}

}  // namespace

RelaySettings RelaySettings::for_line(const MixedLineSpec& spec) {
  RelaySettings s;
  if (!spec.sections.empty()) {
    const auto& p = spec.sections.front().params;
    s.k0 = k0_factor(p.z1(), p.z0());
  }
  return s;
}

void validate(const RelaySettings& s) {
  if (s.samples_per_cycle < 1) throw ValidationError("samples_per_cycle must be >= 1");
  if (s.prefault_cycles < 0 || s.fault_cycles < 0) {
    throw ValidationError("cycle counts must be >= 0");
  }
  if (s.prefault_cycles + s.fault_cycles < 1) {
    throw ValidationError("locus must span at least one cycle");
  }
  if (!(s.zone1_reach > 0.0)) throw ValidationError("zone1_reach must be > 0");
  if (!(s.zone2_reach > s.zone1_reach)) {
    throw ValidationError("zone2_reach must exceed zone1_reach");
  }
}

Complex k0_factor(Complex z1, Complex z0) {
  if (z1 == Complex{}) throw std::domain_error("k0_factor: z1 is zero");
  return (z0 - z1) / (3.0 * z1);
}

ImpedancePoint ground_loop_impedance(const RelayPhasors& ph, Complex k0) {
  const Complex i0 = (ph.ia + ph.ib + ph.ic) / 3.0;
  const Complex loop = ph.ia + k0 * 3.0 * i0;
  if (std::abs(loop) == 0.0) throw UndefinedImpedanceError("ground-loop current is zero");
  const Complex z = ph.va / loop;
  return {z.real(), z.imag()};
}

double inception_overlap(int n, const RelaySettings& s) {
  const int first_fault_sample = s.prefault_cycles * s.samples_per_cycle;
  const double cycles = static_cast<double>(n - first_fault_sample + 1) / s.samples_per_cycle;
  return std::clamp(cycles, 0.0, 1.0);
}

ImpedanceLocus impedance_trajectory(const RelayPhasors& pre, const RelayPhasors& fault,
                                    const RelaySettings& s) {
  validate(s);
  ImpedanceLocus locus;
  locus.samples_per_cycle = s.samples_per_cycle;
  locus.prefault_cycles = s.prefault_cycles;
  locus.fault_cycles = s.fault_cycles;
  const int total = (s.prefault_cycles + s.fault_cycles) * s.samples_per_cycle;
  locus.points.reserve(static_cast<std::size_t>(total));
  locus.undefined.reserve(static_cast<std::size_t>(total));
  for (int n = 0; n < total; ++n) {
    const double alpha = inception_overlap(n, s);
    try {
      locus.points.push_back(ground_loop_impedance(blend(pre, fault, alpha), s.k0));
      locus.undefined.push_back(false);
    } catch (const UndefinedImpedanceError&) {
      locus.points.push_back(kClampPoint);
      locus.undefined.push_back(true);
    }
  }
  return locus;
}

std::vector<ImpedancePoint> zone_characteristic(const MixedLineSpec& spec, const RelaySettings& s,
                                                int zone) {
  if (zone != 1 && zone != 2) throw ValidationError("zone must be 1 or 2");
  const double reach = zone == 1 ? s.zone1_reach : s.zone2_reach;
  const Complex center = reach * spec.total_z1() / 2.0;
  const double radius = std::abs(center);
  const double phase = std::arg(center);
  std::vector<ImpedancePoint> pts;
  pts.reserve(360);
  for (int k = 0; k < 360; ++k) {
    const Complex p = center + std::polar(radius, phase + k * std::numbers::pi / 180.0);
    pts.push_back({p.real(), p.imag()});
  }
  return pts;
}

}  // namespace mtlfault
