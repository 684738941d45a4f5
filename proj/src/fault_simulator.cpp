#include "mtlfault/fault_simulator.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mtlfault/errors.hpp"

namespace mtlfault {

namespace {

const Complex kA = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
const Complex kA2 = kA * kA;

// Distances this close to a section end are treated as the end itself.
constexpr double kEndSnap = 1e-9;

enum class Sequence { kPositive, kNegative, kZero };

struct PiBranch {
  int from;
  int to;
  double length_km;
  const SequenceParams* params;
};

struct SourceBranch {
  int node;
  const SourceSpec* source;
};

struct Topology {
  int node_count = 0;
  std::vector<PiBranch> branches;
  std::vector<SourceBranch> sources;  // sending source first
  int load_node = -1;
  int fault_node = -1;
};

Topology build_topology(const MixedLineSpec& spec, const FaultScenario* fault) {
  Topology t;
  const int n = static_cast<int>(spec.sections.size());
  t.node_count = n + 1;
  for (int s = 0; s < n; ++s) {
    const auto& sec = spec.sections[static_cast<std::size_t>(s)];
    if (fault != nullptr && static_cast<int>(fault->section_index) == s) {
      const double d = fault->distance_in_section_km;
      if (d >= sec.length_km) {
        t.branches.push_back({s, s + 1, sec.length_km, &sec.params});
        t.fault_node = s + 1;
      } else {
        const int f = t.node_count++;
        t.branches.push_back({s, f, d, &sec.params});
        t.branches.push_back({f, s + 1, sec.length_km - d, &sec.params});
        t.fault_node = f;
      }
    } else {
      t.branches.push_back({s, s + 1, sec.length_km, &sec.params});
    }
  }
  t.sources.push_back({0, &spec.source_s});
  if (spec.source_r) t.sources.push_back({n, &*spec.source_r});
  if (spec.load_mw > 0.0) t.load_node = n;
  return t;
}

// Stamps one sequence network into the global MNA matrix at `offset`.
// Unknowns: node voltages, then one current per source (injected into its node).
void stamp_sequence(const MixedLineSpec& spec, const Topology& t, Sequence seq, int offset,
                    Eigen::MatrixXcd& a, Eigen::VectorXcd& b) {
  const double omega = 2.0 * std::numbers::pi * spec.frequency_hz;
  for (const auto& br : t.branches) {
    const bool zero = seq == Sequence::kZero;
    const Complex z = (zero ? br.params->z0() : br.params->z1()) * br.length_km;
    const double c_nf = zero ? br.params->c0_nf : br.params->c1_nf;
    const Complex y_half{0.0, omega * c_nf * 1e-9 * br.length_km / 2.0};
    const Complex y = 1.0 / z;
    const int i = offset + br.from;
    const int j = offset + br.to;
    a(i, i) += y + y_half;
    a(j, j) += y + y_half;
    a(i, j) -= y;
    a(j, i) -= y;
  }
  if (t.load_node >= 0 && seq != Sequence::kZero) {
    // Constant impedance at nominal voltage, ungrounded in zero sequence.
    const double z_load = spec.nominal_kv * spec.nominal_kv / spec.load_mw;
    a(offset + t.load_node, offset + t.load_node) += 1.0 / z_load;
  }
  for (std::size_t k = 0; k < t.sources.size(); ++k) {
    const auto& src = t.sources[k];
    const int row = offset + t.node_count + static_cast<int>(k);
    const int node = offset + src.node;
    const Complex z = seq == Sequence::kZero ? src.source->z0 : src.source->z1;
    a(node, row) -= 1.0;
    a(row, node) += 1.0;
    a(row, row) += z;
    b(row) = seq == Sequence::kPositive ? src.source->phase_emf() : Complex{};
  }
}

RelayPhasors solve(const MixedLineSpec& spec, const FaultScenario* fault) {
  const Topology t = build_topology(spec, fault);
  const int block = t.node_count + static_cast<int>(t.sources.size());
  const int size = 3 * block + (fault != nullptr ? 1 : 0);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(size, size);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(size);
  const Sequence order[3] = {Sequence::kPositive, Sequence::kNegative, Sequence::kZero};
  for (int k = 0; k < 3; ++k) stamp_sequence(spec, t, order[k], k * block, a, b);

  if (fault != nullptr) {
    // Series connection of the three networks through 3*zf:
    // V1f + V2f + V0f = 3 zf If, with If leaving each network at the fault node.
    const int row = size - 1;
    const double scale = 1.0 / (1.0 + 3.0 * fault->zf_ohm);
    for (int k = 0; k < 3; ++k) {
      a(k * block + t.fault_node, row) += 1.0;
      a(row, k * block + t.fault_node) = scale;
    }
    a(row, row) = -3.0 * fault->zf_ohm * scale;
  }

  const Eigen::VectorXcd x = detail::solve_network(a, b);
  const int src_s = t.node_count;  // sending source current index in each block
  SequenceComponents v{x(2 * block), x(0), x(block)};
  SequenceComponents i{x(2 * block + src_s), x(src_s), x(block + src_s)};
  const PhaseComponents vp = from_sequence(v);
  const PhaseComponents ip = from_sequence(i);
  return {vp.a, vp.b, vp.c, ip.a, ip.b, ip.c};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

void validate_params(const SequenceParams& p, const std::string& where) {
  require(std::isfinite(p.r1) && p.r1 >= 0.0, where + ".r1 must be >= 0");
  require(std::isfinite(p.x1) && p.x1 > 0.0, where + ".x1 must be > 0");
  require(std::isfinite(p.r0) && p.r0 >= 0.0, where + ".r0 must be >= 0");
  require(std::isfinite(p.x0) && p.x0 > 0.0, where + ".x0 must be > 0");
  require(p.x0 >= p.x1, where + ".x0 must not be below x1");
  require(std::isfinite(p.c1_nf) && p.c1_nf >= 0.0, where + ".c1 must be >= 0");
  require(std::isfinite(p.c0_nf) && p.c0_nf >= 0.0, where + ".c0 must be >= 0");
}

void validate_source(const SourceSpec& s, const std::string& where) {
  require(std::isfinite(s.emf_kv) && s.emf_kv > 0.0, where + ".emf must be > 0");
  require(std::isfinite(s.angle_deg), where + ".angle must be finite");
  require(finite(s.z1) && finite(s.z0), where + " impedances must be finite");
  require(s.z1.real() >= 0.0, where + ".z1 must have non-negative resistance");
  require(s.z0.real() >= 0.0, where + ".z0 must have non-negative resistance");
}

void validate_scenario(const MixedLineSpec& spec, const FaultScenario& scen) {
  require(scen.section_index < spec.sections.size(),
          "fault section index " + std::to_string(scen.section_index) + " out of range");
  const double len = spec.sections[scen.section_index].length_km;
  const double d = scen.distance_in_section_km;
  require(std::isfinite(d) && d > 0.0 && d <= len * (1.0 + kEndSnap),
          "fault distance " + std::to_string(d) + " km outside (0, " + std::to_string(len) +
              "] of section " + std::to_string(scen.section_index));
  require(std::isfinite(scen.zf_ohm) && scen.zf_ohm >= 0.0, "fault impedance must be >= 0");
}

}  // namespace

std::string to_string(SectionKind kind) {
  return kind == SectionKind::kOverhead ? "OHL" : "UGC";
}

SectionKind section_kind_from_string(const std::string& s) {
  if (s == "OHL") return SectionKind::kOverhead;
  if (s == "UGC") return SectionKind::kCable;
  throw ValidationError("unknown section kind '" + s + "' (expected OHL or UGC)");
}

SequenceParams SequenceParams::overhead_default() { return {0.05, 0.40, 0.20, 1.20, 9.0, 6.0}; }

SequenceParams SequenceParams::cable_default() { return {0.03, 0.22, 0.10, 0.60, 300.0, 300.0}; }

Complex SourceSpec::phase_emf() const {
  return std::polar(emf_kv * 1e3 / std::sqrt(3.0), angle_deg * std::numbers::pi / 180.0);
}

double MixedLineSpec::total_length_km() const {
  double total = 0.0;
  for (const auto& s : sections) total += s.length_km;
  return total;
}

Complex MixedLineSpec::total_z1() const {
  Complex total{};
  for (const auto& s : sections) total += s.params.z1() * s.length_km;
  return total;
}

MixedLineSpec MixedLineSpec::default_route() {
  MixedLineSpec spec;
  spec.sections = {
      {SectionKind::kOverhead, 200.0, SequenceParams::overhead_default()},
      {SectionKind::kCable, 10.0, SequenceParams::cable_default()},
      {SectionKind::kOverhead, 50.0, SequenceParams::overhead_default()},
  };
  spec.source_s = SourceSpec{154.0, 0.0, {0.5, 5.0}, {1.0, 10.0}};
  spec.source_r = SourceSpec{0.98 * 154.0, -5.0, {0.5, 5.0}, {1.0, 10.0}};
  return spec;
}

SequenceComponents to_sequence(const PhaseComponents& p) {
  return {(p.a + p.b + p.c) / 3.0, (p.a + kA * p.b + kA2 * p.c) / 3.0,
          (p.a + kA2 * p.b + kA * p.c) / 3.0};
}

PhaseComponents from_sequence(const SequenceComponents& s) {
  return {s.zero + s.positive + s.negative, s.zero + kA2 * s.positive + kA * s.negative,
          s.zero + kA * s.positive + kA2 * s.negative};
}

void validate(const MixedLineSpec& spec) {
  require(std::isfinite(spec.nominal_kv) && spec.nominal_kv > 0.0, "nominal_kv must be > 0");
  require(std::isfinite(spec.frequency_hz) && spec.frequency_hz > 0.0, "frequency must be > 0");
  require(!spec.sections.empty(), "line must have at least one section");
  require(std::isfinite(spec.load_mw) && spec.load_mw >= 0.0, "load_mw must be >= 0");
  for (std::size_t i = 0; i < spec.sections.size(); ++i) {
    const std::string where = "sections[" + std::to_string(i) + "]";
    const auto& s = spec.sections[i];
    require(std::isfinite(s.length_km) && s.length_km > 0.0, where + ".length must be > 0");
    validate_params(s.params, where);
  }
  validate_source(spec.source_s, "source_s");
  if (spec.source_r) validate_source(*spec.source_r, "source_r");
}

std::vector<std::string> parameter_ratio_warnings(const MixedLineSpec& spec) {
  std::vector<std::string> out;
  const SequenceParams* ohl = nullptr;
  for (const auto& s : spec.sections) {
    if (s.kind == SectionKind::kOverhead) {
      ohl = &s.params;
      break;
    }
  }
  if (ohl == nullptr) return out;
  for (std::size_t i = 0; i < spec.sections.size(); ++i) {
    const auto& s = spec.sections[i];
    if (s.kind != SectionKind::kCable) continue;
    const double xr = s.params.x1 / ohl->x1;
    if (xr < 0.50 || xr > 0.70) {
      std::ostringstream os;
      os << "sections[" << i << "]: cable/overhead x1 ratio " << xr << " outside [0.50, 0.70]";
      out.push_back(os.str());
    }
    if (ohl->c1_nf > 0.0) {
      const double cr = s.params.c1_nf / ohl->c1_nf;
      if (cr < 30.0 || cr > 40.0) {
        std::ostringstream os;
        os << "sections[" << i << "]: cable/overhead c1 ratio " << cr << " outside [30, 40]";
        out.push_back(os.str());
      }
    }
  }
  return out;
}

RelayPhasors prefault_state(const MixedLineSpec& spec) {
  validate(spec);
  return solve(spec, nullptr);
}

RelayPhasors solve_slg_fault(const MixedLineSpec& spec, const FaultScenario& scen) {
  validate(spec);
  validate_scenario(spec, scen);
  FaultScenario snapped = scen;
  const double len = spec.sections[scen.section_index].length_km;
  if (snapped.distance_in_section_km > len) snapped.distance_in_section_km = len;
  return solve(spec, &snapped);
}

std::vector<FaultScenario> scenario_grid(const MixedLineSpec& spec, std::size_t section_index,
                                         double start_km, double step_km, std::size_t count,
                                         double zf_ohm) {
  require(section_index < spec.sections.size(),
          "section index " + std::to_string(section_index) + " out of range");
  const double len = spec.sections[section_index].length_km;
  std::vector<FaultScenario> out;
  out.reserve(count);
  std::vector<std::size_t> bad;
  for (std::size_t k = 0; k < count; ++k) {
    double d = start_km + static_cast<double>(k) * step_km;
    if (std::abs(d - len) <= kEndSnap * len) d = len;
    if (!(d > 0.0 && d <= len)) bad.push_back(k);
    out.push_back({section_index, d, zf_ohm});
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "scenario distances outside section " << section_index << " (0, " << len
       << "] km at index";
    for (std::size_t k : bad) os << ' ' << k;
    throw ValidationError(os.str());
  }
  return out;
}

double absolute_km(const MixedLineSpec& spec, const FaultScenario& scen) {
  double before = 0.0;
  for (std::size_t i = 0; i < scen.section_index && i < spec.sections.size(); ++i) {
    before += spec.sections[i].length_km;
  }
  return before + scen.distance_in_section_km;
}

namespace detail {

Eigen::VectorXcd solve_network(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& b) {
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
  if (!lu.isInvertible()) {
    throw DegenerateNetworkError("network admittance matrix is singular (rank " +
                                 std::to_string(lu.rank()) + " of " + std::to_string(a.rows()) +
                                 ")");
  }
  Eigen::VectorXcd x = lu.solve(b);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!finite(x(i))) throw DegenerateNetworkError("network solution is not finite");
  }
  return x;
}

}  // namespace detail

}  // namespace mtlfault
