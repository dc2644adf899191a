#include "dcmg/measurement.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "dcmg/error.hpp"

namespace dcmg {

SlotTrace simulate_training(const MicrogridConfig& config, const TrainingPlan& plan) {
  config.validate();
  plan.check_compatible(config);

  const auto n_slots = plan.slots();
  const auto n_units = plan.units();
  SlotTrace trace;
  trace.nominal = nominal_voltage(config);
  trace.voltages.resize(n_slots);
  trace.deviations.resize(n_slots);
  trace.currents.resize(static_cast<Eigen::Index>(n_slots), static_cast<Eigen::Index>(n_units));
  trace.powers.resizeLike(trace.currents);

  for (std::size_t n = 0; n < n_slots; ++n) {
    SteadyStateSolution sol;
    try {
      sol = solve_bus_voltage(config, plan.reference_voltages(n));
    } catch (const InfeasibleOperatingPoint& e) {
      std::ostringstream os;
      os << "slot " << (n + 1) << ": " << e.what();
      throw InfeasibleOperatingPoint(os.str());
    }
    trace.voltages[n] = sol.voltage;
    trace.deviations[n] = sol.voltage - trace.nominal;
    for (std::size_t u = 0; u < n_units; ++u) {
      trace.currents(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(u)) = sol.currents[u];
      trace.powers(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(u)) = sol.powers[u];
    }
  }
  return trace;
}

double NoiseModel::variance() const {
  const double samples = samples_per_slot();
  if (!(samples >= 1.0)) {
    std::ostringstream os;
    os << "averaging window holds " << samples << " samples; need at least one";
    throw DomainError(os.str());
  }
  if (!(sample_noise >= 0.0)) throw DomainError("sample noise must be non-negative");
  return sample_noise * sample_noise / samples;
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t controller) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ trial) ^ (controller * 0xd1b54a32d192ed03ULL));
}

MeasurementSet observe(const SlotTrace& trace, std::size_t controller, const NoiseModel& noise,
                       std::uint64_t seed) {
  MeasurementSet m;
  m.controller = controller;
  m.noise_variance = noise.variance();
  m.seed = seed;
  m.values = trace.voltages;
  m.nominal = trace.nominal;
  if (m.noise_variance == 0.0) return m;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, std::sqrt(m.noise_variance));
  // The quiet slot is measured before training starts.
  m.nominal += z(rng);
  for (auto& v : m.values) v += z(rng);
  return m;
}

void write_measurements_csv(std::ostream& out, const MeasurementSet& m) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "slot,value\n0," << m.nominal << '\n';
  for (std::size_t n = 0; n < m.values.size(); ++n) out << (n + 1) << ',' << m.values[n] << '\n';
  out.precision(old);
}

}  // namespace dcmg
