#include "dcmg/grid_model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dcmg/error.hpp"

namespace dcmg {

double LoadModel::power_at(double v, double rated_voltage) const noexcept {
  const double r = v / rated_voltage;
  return p_cr * r * r + p_cc * r + p_cp;
}

double MicrogridConfig::total_capacity() const noexcept {
  return std::accumulate(capacities.begin(), capacities.end(), 0.0);
}

void MicrogridConfig::validate() const {
  if (capacities.empty()) throw DomainError("microgrid needs at least one unit");
  if (!(min_voltage > 0.0) || !(min_voltage < rated_voltage)) {
    std::ostringstream os;
    os << "require 0 < v_min < x, got v_min=" << min_voltage << " x=" << rated_voltage;
    throw DomainError(os.str());
  }
  for (std::size_t u = 0; u < capacities.size(); ++u) {
    if (!(capacities[u] > 0.0) || !std::isfinite(capacities[u])) {
      std::ostringstream os;
      os << "capacity of unit " << (u + 1) << " must be positive, got " << capacities[u];
      throw DomainError(os.str());
    }
  }
  if (!(load.p_cr >= 0.0) || !(load.p_cc >= 0.0) || !(load.p_cp >= 0.0)) {
    throw DomainError("load components must be non-negative");
  }
}

MicrogridConfig MicrogridConfig::reference() {
  MicrogridConfig c;
  c.rated_voltage = 400.0;
  c.min_voltage = 390.0;
  c.capacities = {100.0, 1000.0, 2000.0, 4000.0, 15000.0};
  c.load = LoadModel{3500.0, 2500.0, 5000.0};
  return c;
}

double droop_coefficient(double ref_voltage, double min_voltage) {
  if (!(min_voltage > 0.0) || !(ref_voltage > min_voltage)) {
    std::ostringstream os;
    os << "droop coefficient undefined for x_u=" << ref_voltage << " v_min=" << min_voltage;
    throw DomainError(os.str());
  }
  return 1.0 / ((ref_voltage - min_voltage) * min_voltage);
}

double virtual_admittance(double capacity, double ref_voltage, double min_voltage) {
  if (!(capacity > 0.0)) throw DomainError("capacity must be positive");
  return droop_coefficient(ref_voltage, min_voltage) * capacity;
}

namespace {

void check_refs(const MicrogridConfig& config, std::span<const double> ref_voltages) {
  if (ref_voltages.size() != config.unit_count()) {
    std::ostringstream os;
    os << "expected " << config.unit_count() << " reference voltages, got "
       << ref_voltages.size();
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

double current_balance(const MicrogridConfig& config, std::span<const double> ref_voltages,
                       double v) {
  check_refs(config, ref_voltages);
  const double x = config.rated_voltage;
  double sum = 0.0;
  for (std::size_t u = 0; u < ref_voltages.size(); ++u) {
    sum += (ref_voltages[u] - v) *
           virtual_admittance(config.capacities[u], ref_voltages[u], config.min_voltage);
  }
  return sum - v * config.load.p_cr / (x * x) - config.load.p_cc / x - config.load.p_cp / v;
}

SteadyStateSolution solve_bus_voltage(const MicrogridConfig& config,
                                      std::span<const double> ref_voltages) {
  check_refs(config, ref_voltages);
  using ext = long double;
  const ext x = config.rated_voltage;
  const ext vmin = config.min_voltage;

  ext a = 0.0L;
  ext b = 0.0L;
  ext admittance_scale = 0.0L;
  for (std::size_t u = 0; u < ref_voltages.size(); ++u) {
    const ext xu = ref_voltages[u];
    if (!(xu > vmin)) {
      std::ostringstream os;
      os << "reference voltage of unit " << (u + 1) << " (" << ref_voltages[u]
         << " V) must exceed v_min=" << config.min_voltage;
      throw DomainError(os.str());
    }
    const ext s = static_cast<ext>(config.capacities[u]) / ((xu - vmin) * vmin);
    a += s;
    b += xu * s;
    admittance_scale += xu * s;
  }
  a += static_cast<ext>(config.load.p_cr) / (x * x);
  b -= static_cast<ext>(config.load.p_cc) / x;
  if (!(a > 0.0L)) throw DomainError("total bus admittance must be positive");

  const ext pcp = config.load.p_cp;
  ext disc = b * b - 4.0L * pcp * a;
  if (disc < 0.0L) {
    // Rounding can push an exactly-zero discriminant slightly negative.
    if (disc >= -1e-12L * b * b) {
      disc = 0.0L;
    } else {
      std::ostringstream os;
      os << "constant-power load of " << config.load.p_cp
         << " W cannot be supplied (negative discriminant)";
      throw InfeasibleOperatingPoint(os.str());
    }
  }
  const ext root = (b + std::sqrt(disc)) / (2.0L * a);
  if (!(root > 0.0L)) {
    throw InfeasibleOperatingPoint("no positive bus voltage satisfies the current balance");
  }

  SteadyStateSolution sol;
  sol.voltage = static_cast<double>(root);
  sol.currents.resize(ref_voltages.size());
  sol.powers.resize(ref_voltages.size());
  for (std::size_t u = 0; u < ref_voltages.size(); ++u) {
    const double s =
        virtual_admittance(config.capacities[u], ref_voltages[u], config.min_voltage);
    sol.currents[u] = (ref_voltages[u] - sol.voltage) * s;
    sol.powers[u] = sol.currents[u] * sol.voltage;
  }
  sol.residual = current_balance(config, ref_voltages, sol.voltage);
  sol.tolerance = 1e-9 * static_cast<double>(admittance_scale);
  return sol;
}

double nominal_voltage(const MicrogridConfig& config) {
  const std::vector<double> refs(config.unit_count(), config.rated_voltage);
  return solve_bus_voltage(config, refs).voltage;
}

}  // namespace dcmg
