#pragma once

// Steady-state model of a single-bus DC microgrid whose sources run droop
// control with proportional power sharing. All quantities are SI (V, A, W, S).

#include <cstddef>
#include <span>
#include <vector>

namespace dcmg {

/// Aggregate bus load. Each component is the power drawn at the rated
/// voltage x: constant admittance (p_cr), constant current (p_cc) and
/// constant power (p_cp).
struct LoadModel {
  double p_cr = 0.0;
  double p_cc = 0.0;
  double p_cp = 0.0;

  double total() const noexcept { return p_cr + p_cc + p_cp; }
  /// s_cr = p_cr / x^2
  double admittance(double rated_voltage) const noexcept {
    return p_cr / (rated_voltage * rated_voltage);
  }
  /// i_cc = p_cc / x
  double current(double rated_voltage) const noexcept { return p_cc / rated_voltage; }
  /// Power actually drawn at bus voltage v.
  double power_at(double v, double rated_voltage) const noexcept;
};

struct MicrogridConfig {
  double rated_voltage = 400.0;
  double min_voltage = 390.0;
  std::vector<double> capacities;
  LoadModel load;

  std::size_t unit_count() const noexcept { return capacities.size(); }
  double total_capacity() const noexcept;

  /// Largest admissible training amplitude fraction, 1 - v_min / x. Keeps
  /// every perturbed reference voltage strictly above v_min.
  double max_amplitude_fraction() const noexcept { return 1.0 - min_voltage / rated_voltage; }

  /// Throws DomainError if U < 1, v_min is not in (0, x) or a capacity is
  /// non-positive, and if a load component is negative.
  void validate() const;

  /// Five-unit reference scenario: x = 400 V, v_min = 390 V,
  /// W = {0.1, 1, 2, 4, 15} kW, load {3.5, 2.5, 5} kW.
  static MicrogridConfig reference();
};

struct SteadyStateSolution {
  double voltage = 0.0;
  std::vector<double> currents;
  std::vector<double> powers;
  /// Current-balance defect at `voltage`, in amperes.
  double residual = 0.0;
  /// Absolute acceptance bound for `residual`: 1e-9 * sum_u x_u s_u.
  double tolerance = 0.0;
};

/// alpha_u = ((x_u - v_min) v_min)^-1, so that s_u = alpha_u W_u.
double droop_coefficient(double ref_voltage, double min_voltage);

/// s_u = W_u / (v_min (x_u - v_min)).
double virtual_admittance(double capacity, double ref_voltage, double min_voltage);

/// Left-hand side of the current balance,
/// sum_u (x_u - v) s_u - v p_cr/x^2 - p_cc/x - p_cp/v.
double current_balance(const MicrogridConfig& config, std::span<const double> ref_voltages,
                       double v);

/// Closed-form positive root of the current balance for the given per-unit
/// reference voltages. Evaluated in extended precision and rounded once, so
/// the returned voltage is within one ulp of the exact root.
SteadyStateSolution solve_bus_voltage(const MicrogridConfig& config,
                                      std::span<const double> ref_voltages);

/// Bus voltage with every reference voltage at the rated value.
double nominal_voltage(const MicrogridConfig& config);

}  // namespace dcmg
