#pragma once

// Reference-voltage training sequences injected by all droop controllers
// during the training period, and the excitation check that decides whether
// a plan makes every controller's parameters identifiable.

#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "dcmg/grid_model.hpp"

namespace dcmg {

struct SlotTiming {
  double slot_duration = 0.055;  ///< T_S, seconds
  double settle_time = 0.005;    ///< tau, seconds

  /// T_S - tau: the steady-state part of a slot that is averaged.
  double averaging_window() const noexcept { return slot_duration - settle_time; }
};

/// N x U matrix of reference-voltage deviations (volts). Row n holds the
/// deviations every unit applies in slot n.
class TrainingPlan {
 public:
  TrainingPlan() = default;

  /// Takes ownership of a deviation matrix. The amplitude fraction is the
  /// declared bound delta; every |deviation| must be <= delta * x.
  /// Throws InvalidPlan on N < U + 2, a bound violation, non-finite entries
  /// or a timing with tau outside (0, T_S).
  TrainingPlan(Eigen::MatrixXd deviations, double amplitude_fraction, double rated_voltage,
               SlotTiming timing = {});

  std::size_t slots() const noexcept { return static_cast<std::size_t>(deviations_.rows()); }
  std::size_t units() const noexcept { return static_cast<std::size_t>(deviations_.cols()); }
  double amplitude_fraction() const noexcept { return delta_; }
  double amplitude() const noexcept { return delta_ * rated_voltage_; }
  double rated_voltage() const noexcept { return rated_voltage_; }
  const SlotTiming& timing() const noexcept { return timing_; }
  const Eigen::MatrixXd& deviations() const noexcept { return deviations_; }
  double deviation(std::size_t slot, std::size_t unit) const {
    return deviations_(static_cast<Eigen::Index>(slot), static_cast<Eigen::Index>(unit));
  }

  /// x + deviations of slot n, one entry per unit.
  std::vector<double> reference_voltages(std::size_t slot) const;

  /// Checks the plan against a microgrid: unit count, rated voltage and
  /// delta <= 1 - v_min / x. Throws InvalidPlan.
  void check_compatible(const MicrogridConfig& config) const;

 private:
  Eigen::MatrixXd deviations_;
  double delta_ = 0.0;
  double rated_voltage_ = 0.0;
  SlotTiming timing_;
};

/// Sylvester construction, entries +-1. `order` must be a power of two.
Eigen::MatrixXd sylvester_hadamard(std::size_t order);

/// Binary Hadamard plan: unit u (0-based) gets row u + 1 of the smallest
/// Sylvester matrix of order >= max(N, U + 1), skipping the all-ones row,
/// truncated to N slots and scaled to +-delta x.
TrainingPlan hadamard_plan(std::size_t units, std::size_t slots, double amplitude_fraction,
                           double rated_voltage, SlotTiming timing = {});

/// Reads a deviation matrix in volts: N rows, U comma-separated columns.
/// Blank lines and lines starting with '#' are ignored. When
/// `amplitude_fraction` is not positive, delta is taken as max|dx| / x.
TrainingPlan read_plan_csv(std::istream& in, double rated_voltage,
                           double amplitude_fraction = 0.0, SlotTiming timing = {});
void write_plan_csv(std::ostream& out, const TrainingPlan& plan);

struct ExcitationDiagnostic {
  std::size_t controller = 0;  ///< 0-based
  std::size_t rank = 0;
  std::size_t required_rank = 0;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
  /// Condition number of the column-equilibrated regression matrix.
  double condition_number = 0.0;
  bool sufficient = false;
};

struct ExcitationReport {
  std::vector<ExcitationDiagnostic> controllers;
  bool sufficient() const noexcept;
};

/// Forward-simulates the noise-free slot voltages, assembles every
/// controller's regression matrix and reports its numerical rank. Rank
/// deficiency is reported, not thrown; solver errors propagate.
ExcitationReport validate_excitation(const MicrogridConfig& config, const TrainingPlan& plan);

}  // namespace dcmg
