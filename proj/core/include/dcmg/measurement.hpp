#pragma once

// Forward simulation of a training period and the noisy slot-averaged bus
// voltage each controller observes.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "dcmg/grid_model.hpp"
#include "dcmg/training_protocol.hpp"

namespace dcmg {

struct SlotTrace {
  std::vector<double> voltages;    ///< v[n], true settled bus voltage per slot
  double nominal = 0.0;            ///< v-bar, bus voltage without training
  std::vector<double> deviations;  ///< v[n] - v-bar
  Eigen::MatrixXd currents;        ///< N x U output currents
  Eigen::MatrixXd powers;          ///< N x U output powers

  std::size_t slots() const noexcept { return voltages.size(); }
};

/// Applies every slot's reference voltages and records the settled bus.
/// Throws InfeasibleOperatingPoint naming the slot if the solver fails.
SlotTrace simulate_training(const MicrogridConfig& config, const TrainingPlan& plan);

/// ADC sampling noise averaged over the steady-state part of each slot.
struct NoiseModel {
  double sample_noise = 0.01;    ///< phi, volts per sample
  double slot_duration = 0.055;  ///< T_S
  double settle_time = 0.005;    ///< tau
  double sampling_rate = 1e4;    ///< f_S, Hz

  double samples_per_slot() const noexcept {
    return (slot_duration - settle_time) * sampling_rate;
  }
  /// sigma^2 = phi^2 / ((T_S - tau) f_S). Throws DomainError unless at least
  /// one sample is averaged.
  double variance() const;
};

struct MeasurementSet {
  std::size_t controller = 0;  ///< 0-based
  std::vector<double> values;  ///< noisy slot averages
  double nominal = 0.0;        ///< measured quiet slot before training
  double noise_variance = 0.0;
  std::uint64_t seed = 0;
};

/// Stream seed for one (trial, controller) pair, derived from the master
/// seed by a counter-based SplitMix64 hash so trials can run in any order.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t controller);

/// Adds i.i.d. N(0, sigma^2) noise to every slot voltage and to the nominal
/// voltage. Deterministic in (trace, controller, seed).
MeasurementSet observe(const SlotTrace& trace, std::size_t controller, const NoiseModel& noise,
                       std::uint64_t seed);

/// CSV with header `slot,value`; slot 0 is the quiet nominal slot.
void write_measurements_csv(std::ostream& out, const MeasurementSet& m);

}  // namespace dcmg
