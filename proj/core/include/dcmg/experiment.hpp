#pragma once

// Monte Carlo driver: sweeps the training amplitude, runs every controller's
// estimators on independent noise realizations and compares the observed
// relative RMSE with the Cramer-Rao prediction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dcmg/crb.hpp"
#include "dcmg/estimator.hpp"
#include "dcmg/grid_model.hpp"
#include "dcmg/measurement.hpp"
#include "dcmg/training_protocol.hpp"

namespace dcmg {

/// `count` log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);

struct ExperimentSpec {
  MicrogridConfig scenario = MicrogridConfig::reference();
  std::size_t slots = 7;
  /// Deviation matrix in volts. When set it replaces the Hadamard family and
  /// the sweep has a single grid point at delta = max|dx| / x.
  std::optional<Eigen::MatrixXd> custom_plan;
  std::vector<double> deltas = log_grid(1e-4, 1e-2, 10);
  SlotTiming timing;
  double sample_noise = 0.01;  ///< phi, V per sample
  double sampling_rate = 1e4;  ///< f_S
  bool noiseless = false;
  std::size_t trials = 1000;
  std::vector<std::size_t> controllers = {4};  ///< 0-based
  std::uint64_t seed = 20160321;
  /// Hand controllers the true v-bar instead of a measured quiet slot.
  bool exact_nominal = false;
  JacobianMode jacobian = JacobianMode::chain_rule;
  std::size_t threads = 0;  ///< 0: hardware concurrency

  NoiseModel noise_model() const;
  double noise_variance() const;
  /// Grid points actually swept (the custom plan collapses it to one).
  std::vector<double> grid() const;
  TrainingPlan plan(double delta) const;
  /// Throws ConfigError on an inconsistent spec.
  void validate() const;
};

/// sqrt(mean((estimate - truth)^2)) / |truth|.
double rrmse(std::span<const double> estimates, double truth);

struct SweepRow {
  double delta = 0.0;
  std::size_t controller = 0;  ///< 0-based
  std::string parameter;
  Variant variant = Variant::full;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double rrmse = 0.0;
  double crb_rrmse = 0.0;
  std::size_t trials = 0;
};

struct GridFailure {
  double delta = 0.0;
  std::size_t controller = 0;
  std::string reason;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<GridFailure> failures;

  bool complete() const noexcept { return failures.empty(); }
  /// Row for (delta, controller, parameter) or nullptr.
  const SweepRow* find(double delta, std::size_t controller, const std::string& parameter) const;
};

/// Deterministic for a given ExperimentSpec: trial t of controller k draws its noise from
/// stream_seed(seed, t, k) regardless of thread count or grid point.
SweepResult run_sweep(const ExperimentSpec& spec);

struct CrbRow {
  double delta = 0.0;
  std::size_t controller = 0;
  std::string parameter;
  double truth = 0.0;
  double stddev = 0.0;
  double relative = 0.0;
};

struct CrbMatrix {
  double delta = 0.0;
  std::size_t controller = 0;
  std::vector<std::string> full_names;
  std::vector<std::string> transformed_names;
  Eigen::MatrixXd full;
  Eigen::MatrixXd transformed;
};

struct CrbReport {
  std::vector<CrbRow> rows;
  std::vector<GridFailure> failures;
  /// One entry per successful (delta, controller) in row order.
  std::vector<CrbMatrix> matrices;
};

/// Noise-free CRB-predicted RRMSE for every parameter of both variants.
CrbReport report_crb(const ExperimentSpec& spec, std::span<const double> deltas);

struct ParameterReport {
  std::string parameter;
  double truth = 0.0;
  double estimate = 0.0;
  double relative_error = 0.0;
  double crb_stddev = 0.0;
};

struct ControllerReport {
  std::size_t controller = 0;
  MeasurementSet measurements;
  double nominal_used = 0.0;
  RankDiagnostics full_diagnostics;
  RankDiagnostics transformed_diagnostics;
  double full_residual = 0.0;
  double transformed_residual = 0.0;
  std::vector<ParameterReport> full;
  std::vector<ParameterReport> transformed;
};

struct EstimateReport {
  double delta = 0.0;
  std::uint64_t seed = 0;
  double noise_variance = 0.0;
  double nominal_voltage = 0.0;
  std::vector<double> voltages;
  ExcitationReport excitation;
  std::vector<ControllerReport> controllers;
};

/// One end-to-end trial with full diagnostics. Throws InvalidPlan or
/// InsufficientExcitation when the plan cannot identify the parameters.
EstimateReport run_single(const ExperimentSpec& spec, double delta, std::uint64_t seed);

}  // namespace dcmg
