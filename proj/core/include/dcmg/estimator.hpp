#pragma once

// Decentralized estimation of remote generation capacities and the bus load
// by one controller, from its own slot measurements and the shared training
// plan.
//
// Controller and unit indices are 0-based throughout the API; parameter
// names use 1-based unit labels ("W1", "W2", ...).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dcmg/grid_model.hpp"
#include "dcmg/measurement.hpp"
#include "dcmg/training_protocol.hpp"

namespace dcmg {

enum class Variant {
  full,         ///< load block (p_cr, p_cc, p_cp)
  transformed,  ///< load block (omega, chi, zeta) around v-bar
};

/// U - 1 remote capacities followed by a three-entry load block.
struct ParameterVector {
  Variant variant = Variant::full;
  std::size_t controller = 0;
  std::size_t units = 0;
  Eigen::VectorXd values;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
  /// Unit index (0-based) of generation entry i, skipping the controller.
  std::size_t unit_of(std::size_t i) const noexcept { return i < controller ? i : i + 1; }
  std::vector<std::string> names() const;
};

std::vector<std::string> parameter_names(Variant variant, std::size_t units,
                                         std::size_t controller);

/// Ground truth theta_k taken from the configuration.
ParameterVector true_parameters(const MicrogridConfig& config, std::size_t controller);

/// Replaces the remote capacities and load of `config` with `theta` (full
/// variant). The controller's own capacity is kept.
MicrogridConfig with_parameters(const MicrogridConfig& config, const ParameterVector& theta);

/// omega = (v/x)^2 p_cr + (v/x) p_cc + p_cp, chi = 2 v p_cr / x^2 + p_cc / x,
/// zeta = p_cr / x^2, with v = v-bar. Generation entries pass through.
ParameterVector map_theta_to_star(const ParameterVector& theta, double nominal_voltage,
                                  double rated_voltage);
ParameterVector map_star_to_theta(const ParameterVector& star, double nominal_voltage,
                                  double rated_voltage);

/// Aggregate demand estimate: omega.
double total_load(const ParameterVector& star);

struct RankDiagnostics {
  std::size_t rank = 0;
  std::size_t columns = 0;
  double min_singular_value = 0.0;
  double max_singular_value = 0.0;
  double condition_number = 0.0;

  double rcond() const noexcept {
    return max_singular_value > 0.0 ? min_singular_value / max_singular_value : 0.0;
  }
  bool full_rank() const noexcept { return rank == columns; }
};

/// SVD-based numerical rank of `m` after scaling each column to unit 2-norm.
/// Cutoff max(rows, cols) * eps * sigma_max; all-zero columns count as lost.
RankDiagnostics rank_diagnostics(const Eigen::MatrixXd& m);

/// H theta = pi W_k.
struct RegressionSystem {
  Variant variant = Variant::full;
  std::size_t controller = 0;
  std::size_t units = 0;
  Eigen::MatrixXd design;  ///< H, N x (U + 2)
  Eigen::VectorXd target;  ///< pi, N
  double own_capacity = 0.0;
  RankDiagnostics diagnostics;

  Eigen::VectorXd rhs() const { return target * own_capacity; }
};

/// Builds H = [diag(v) Delta, v.*v / x^2, v / x, 1] with generation columns
/// alpha_u[n] (v[n] - x - dx_u[n]) v[n] for u != k, and
/// pi[n] = -v[n] alpha_k[n] (v[n] - x - dx_k[n]).
RegressionSystem assemble_full(std::span<const double> voltages, const TrainingPlan& plan,
                               std::size_t controller, double own_capacity, double rated_voltage,
                               double min_voltage);
RegressionSystem assemble_full(const MeasurementSet& m, const TrainingPlan& plan,
                               double own_capacity, double rated_voltage, double min_voltage);

/// Same generation block and target; the load block becomes
/// [1, dv, dv .* dv] with dv = v - nominal.
RegressionSystem assemble_transformed(std::span<const double> voltages, const TrainingPlan& plan,
                                      std::size_t controller, double own_capacity,
                                      double rated_voltage, double min_voltage,
                                      double nominal_voltage);
RegressionSystem assemble_transformed(const MeasurementSet& m, const TrainingPlan& plan,
                                      double own_capacity, double rated_voltage,
                                      double min_voltage, double nominal_voltage);

struct Estimate {
  ParameterVector parameters;
  double residual_norm = 0.0;  ///< ||H theta - pi W_k||
  RankDiagnostics diagnostics;
};

/// Reciprocal condition number (column-equilibrated) below which a system
/// counts as insufficiently excited. Well-posed plans scale as delta^2
/// (about 7e-11 at delta = 1e-4 on the reference grid); a repeated or
/// missing sequence drops it to rounding level (< 1e-25).
inline constexpr double kMinRcond = 1e-13;

/// Least-squares solution by column-pivoted Householder QR on the
/// column-equilibrated design. Throws InsufficientExcitation when the
/// numerical rank is below U + 2 or rcond < kMinRcond.
Estimate solve_mle(const RegressionSystem& system);

}  // namespace dcmg
