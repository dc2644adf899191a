#pragma once

// Cramer-Rao bounds for the estimators in estimator.hpp, built from the
// implicit-function sensitivities of the settled bus voltage.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dcmg/estimator.hpp"
#include "dcmg/grid_model.hpp"
#include "dcmg/training_protocol.hpp"

namespace dcmg {

/// How theta* depends on theta. v-bar is itself a function of theta;
/// `fixed_nominal` treats it as a constant and drops those chain-rule terms.
enum class JacobianMode { chain_rule, fixed_nominal };

struct SensitivityRecord {
  std::size_t controller = 0;
  std::size_t units = 0;
  std::vector<double> voltages;  ///< noise-free v[n]
  /// d/dv of the power balance v^2(sum alpha W + p_cr/x^2) - v(sum alpha x_u W - p_cc/x) + p_cp.
  std::vector<double> lambda;
  /// N x (U + 2): d/dtheta of the same power balance, u != k.
  Eigen::MatrixXd q;
  double nominal = 0.0;
  /// d v-bar / d theta.
  Eigen::VectorXd nominal_gradient;
  /// (U + 2) x (U + 2) Jacobian of theta* with respect to theta.
  Eigen::MatrixXd jacobian;
  JacobianMode mode = JacobianMode::chain_rule;
  ParameterVector truth;       ///< theta
  ParameterVector truth_star;  ///< theta* at the true v-bar

  /// dv[n]/dtheta = -q[n] / lambda[n], N x (U + 2).
  Eigen::MatrixXd voltage_gradient() const;
};

/// Throws SingularSensitivity if some |lambda[n]| is negligible.
SensitivityRecord sensitivities(const MicrogridConfig& config, const TrainingPlan& plan,
                                std::size_t controller,
                                JacobianMode mode = JacobianMode::chain_rule);

/// sigma^2 (sum_n q q^T / lambda^2)^-1. Throws SingularInformation (with the
/// unidentifiable direction) when the information matrix is singular.
Eigen::MatrixXd crb_full(const SensitivityRecord& record, double noise_variance);

/// J CRB J^T.
Eigen::MatrixXd crb_transformed(const SensitivityRecord& record, double noise_variance);

/// Inverse of the Fisher information written directly in theta*
/// coordinates, i.e. with sensitivities q^T J^-1. Equal to crb_transformed up
/// to rounding.
Eigen::MatrixXd crb_transformed_direct(const SensitivityRecord& record, double noise_variance);

struct CrbEntry {
  std::string parameter;
  double truth = 0.0;
  double stddev = 0.0;    ///< sqrt(CRB_ii)
  double relative = 0.0;  ///< sqrt(CRB_ii) / |truth|
};

std::vector<CrbEntry> crb_table(const Eigen::MatrixXd& crb, const ParameterVector& truth);

}  // namespace dcmg
