#include "dcmg/crb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "dcmg/error.hpp"
#include "dcmg/measurement.hpp"

namespace dcmg {

namespace {

using Index = Eigen::Index;

struct PointSensitivity {
  double lambda = 0.0;
  Eigen::VectorXd q;
};

PointSensitivity power_balance_gradient(const MicrogridConfig& config,
                                        const std::vector<double>& refs, double v,
                                        std::size_t controller) {
  const double x = config.rated_voltage;
  const auto n_units = config.unit_count();
  PointSensitivity s;
  s.q.resize(static_cast<Index>(n_units + 2));
  double scale = 0.0;
  Index i = 0;
  for (std::size_t u = 0; u < n_units; ++u) {
    const double alpha = droop_coefficient(refs[u], config.min_voltage);
    s.lambda += (2.0 * v - refs[u]) * alpha * config.capacities[u];
    scale += refs[u] * alpha * config.capacities[u];
    if (u != controller) s.q(i++) = alpha * v * (v - refs[u]);
  }
  s.lambda += 2.0 * v * config.load.p_cr / (x * x) + config.load.p_cc / x;
  s.q(i++) = v * v / (x * x);
  s.q(i++) = v / x;
  s.q(i) = 1.0;
  if (!(std::abs(s.lambda) > 1e-12 * scale)) {
    std::ostringstream os;
    os << "power balance is stationary in v at v=" << v << " (lambda=" << s.lambda << ")";
    throw SingularSensitivity(os.str());
  }
  return s;
}

// sigma^2 (G^T G)^-1 via the SVD of the column-equilibrated G.
// Returns F with (G^T G)^{-1} = F F^T, so callers can form covariances without
// squaring the conditioning of an explicit inverse.
Eigen::MatrixXd inverse_information_factor(const Eigen::MatrixXd& g) {
  const Index p = g.cols();
  Eigen::VectorXd scales = g.colwise().norm().transpose();
  for (Index j = 0; j < p; ++j) {
    if (!(scales(j) > 0.0)) scales(j) = 1.0;
  }
  const Eigen::MatrixXd scaled = g * scales.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() == p ? sv(p - 1) : 0.0;
  if (!(smax > 0.0) || smin < kMinRcond * smax) {
    Eigen::VectorXd dir = svd.matrixV().col(p - 1).cwiseQuotient(scales);
    dir.normalize();
    std::ostringstream os;
    os << "Fisher information is singular (rcond " << (smax > 0.0 ? smin / smax : 0.0) << ")";
    throw SingularInformation(os.str(), std::vector<double>(dir.data(), dir.data() + dir.size()));
  }
  return scales.cwiseInverse().asDiagonal() * svd.matrixV() * sv.cwiseInverse().asDiagonal();
}

Eigen::MatrixXd covariance_from_factor(const Eigen::MatrixXd& f, double noise_variance) {
  Eigen::MatrixXd c = noise_variance * (f * f.transpose());
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd scaled_sensitivity(const SensitivityRecord& r) {
  Eigen::MatrixXd g = r.q;
  for (std::size_t n = 0; n < r.lambda.size(); ++n) g.row(static_cast<Index>(n)) /= r.lambda[n];
  return g;
}

}  // namespace

Eigen::MatrixXd SensitivityRecord::voltage_gradient() const {
  return -scaled_sensitivity(*this);
}

SensitivityRecord sensitivities(const MicrogridConfig& config, const TrainingPlan& plan,
                                std::size_t controller, JacobianMode mode) {
  const SlotTrace trace = simulate_training(config, plan);
  const auto n_units = config.unit_count();
  const auto n_slots = plan.slots();
  const Index p = static_cast<Index>(n_units + 2);
  const double x = config.rated_voltage;

  SensitivityRecord r;
  r.controller = controller;
  r.units = n_units;
  r.mode = mode;
  r.truth = true_parameters(config, controller);
  r.voltages = trace.voltages;
  r.nominal = trace.nominal;
  r.truth_star = map_theta_to_star(r.truth, r.nominal, x);
  r.lambda.resize(n_slots);
  r.q.resize(static_cast<Index>(n_slots), p);
  for (std::size_t n = 0; n < n_slots; ++n) {
    const auto s =
        power_balance_gradient(config, plan.reference_voltages(n), trace.voltages[n], controller);
    r.lambda[n] = s.lambda;
    r.q.row(static_cast<Index>(n)) = s.q.transpose();
  }

  const std::vector<double> rated(n_units, x);
  const auto nominal = power_balance_gradient(config, rated, r.nominal, controller);
  r.nominal_gradient = -nominal.q / nominal.lambda;

  // theta* = (W, omega, chi, zeta) with omega, chi depending on v-bar(theta).
  const Index g = p - 3;
  const double vb = r.nominal;
  const double p_cr = config.load.p_cr;
  const double p_cc = config.load.p_cc;
  r.jacobian = Eigen::MatrixXd::Identity(p, p);
  r.jacobian.row(g).setZero();
  r.jacobian.row(g + 1).setZero();
  r.jacobian.row(g + 2).setZero();
  r.jacobian(g, g) = vb * vb / (x * x);
  r.jacobian(g, g + 1) = vb / x;
  r.jacobian(g, g + 2) = 1.0;
  r.jacobian(g + 1, g) = 2.0 * vb / (x * x);
  r.jacobian(g + 1, g + 1) = 1.0 / x;
  r.jacobian(g + 2, g) = 1.0 / (x * x);
  if (mode == JacobianMode::chain_rule) {
    const double domega_dv = 2.0 * vb * p_cr / (x * x) + p_cc / x;
    const double dchi_dv = 2.0 * p_cr / (x * x);
    r.jacobian.row(g) += domega_dv * r.nominal_gradient.transpose();
    r.jacobian.row(g + 1) += dchi_dv * r.nominal_gradient.transpose();
  }
  return r;
}

Eigen::MatrixXd crb_full(const SensitivityRecord& record, double noise_variance) {
  return covariance_from_factor(inverse_information_factor(scaled_sensitivity(record)), noise_variance);
}

Eigen::MatrixXd crb_transformed(const SensitivityRecord& record, double noise_variance) {
  return covariance_from_factor(record.jacobian * inverse_information_factor(scaled_sensitivity(record)),
                                noise_variance);
}

Eigen::MatrixXd crb_transformed_direct(const SensitivityRecord& record, double noise_variance) {
  const Eigen::MatrixXd j_inv = record.jacobian.fullPivLu().inverse();
  return covariance_from_factor(inverse_information_factor(scaled_sensitivity(record) * j_inv),
                                noise_variance);
}

std::vector<CrbEntry> crb_table(const Eigen::MatrixXd& crb, const ParameterVector& truth) {
  if (crb.rows() != static_cast<Index>(truth.size()) || crb.cols() != crb.rows()) {
    throw DimensionMismatch("CRB matrix does not match the parameter vector");
  }
  const auto names = truth.names();
  std::vector<CrbEntry> out;
  out.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    CrbEntry e;
    e.parameter = names[i];
    e.truth = truth.values(static_cast<Index>(i));
    e.stddev = std::sqrt(std::max(0.0, crb(static_cast<Index>(i), static_cast<Index>(i))));
    e.relative = e.truth != 0.0 ? e.stddev / std::abs(e.truth)
                                : std::numeric_limits<double>::infinity();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dcmg
