#include "dcmg/estimator.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "dcmg/error.hpp"

namespace dcmg {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

void check_controller(std::size_t controller, std::size_t units) {
  if (controller >= units) {
    std::ostringstream os;
    os << "controller " << (controller + 1) << " out of range 1.." << units;
    throw DimensionMismatch(os.str());
  }
}

// Column 2-norms, with zero columns mapped to 1 so scaling leaves them zero.
Eigen::VectorXd column_scales(const Eigen::MatrixXd& m) {
  Eigen::VectorXd s = m.colwise().norm().transpose();
  for (Index j = 0; j < s.size(); ++j) {
    if (!(s(j) > 0.0)) s(j) = 1.0;
  }
  return s;
}

// Fills the N x (U - 1) generation block and pi.
void assemble_generation(std::span<const double> v, const TrainingPlan& plan,
                         std::size_t controller, double rated_voltage, double min_voltage,
                         Eigen::MatrixXd& design, Eigen::VectorXd& target) {
  const auto n_slots = plan.slots();
  const auto n_units = plan.units();
  if (v.size() != n_slots) {
    std::ostringstream os;
    os << "measurement has " << v.size() << " slots, plan has " << n_slots;
    throw DimensionMismatch(os.str());
  }
  check_controller(controller, n_units);
  design.resize(idx(n_slots), idx(n_units + 2));
  target.resize(idx(n_slots));
  for (std::size_t n = 0; n < n_slots; ++n) {
    Index col = 0;
    for (std::size_t u = 0; u < n_units; ++u) {
      const double dx = plan.deviation(n, u);
      const double alpha = droop_coefficient(rated_voltage + dx, min_voltage);
      const double entry = v[n] * alpha * (v[n] - rated_voltage - dx);
      if (u == controller) {
        target(idx(n)) = -entry;
      } else {
        design(idx(n), col++) = entry;
      }
    }
  }
}

}  // namespace

std::vector<std::string> parameter_names(Variant variant, std::size_t units,
                                         std::size_t controller) {
  std::vector<std::string> names;
  names.reserve(units + 2);
  for (std::size_t u = 0; u < units; ++u) {
    if (u != controller) names.push_back("W" + std::to_string(u + 1));
  }
  if (variant == Variant::full) {
    names.insert(names.end(), {"p_cr", "p_cc", "p_cp"});
  } else {
    names.insert(names.end(), {"omega", "chi", "zeta"});
  }
  return names;
}

std::vector<std::string> ParameterVector::names() const {
  return parameter_names(variant, units, controller);
}

ParameterVector true_parameters(const MicrogridConfig& config, std::size_t controller) {
  const auto n_units = config.unit_count();
  check_controller(controller, n_units);
  ParameterVector theta;
  theta.variant = Variant::full;
  theta.controller = controller;
  theta.units = n_units;
  theta.values.resize(idx(n_units + 2));
  Index i = 0;
  for (std::size_t u = 0; u < n_units; ++u) {
    if (u != controller) theta.values(i++) = config.capacities[u];
  }
  theta.values(i++) = config.load.p_cr;
  theta.values(i++) = config.load.p_cc;
  theta.values(i) = config.load.p_cp;
  return theta;
}

MicrogridConfig with_parameters(const MicrogridConfig& config, const ParameterVector& theta) {
  if (theta.variant != Variant::full) {
    throw DomainError("with_parameters expects the full parameter variant");
  }
  if (theta.units != config.unit_count() || theta.size() != config.unit_count() + 2) {
    throw DimensionMismatch("parameter vector does not match the microgrid");
  }
  MicrogridConfig out = config;
  const auto gens = theta.units - 1;
  for (std::size_t i = 0; i < gens; ++i) out.capacities[theta.unit_of(i)] = theta.values(idx(i));
  out.load.p_cr = theta.values(idx(gens));
  out.load.p_cc = theta.values(idx(gens + 1));
  out.load.p_cp = theta.values(idx(gens + 2));
  return out;
}

ParameterVector map_theta_to_star(const ParameterVector& theta, double nominal_voltage,
                                  double rated_voltage) {
  if (theta.variant != Variant::full) throw DomainError("expected the full parameter variant");
  ParameterVector star = theta;
  star.variant = Variant::transformed;
  const Index g = star.values.size() - 3;
  const double p_cr = theta.values(g);
  const double p_cc = theta.values(g + 1);
  const double p_cp = theta.values(g + 2);
  const double r = nominal_voltage / rated_voltage;
  star.values(g) = r * r * p_cr + r * p_cc + p_cp;
  star.values(g + 1) = 2.0 * nominal_voltage * p_cr / (rated_voltage * rated_voltage) +
                       p_cc / rated_voltage;
  star.values(g + 2) = p_cr / (rated_voltage * rated_voltage);
  return star;
}

ParameterVector map_star_to_theta(const ParameterVector& star, double nominal_voltage,
                                  double rated_voltage) {
  if (star.variant != Variant::transformed) {
    throw DomainError("expected the transformed parameter variant");
  }
  ParameterVector theta = star;
  theta.variant = Variant::full;
  const Index g = theta.values.size() - 3;
  const double omega = star.values(g);
  const double chi = star.values(g + 1);
  const double zeta = star.values(g + 2);
  const double p_cr = zeta * rated_voltage * rated_voltage;
  const double p_cc = (chi - 2.0 * nominal_voltage * zeta) * rated_voltage;
  theta.values(g) = p_cr;
  theta.values(g + 1) = p_cc;
  theta.values(g + 2) =
      omega - nominal_voltage * nominal_voltage * zeta - nominal_voltage / rated_voltage * p_cc;
  return theta;
}

double total_load(const ParameterVector& star) {
  if (star.variant != Variant::transformed) {
    throw DomainError("total load is read from the transformed parameter variant");
  }
  return star.values(star.values.size() - 3);
}

RankDiagnostics rank_diagnostics(const Eigen::MatrixXd& m) {
  RankDiagnostics d;
  d.columns = static_cast<std::size_t>(m.cols());
  if (m.size() == 0) return d;

  Eigen::MatrixXd scaled = m;
  const Eigen::VectorXd colnorm = m.colwise().norm().transpose();
  for (Index j = 0; j < m.cols(); ++j) {
    if (colnorm(j) > 0.0) scaled.col(j) /= colnorm(j);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const Eigen::VectorXd& sv = svd.singularValues();
  d.max_singular_value = sv.size() ? sv(0) : 0.0;
  // A tall-enough matrix has `cols` singular values; missing ones are zero.
  d.min_singular_value = sv.size() == m.cols() ? sv(sv.size() - 1) : 0.0;
  const double cutoff = static_cast<double>(std::max(m.rows(), m.cols())) *
                        std::numeric_limits<double>::epsilon() * d.max_singular_value;
  d.rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) ++d.rank;
  }
  d.condition_number = d.min_singular_value > 0.0
                           ? d.max_singular_value / d.min_singular_value
                           : std::numeric_limits<double>::infinity();
  return d;
}

RegressionSystem assemble_full(std::span<const double> voltages, const TrainingPlan& plan,
                               std::size_t controller, double own_capacity, double rated_voltage,
                               double min_voltage) {
  RegressionSystem sys;
  sys.variant = Variant::full;
  sys.controller = controller;
  sys.units = plan.units();
  sys.own_capacity = own_capacity;
  assemble_generation(voltages, plan, controller, rated_voltage, min_voltage, sys.design,
                      sys.target);
  const Index g = idx(sys.units - 1);
  const double inv_x = 1.0 / rated_voltage;
  for (std::size_t n = 0; n < voltages.size(); ++n) {
    const double v = voltages[n];
    sys.design(idx(n), g) = v * v * inv_x * inv_x;
    sys.design(idx(n), g + 1) = v * inv_x;
    sys.design(idx(n), g + 2) = 1.0;
  }
  sys.diagnostics = rank_diagnostics(sys.design);
  return sys;
}

RegressionSystem assemble_full(const MeasurementSet& m, const TrainingPlan& plan,
                               double own_capacity, double rated_voltage, double min_voltage) {
  return assemble_full(m.values, plan, m.controller, own_capacity, rated_voltage, min_voltage);
}

RegressionSystem assemble_transformed(std::span<const double> voltages, const TrainingPlan& plan,
                                      std::size_t controller, double own_capacity,
                                      double rated_voltage, double min_voltage,
                                      double nominal_voltage) {
  RegressionSystem sys;
  sys.variant = Variant::transformed;
  sys.controller = controller;
  sys.units = plan.units();
  sys.own_capacity = own_capacity;
  assemble_generation(voltages, plan, controller, rated_voltage, min_voltage, sys.design,
                      sys.target);
  const Index g = idx(sys.units - 1);
  for (std::size_t n = 0; n < voltages.size(); ++n) {
    const double dv = voltages[n] - nominal_voltage;
    sys.design(idx(n), g) = 1.0;
    sys.design(idx(n), g + 1) = dv;
    sys.design(idx(n), g + 2) = dv * dv;
  }
  sys.diagnostics = rank_diagnostics(sys.design);
  return sys;
}

RegressionSystem assemble_transformed(const MeasurementSet& m, const TrainingPlan& plan,
                                      double own_capacity, double rated_voltage,
                                      double min_voltage, double nominal_voltage) {
  return assemble_transformed(m.values, plan, m.controller, own_capacity, rated_voltage,
                              min_voltage, nominal_voltage);
}

Estimate solve_mle(const RegressionSystem& system) {
  const auto& d = system.diagnostics;
  if (!d.full_rank() || d.rcond() < kMinRcond) {
    std::ostringstream os;
    os << "controller " << (system.controller + 1) << ": regression matrix has rank " << d.rank
       << " of " << d.columns << " (rcond " << d.rcond() << ")";
    throw InsufficientExcitation(os.str());
  }
  const Eigen::VectorXd scales = column_scales(system.design);
  const Eigen::MatrixXd scaled = system.design * scales.cwiseInverse().asDiagonal();
  const Eigen::VectorXd rhs = system.rhs();
  const Eigen::VectorXd y = scaled.colPivHouseholderQr().solve(rhs);

  Estimate est;
  est.parameters.variant = system.variant;
  est.parameters.controller = system.controller;
  est.parameters.units = system.units;
  est.parameters.values = y.cwiseQuotient(scales);
  est.residual_norm = (system.design * est.parameters.values - rhs).norm();
  est.diagnostics = d;
  return est;
}

}  // namespace dcmg
