#include "dcmg/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "dcmg/error.hpp"
#include "oracles.hpp"

namespace dcmg {
namespace {

constexpr std::size_t kFive = 4;  // 0-based index of the 15 kW unit

double max_relative_error(const Eigen::VectorXd& est, const Eigen::VectorXd& truth) {
  return ((est - truth).array().abs() / truth.array().abs()).maxCoeff();
}

struct Noiseless {
  MicrogridConfig config = MicrogridConfig::reference();
  TrainingPlan plan = hadamard_plan(5, 7, 0.005, 400.0);
  SlotTrace trace = simulate_training(config, plan);
};

TEST(AssembleFull, ShapesForReferenceScenario) {
  Noiseless s;
  const auto sys = assemble_full(s.trace.voltages, s.plan, kFive, 15000.0, 400.0, 390.0);
  EXPECT_EQ(sys.design.rows(), 7);
  EXPECT_EQ(sys.design.cols(), 7);
  EXPECT_EQ(sys.target.size(), 7);
  EXPECT_EQ(sys.diagnostics.rank, 7u);
}

TEST(AssembleFull, NoiselessRegressionIdentity) {
  Noiseless s;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto sys = assemble_full(s.trace.voltages, s.plan, k, s.config.capacities[k], 400.0, 390.0);
    const auto truth = true_parameters(s.config, k);
    const Eigen::VectorXd defect = sys.design * truth.values - sys.rhs();
    EXPECT_LT(defect.cwiseAbs().maxCoeff() / sys.rhs().cwiseAbs().maxCoeff(), 1e-10)
        << "controller " << k + 1;
  }
}

TEST(AssembleFull, QuietPlanGivesCollinearGenerationColumns) {
  Noiseless s;
  const TrainingPlan quiet(Eigen::MatrixXd::Zero(7, 5), 0.005, 400.0);
  const auto trace = simulate_training(s.config, quiet);
  const auto sys = assemble_full(trace.voltages, quiet, kFive, 15000.0, 400.0, 390.0);
  const double vb = trace.nominal;
  const double expected = vb * (vb - 400.0) / (390.0 * 10.0);
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index n = 0; n < 7; ++n) EXPECT_DOUBLE_EQ(sys.design(n, j), expected);
  }
  EXPECT_LT(sys.diagnostics.rank, 7u);
  EXPECT_THROW(solve_mle(sys), InsufficientExcitation);
}

TEST(AssembleFull, DimensionMismatch) {
  Noiseless s;
  const std::vector<double> short_v(6, 395.0);
  EXPECT_THROW(assemble_full(short_v, s.plan, kFive, 15000.0, 400.0, 390.0), DimensionMismatch);
  EXPECT_THROW(assemble_full(s.trace.voltages, s.plan, 5, 15000.0, 400.0, 390.0),
               DimensionMismatch);
}

TEST(MapThetaToStar, ReferenceValues) {
  const auto c = MicrogridConfig::reference();
  const auto theta = true_parameters(c, kFive);
  const auto star = map_theta_to_star(theta, nominal_voltage(c), 400.0);
  // High-precision evaluation at v-bar = 395.13868638674574717 V.
  EXPECT_NEAR(star.values(4), 10885.060759779977, 1e-8);
  EXPECT_NEAR(star.values(5), 23.537317529420126, 1e-11);
  EXPECT_DOUBLE_EQ(star.values(6), 3500.0 / 160000.0);
  EXPECT_DOUBLE_EQ(total_load(star), star.values(4));
  // Approximation bias of omega against the rated total of 11 kW (about 1.04 %).
  EXPECT_NEAR((11000.0 - total_load(star)) / 11000.0, 0.0104490218381839, 1e-12);
}

TEST(MapThetaToStar, AtRatedVoltageOmegaIsTotalLoad) {
  const auto c = MicrogridConfig::reference();
  const auto star = map_theta_to_star(true_parameters(c, 0), 400.0, 400.0);
  EXPECT_DOUBLE_EQ(total_load(star), 11000.0);
  EXPECT_THROW(total_load(true_parameters(c, 0)), DomainError);
}

TEST(MapThetaToStar, RoundTripIsIdentity) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto c = testing::random_config(rng);
    const auto theta = true_parameters(c, 0);
    const double vb = c.min_voltage + unit(rng) * (c.rated_voltage - c.min_voltage);
    const auto back = map_star_to_theta(map_theta_to_star(theta, vb, c.rated_voltage), vb,
                                        c.rated_voltage);
    for (Eigen::Index j = 0; j < theta.values.size(); ++j) {
      EXPECT_NEAR(back.values(j), theta.values(j), 1e-12 * std::max(1.0, c.load.total()));
    }
  }
}

TEST(AssembleTransformed, NoiselessIdentityWithExactNominal) {
  Noiseless s;
  const auto sys = assemble_transformed(s.trace.voltages, s.plan, kFive, 15000.0, 400.0, 390.0,
                                        s.trace.nominal);
  const auto star = map_theta_to_star(true_parameters(s.config, kFive), s.trace.nominal, 400.0);
  const Eigen::VectorXd defect = sys.design * star.values - sys.rhs();
  EXPECT_LT(defect.cwiseAbs().maxCoeff() / sys.rhs().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AssembleTransformed, NoTrainingIsRankDeficient) {
  Noiseless s;
  const TrainingPlan quiet(Eigen::MatrixXd::Zero(7, 5), 0.005, 400.0);
  const auto trace = simulate_training(s.config, quiet);
  const auto sys =
      assemble_transformed(trace.voltages, quiet, kFive, 15000.0, 400.0, 390.0, trace.nominal);
  EXPECT_TRUE(sys.design.col(5).isZero(0.0));
  EXPECT_TRUE(sys.design.col(6).isZero(0.0));
  EXPECT_FALSE(sys.diagnostics.full_rank());
  EXPECT_THROW(solve_mle(sys), InsufficientExcitation);
}

TEST(SolveMle, NoiselessReferenceRecoversTruth) {
  Noiseless s;
  const auto est =
      solve_mle(assemble_full(s.trace.voltages, s.plan, kFive, 15000.0, 400.0, 390.0));
  Eigen::VectorXd truth(7);
  truth << 100, 1000, 2000, 4000, 3500, 2500, 5000;
  EXPECT_LT(max_relative_error(est.parameters.values, truth), 1e-8);
  EXPECT_EQ(est.diagnostics.rank, 7u);
  EXPECT_EQ(est.parameters.names(),
            (std::vector<std::string>{"W1", "W2", "W3", "W4", "p_cr", "p_cc", "p_cp"}));

  const auto star_est = solve_mle(assemble_transformed(s.trace.voltages, s.plan, kFive, 15000.0,
                                                       400.0, 390.0, s.trace.nominal));
  const auto star = map_theta_to_star(true_parameters(s.config, kFive), s.trace.nominal, 400.0);
  EXPECT_LT(max_relative_error(star_est.parameters.values, star.values), 1e-8);
  EXPECT_NEAR(total_load(star_est.parameters), total_load(star), 1e-8 * total_load(star));
}

TEST(SolveMle, NoiselessErrorBoundedByConditioningAtSmallAmplitude) {
  const auto config = MicrogridConfig::reference();
  Eigen::VectorXd truth(7);
  truth << 100, 1000, 2000, 4000, 3500, 2500, 5000;
  for (double delta : {1e-4, 1e-3, 1e-2}) {
    const auto plan = hadamard_plan(5, 7, delta, 400.0);
    const auto trace = simulate_training(config, plan);
    const auto est = solve_mle(assemble_full(trace.voltages, plan, kFive, 15000.0, 400.0, 390.0));
    // Only the final rounding of v remains, amplified by the condition number.
    const double bound = 100.0 * std::numeric_limits<double>::epsilon() / est.diagnostics.rcond();
    EXPECT_LT(max_relative_error(est.parameters.values, truth), bound) << delta;
  }
}

TEST(SolveMle, ControllersAgreeWhenNoiseless) {
  Noiseless s;
  std::vector<Eigen::VectorXd> loads;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto est = solve_mle(
        assemble_full(s.trace.voltages, s.plan, k, s.config.capacities[k], 400.0, 390.0));
    loads.push_back(est.parameters.values.tail(3));
    for (std::size_t i = 0; i < 4; ++i) {
      const auto u = est.parameters.unit_of(i);
      EXPECT_NEAR(est.parameters.values(static_cast<Eigen::Index>(i)), s.config.capacities[u],
                  1e-8 * s.config.capacities[u]);
    }
  }
  for (std::size_t k = 1; k < 5; ++k) {
    EXPECT_LT(max_relative_error(loads[k], loads[0]), 2e-8);
  }
}

TEST(SolveMle, PermutationEquivariance) {
  Noiseless s;
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};  // new unit j is old unit perm[j]
  MicrogridConfig pc = s.config;
  Eigen::MatrixXd pdev(7, 5);
  for (std::size_t j = 0; j < 5; ++j) {
    pc.capacities[j] = s.config.capacities[perm[j]];
    pdev.col(static_cast<Eigen::Index>(j)) = s.plan.deviations().col(static_cast<Eigen::Index>(perm[j]));
  }
  const TrainingPlan pplan(pdev, 0.005, 400.0);
  const auto ptrace = simulate_training(pc, pplan);
  const std::size_t old_k = kFive;
  const std::size_t new_k = static_cast<std::size_t>(
      std::find(perm.begin(), perm.end(), old_k) - perm.begin());

  const auto a = solve_mle(assemble_full(s.trace.voltages, s.plan, old_k, 15000.0, 400.0, 390.0));
  const auto b = solve_mle(assemble_full(ptrace.voltages, pplan, new_k, 15000.0, 400.0, 390.0));
  for (std::size_t i = 0; i < 4; ++i) {
    const auto new_unit = b.parameters.unit_of(i);
    const auto old_unit = perm[new_unit];
    const auto old_slot = old_unit < old_k ? old_unit : old_unit - 1;
    EXPECT_NEAR(b.parameters.values(static_cast<Eigen::Index>(i)),
                a.parameters.values(static_cast<Eigen::Index>(old_slot)),
                1e-8 * s.config.capacities[old_unit]);
  }
  EXPECT_LT(max_relative_error(b.parameters.values.tail(3), a.parameters.values.tail(3)), 1e-7);
}

TEST(WithParameters, RoundTrip) {
  const auto c = MicrogridConfig::reference();
  auto theta = true_parameters(c, 2);
  theta.values(0) = 123.0;
  theta.values(5) = 17.0;
  const auto changed = with_parameters(c, theta);
  EXPECT_EQ(changed.capacities[0], 123.0);
  EXPECT_EQ(changed.capacities[2], 2000.0);
  EXPECT_EQ(changed.load.p_cc, 17.0);
  EXPECT_EQ(true_parameters(changed, 2).values, theta.values);
}

TEST(RankDiagnostics, ScaleInvariant) {
  Eigen::MatrixXd m(4, 2);
  m << 1, 1e6, 2, 3e6, 3, 1e6, 4, 5e6;
  const auto d = rank_diagnostics(m);
  EXPECT_EQ(d.rank, 2u);
  Eigen::MatrixXd scaled = m;
  scaled.col(1) *= 1e-9;
  EXPECT_NEAR(rank_diagnostics(scaled).condition_number, d.condition_number,
              1e-10 * d.condition_number);
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 2, 3, 6, 5, 10;
  EXPECT_EQ(rank_diagnostics(dup).rank, 1u);
}

}  // namespace
}  // namespace dcmg
