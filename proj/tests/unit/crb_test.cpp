#include "dcmg/crb.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "dcmg/error.hpp"
#include "dcmg/measurement.hpp"
#include "oracles.hpp"

namespace dcmg {
namespace {

constexpr double kSigma2 = 2e-7;

// |a - b| <= tol * max(|b|, 1e-3 * ||b||_inf): entries that are nearly zero
// relative to the rest of the gradient are compared on the gradient's scale.
void expect_close_rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double tol) {
  const double floor = 1e-3 * b.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    EXPECT_LE(std::abs(a(i) - b(i)), tol * std::max(std::abs(b(i)), floor))
        << "entry " << i << ": " << a(i) << " vs " << b(i);
  }
}

TEST(Sensitivities, MatchFiniteDifferencesOnReference) {
  const auto c = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, 400.0);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto rec = sensitivities(c, plan, k);
    const Eigen::MatrixXd grad = rec.voltage_gradient();
    for (std::size_t n = 0; n < plan.slots(); ++n) {
      const auto fd = testing::fd_voltage_gradient(c, plan.reference_voltages(n), k);
      expect_close_rel(grad.row(static_cast<Eigen::Index>(n)).transpose(), fd, 1e-6);
    }
  }
}

TEST(Sensitivities, NoLoadSingleUnitAtRated) {
  MicrogridConfig c;
  c.capacities = {1000.0};
  const TrainingPlan quiet(Eigen::MatrixXd::Zero(3, 1), 0.001, 400.0);
  const auto rec = sensitivities(c, quiet, 0);
  ASSERT_EQ(rec.q.cols(), 3);  // U + 2 with the own unit excluded
  for (Eigen::Index n = 0; n < 3; ++n) {
    EXPECT_DOUBLE_EQ(rec.q(n, 0), 1.0);  // v^2 / x^2
    EXPECT_DOUBLE_EQ(rec.q(n, 1), 1.0);  // v / x
    EXPECT_DOUBLE_EQ(rec.q(n, 2), 1.0);
  }
}

TEST(Sensitivities, ExcludesOwnUnit) {
  const auto c = MicrogridConfig::reference();
  const auto rec = sensitivities(c, hadamard_plan(5, 7, 0.005, 400.0), 2);
  EXPECT_EQ(rec.q.cols(), 7);
  EXPECT_EQ(rec.truth.names()[2], "W4");
}

TEST(CrbFull, LinearInNoiseVariance) {
  const auto c = MicrogridConfig::reference();
  const auto rec = sensitivities(c, hadamard_plan(5, 7, 0.005, 400.0), 4);
  const Eigen::MatrixXd a = crb_full(rec, kSigma2);
  const Eigen::MatrixXd b = crb_full(rec, 3.0 * kSigma2);
  EXPECT_TRUE(b.isApprox(3.0 * a, 1e-12));
}

TEST(CrbFull, QuietPlanIsSingular) {
  const auto c = MicrogridConfig::reference();
  const auto rec = sensitivities(c, TrainingPlan(Eigen::MatrixXd::Zero(7, 5), 0.005, 400.0), 4);
  try {
    crb_full(rec, kSigma2);
    FAIL() << "expected SingularInformation";
  } catch (const SingularInformation& e) {
    ASSERT_EQ(e.direction().size(), 7u);
    // The direction must be (numerically) invisible to every slot.
    const Eigen::Map<const Eigen::VectorXd> dir(e.direction().data(), 7);
    EXPECT_LT((rec.voltage_gradient() * dir).cwiseAbs().maxCoeff(),
              1e-8 * rec.voltage_gradient().cwiseAbs().maxCoeff());
  }
}

TEST(CrbFull, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 80; ++i) {
    const auto c = testing::random_config(rng, 6);
    const std::size_t n = c.unit_count() + 2 + static_cast<std::size_t>(i % 3);
    const double delta = (0.05 + 0.9 * unit(rng)) * c.max_amplitude_fraction();
    const auto plan = hadamard_plan(c.unit_count(), n, delta, c.rated_voltage);
    // Truncated binary plans can repeat a slot pattern; those are rejected upstream.
    if (!validate_excitation(c, plan).sufficient()) continue;
    ++checked;
    const auto rec = sensitivities(c, plan, 0);
    for (const Eigen::MatrixXd& m : {crb_full(rec, kSigma2), crb_transformed(rec, kSigma2)}) {
      EXPECT_TRUE(m.isApprox(m.transpose(), 1e-14));
      const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
      EXPECT_GE(ev.minCoeff(), -1e-10 * m.trace());
    }
  }
  EXPECT_GE(checked, 30);
}

TEST(CrbTransformed, GenerationBlockUnchanged) {
  const auto c = MicrogridConfig::reference();
  const auto rec = sensitivities(c, hadamard_plan(5, 7, 0.005, 400.0), 4);
  const Eigen::MatrixXd full = crb_full(rec, kSigma2);
  const Eigen::MatrixXd star = crb_transformed(rec, kSigma2);
  EXPECT_TRUE(star.topLeftCorner(4, 4).isApprox(full.topLeftCorner(4, 4), 1e-12));
}

TEST(CrbTransformed, JacobianMatchesFiniteDifferences) {
  const auto c = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, 400.0);
  const auto rec = sensitivities(c, plan, 4);
  const Eigen::MatrixXd fd = testing::fd_star_jacobian(c, 4);
  for (Eigen::Index r = 0; r < 7; ++r) {
    expect_close_rel(rec.jacobian.row(r).transpose(), fd.row(r).transpose(), 1e-6);
  }
  // Direct terms of the omega row.
  const auto fixed = sensitivities(c, plan, 4, JacobianMode::fixed_nominal);
  EXPECT_NEAR(fixed.jacobian(4, 4), 0.975841134246519, 1e-12);
  EXPECT_NEAR(fixed.jacobian(4, 5), 0.987846715966864, 1e-12);
  EXPECT_EQ(fixed.jacobian(4, 6), 1.0);
  EXPECT_EQ(fixed.jacobian(4, 0), 0.0);
  // Chain-rule terms through v-bar are present for the capacities.
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NE(rec.jacobian(4, j), 0.0);
}

TEST(CrbTransformed, AgreesWithDirectFisherInStarCoordinates) {
  std::mt19937_64 rng(32);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    const auto c = testing::random_config(rng, 6);
    const auto plan = hadamard_plan(c.unit_count(), c.unit_count() + 3,
                                    0.5 * c.max_amplitude_fraction(), c.rated_voltage);
    if (!validate_excitation(c, plan).sufficient()) continue;
    ++checked;
    for (auto mode : {JacobianMode::chain_rule, JacobianMode::fixed_nominal}) {
      const auto rec = sensitivities(c, plan, 0, mode);
      const Eigen::MatrixXd a = crb_transformed(rec, kSigma2);
      const Eigen::MatrixXd b = crb_transformed_direct(rec, kSigma2);
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index s = 0; s < a.cols(); ++s) {
          EXPECT_NEAR(a(r, s), b(r, s), 1e-5 * std::sqrt(a(r, r) * a(s, s)));
        }
      }
    }
  }
  EXPECT_GE(checked, 20);
}

TEST(CrbTransformed, AggregateLoadBetterIdentifiedThanComponents) {
  const auto c = MicrogridConfig::reference();
  const auto rec = sensitivities(c, hadamard_plan(5, 7, 0.005, 400.0), 4);
  const Eigen::MatrixXd full = crb_full(rec, kSigma2);
  const Eigen::MatrixXd star = crb_transformed(rec, kSigma2);
  EXPECT_LT(star(4, 4), full(4, 4) + full(5, 5) + full(6, 6));
  const auto table = crb_table(star, rec.truth_star);
  EXPECT_EQ(table[4].parameter, "omega");
  EXPECT_LT(table[4].relative, 1e-3);
}

TEST(CrbFull, MonteCarloMatchesBoundAtReference) {
  const auto c = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, 400.0);
  const auto rec = sensitivities(c, plan, 4);
  const Eigen::VectorXd bound = crb_full(rec, kSigma2).diagonal();
  const auto trace = simulate_training(c, plan);
  const NoiseModel noise{0.01, 0.055, 0.005, 1e4};
  const int trials = 2000;
  Eigen::VectorXd mse = Eigen::VectorXd::Zero(7);
  for (int t = 0; t < trials; ++t) {
    const auto m = observe(trace, 4, noise, stream_seed(77, static_cast<std::uint64_t>(t), 4));
    const auto est = solve_mle(assemble_full(m, plan, 15000.0, 400.0, 390.0));
    mse += (est.parameters.values - rec.truth.values).cwiseAbs2();
  }
  mse /= trials;
  for (Eigen::Index i = 0; i < 7; ++i) {
    const double ratio = std::sqrt(mse(i) / bound(i));
    EXPECT_GT(ratio, 0.9) << rec.truth.names()[static_cast<std::size_t>(i)];
    EXPECT_LT(ratio, 1.25) << rec.truth.names()[static_cast<std::size_t>(i)];
  }
}

}  // namespace
}  // namespace dcmg
