#include "dcmg/measurement.hpp"

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "dcmg/error.hpp"

namespace dcmg {
namespace {

NoiseModel reference_noise() { return NoiseModel{0.01, 0.055, 0.005, 1e4}; }

TEST(SimulateTraining, QuietPlanStaysAtNominal) {
  const auto c = MicrogridConfig::reference();
  const auto trace = simulate_training(c, TrainingPlan(Eigen::MatrixXd::Zero(7, 5), 0.005, 400.0));
  for (std::size_t n = 0; n < trace.slots(); ++n) {
    EXPECT_EQ(trace.voltages[n], trace.nominal);
    EXPECT_EQ(trace.deviations[n], 0.0);
  }
}

TEST(SimulateTraining, ReferenceHadamardPlan) {
  const auto c = MicrogridConfig::reference();
  const auto plan = hadamard_plan(5, 7, 0.005, 400.0);
  const auto trace = simulate_training(c, plan);
  for (std::size_t n = 0; n < 7; ++n) {
    EXPECT_LE(std::abs(trace.deviations[n]), plan.amplitude());
    EXPECT_GE(trace.voltages[n], c.min_voltage);
    EXPECT_EQ(trace.deviations[n], trace.voltages[n] - trace.nominal);
    const auto sol = solve_bus_voltage(c, plan.reference_voltages(n));
    EXPECT_EQ(sol.voltage, trace.voltages[n]);
    for (std::size_t m = 0; m < n; ++m) EXPECT_NE(trace.voltages[n], trace.voltages[m]);
  }
}

TEST(SimulateTraining, NoLoadSingleUnitFollowsReference) {
  MicrogridConfig c;
  c.capacities = {1000.0};
  Eigen::MatrixXd dev = Eigen::MatrixXd::Constant(3, 1, 2.0);
  const auto trace = simulate_training(c, TrainingPlan(dev, 0.005, 400.0));
  for (double v : trace.voltages) EXPECT_EQ(v, 402.0);
}

TEST(SimulateTraining, NamesInfeasibleSlot) {
  auto c = MicrogridConfig::reference();
  c.load.p_cp = 1e7;
  try {
    simulate_training(c, hadamard_plan(5, 7, 0.005, 400.0));
    FAIL() << "expected InfeasibleOperatingPoint";
  } catch (const InfeasibleOperatingPoint&) {
  }
}

TEST(NoiseModel, AveragedVariance) {
  const auto noise = reference_noise();
  EXPECT_NEAR(noise.variance(), 2e-7, 1e-20);
  EXPECT_NEAR(std::sqrt(noise.variance()), 4.472e-4, 1e-7);
  NoiseModel bad = noise;
  bad.settle_time = bad.slot_duration;
  EXPECT_THROW(bad.variance(), DomainError);
  bad = noise;
  bad.sampling_rate = 1.0;  // 0.05 samples per slot
  EXPECT_THROW(bad.variance(), DomainError);
}

TEST(Observe, NoiselessIsExact) {
  const auto c = MicrogridConfig::reference();
  const auto trace = simulate_training(c, hadamard_plan(5, 7, 0.005, 400.0));
  NoiseModel quiet = reference_noise();
  quiet.sample_noise = 0.0;
  const auto m = observe(trace, 4, quiet, 99);
  EXPECT_EQ(m.values, trace.voltages);
  EXPECT_EQ(m.nominal, trace.nominal);
  EXPECT_EQ(m.noise_variance, 0.0);
}

TEST(Observe, SameSeedSameMeasurements) {
  const auto c = MicrogridConfig::reference();
  const auto trace = simulate_training(c, hadamard_plan(5, 7, 0.005, 400.0));
  const auto a = observe(trace, 2, reference_noise(), 1234);
  const auto b = observe(trace, 2, reference_noise(), 1234);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.nominal, b.nominal);
  const auto other = observe(trace, 2, reference_noise(), 1235);
  EXPECT_NE(a.values, other.values);
}

TEST(StreamSeed, DistinctAcrossTrialsAndControllers) {
  EXPECT_NE(stream_seed(1, 0, 0), stream_seed(1, 1, 0));
  EXPECT_NE(stream_seed(1, 0, 0), stream_seed(1, 0, 1));
  EXPECT_NE(stream_seed(1, 0, 0), stream_seed(2, 0, 0));
  EXPECT_EQ(stream_seed(5, 6, 7), stream_seed(5, 6, 7));
}

TEST(Observe, EmpiricalNoiseStatistics) {
  MicrogridConfig c;
  c.capacities = {1000.0};
  const auto trace = simulate_training(c, TrainingPlan(Eigen::MatrixXd::Zero(10, 1), 0.001, 400.0));
  const auto noise = reference_noise();
  const double sigma2 = noise.variance();
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::uint64_t t = 0; t < 10000; ++t) {
    const auto m = observe(trace, 0, noise, stream_seed(3, t, 0));
    for (double v : m.values) {
      const double z = v - 400.0;
      sum += z;
      sq += z * z;
      ++count;
    }
  }
  const double n = static_cast<double>(count);
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_LT(std::abs(mean), 5.0 * std::sqrt(sigma2 / n));
  EXPECT_LT(std::abs(var / sigma2 - 1.0), 0.05);
}

TEST(MeasurementCsv, SlotZeroIsNominal) {
  MeasurementSet m;
  m.values = {1.5, 2.25};
  m.nominal = 0.5;
  std::ostringstream os;
  write_measurements_csv(os, m);
  EXPECT_EQ(os.str(), "slot,value\n0,0.5\n1,1.5\n2,2.25\n");
}

}  // namespace
}  // namespace dcmg
