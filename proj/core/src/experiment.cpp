#include "dcmg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include "dcmg/error.hpp"

namespace dcmg {

namespace {

using Index = Eigen::Index;

// Runs fn(i) for i in [0, count) on up to `threads` workers. fn must only
// write to slot i of its output.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

struct TrialOutcome {
  Eigen::VectorXd full;
  Eigen::VectorXd star;
  std::string error;
};

}  // namespace

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

NoiseModel ExperimentSpec::noise_model() const {
  NoiseModel m;
  m.sample_noise = noiseless ? 0.0 : sample_noise;
  m.slot_duration = timing.slot_duration;
  m.settle_time = timing.settle_time;
  m.sampling_rate = sampling_rate;
  return m;
}

double ExperimentSpec::noise_variance() const { return noise_model().variance(); }

std::vector<double> ExperimentSpec::grid() const {
  if (custom_plan) {
    return {custom_plan->cwiseAbs().maxCoeff() / scenario.rated_voltage};
  }
  return deltas;
}

TrainingPlan ExperimentSpec::plan(double delta) const {
  if (custom_plan) return TrainingPlan(*custom_plan, delta, scenario.rated_voltage, timing);
  return hadamard_plan(scenario.unit_count(), slots, delta, scenario.rated_voltage, timing);
}

void ExperimentSpec::validate() const {
  try {
    scenario.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (controllers.empty()) throw ConfigError("no controllers selected");
  for (auto k : controllers) {
    if (k >= scenario.unit_count()) {
      std::ostringstream os;
      os << "controller " << (k + 1) << " out of range 1.." << scenario.unit_count();
      throw ConfigError(os.str());
    }
  }
  const double dmax = scenario.max_amplitude_fraction();
  const auto g = grid();
  if (g.empty()) throw ConfigError("delta grid is empty");
  for (double d : g) {
    if (!(d > 0.0) || d > dmax) {
      std::ostringstream os;
      os << "delta " << d << " outside (0, " << dmax << "]";
      throw ConfigError(os.str());
    }
  }
  if (custom_plan && static_cast<std::size_t>(custom_plan->cols()) != scenario.unit_count()) {
    throw ConfigError("custom plan column count differs from the unit count");
  }
  try {
    (void)noise_variance();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("noise: ") + e.what());
  }
}

double rrmse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (double e : estimates) sum += (e - truth) * (e - truth);
  return std::sqrt(sum / static_cast<double>(estimates.size())) / std::abs(truth);
}

const SweepRow* SweepResult::find(double delta, std::size_t controller,
                                  const std::string& parameter) const {
  for (const auto& r : rows) {
    if (r.delta == delta && r.controller == controller && r.parameter == parameter) return &r;
  }
  return nullptr;
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  const auto& cfg = spec.scenario;
  const NoiseModel noise = spec.noise_model();
  const double sigma2 = noise.variance();
  const double x = cfg.rated_voltage;
  const double vmin = cfg.min_voltage;

  SweepResult result;
  for (double delta : spec.grid()) {
    std::optional<TrainingPlan> plan;
    SlotTrace trace;
    ExcitationReport excitation;
    try {
      plan = spec.plan(delta);
      excitation = validate_excitation(cfg, *plan);
      trace = simulate_training(cfg, *plan);
    } catch (const Error& e) {
      for (auto k : spec.controllers) result.failures.push_back({delta, k, e.what()});
      continue;
    }

    for (auto k : spec.controllers) {
      const auto& diag = excitation.controllers[k];
      if (!diag.sufficient) {
        std::ostringstream os;
        os << "insufficient excitation: rank " << diag.rank << " of " << diag.required_rank;
        result.failures.push_back({delta, k, os.str()});
        continue;
      }

      const ParameterVector truth = true_parameters(cfg, k);
      const ParameterVector truth_star = map_theta_to_star(truth, trace.nominal, x);
      const Index p = static_cast<Index>(truth.size());
      const Index g = p - 3;

      Eigen::VectorXd crb_diag = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
      Eigen::VectorXd crb_star_diag = crb_diag;
      try {
        const auto rec = sensitivities(cfg, *plan, k, spec.jacobian);
        crb_diag = crb_full(rec, sigma2).diagonal();
        crb_star_diag = crb_transformed(rec, sigma2).diagonal();
      } catch (const Error&) {
        // Reported as NaN; the estimator can still run.
      }

      std::vector<TrialOutcome> outcomes(spec.trials);
      parallel_for(spec.trials, spec.threads, [&](std::size_t t) {
        try {
          const auto m = observe(trace, k, noise, stream_seed(spec.seed, t, k));
          const double vbar = spec.exact_nominal ? trace.nominal : m.nominal;
          outcomes[t].full =
              solve_mle(assemble_full(m, *plan, cfg.capacities[k], x, vmin)).parameters.values;
          outcomes[t].star =
              solve_mle(assemble_transformed(m, *plan, cfg.capacities[k], x, vmin, vbar))
                  .parameters.values;
        } catch (const std::exception& e) {
          outcomes[t].error = e.what();
        }
      });

      const auto bad = std::find_if(outcomes.begin(), outcomes.end(),
                                    [](const TrialOutcome& o) { return !o.error.empty(); });
      if (bad != outcomes.end()) {
        std::ostringstream os;
        os << "trial " << (bad - outcomes.begin()) << ": " << bad->error;
        result.failures.push_back({delta, k, os.str()});
        continue;
      }

      // Sequential reduction in trial order keeps the sums bit-reproducible.
      Eigen::VectorXd sum_full = Eigen::VectorXd::Zero(p);
      Eigen::VectorXd sq_full = Eigen::VectorXd::Zero(p);
      Eigen::VectorXd sum_star = Eigen::VectorXd::Zero(p);
      Eigen::VectorXd sq_star = Eigen::VectorXd::Zero(p);
      for (const auto& o : outcomes) {
        sum_full += o.full;
        sq_full += (o.full - truth.values).cwiseAbs2();
        sum_star += o.star;
        sq_star += (o.star - truth_star.values).cwiseAbs2();
      }
      const double n = static_cast<double>(spec.trials);
      auto emit = [&](const std::string& name, Variant variant, double tr, double sum, double sq,
                      double crb) {
        SweepRow row;
        row.delta = delta;
        row.controller = k;
        row.parameter = name;
        row.variant = variant;
        row.truth = tr;
        row.mean_estimate = sum / n;
        row.rrmse = std::sqrt(sq / n) / std::abs(tr);
        row.crb_rrmse = std::sqrt(crb) / std::abs(tr);
        row.trials = spec.trials;
        result.rows.push_back(std::move(row));
      };
      const auto names = truth.names();
      const auto star_names = truth_star.names();
      for (Index i = 0; i < p; ++i) {
        emit(names[static_cast<std::size_t>(i)], Variant::full, truth.values(i), sum_full(i),
             sq_full(i), crb_diag(i));
      }
      for (Index i = g; i < p; ++i) {
        emit(star_names[static_cast<std::size_t>(i)], Variant::transformed, truth_star.values(i),
             sum_star(i), sq_star(i), crb_star_diag(i));
      }
    }
  }
  return result;
}

CrbReport report_crb(const ExperimentSpec& spec, std::span<const double> deltas) {
  spec.validate();
  const double sigma2 = spec.noise_variance();
  CrbReport out;
  for (double delta : deltas) {
    for (auto k : spec.controllers) {
      try {
        const auto rec = sensitivities(spec.scenario, spec.plan(delta), k, spec.jacobian);
        const Eigen::MatrixXd full = crb_full(rec, sigma2);
        const Eigen::MatrixXd star = crb_transformed(rec, sigma2);
        auto add = [&](const std::vector<CrbEntry>& table, std::size_t from) {
          for (std::size_t i = from; i < table.size(); ++i) {
            out.rows.push_back({delta, k, table[i].parameter, table[i].truth, table[i].stddev,
                                table[i].relative});
          }
        };
        const auto full_table = crb_table(full, rec.truth);
        add(full_table, 0);
        add(crb_table(star, rec.truth_star), full_table.size() - 3);
        out.matrices.push_back({delta, k, rec.truth.names(), rec.truth_star.names(), full, star});
      } catch (const Error& e) {
        out.failures.push_back({delta, k, e.what()});
      }
    }
  }
  return out;
}

EstimateReport run_single(const ExperimentSpec& spec, double delta, std::uint64_t seed) {
  spec.validate();
  const auto& cfg = spec.scenario;
  const NoiseModel noise = spec.noise_model();
  const double x = cfg.rated_voltage;
  const double vmin = cfg.min_voltage;

  const TrainingPlan plan = spec.plan(delta);
  EstimateReport report;
  report.delta = delta;
  report.seed = seed;
  report.noise_variance = noise.variance();
  report.excitation = validate_excitation(cfg, plan);
  const SlotTrace trace = simulate_training(cfg, plan);
  report.nominal_voltage = trace.nominal;
  report.voltages = trace.voltages;

  for (auto k : spec.controllers) {
    ControllerReport cr;
    cr.controller = k;
    cr.measurements = observe(trace, k, noise, stream_seed(seed, 0, k));
    cr.nominal_used = spec.exact_nominal ? trace.nominal : cr.measurements.nominal;

    const auto full_sys = assemble_full(cr.measurements, plan, cfg.capacities[k], x, vmin);
    const auto star_sys = assemble_transformed(cr.measurements, plan, cfg.capacities[k], x, vmin,
                                               cr.nominal_used);
    cr.full_diagnostics = full_sys.diagnostics;
    cr.transformed_diagnostics = star_sys.diagnostics;
    const Estimate full = solve_mle(full_sys);
    const Estimate star = solve_mle(star_sys);
    cr.full_residual = full.residual_norm;
    cr.transformed_residual = star.residual_norm;

    const ParameterVector truth = true_parameters(cfg, k);
    const ParameterVector truth_star = map_theta_to_star(truth, trace.nominal, x);
    Eigen::VectorXd crb_diag = Eigen::VectorXd::Zero(truth.values.size());
    Eigen::VectorXd crb_star_diag = crb_diag;
    if (report.noise_variance > 0.0) {
      const auto rec = sensitivities(cfg, plan, k, spec.jacobian);
      crb_diag = crb_full(rec, report.noise_variance).diagonal();
      crb_star_diag = crb_transformed(rec, report.noise_variance).diagonal();
    }
    auto fill = [](std::vector<ParameterReport>& dst, const ParameterVector& tr,
                   const ParameterVector& est, const Eigen::VectorXd& crb) {
      const auto names = tr.names();
      for (std::size_t i = 0; i < names.size(); ++i) {
        const auto j = static_cast<Index>(i);
        ParameterReport pr;
        pr.parameter = names[i];
        pr.truth = tr.values(j);
        pr.estimate = est.values(j);
        pr.relative_error = (pr.estimate - pr.truth) / std::abs(pr.truth);
        pr.crb_stddev = std::sqrt(std::max(0.0, crb(j)));
        dst.push_back(std::move(pr));
      }
    };
    fill(cr.full, truth, full.parameters, crb_diag);
    fill(cr.transformed, truth_star, star.parameters, crb_star_diag);
    report.controllers.push_back(std::move(cr));
  }
  return report;
}

}  // namespace dcmg
