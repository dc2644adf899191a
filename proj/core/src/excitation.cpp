#include "dcmg/estimator.hpp"
#include "dcmg/measurement.hpp"
#include "dcmg/training_protocol.hpp"

namespace dcmg {

ExcitationReport validate_excitation(const MicrogridConfig& config, const TrainingPlan& plan) {
  const SlotTrace trace = simulate_training(config, plan);
  ExcitationReport report;
  report.controllers.reserve(config.unit_count());
  for (std::size_t k = 0; k < config.unit_count(); ++k) {
    const RegressionSystem sys = assemble_full(trace.voltages, plan, k, config.capacities[k],
                                               config.rated_voltage, config.min_voltage);
    const RankDiagnostics& d = sys.diagnostics;
    ExcitationDiagnostic diag;
    diag.controller = k;
    diag.rank = d.rank;
    diag.required_rank = config.unit_count() + 2;
    diag.min_singular_value = d.min_singular_value;
    diag.max_singular_value = d.max_singular_value;
    diag.condition_number = d.condition_number;
    diag.sufficient = d.full_rank() && d.rcond() >= kMinRcond;
    report.controllers.push_back(diag);
  }
  return report;
}

}  // namespace dcmg
