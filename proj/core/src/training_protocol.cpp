#include "dcmg/training_protocol.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "dcmg/error.hpp"

namespace dcmg {

namespace {

// Relative slack on the amplitude bound so that plans scaled by delta * x
// survive a round trip through text.
constexpr double kAmplitudeSlack = 1e-12;

}  // namespace

TrainingPlan::TrainingPlan(Eigen::MatrixXd deviations, double amplitude_fraction,
                           double rated_voltage, SlotTiming timing)
    : deviations_(std::move(deviations)),
      delta_(amplitude_fraction),
      rated_voltage_(rated_voltage),
      timing_(timing) {
  const auto n = slots();
  const auto u = units();
  if (u < 1) throw InvalidPlan("plan must cover at least one unit");
  if (n < u + 2) {
    std::ostringstream os;
    os << "plan has " << n << " slots but " << u << " units need at least " << (u + 2);
    throw InvalidPlan(os.str());
  }
  if (!(rated_voltage_ > 0.0)) throw InvalidPlan("rated voltage must be positive");
  if (!(delta_ > 0.0) || !(delta_ < 1.0)) throw InvalidPlan("amplitude fraction must lie in (0, 1)");
  if (!(timing_.settle_time > 0.0) || !(timing_.settle_time < timing_.slot_duration)) {
    throw InvalidPlan("settle time must satisfy 0 < tau < T_S");
  }
  if (!deviations_.allFinite()) throw InvalidPlan("deviation matrix has non-finite entries");
  const double bound = amplitude() * (1.0 + kAmplitudeSlack);
  const double peak = deviations_.cwiseAbs().maxCoeff();
  if (peak > bound) {
    std::ostringstream os;
    os << "deviation of " << peak << " V exceeds the bound delta*x = " << amplitude() << " V";
    throw InvalidPlan(os.str());
  }
}

std::vector<double> TrainingPlan::reference_voltages(std::size_t slot) const {
  std::vector<double> refs(units());
  for (std::size_t u = 0; u < refs.size(); ++u) refs[u] = rated_voltage_ + deviation(slot, u);
  return refs;
}

void TrainingPlan::check_compatible(const MicrogridConfig& config) const {
  if (units() != config.unit_count()) {
    std::ostringstream os;
    os << "plan drives " << units() << " units, microgrid has " << config.unit_count();
    throw InvalidPlan(os.str());
  }
  if (rated_voltage_ != config.rated_voltage) {
    throw InvalidPlan("plan and microgrid disagree on the rated voltage");
  }
  if (delta_ > config.max_amplitude_fraction() * (1.0 + kAmplitudeSlack)) {
    std::ostringstream os;
    os << "amplitude fraction " << delta_ << " exceeds 1 - v_min/x = "
       << config.max_amplitude_fraction();
    throw InvalidPlan(os.str());
  }
  // delta == 1 - v_min/x is admissible only if no unit actually reaches v_min.
  if (rated_voltage_ + deviations_.minCoeff() <= config.min_voltage) {
    throw InvalidPlan("a perturbed reference voltage reaches v_min");
  }
}

Eigen::MatrixXd sylvester_hadamard(std::size_t order) {
  if (order == 0 || !std::has_single_bit(order)) {
    throw InvalidPlan("Sylvester-Hadamard order must be a power of two");
  }
  Eigen::MatrixXd h(1, 1);
  h(0, 0) = 1.0;
  while (static_cast<std::size_t>(h.rows()) < order) {
    const auto m = h.rows();
    Eigen::MatrixXd next(2 * m, 2 * m);
    next << h, h, h, -h;
    h = std::move(next);
  }
  return h;
}

TrainingPlan hadamard_plan(std::size_t units, std::size_t slots, double amplitude_fraction,
                           double rated_voltage, SlotTiming timing) {
  if (units < 1) throw InvalidPlan("plan must cover at least one unit");
  if (slots < units + 2) {
    std::ostringstream os;
    os << "Hadamard plan needs N >= U + 2 = " << (units + 2) << ", got N = " << slots;
    throw InvalidPlan(os.str());
  }
  const std::size_t order = std::bit_ceil(std::max(slots, units + 1));
  const Eigen::MatrixXd h = sylvester_hadamard(order);
  const double amp = amplitude_fraction * rated_voltage;

  Eigen::MatrixXd dev(static_cast<Eigen::Index>(slots), static_cast<Eigen::Index>(units));
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t n = 0; n < slots; ++n) {
      dev(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(u)) =
          amp * h(static_cast<Eigen::Index>(u + 1), static_cast<Eigen::Index>(n));
    }
  }
  return TrainingPlan(std::move(dev), amplitude_fraction, rated_voltage, timing);
}

TrainingPlan read_plan_csv(std::istream& in, double rated_voltage, double amplitude_fraction,
                           SlotTiming timing) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        std::ostringstream os;
        os << "plan csv line " << lineno << ": cannot parse '" << cell << "'";
        throw InvalidPlan(os.str());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      std::ostringstream os;
      os << "plan csv line " << lineno << ": expected " << rows.front().size()
         << " columns, got " << row.size();
      throw InvalidPlan(os.str());
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidPlan("plan csv is empty");

  Eigen::MatrixXd dev(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (std::size_t u = 0; u < rows[n].size(); ++u) {
      dev(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(u)) = rows[n][u];
    }
  }
  if (!(amplitude_fraction > 0.0)) {
    amplitude_fraction = dev.cwiseAbs().maxCoeff() / rated_voltage;
  }
  return TrainingPlan(std::move(dev), amplitude_fraction, rated_voltage, timing);
}

void write_plan_csv(std::ostream& out, const TrainingPlan& plan) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t n = 0; n < plan.slots(); ++n) {
    for (std::size_t u = 0; u < plan.units(); ++u) {
      if (u) out << ',';
      out << plan.deviation(n, u);
    }
    out << '\n';
  }
  out.precision(old);
}

bool ExcitationReport::sufficient() const noexcept {
  return !controllers.empty() &&
         std::all_of(controllers.begin(), controllers.end(),
                     [](const ExcitationDiagnostic& d) { return d.sufficient; });
}

}  // namespace dcmg
