#include "dcmg/experiment_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dcmg/error.hpp"
#include "dcmg/version.hpp"

namespace dcmg {

namespace {

using nlohmann::json;

json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::vector<double> parse_deltas(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) {
    return log_grid(j.at("min").get<double>(), j.at("max").get<double>(),
                    j.at("count").get<std::size_t>());
  }
  if (j.is_number()) return {j.get<double>()};
  throw ConfigError("deltas must be a number, a list or {min, max, count}");
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path, double rated_voltage,
                            const SlotTiming& timing) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path.string());
  return read_plan_csv(in, rated_voltage, 0.0, timing).deviations();
}

json diagnostics_json(const RankDiagnostics& d) {
  return {{"rank", d.rank},
          {"columns", d.columns},
          {"min_singular_value", number(d.min_singular_value)},
          {"max_singular_value", number(d.max_singular_value)},
          {"condition_number", number(d.condition_number)}};
}

json parameters_json(const std::vector<ParameterReport>& ps) {
  json arr = json::array();
  for (const auto& p : ps) {
    arr.push_back({{"parameter", p.parameter},
                   {"truth", number(p.truth)},
                   {"estimate", number(p.estimate)},
                   {"relative_error", number(p.relative_error)},
                   {"crb_stddev", number(p.crb_stddev)}});
  }
  return arr;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

ExperimentSpec parse_spec(const std::string& json_text, const std::filesystem::path& base_dir) {
  ExperimentSpec spec;
  try {
    const json j = json::parse(json_text);
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      spec.scenario.rated_voltage = s.value("rated_voltage", spec.scenario.rated_voltage);
      spec.scenario.min_voltage = s.value("min_voltage", spec.scenario.min_voltage);
      if (s.contains("capacities")) {
        spec.scenario.capacities = s.at("capacities").get<std::vector<double>>();
      }
      if (s.contains("load")) {
        const auto& l = s.at("load");
        spec.scenario.load.p_cr = l.value("p_cr", spec.scenario.load.p_cr);
        spec.scenario.load.p_cc = l.value("p_cc", spec.scenario.load.p_cc);
        spec.scenario.load.p_cp = l.value("p_cp", spec.scenario.load.p_cp);
      }
    }
    if (j.contains("plan")) {
      const auto& p = j.at("plan");
      spec.slots = p.value("slots", spec.slots);
      spec.timing.slot_duration = p.value("slot_duration", spec.timing.slot_duration);
      spec.timing.settle_time = p.value("settle_time", spec.timing.settle_time);
      if (p.contains("deltas")) spec.deltas = parse_deltas(p.at("deltas"));
      const std::string family = p.value("family", std::string("hadamard"));
      if (family == "file") {
        std::filesystem::path file = p.at("file").get<std::string>();
        if (file.is_relative()) file = base_dir / file;
        spec.custom_plan = read_matrix(file, spec.scenario.rated_voltage, spec.timing);
      } else if (family == "matrix") {
        const auto rows = p.at("deviations").get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw ConfigError("plan.deviations is empty");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t n = 0; n < rows.size(); ++n) {
          if (rows[n].size() != rows.front().size()) throw ConfigError("ragged plan.deviations");
          for (std::size_t u = 0; u < rows[n].size(); ++u) {
            m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(u)) = rows[n][u];
          }
        }
        spec.custom_plan = std::move(m);
      } else if (family != "hadamard") {
        throw ConfigError("unknown sequence family '" + family + "'");
      }
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      spec.sample_noise = n.value("sample_noise", spec.sample_noise);
      spec.sampling_rate = n.value("sampling_rate", spec.sampling_rate);
      spec.noiseless = n.value("noiseless", spec.noiseless);
    }
    spec.trials = j.value("trials", spec.trials);
    if (j.contains("controllers")) {
      spec.controllers.clear();
      for (const auto k : j.at("controllers").get<std::vector<std::size_t>>()) {
        if (k < 1) throw ConfigError("controllers are numbered from 1");
        spec.controllers.push_back(k - 1);
      }
    }
    spec.seed = j.value("seed", spec.seed);
    spec.exact_nominal = j.value("exact_nominal_voltage", spec.exact_nominal);
    spec.threads = j.value("threads", spec.threads);
    if (j.contains("jacobian")) {
      const auto mode = j.at("jacobian").get<std::string>();
      if (mode == "chain_rule") {
        spec.jacobian = JacobianMode::chain_rule;
      } else if (mode == "fixed_nominal") {
        spec.jacobian = JacobianMode::fixed_nominal;
      } else {
        throw ConfigError("jacobian must be chain_rule or fixed_nominal");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidPlan& e) {
    throw ConfigError(std::string("plan file: ") + e.what());
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str(), path.parent_path());
}

std::string spec_to_json(const ExperimentSpec& spec) {
  json controllers = json::array();
  for (auto k : spec.controllers) controllers.push_back(k + 1);
  json plan = {{"slots", spec.slots},
               {"slot_duration", spec.timing.slot_duration},
               {"settle_time", spec.timing.settle_time},
               {"deltas", spec.grid()}};
  if (spec.custom_plan) {
    plan["family"] = "matrix";
    json rows = json::array();
    for (Eigen::Index n = 0; n < spec.custom_plan->rows(); ++n) {
      json row = json::array();
      for (Eigen::Index u = 0; u < spec.custom_plan->cols(); ++u) row.push_back((*spec.custom_plan)(n, u));
      rows.push_back(row);
    }
    plan["deviations"] = rows;
  } else {
    plan["family"] = "hadamard";
  }
  const json j = {
      {"scenario",
       {{"rated_voltage", spec.scenario.rated_voltage},
        {"min_voltage", spec.scenario.min_voltage},
        {"capacities", spec.scenario.capacities},
        {"load",
         {{"p_cr", spec.scenario.load.p_cr},
          {"p_cc", spec.scenario.load.p_cc},
          {"p_cp", spec.scenario.load.p_cp}}}}},
      {"plan", plan},
      {"noise",
       {{"sample_noise", spec.sample_noise},
        {"sampling_rate", spec.sampling_rate},
        {"noiseless", spec.noiseless}}},
      {"trials", spec.trials},
      {"controllers", controllers},
      {"seed", spec.seed},
      {"exact_nominal_voltage", spec.exact_nominal},
      {"jacobian", spec.jacobian == JacobianMode::chain_rule ? "chain_rule" : "fixed_nominal"},
  };
  return j.dump(2);
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "delta,controller,parameter,truth,rrmse,crb_rrmse,trials,mean_estimate\n";
  for (const auto& r : result.rows) {
    out << format_number(r.delta) << ',' << (r.controller + 1) << ',' << r.parameter << ','
        << format_number(r.truth) << ',' << format_number(r.rrmse) << ','
        << format_number(r.crb_rrmse) << ',' << r.trials << ',' << format_number(r.mean_estimate)
        << '\n';
  }
}

void write_crb_csv(std::ostream& out, const CrbReport& report) {
  out << "delta,controller,parameter,truth,crb_stddev,crb_rrmse\n";
  for (const auto& r : report.rows) {
    out << format_number(r.delta) << ',' << (r.controller + 1) << ',' << r.parameter << ','
        << format_number(r.truth) << ',' << format_number(r.stddev) << ','
        << format_number(r.relative) << '\n';
  }
}

void write_matrix_csv(std::ostream& out, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& m) {
  if (static_cast<Eigen::Index>(names.size()) != m.rows() || m.rows() != m.cols()) {
    throw DimensionMismatch("matrix and names disagree");
  }
  out << "parameter";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_number(m(i, j));
    out << '\n';
  }
}

std::string manifest_json(const ExperimentSpec& spec, const SweepResult& result) {
  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"delta", f.delta}, {"controller", f.controller + 1}, {"reason", f.reason}});
  }
  const json j = {{"tool", "dcmg"},
                  {"version", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", kCompiler},
                  {"seed", spec.seed},
                  {"noise_variance", spec.noise_variance()},
                  {"spec", json::parse(spec_to_json(spec))},
                  {"rows", result.rows.size()},
                  {"complete", result.complete()},
                  {"failures", failures}};
  return j.dump(2);
}

std::string report_to_json(const EstimateReport& report) {
  json controllers = json::array();
  for (const auto& c : report.controllers) {
    controllers.push_back({{"controller", c.controller + 1},
                           {"nominal_voltage_used", c.nominal_used},
                           {"measurements", c.measurements.values},
                           {"measured_nominal", c.measurements.nominal},
                           {"full",
                            {{"diagnostics", diagnostics_json(c.full_diagnostics)},
                             {"residual_norm", c.full_residual},
                             {"parameters", parameters_json(c.full)}}},
                           {"transformed",
                            {{"diagnostics", diagnostics_json(c.transformed_diagnostics)},
                             {"residual_norm", c.transformed_residual},
                             {"parameters", parameters_json(c.transformed)}}}});
  }
  json excitation = json::array();
  for (const auto& d : report.excitation.controllers) {
    excitation.push_back({{"controller", d.controller + 1},
                          {"rank", d.rank},
                          {"required_rank", d.required_rank},
                          {"min_singular_value", number(d.min_singular_value)},
                          {"condition_number", number(d.condition_number)},
                          {"sufficient", d.sufficient}});
  }
  const json j = {{"delta", report.delta},
                  {"seed", report.seed},
                  {"noise_variance", report.noise_variance},
                  {"nominal_voltage", report.nominal_voltage},
                  {"slot_voltages", report.voltages},
                  {"excitation", excitation},
                  {"controllers", controllers}};
  return j.dump(2);
}

void print_report(std::ostream& out, const EstimateReport& report) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << "delta " << report.delta * 100.0 << " %   sigma^2 " << report.noise_variance
      << " V^2   v-bar " << std::setprecision(10) << report.nominal_voltage << " V\n";
  out << std::setprecision(6);
  out << "excitation:";
  for (const auto& d : report.excitation.controllers) {
    out << "  k" << (d.controller + 1) << " rank " << d.rank << '/' << d.required_rank;
  }
  out << (report.excitation.sufficient() ? "  (sufficient)\n" : "  (INSUFFICIENT)\n");

  auto table = [&](const char* title, const RankDiagnostics& d, double residual,
                   const std::vector<ParameterReport>& ps) {
    out << "  " << title << ": rank " << d.rank << '/' << d.columns << ", cond "
        << d.condition_number << ", residual " << residual << '\n';
    out << "    " << std::left << std::setw(8) << "param" << std::right << std::setw(16) << "truth"
        << std::setw(16) << "estimate" << std::setw(14) << "rel.err" << std::setw(14) << "crb sd"
        << '\n';
    for (const auto& p : ps) {
      out << "    " << std::left << std::setw(8) << p.parameter << std::right << std::setw(16)
          << p.truth << std::setw(16) << p.estimate << std::setw(14) << p.relative_error
          << std::setw(14) << p.crb_stddev << '\n';
    }
  };
  for (const auto& c : report.controllers) {
    out << "controller " << (c.controller + 1) << " (v-bar used " << std::setprecision(10)
        << c.nominal_used << std::setprecision(6) << " V)\n";
    table("full", c.full_diagnostics, c.full_residual, c.full);
    table("transformed", c.transformed_diagnostics, c.transformed_residual, c.transformed);
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace dcmg
