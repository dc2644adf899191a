// Command line driver for training-based parameter estimation experiments.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcmg/error.hpp"
#include "dcmg/experiment.hpp"
#include "dcmg/experiment_io.hpp"
#include "dcmg/training_protocol.hpp"
#include "dcmg/version.hpp"

namespace fs = std::filesystem;
using namespace dcmg;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> controllers;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::string delta;
  bool noiseless = false;
  bool exact_nominal = false;
  std::string out;
  std::optional<std::size_t> slots;
  std::string plan;
  std::optional<std::size_t> threads;
  std::string jacobian;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

// "0.001,0.005" is a list; "1e-4:1e-2:10" is `count` log-spaced points.
std::vector<double> parse_deltas(const std::string& text) {
  const auto range = split(text, ':');
  if (range.size() == 3) {
    const double count = parse_double(range[2]);
    if (count < 1.0 || count != static_cast<double>(static_cast<std::size_t>(count))) {
      throw ConfigError("delta range count must be a positive integer");
    }
    return log_grid(parse_double(range[0]), parse_double(range[1]), static_cast<std::size_t>(count));
  }
  if (range.size() != 1) throw ConfigError("delta range must be lo:hi:count");
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_double(item));
  if (out.empty()) throw ConfigError("empty delta list");
  return out;
}

std::vector<std::size_t> parse_controllers(const std::vector<std::string>& items, std::size_t units) {
  std::vector<std::size_t> out;
  for (const auto& raw : items) {
    for (const auto& item : split(raw, ',')) {
      if (item == "all") {
        for (std::size_t k = 0; k < units; ++k) out.push_back(k);
        continue;
      }
      const double k = parse_double(item);
      if (k < 1.0 || k > static_cast<double>(units) || k != static_cast<double>(static_cast<std::size_t>(k))) {
        throw ConfigError("controller '" + item + "' is not in 1.." + std::to_string(units));
      }
      out.push_back(static_cast<std::size_t>(k) - 1);
    }
  }
  return out;
}

ExperimentSpec build_spec(const Options& o) {
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{} : load_spec(o.config);
  if (!o.controllers.empty()) spec.controllers = parse_controllers(o.controllers, spec.scenario.unit_count());
  if (o.trials) spec.trials = *o.trials;
  if (o.seed) spec.seed = *o.seed;
  if (!o.delta.empty()) spec.deltas = parse_deltas(o.delta);
  if (o.noiseless) spec.noiseless = true;
  if (o.exact_nominal) spec.exact_nominal = true;
  if (o.slots) spec.slots = *o.slots;
  if (o.threads) spec.threads = *o.threads;
  if (o.jacobian == "fixed_nominal") spec.jacobian = JacobianMode::fixed_nominal;
  if (o.jacobian == "chain_rule") spec.jacobian = JacobianMode::chain_rule;
  if (!o.plan.empty()) {
    std::ifstream in(o.plan);
    if (!in) throw ConfigError("cannot open plan file " + o.plan);
    spec.custom_plan = read_plan_csv(in, spec.scenario.rated_voltage, 0.0, spec.timing).deviations();
  }
  spec.validate();
  return spec;
}

fs::path output_dir(const Options& o) {
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  fn(out);
  std::cerr << "wrote " << path.string() << '\n';
}

void report_failures(const std::vector<GridFailure>& failures) {
  for (const auto& f : failures) {
    std::cerr << "grid point delta=" << format_number(f.delta) << " controller " << (f.controller + 1)
              << " failed: " << f.reason << '\n';
  }
}

int cmd_sweep(const Options& o) {
  const ExperimentSpec spec = build_spec(o);
  const fs::path dir = output_dir(o);
  const SweepResult result = run_sweep(spec);
  const CrbReport crb = report_crb(spec, spec.grid());
  write_file(dir / "sweep.csv", [&](std::ostream& out) { write_sweep_csv(out, result); });
  write_file(dir / "crb.csv", [&](std::ostream& out) { write_crb_csv(out, crb); });
  write_file(dir / "manifest.json", [&](std::ostream& out) { out << manifest_json(spec, result) << '\n'; });
  report_failures(result.failures);
  return result.complete() ? 0 : 1;
}

int cmd_crb(const Options& o) {
  const ExperimentSpec spec = build_spec(o);
  const fs::path dir = output_dir(o);
  const CrbReport crb = report_crb(spec, spec.grid());
  write_file(dir / "crb.csv", [&](std::ostream& out) { write_crb_csv(out, crb); });
  for (const auto& m : crb.matrices) {
    const std::string stem = "crb_matrix_delta" + format_number(m.delta) + "_k" + std::to_string(m.controller + 1);
    write_file(dir / (stem + ".csv"), [&](std::ostream& out) { write_matrix_csv(out, m.full_names, m.full); });
    write_file(dir / (stem + "_transformed.csv"),
               [&](std::ostream& out) { write_matrix_csv(out, m.transformed_names, m.transformed); });
  }
  report_failures(crb.failures);
  return crb.failures.empty() ? 0 : 1;
}

int cmd_single(const Options& o) {
  const ExperimentSpec spec = build_spec(o);
  const auto grid = spec.grid();
  if (grid.size() != 1 && !o.delta.empty()) throw ConfigError("single takes exactly one --delta");
  const double delta = grid.size() == 1 ? grid.front() : 0.005;
  const EstimateReport report = run_single(spec, delta, spec.seed);
  print_report(std::cout, report);
  if (!o.out.empty()) {
    const fs::path dir = output_dir(o);
    write_file(dir / "report.json", [&](std::ostream& out) { out << report_to_json(report) << '\n'; });
    for (const auto& c : report.controllers) {
      write_file(dir / ("measurements_k" + std::to_string(c.controller + 1) + ".csv"),
                 [&](std::ostream& out) { write_measurements_csv(out, c.measurements); });
    }
  }
  return 0;
}

int cmd_plan(const Options& o) {
  const ExperimentSpec spec = build_spec(o);
  const auto grid = spec.grid();
  if (grid.size() != 1 && !o.delta.empty()) throw ConfigError("plan takes exactly one --delta");
  const double delta = grid.size() == 1 ? grid.front() : 0.005;
  const TrainingPlan plan = spec.plan(delta);
  const ExcitationReport excitation = validate_excitation(spec.scenario, plan);
  if (o.out.empty()) {
    write_plan_csv(std::cout, plan);
  } else {
    const fs::path dir = output_dir(o);
    write_file(dir / "plan.csv", [&](std::ostream& out) { write_plan_csv(out, plan); });
  }
  for (const auto& d : excitation.controllers) {
    std::cerr << "controller " << (d.controller + 1) << ": rank " << d.rank << '/' << d.required_rank
              << ", cond " << d.condition_number << (d.sufficient ? "" : "  INSUFFICIENT") << '\n';
  }
  return excitation.sufficient() ? 0 : 1;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--controller", o.controllers, "Controller(s) to evaluate, 1-based, comma list or 'all'");
  app->add_option("--trials", o.trials, "Monte Carlo trials per grid point");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--delta", o.delta, "Amplitude fractions: list a,b,c or log range lo:hi:count");
  app->add_flag("--noiseless", o.noiseless, "Disable measurement noise");
  app->add_flag("--exact-nominal-voltage", o.exact_nominal, "Use the true nominal voltage instead of a measured one");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--slots", o.slots, "Number of training slots N");
  app->add_option("--plan", o.plan, "CSV deviation matrix (volts, one row per slot)")->check(CLI::ExistingFile);
  app->add_option("--threads", o.threads, "Worker threads, 0 = all cores");
  app->add_option("--jacobian", o.jacobian, "Transformed CRB Jacobian: chain_rule or fixed_nominal")
      ->check(CLI::IsMember({"chain_rule", "fixed_nominal"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-based identification of droop-controlled DC microgrids"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Options o;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo RRMSE sweep over the amplitude grid");
  auto* single = app.add_subcommand("single", "One trial with full diagnostics");
  auto* crb = app.add_subcommand("crb", "Cramer-Rao predictions without Monte Carlo");
  auto* plan = app.add_subcommand("plan", "Print a training plan and its excitation diagnostics");
  for (auto* sub : {sweep, single, crb, plan}) add_common(sub, o);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) return cmd_sweep(o);
    if (*single) return cmd_single(o);
    if (*crb) return cmd_crb(o);
    if (*plan) return cmd_plan(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
