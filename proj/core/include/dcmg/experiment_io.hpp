#pragma once

// Text formats for experiments: JSON configs, tidy CSV results, JSON run
// manifests and reports.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dcmg/experiment.hpp"

namespace dcmg {

/// Shortest decimal form that round-trips to the same double.
std::string format_number(double value);

/// Parses a JSON experiment config. Missing keys keep the reference
/// defaults; controllers are 1-based in the file. Throws ConfigError.
ExperimentSpec parse_spec(const std::string& json_text,
                          const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path);
std::string spec_to_json(const ExperimentSpec& spec);

/// Long format: delta,controller,parameter,truth,rrmse,crb_rrmse,trials,mean_estimate.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
/// delta,controller,parameter,truth,crb_stddev,crb_rrmse.
void write_crb_csv(std::ostream& out, const CrbReport& report);
/// Square matrix with a header row and a leading name column.
void write_matrix_csv(std::ostream& out, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& m);

std::string manifest_json(const ExperimentSpec& spec, const SweepResult& result);
std::string report_to_json(const EstimateReport& report);
void print_report(std::ostream& out, const EstimateReport& report);

}  // namespace dcmg
