#pragma once

#include "dmlme/dml.hpp"
#include "dmlme/simgen.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace dmlme {

using Json = nlohmann::ordered_json;

/// One simulation replicate's row of the per-replicate table.
struct ReplicateResult {
    int replicate = 0;
    double beta_hat = 0.0;
    double std_error = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    int covered = 0;
    double bias = 0.0;
};

Json learner_json(const LearnerSpec& spec);
Json config_json(const DmlConfig& config);

/// Full fit report: per-coefficient estimates and intervals, per-split
/// records, variance-component diagnostics, config echo.
Json fit_report(const DmlFit& fit, const std::vector<std::string>& coefficient_names);

/// Simulation-summary report: coverage, median CI length, median bias.
Json simulate_report(const DmlConfig& config, const std::string& scenario_name, int n_groups,
                     int replicates, double beta0, const std::vector<ReplicateResult>& rows,
                     int n_failed);

Json error_report(const std::string& category, const std::string& message);

/// Writes the per-replicate table as CSV (shortest round-trip numbers).
void write_replicates_csv(const std::string& path, const std::vector<ReplicateResult>& rows);

std::string scenario_name(ScenarioKind kind);
ScenarioKind parse_scenario(const std::string& name);

} // namespace dmlme
