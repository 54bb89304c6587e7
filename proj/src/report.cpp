#include "dmlme/report.hpp"

#include "dmlme/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace dmlme {

namespace {

Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

} // namespace

Json learner_json(const LearnerSpec& spec) {
    Json j;
    switch (spec.kind) {
    case LearnerKind::random_forest:
        j["kind"] = "random_forest";
        j["rf_num_trees"] = spec.rf_num_trees;
        j["rf_min_node_size"] = spec.rf_min_node_size;
        j["rf_mtry"] = spec.rf_mtry; // 0 means the per-dataset default
        break;
    case LearnerKind::linear:
        j["kind"] = "linear";
        break;
    case LearnerKind::oracle:
        j["kind"] = "oracle";
        break;
    }
    return j;
}

Json config_json(const DmlConfig& config) {
    Json j;
    j["k_folds"] = config.k_folds;
    j["repetitions"] = config.repetitions;
    j["learner"] = learner_json(config.learner);
    j["alpha"] = config.alpha;
    j["seed"] = config.seed;
    return j;
}

Json fit_report(const DmlFit& fit, const std::vector<std::string>& coefficient_names) {
    const Index d = fit.beta.size();
    Json report;
    report["command"] = "fit";
    report["config"] = config_json(fit.config);

    Json coefficients = Json::array();
    for (Index j = 0; j < d; ++j) {
        Json c;
        c["name"] = (static_cast<std::size_t>(j) < coefficient_names.size())
                        ? coefficient_names[j]
                        : ("x" + std::to_string(j));
        c["estimate"] = fit.beta(j);
        c["std_error"] = fit.std_errors(j);
        c["ci_lower"] = fit.ci_lower(j);
        c["ci_upper"] = fit.ci_upper(j);
        coefficients.push_back(std::move(c));
    }
    report["coefficients"] = std::move(coefficients);
    report["covariance"] = matrix_json(fit.cov);

    // Fold-averaged variance components per split, plus medians as the
    // headline diagnostic.
    std::vector<double> sigma2s;
    for (const SplitEstimate& s : fit.splits) sigma2s.push_back(s.sigma2);
    Json vc;
    vc["sigma2_median"] = median_of(sigma2s);
    report["variance_components"] = std::move(vc);

    Json splits = Json::array();
    for (std::size_t s = 0; s < fit.splits.size(); ++s) {
        const SplitEstimate& est = fit.splits[s];
        Json js;
        js["split"] = static_cast<int>(s);
        Json beta = Json::array();
        for (Index j = 0; j < d; ++j) beta.push_back(est.beta(j));
        js["beta"] = std::move(beta);
        js["cov"] = matrix_json(est.cov);
        js["sigma2"] = est.sigma2;
        js["sigma_mat"] = matrix_json(est.sigma_mat);
        Json folds = Json::array();
        for (const FoldDiagnostics& f : est.folds) {
            Json jf;
            jf["fold"] = f.fold;
            jf["converged"] = f.converged;
            jf["iterations"] = f.iterations;
            folds.push_back(std::move(jf));
        }
        js["folds"] = std::move(folds);
        splits.push_back(std::move(js));
    }
    report["splits"] = std::move(splits);
    report["failed_repetitions"] = fit.failed_repetitions;
    report["warnings"] = fit.warnings;
    return report;
}

Json simulate_report(const DmlConfig& config, const std::string& scenario, int n_groups,
                     int replicates, double beta0, const std::vector<ReplicateResult>& rows,
                     int n_failed) {
    Json report;
    report["command"] = "simulate";
    report["scenario"] = scenario;
    report["n_groups"] = n_groups;
    report["replicates"] = replicates;
    report["beta0"] = beta0;
    report["config"] = config_json(config);

    std::vector<double> lengths, biases;
    double covered = 0.0;
    for (const ReplicateResult& r : rows) {
        covered += r.covered;
        lengths.push_back(r.ci_upper - r.ci_lower);
        biases.push_back(r.bias);
    }
    report["n_completed"] = static_cast<int>(rows.size());
    report["n_failed"] = n_failed;
    report["coverage"] = rows.empty() ? 0.0 : covered / static_cast<double>(rows.size());
    report["median_ci_length"] = rows.empty() ? 0.0 : median_of(std::move(lengths));
    report["median_bias"] = rows.empty() ? 0.0 : median_of(std::move(biases));
    return report;
}

Json error_report(const std::string& category, const std::string& message) {
    Json report;
    report["error"] = Json{{"category", category}, {"message", message}};
    return report;
}

void write_replicates_csv(const std::string& path, const std::vector<ReplicateResult>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "replicate,beta_hat,se,ci_lo,ci_hi,covered,bias\n";
    for (const ReplicateResult& r : rows) {
        out << r.replicate << "," << format_double(r.beta_hat) << ","
            << format_double(r.std_error) << "," << format_double(r.ci_lower) << ","
            << format_double(r.ci_upper) << "," << r.covered << "," << format_double(r.bias)
            << "\n";
    }
    if (!out) throw DataError("failed while writing '" + path + "'");
}

std::string scenario_name(ScenarioKind kind) {
    switch (kind) {
    case ScenarioKind::nonsmooth_balanced: return "nonsmooth_balanced";
    case ScenarioKind::smooth_balanced: return "smooth_balanced";
    case ScenarioKind::nonsmooth_unbalanced: return "nonsmooth_unbalanced";
    }
    throw std::invalid_argument("unknown scenario kind");
}

ScenarioKind parse_scenario(const std::string& name) {
    if (name == "nonsmooth_balanced") return ScenarioKind::nonsmooth_balanced;
    if (name == "smooth_balanced") return ScenarioKind::smooth_balanced;
    if (name == "nonsmooth_unbalanced") return ScenarioKind::nonsmooth_unbalanced;
    throw std::invalid_argument("unknown scenario '" + name +
                                "' (expected nonsmooth_balanced, smooth_balanced, or "
                                "nonsmooth_unbalanced)");
}

} // namespace dmlme
