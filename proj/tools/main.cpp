#include "dmlme/csv.hpp"
#include "dmlme/dml.hpp"
#include "dmlme/errors.hpp"
#include "dmlme/report.hpp"
#include "dmlme/simgen.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
    int k_folds = 2;
    int repetitions = 10;
    std::string learner = "rf";
    int rf_trees = 500;
    int rf_min_node = 5;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

void add_config_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--k-folds", flags.k_folds, "Number of cross-fitting folds (>= 2)");
    cmd->add_option("--repetitions", flags.repetitions, "Number of repeated sample splits");
    cmd->add_option("--learner", flags.learner, "Nuisance learner: rf or linear")
        ->check(CLI::IsMember({"rf", "linear"}));
    cmd->add_option("--rf-trees", flags.rf_trees, "Trees per random forest");
    cmd->add_option("--rf-min-node", flags.rf_min_node, "Minimum node size of forest trees");
    cmd->add_option("--alpha", flags.alpha, "Significance level of the confidence intervals");
    cmd->add_option("--seed", flags.seed, "Seed controlling all randomness");
}

dmlme::DmlConfig to_config(const CommonFlags& flags) {
    dmlme::DmlConfig config;
    config.k_folds = flags.k_folds;
    config.repetitions = flags.repetitions;
    config.alpha = flags.alpha;
    config.seed = flags.seed;
    config.learner.kind = (flags.learner == "linear") ? dmlme::LearnerKind::linear
                                                      : dmlme::LearnerKind::random_forest;
    config.learner.rf_num_trees = flags.rf_trees;
    config.learner.rf_min_node_size = flags.rf_min_node;
    return config;
}

void emit(const dmlme::Json& report, const std::string& out_path) {
    const std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw dmlme::DataError("cannot open '" + out_path + "' for writing");
        out << text;
    }
}

dmlme::CsvSchema simgen_schema() {
    return dmlme::CsvSchema{"group", "y", {"x1"}, {"w1", "w2", "w3"}, {"z1", "z2", "z3"}};
}

int run_fit(const std::string& csv_path, const dmlme::CsvSchema& schema,
            const CommonFlags& flags, const std::string& out_path) {
    const dmlme::GroupedDataset dataset = dmlme::load_csv(csv_path, schema);
    const dmlme::DmlFit fit = dmlme::dml_fit(dataset, to_config(flags));
    emit(dmlme::fit_report(fit, schema.x_cols), out_path);
    return 0;
}

int run_simulate(const std::string& scenario_name, int n_groups, int replicates,
                 const CommonFlags& flags, const std::string& out_path) {
    dmlme::SimScenario scenario;
    scenario.kind = dmlme::parse_scenario(scenario_name);
    scenario.n_groups = n_groups;
    const dmlme::DmlConfig config = to_config(flags);

    std::vector<dmlme::ReplicateResult> rows;
    int n_failed = 0;
    for (int rep = 0; rep < replicates; ++rep) {
        const dmlme::Rng replicate_rng = dmlme::Rng(config.seed).child(0x5EED + rep);
        const dmlme::GroupedDataset dataset =
            dmlme::gen_dataset(scenario, replicate_rng.child(0));
        dmlme::DmlConfig rep_config = config;
        rep_config.seed = replicate_rng.child(1).seed();
        try {
            const dmlme::DmlFit fit = dmlme::dml_fit(dataset, rep_config);
            dmlme::ReplicateResult row;
            row.replicate = rep;
            row.beta_hat = fit.beta(0);
            row.std_error = fit.std_errors(0);
            row.ci_lower = fit.ci_lower(0);
            row.ci_upper = fit.ci_upper(0);
            row.covered =
                (fit.ci_lower(0) <= scenario.beta0 && scenario.beta0 <= fit.ci_upper(0)) ? 1 : 0;
            row.bias = fit.beta(0) - scenario.beta0;
            rows.push_back(row);
        } catch (const dmlme::NumericError&) {
            ++n_failed;
        }
    }
    if (!out_path.empty()) dmlme::write_replicates_csv(out_path, rows);
    emit(dmlme::simulate_report(config, scenario_name, n_groups, replicates, scenario.beta0,
                                rows, n_failed),
         "");
    return 0;
}

int run_generate(const std::string& scenario_name, int n_groups, std::uint64_t seed,
                 const std::string& out_path) {
    dmlme::SimScenario scenario;
    scenario.kind = dmlme::parse_scenario(scenario_name);
    scenario.n_groups = n_groups;
    const dmlme::GroupedDataset dataset = dmlme::gen_dataset(scenario, dmlme::Rng(seed));
    dmlme::write_csv(out_path, dataset, simgen_schema());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-effects estimation in partially linear mixed models via "
                 "cross-fitted machine-learning residualization"};
    app.require_subcommand(1);

    // fit
    std::string fit_csv, fit_out;
    dmlme::CsvSchema schema;
    schema.group_col = "group";
    schema.y_col = "y";
    CommonFlags fit_flags;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Estimate the linear coefficients from a CSV");
    fit_cmd->add_option("--csv", fit_csv, "Input CSV file")->required();
    fit_cmd->add_option("--group-col", schema.group_col, "Group id column");
    fit_cmd->add_option("--y-col", schema.y_col, "Response column")->required();
    fit_cmd->add_option("--x-cols", schema.x_cols, "Linear covariate columns")
        ->required()
        ->delimiter(',');
    fit_cmd->add_option("--w-cols", schema.w_cols, "Nonparametric covariate columns")
        ->required()
        ->delimiter(',');
    fit_cmd->add_option("--z-cols", schema.z_cols, "Random-effects design columns")
        ->required()
        ->delimiter(',');
    add_config_flags(fit_cmd, fit_flags);
    fit_cmd->add_option("--out", fit_out, "Also write the JSON report to this file");

    // simulate
    std::string sim_scenario, sim_out;
    int sim_groups = 0, sim_replicates = 0;
    CommonFlags sim_flags;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo coverage/bias study");
    sim_cmd->add_option("--scenario", sim_scenario, "Data-generating scenario")->required();
    sim_cmd->add_option("--n-groups", sim_groups, "Groups per replicate")->required();
    sim_cmd->add_option("--replicates", sim_replicates, "Number of Monte-Carlo replicates")
        ->required();
    add_config_flags(sim_cmd, sim_flags);
    sim_cmd->add_option("--out", sim_out, "Per-replicate CSV output file");

    // generate
    std::string gen_scenario, gen_out;
    int gen_groups = 0;
    std::uint64_t gen_seed = 0;
    CLI::App* gen_cmd = app.add_subcommand("generate", "Write one synthetic dataset as CSV");
    gen_cmd->add_option("--scenario", gen_scenario, "Data-generating scenario")->required();
    gen_cmd->add_option("--n-groups", gen_groups, "Number of groups")->required();
    gen_cmd->add_option("--seed", gen_seed, "Seed controlling all randomness");
    gen_cmd->add_option("--out", gen_out, "Output CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cout << dmlme::error_report("usage", e.what()).dump(2) << "\n";
        return kExitUsage;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(fit_csv, schema, fit_flags, fit_out);
        if (sim_cmd->parsed()) {
            if (sim_replicates < 1) throw std::invalid_argument("replicates must be >= 1");
            return run_simulate(sim_scenario, sim_groups, sim_replicates, sim_flags, sim_out);
        }
        if (gen_cmd->parsed()) return run_generate(gen_scenario, gen_groups, gen_seed, gen_out);
    } catch (const std::invalid_argument& e) {
        std::cout << dmlme::error_report("usage", e.what()).dump(2) << "\n";
        return kExitUsage;
    } catch (const dmlme::DataError& e) {
        std::cout << dmlme::error_report("data", e.what()).dump(2) << "\n";
        return kExitData;
    } catch (const dmlme::NumericError& e) {
        std::cout << dmlme::error_report("numerical", e.what()).dump(2) << "\n";
        return kExitNumeric;
    }
    return 0;
}
