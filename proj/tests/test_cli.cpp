#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmlme/gaussian.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using Json = nlohmann::json;

namespace {

const std::string cli = DMLME_CLI_PATH;
const std::string schema_path = DMLME_SCHEMA_PATH;

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run(const std::string& args) {
    TempFile out("dmlme_cli_out_" + std::to_string(::getpid()) + ".txt");
    const std::string command = cli + " " + args + " > " + out.path + " 2>/dev/null";
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out.path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    result.stdout_text = text.str();
    return result;
}

// ---------------------------------------------------------------------------
// Minimal JSON-schema validator covering the subset the report schema uses:
// $ref into definitions, oneOf, type, enum, required, properties, items,
// and minimum.
// ---------------------------------------------------------------------------

class SchemaValidator {
public:
    explicit SchemaValidator(Json schema) : root_(std::move(schema)) {}

    bool validate(const Json& value) const { return matches(root_, value); }
    bool validate(const Json& schema, const Json& value) const { return matches(schema, value); }

    const Json& definition(const std::string& name) const {
        return root_.at("definitions").at(name);
    }

private:
    Json root_;

    const Json& resolve(const Json& schema) const {
        if (schema.contains("$ref")) {
            const std::string ref = schema.at("$ref").get<std::string>();
            const std::string prefix = "#/definitions/";
            REQUIRE(ref.rfind(prefix, 0) == 0);
            return root_.at("definitions").at(ref.substr(prefix.size()));
        }
        return schema;
    }

    bool matches(const Json& schema_in, const Json& value) const {
        const Json& schema = resolve(schema_in);

        if (schema.contains("oneOf")) {
            int hits = 0;
            for (const Json& option : schema.at("oneOf")) {
                if (matches(option, value)) ++hits;
            }
            if (hits != 1) return false;
        }
        if (schema.contains("enum")) {
            bool found = false;
            for (const Json& allowed : schema.at("enum")) {
                if (allowed == value) found = true;
            }
            if (!found) return false;
        }
        if (schema.contains("type")) {
            const std::string type = schema.at("type").get<std::string>();
            if (type == "object" && !value.is_object()) return false;
            if (type == "array" && !value.is_array()) return false;
            if (type == "string" && !value.is_string()) return false;
            if (type == "boolean" && !value.is_boolean()) return false;
            if (type == "number" && !value.is_number()) return false;
            if (type == "integer" && !value.is_number_integer() && !value.is_number_unsigned())
                return false;
        }
        if (schema.contains("minimum") && value.is_number()) {
            if (value.get<double>() < schema.at("minimum").get<double>()) return false;
        }
        if (schema.contains("required")) {
            for (const Json& key : schema.at("required")) {
                if (!value.contains(key.get<std::string>())) return false;
            }
        }
        if (schema.contains("properties") && value.is_object()) {
            for (const auto& [key, sub] : schema.at("properties").items()) {
                if (value.contains(key) && !matches(sub, value.at(key))) return false;
            }
        }
        if (schema.contains("items") && value.is_array()) {
            for (const Json& element : value) {
                if (!matches(schema.at("items"), element)) return false;
            }
        }
        return true;
    }
};

SchemaValidator load_validator() {
    std::ifstream in(schema_path);
    REQUIRE(in.good());
    Json schema;
    in >> schema;
    return SchemaValidator(std::move(schema));
}

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

} // namespace

TEST_CASE("generate then fit: reports validate and repeat byte-identically") {
    TempFile csv("dmlme_cli_data.csv");
    const RunResult gen = run("generate --scenario nonsmooth_balanced --n-groups 12 --seed 3 "
                              "--out " + shell_quote(csv.path));
    REQUIRE(gen.exit_code == 0);

    const std::string fit_args =
        "fit --csv " + shell_quote(csv.path) +
        " --y-col y --x-cols x1 --w-cols w1,w2,w3 --z-cols z1,z2,z3 "
        "--learner linear --repetitions 3 --seed 7";
    const RunResult first = run(fit_args);
    REQUIRE(first.exit_code == 0);
    const RunResult second = run(fit_args);
    CHECK(first.stdout_text == second.stdout_text);

    const Json report = Json::parse(first.stdout_text);
    const SchemaValidator validator = load_validator();
    CHECK(validator.validate(report));
    CHECK(report.at("command") == "fit");
    CHECK(report.at("config").at("seed") == 7);
    CHECK(report.at("splits").size() == 3);

    // The emitted interval is exactly beta +/- z_{1-alpha/2} * se.
    const Json& coef = report.at("coefficients").at(0);
    const double z = dmlme::normal_quantile(1.0 - 0.05 / 2.0);
    const double beta = coef.at("estimate").get<double>();
    const double se = coef.at("std_error").get<double>();
    CHECK(coef.at("ci_lower").get<double>() == doctest::Approx(beta - z * se).epsilon(1e-12));
    CHECK(coef.at("ci_upper").get<double>() == doctest::Approx(beta + z * se).epsilon(1e-12));
}

TEST_CASE("usage errors exit 2 with a machine-readable error object") {
    TempFile csv("dmlme_cli_usage.csv");
    run("generate --scenario nonsmooth_balanced --n-groups 6 --seed 1 --out " + shell_quote(csv.path));
    const RunResult result = run("fit --csv " + shell_quote(csv.path) +
                                 " --y-col y --x-cols x1 --w-cols w1,w2,w3 --z-cols z1,z2,z3 "
                                 "--k-folds 1");
    CHECK(result.exit_code == 2);
    const Json report = Json::parse(result.stdout_text);
    CHECK(report.at("error").at("category") == "usage");
    CHECK(load_validator().validate(report));
}

TEST_CASE("data errors exit 3") {
    TempFile csv("dmlme_cli_data_err.csv");
    std::ofstream out(csv.path);
    out << "group,y,x1,w1\n1,1,0,0\n2,2,0,0\n";
    out.close();
    const RunResult result = run("fit --csv " + shell_quote(csv.path) +
                                 " --y-col y --x-cols x1 --w-cols w1 --z-cols z1");
    CHECK(result.exit_code == 3);
    const Json report = Json::parse(result.stdout_text);
    CHECK(report.at("error").at("category") == "data");
}

TEST_CASE("numerical errors exit 4") {
    // A constant x column: the linear learner reproduces it exactly, the
    // residualized design is identically zero, and the GLS solve is singular.
    TempFile csv("dmlme_cli_numeric.csv");
    std::ofstream out(csv.path);
    out << "group,y,x1,w1,z1\n";
    for (int g = 1; g <= 6; ++g) {
        for (int i = 0; i < 4; ++i) {
            out << g << "," << (0.1 * g + 0.03 * i) << ",1.0," << (0.2 * i) << ",1\n";
        }
    }
    out.close();
    const RunResult result = run("fit --csv " + shell_quote(csv.path) +
                                 " --y-col y --x-cols x1 --w-cols w1 --z-cols z1 "
                                 "--learner linear --repetitions 1");
    CHECK(result.exit_code == 4);
    const Json report = Json::parse(result.stdout_text);
    CHECK(report.at("error").at("category") == "numerical");
}

TEST_CASE("simulate: summary agrees with the per-replicate table") {
    TempFile table("dmlme_cli_replicates.csv");
    const RunResult result =
        run("simulate --scenario nonsmooth_balanced --n-groups 12 --replicates 10 "
            "--learner linear --repetitions 2 --seed 11 --out " + shell_quote(table.path));
    REQUIRE(result.exit_code == 0);
    const Json summary = Json::parse(result.stdout_text);
    CHECK(load_validator().validate(summary));
    CHECK(summary.at("command") == "simulate");

    std::ifstream in(table.path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "replicate,beta_hat,se,ci_lo,ci_hi,covered,bias");
    int covered_sum = 0, rows = 0;
    std::vector<double> biases;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        REQUIRE(fields.size() == 7);
        const double beta_hat = std::stod(fields[1]);
        const double lo = std::stod(fields[3]);
        const double hi = std::stod(fields[4]);
        const int covered = std::stoi(fields[5]);
        CHECK(covered == ((lo <= 0.5 && 0.5 <= hi) ? 1 : 0));
        CHECK(std::stod(fields[6]) == doctest::Approx(beta_hat - 0.5).epsilon(1e-12));
        covered_sum += covered;
        ++rows;
        biases.push_back(beta_hat - 0.5);
    }
    REQUIRE(rows == 10);
    const double coverage = summary.at("coverage").get<double>();
    CHECK(coverage == doctest::Approx(covered_sum / 10.0).epsilon(1e-15));

    std::sort(biases.begin(), biases.end());
    const double median_bias = 0.5 * (biases[4] + biases[5]);
    CHECK(summary.at("median_bias").get<double>() == doctest::Approx(median_bias).epsilon(1e-12));

    // Identical invocations are byte-identical on stdout.
    const RunResult again =
        run("simulate --scenario nonsmooth_balanced --n-groups 12 --replicates 10 "
            "--learner linear --repetitions 2 --seed 11 --out " + shell_quote(table.path));
    CHECK(again.stdout_text == result.stdout_text);
}

TEST_CASE("generate is deterministic per seed") {
    TempFile a("dmlme_cli_gen_a.csv"), b("dmlme_cli_gen_b.csv");
    run("generate --scenario smooth_balanced --n-groups 5 --seed 9 --out " + shell_quote(a.path));
    run("generate --scenario smooth_balanced --n-groups 5 --seed 9 --out " + shell_quote(b.path));
    std::ifstream fa(a.path, std::ios::binary), fb(b.path, std::ios::binary);
    std::ostringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());
}

TEST_CASE("unknown scenario is a usage error") {
    const RunResult result = run("simulate --scenario bogus --n-groups 5 --replicates 1");
    CHECK(result.exit_code == 2);
}
