#include "dmlme/simgen.hpp"

#include "dmlme/errors.hpp"
#include "dmlme/parallel.hpp"

#include <cmath>

namespace dmlme {

namespace {

double indicator(bool condition) { return condition ? 1.0 : 0.0; }

} // namespace

double eval_h(double w1, double w2, double w3) {
    return -3.0 * indicator(w3 > 0) * indicator(w1 > 0) +
           2.0 * indicator(w3 > 0) * indicator(w1 <= 0) -
           1.0 * indicator(w3 <= 0) * indicator(w3 <= -1) -
           2.0 * indicator(w3 <= 0) * indicator(w3 > -1) * indicator(w2 > 0) -
           3.0 * indicator(w3 <= 0) * indicator(w3 > -1) * indicator(w2 <= 0) *
               indicator(w1 > 0.75) +
           1.0 * indicator(w3 <= 0) * indicator(w3 > -1) * indicator(w2 <= 0) *
               indicator(w1 <= 0.75);
}

double eval_g_nonsmooth(double w1, double w2, double w3) {
    return 1.0 * indicator(w1 > 0) * indicator(w2 > 0) * indicator(w3 > 1) -
           1.5 * indicator(w1 > 0) * indicator(w2 > 0) * indicator(w3 <= 1) -
           2.7 * indicator(w1 > 0) * indicator(w2 <= 0) * indicator(w2 <= -0.5) *
               indicator(w1 > 1) * indicator(w3 > 1.25) -
           0.5 * indicator(w1 > 0) * indicator(w2 <= 0) * indicator(w2 <= -0.5) *
               indicator(w1 > 1) * indicator(w3 <= 1.25) +
           3.2 * indicator(w1 > 0) * indicator(w2 <= 0) * indicator(w2 <= -0.5) *
               indicator(w1 <= 1) +
           0.75 * indicator(w1 > 0) * indicator(w2 <= 0) * indicator(w2 > -0.5) +
           3.0 * indicator(w1 <= 0) * indicator(w3 > 0) * indicator(w2 <= -1) *
               indicator(w1 <= -1.3) +
           1.5 * indicator(w1 <= 0) * indicator(w3 > 0) * indicator(w2 <= -1) *
               indicator(w1 > -1.3) -
           2.3 * indicator(w1 <= 0) * indicator(w3 > 0) * indicator(w2 > -1) +
           2.8 * indicator(w1 <= 0) * indicator(w3 <= 0) * indicator(w3 <= -0.75) +
           2.0 * indicator(w1 <= 0) * indicator(w3 <= 0) * indicator(w3 > -0.75) *
               indicator(w1 <= -0.5) -
           1.75 * indicator(w1 <= 0) * indicator(w3 <= 0) * indicator(w3 > -0.75) *
               indicator(w1 > -0.5);
}

double eval_g_smooth(double w1, double w2, double w3) {
    return 2.0 * std::sin(w1) + w2 * w3 - std::cos(w1 + w2);
}

double eval_g(const SimScenario& scenario, double w1, double w2, double w3) {
    return scenario.kind == ScenarioKind::smooth_balanced ? eval_g_smooth(w1, w2, w3)
                                                          : eval_g_nonsmooth(w1, w2, w3);
}

std::vector<int> gen_group_sizes(const SimScenario& scenario, Rng& rng) {
    std::vector<int> sizes(scenario.n_groups);
    const int n = scenario.base_n;
    for (int& size : sizes) {
        if (scenario.kind == ScenarioKind::nonsmooth_unbalanced) {
            // uniform on {1, ..., 2n - 1}
            size = 1 + static_cast<int>(rng.uniform_below(2 * n - 1));
        } else {
            // uniform on {n - 3, ..., n + 3}
            size = n - 3 + static_cast<int>(rng.uniform_below(7));
        }
    }
    return sizes;
}

Matrix build_z(int n_i) {
    if (n_i < 1) throw DataError("build_z: group size must be >= 1");
    Matrix z = Matrix::Zero(n_i, 3);
    const int ones_first = n_i / 2;
    for (int i = 0; i < n_i; ++i) {
        z(i, i < ones_first ? 0 : 1) = 1.0;
        z(i, 2) = 1.0;
    }
    return z;
}

GroupedDataset gen_dataset(const SimScenario& scenario, Rng rng) {
    if (scenario.n_groups < 2) throw DataError("gen_dataset: need at least 2 groups");
    if (scenario.base_n < 4) throw DataError("gen_dataset: base_n must be >= 4");

    Rng size_rng = rng.child(0);
    const std::vector<int> sizes = gen_group_sizes(scenario, size_rng);

    GroupedDataset dataset;
    dataset.groups.resize(sizes.size());
    parallel_for(sizes.size(), [&](std::size_t g) {
        const int n = sizes[g];
        Rng group_rng = rng.child(1 + g);

        Group group;
        group.id = std::to_string(g + 1);
        group.w.resize(n, 3);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < 3; ++j) group.w(i, j) = group_rng.normal();
        }
        group.x.resize(n, 1);
        for (int i = 0; i < n; ++i) {
            group.x(i, 0) = eval_h(group.w(i, 0), group.w(i, 1), group.w(i, 2)) +
                            group_rng.normal();
        }
        Vector b(3);
        for (int j = 0; j < 3; ++j) b(j) = scenario.random_effect_sds[j] * group_rng.normal();
        group.z = build_z(n);
        group.y.resize(n);
        for (int i = 0; i < n; ++i) {
            group.y(i) = group.x(i, 0) * scenario.beta0 +
                         eval_g(scenario, group.w(i, 0), group.w(i, 1), group.w(i, 2)) +
                         group.z.row(i).dot(b) + scenario.sigma0 * group_rng.normal();
        }
        dataset.groups[g] = std::move(group);
    });
    return validate_dataset(std::move(dataset));
}

NuisanceModel oracle_nuisance(const SimScenario& scenario) {
    OracleHooks hooks;
    hooks.m_x = [](const Vector& w) {
        Vector out(1);
        out(0) = eval_h(w(0), w(1), w(2));
        return out;
    };
    hooks.m_y = [scenario](const Vector& w) {
        return eval_h(w(0), w(1), w(2)) * scenario.beta0 +
               eval_g(scenario, w(0), w(1), w(2));
    };
    NuisanceModel model;
    model.hooks = std::move(hooks);
    model.d = 1;
    model.v = 3;
    return model;
}

} // namespace dmlme
