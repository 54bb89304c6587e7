#pragma once

#include "dmlme/learners.hpp"
#include "dmlme/rng.hpp"
#include "dmlme/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace dmlme {

enum class ScenarioKind { nonsmooth_balanced, smooth_balanced, nonsmooth_unbalanced };

/// Synthetic-data scenario: N groups with group sizes drawn around base_n
/// (balanced: uniform on {base_n - 3, ..., base_n + 3}; unbalanced: uniform
/// on {1, ..., 2 base_n - 1}), a one-dimensional linear effect beta0, unit
/// error sd sigma0, and three random effects with sds (1.5, 1.8, 1.8).
struct SimScenario {
    ScenarioKind kind = ScenarioKind::nonsmooth_balanced;
    int n_groups = 100;
    int base_n = 15;
    double beta0 = 0.5;
    double sigma0 = 1.0;
    std::array<double, 3> random_effect_sds{1.5, 1.8, 1.8};
};

/// Piecewise-constant signal for the linear covariate, E[X | W = w].
/// Six disjoint branches over the signs of w3, w1, w2 and the cut w1 = 0.75.
double eval_h(double w1, double w2, double w3);

/// Piecewise-constant nonsmooth signal added to the response. Twelve
/// disjoint branches over cuts of (w1, w2, w3).
double eval_g_nonsmooth(double w1, double w2, double w3);

/// Smooth, non-additive surrogate signal: 2 sin(w1) + w2 w3 - cos(w1 + w2).
double eval_g_smooth(double w1, double w2, double w3);

double eval_g(const SimScenario& scenario, double w1, double w2, double w3);

/// Draws the per-group observation counts for the scenario.
std::vector<int> gen_group_sizes(const SimScenario& scenario, Rng& rng);

/// Random-effects design of a group: rows 1..floor(n_i/2) are (1, 0, 1),
/// the remaining ceil(n_i/2) rows are (0, 1, 1).
Matrix build_z(int n_i);

/// Generates a full dataset: W rows iid N3(0, I); X = h(W) + eps_X with
/// standard normal eps_X; Y = X beta0 + g(W) + Z b + eps with
/// b ~ N3(0, diag(sd^2)) and eps ~ N(0, sigma0^2 I). Group sizes come from
/// rng.child(0) and group g's draws from rng.child(1 + g), so datasets that
/// share a seed and a size law differ only through g.
GroupedDataset gen_dataset(const SimScenario& scenario, Rng rng);

/// Exact nuisance functions of the scenario: m_x = h and
/// m_y = h * beta0 + g (the random effects and errors are mean zero).
NuisanceModel oracle_nuisance(const SimScenario& scenario);

} // namespace dmlme
