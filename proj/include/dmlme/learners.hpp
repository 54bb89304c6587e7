#pragma once

#include "dmlme/forest.hpp"
#include "dmlme/rng.hpp"
#include "dmlme/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace dmlme {

enum class LearnerKind { random_forest, linear, oracle };

/// Exact nuisance functions, for tests and oracle experiments only.
struct OracleHooks {
    std::function<Vector(const Vector&)> m_x; // R^v -> R^d
    std::function<double(const Vector&)> m_y; // R^v -> R
};

struct LearnerSpec {
    LearnerKind kind = LearnerKind::random_forest;
    int rf_num_trees = 500;
    int rf_min_node_size = 5;
    int rf_mtry = 0; ///< 0 means the default max(1, floor(v/3))
    std::optional<OracleHooks> oracle_hooks;
};

/// Fitted conditional-expectation functions m_x(w) in R^d and m_y(w) in R,
/// applied row-wise. Immutable once fitted; safe to share across threads.
struct NuisanceModel {
    std::vector<std::shared_ptr<const Regressor>> x_regressors; // one per x column
    std::shared_ptr<const Regressor> y_regressor;
    std::optional<OracleHooks> hooks; // set instead of regressors for oracle specs
    Index d = 0;
    Index v = 0;
    int train_fold = -1;

    Vector predict_x(const Eigen::Ref<const Vector>& w) const;
    double predict_y(const Eigen::Ref<const Vector>& w) const;
};

/// Fits one single-output regressor on (features, targets). Linear specs use
/// a ridge fallback (lambda = 1e-8 on the centered normal equations) so a
/// singular design never errors.
std::unique_ptr<Regressor> fit_learner(const LearnerSpec& spec,
                                       const Eigen::Ref<const Matrix>& features,
                                       const Eigen::Ref<const Vector>& targets, Rng rng);

/// Fits the d + 1 nuisance regressors on the row-stacked observations of the
/// training groups. Task i of the d + 1 fits draws from rng.child(i).
NuisanceModel fit_nuisance(const std::vector<const Group*>& train_groups,
                           const LearnerSpec& spec, Rng rng);

/// Subtracts the fitted conditional expectations row-wise: r_x = x - m_x(w),
/// r_y = y - m_y(w) for every evaluation group.
ResidualSet residualize(const NuisanceModel& model,
                        const std::vector<const Group*>& eval_groups);

int default_mtry(Index v);

} // namespace dmlme
