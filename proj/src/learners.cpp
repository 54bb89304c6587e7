#include "dmlme/learners.hpp"

#include "dmlme/errors.hpp"
#include "dmlme/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace dmlme {

namespace {

/// Affine least-squares fit with a tiny ridge on the centered slopes.
/// Centering keeps the intercept unpenalized, so constant targets are
/// reproduced exactly.
class LinearRegressor final : public Regressor {
public:
    LinearRegressor(const Eigen::Ref<const Matrix>& features,
                    const Eigen::Ref<const Vector>& targets) {
        static constexpr double kRidge = 1e-8;
        feature_means_ = features.colwise().mean();
        target_mean_ = targets.mean();
        const Matrix centered = features.rowwise() - feature_means_.transpose();
        const Vector centered_y = targets.array() - target_mean_;
        Matrix normal = centered.transpose() * centered;
        normal.diagonal().array() += kRidge;
        coef_ = normal.ldlt().solve(centered.transpose() * centered_y);
    }

    double predict(const Eigen::Ref<const Vector>& w) const override {
        return target_mean_ + (w - feature_means_).dot(coef_);
    }

private:
    Vector feature_means_;
    double target_mean_ = 0.0;
    Vector coef_;
};

ForestParams forest_params(const LearnerSpec& spec, Index v) {
    ForestParams p;
    p.num_trees = spec.rf_num_trees;
    p.min_node_size = spec.rf_min_node_size;
    p.mtry = spec.rf_mtry > 0 ? spec.rf_mtry : default_mtry(v);
    if (p.num_trees < 1) throw std::invalid_argument("rf_num_trees must be >= 1");
    if (p.min_node_size < 1) throw std::invalid_argument("rf_min_node_size must be >= 1");
    if (p.mtry > v) throw std::invalid_argument("rf_mtry exceeds the number of features");
    return p;
}

} // namespace

int default_mtry(Index v) {
    return std::max(1, static_cast<int>(v / 3));
}

std::unique_ptr<Regressor> fit_learner(const LearnerSpec& spec,
                                       const Eigen::Ref<const Matrix>& features,
                                       const Eigen::Ref<const Vector>& targets, Rng rng) {
    if (features.rows() != targets.size()) {
        throw DataError("fit_learner: feature rows and target length differ");
    }
    if (targets.size() < 2) {
        throw DataError("fit_learner: need at least 2 training rows, got " +
                        std::to_string(targets.size()));
    }
    switch (spec.kind) {
    case LearnerKind::linear:
        return std::make_unique<LinearRegressor>(features, targets);
    case LearnerKind::random_forest:
        return std::make_unique<RandomForest>(features, targets,
                                              forest_params(spec, features.cols()), rng.seed());
    case LearnerKind::oracle:
        throw std::invalid_argument(
            "oracle specs carry their functions directly; use fit_nuisance");
    }
    throw std::invalid_argument("unknown learner kind");
}

Vector NuisanceModel::predict_x(const Eigen::Ref<const Vector>& w) const {
    if (hooks) return hooks->m_x(w);
    Vector out(d);
    for (Index j = 0; j < d; ++j) out(j) = x_regressors[j]->predict(w);
    return out;
}

double NuisanceModel::predict_y(const Eigen::Ref<const Vector>& w) const {
    if (hooks) return hooks->m_y(w);
    return y_regressor->predict(w);
}

NuisanceModel fit_nuisance(const std::vector<const Group*>& train_groups,
                           const LearnerSpec& spec, Rng rng) {
    if (train_groups.empty()) {
        throw DataError("fit_nuisance: no training groups");
    }
    const Index d = train_groups.front()->x.cols();
    const Index v = train_groups.front()->w.cols();

    NuisanceModel model;
    model.d = d;
    model.v = v;

    if (spec.kind == LearnerKind::oracle) {
        if (!spec.oracle_hooks) {
            throw std::invalid_argument("oracle learner spec without hooks");
        }
        model.hooks = spec.oracle_hooks;
        return model;
    }

    // Pool unit-level rows across the training groups; the conditional
    // expectations do not depend on the grouping index.
    Index rows = 0;
    for (const Group* g : train_groups) rows += g->rows();
    if (rows < 2) {
        throw DataError("fit_nuisance: need at least 2 training rows, got " +
                        std::to_string(rows));
    }
    Matrix features(rows, v);
    Matrix x_targets(rows, d);
    Vector y_targets(rows);
    Index at = 0;
    for (const Group* g : train_groups) {
        const Index n = g->rows();
        features.middleRows(at, n) = g->w;
        x_targets.middleRows(at, n) = g->x;
        y_targets.segment(at, n) = g->y;
        at += n;
    }

    model.x_regressors.resize(d);
    std::shared_ptr<const Regressor> y_fit;
    parallel_for(static_cast<std::size_t>(d) + 1, [&](std::size_t task) {
        const Rng task_rng = rng.child(task);
        if (task < static_cast<std::size_t>(d)) {
            model.x_regressors[task] = fit_learner(spec, features, x_targets.col(task), task_rng);
        } else {
            y_fit = fit_learner(spec, features, y_targets, task_rng);
        }
    });
    model.y_regressor = std::move(y_fit);
    return model;
}

ResidualSet residualize(const NuisanceModel& model,
                        const std::vector<const Group*>& eval_groups) {
    ResidualSet out;
    out.d = model.d;
    out.groups.reserve(eval_groups.size());
    for (const Group* g : eval_groups) {
        if (g->w.cols() != model.v || g->x.cols() != model.d) {
            throw DataError("residualize: group '" + g->id +
                            "' dimensions do not match the fitted model");
        }
        GroupResiduals r;
        r.group_id = g->id;
        r.fold = model.train_fold;
        r.z = g->z;
        r.r_x.resize(g->rows(), model.d);
        r.r_y.resize(g->rows());
        for (Index i = 0; i < g->rows(); ++i) {
            const Vector w_row = g->w.row(i).transpose();
            r.r_x.row(i) = g->x.row(i) - model.predict_x(w_row).transpose();
            r.r_y(i) = g->y(i) - model.predict_y(w_row);
        }
        out.q = g->z.cols();
        out.n_total += g->rows();
        out.groups.push_back(std::move(r));
    }
    return out;
}

} // namespace dmlme
