#include "dmlme/dml.hpp"

#include "dmlme/errors.hpp"
#include "dmlme/gaussian.hpp"
#include "dmlme/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace dmlme {

namespace {

double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    std::sort(values.begin(), values.end());
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void validate_config(const DmlConfig& config, Index n_groups, Index v) {
    if (config.k_folds < 2) {
        throw std::invalid_argument("k_folds must be >= 2");
    }
    if (config.k_folds > n_groups) {
        throw std::invalid_argument("k_folds (" + std::to_string(config.k_folds) +
                                    ") exceeds the number of groups (" +
                                    std::to_string(n_groups) + ")");
    }
    if (config.repetitions < 1) {
        throw std::invalid_argument("repetitions must be >= 1");
    }
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    if (config.learner.kind == LearnerKind::random_forest) {
        if (config.learner.rf_num_trees < 1) throw std::invalid_argument("rf_num_trees must be >= 1");
        if (config.learner.rf_min_node_size < 1) throw std::invalid_argument("rf_min_node_size must be >= 1");
        if (config.learner.rf_mtry > v) throw std::invalid_argument("rf_mtry exceeds the number of w columns");
    }
}

} // namespace

FoldPartition split_folds(const std::vector<std::string>& group_ids, int k, Rng rng) {
    const int n = static_cast<int>(group_ids.size());
    if (k < 2) throw std::invalid_argument("k_folds must be >= 2");
    if (k > n) {
        throw std::invalid_argument("k_folds (" + std::to_string(k) +
                                    ") exceeds the number of groups (" + std::to_string(n) + ")");
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    FoldPartition partition;
    partition.k = k;
    for (int pos = 0; pos < n; ++pos) {
        partition.assignments[group_ids[order[pos]]] = pos % k;
    }
    return partition;
}

SplitEstimate estimate_single_split(const GroupedDataset& dataset, const DmlConfig& config,
                                    const FoldPartition& partition, Rng rng) {
    const int k_folds = partition.k;
    std::vector<std::vector<const Group*>> fold_groups(k_folds);
    for (const Group& g : dataset.groups) {
        const auto it = partition.assignments.find(g.id);
        if (it == partition.assignments.end()) {
            throw DataError("fold partition misses group '" + g.id + "'");
        }
        if (it->second < 0 || it->second >= k_folds) {
            throw DataError("fold index out of range for group '" + g.id + "'");
        }
        fold_groups[it->second].push_back(&g);
    }
    for (int k = 0; k < k_folds; ++k) {
        if (fold_groups[k].empty()) {
            throw DataError("fold " + std::to_string(k) + " is empty");
        }
    }

    std::vector<Vector> betas(k_folds);
    std::vector<Matrix> covs(k_folds);
    std::vector<double> sigma2s(k_folds);
    std::vector<Matrix> sigma_mats(k_folds);
    std::vector<FoldDiagnostics> diagnostics(k_folds);

    parallel_for(static_cast<std::size_t>(k_folds), [&](std::size_t k) {
        std::vector<const Group*> train;
        for (int j = 0; j < k_folds; ++j) {
            if (j != static_cast<int>(k)) {
                train.insert(train.end(), fold_groups[j].begin(), fold_groups[j].end());
            }
        }
        const std::vector<const Group*>& eval = fold_groups[k];

        // Fold hygiene: the nuisance learner must never see an evaluation group.
        std::unordered_set<const Group*> train_set(train.begin(), train.end());
        for (const Group* g : eval) {
            if (train_set.count(g) != 0) {
                throw std::logic_error("fold hygiene violated: group '" + g->id +
                                       "' in both train and eval");
            }
        }
        Index train_rows = 0;
        for (const Group* g : train) train_rows += g->rows();
        if (train_rows < 2) {
            throw DataError("fold " + std::to_string(k) +
                            ": complement has fewer than 2 observations");
        }

        try {
            NuisanceModel model = fit_nuisance(train, config.learner, rng.child(k));
            model.train_fold = static_cast<int>(k);
            ResidualSet residuals = residualize(model, eval);
            for (GroupResiduals& gr : residuals.groups) gr.fold = static_cast<int>(k);

            const LmmFit fit = fit_variance_components(residuals);
            betas[k] = fit.theta.beta;
            covs[k] = fit.beta_cov;
            sigma2s[k] = fit.theta.sigma2;
            sigma_mats[k] = fit.theta.sigma_mat;
            diagnostics[k] = FoldDiagnostics{static_cast<int>(k), fit.converged, fit.iterations};
        } catch (const DataError& e) {
            throw DataError("fold " + std::to_string(k) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("fold " + std::to_string(k) + ": " + e.what());
        }
    });

    SplitEstimate estimate;
    const Index d = dataset.d;
    estimate.beta = Vector::Zero(d);
    estimate.cov = Matrix::Zero(d, d);
    estimate.sigma_mat = Matrix::Zero(dataset.q, dataset.q);
    for (int k = 0; k < k_folds; ++k) {
        estimate.beta += betas[k];
        estimate.cov += covs[k];
        estimate.sigma2 += sigma2s[k];
        estimate.sigma_mat += sigma_mats[k];
        estimate.folds.push_back(diagnostics[k]);
    }
    const double k_count = static_cast<double>(k_folds);
    estimate.beta /= k_count;
    estimate.cov /= k_count * k_count;
    estimate.sigma2 /= k_count;
    estimate.sigma_mat /= k_count;
    return estimate;
}

SplitEstimate estimate_single_split(const GroupedDataset& dataset, const DmlConfig& config,
                                    Rng rng) {
    std::vector<std::string> ids;
    ids.reserve(dataset.groups.size());
    for (const Group& g : dataset.groups) ids.push_back(g.id);
    const FoldPartition partition = split_folds(ids, config.k_folds, rng.child(0));
    return estimate_single_split(dataset, config, partition, rng.child(1));
}

DmlFit aggregate_splits(std::vector<SplitEstimate> estimates) {
    if (estimates.empty()) {
        throw std::invalid_argument("aggregate_splits: no split estimates");
    }
    const Index d = estimates.front().beta.size();
    const std::size_t s_count = estimates.size();

    DmlFit fit;
    if (s_count == 1) {
        fit.beta = estimates.front().beta;
        fit.cov = estimates.front().cov;
        fit.splits = std::move(estimates);
        return fit;
    }

    fit.beta = Vector(d);
    for (Index j = 0; j < d; ++j) {
        std::vector<double> component(s_count);
        for (std::size_t s = 0; s < s_count; ++s) component[s] = estimates[s].beta(j);
        fit.beta(j) = median_of(std::move(component));
    }

    fit.cov = Matrix(d, d);
    for (Index row = 0; row < d; ++row) {
        for (Index col = 0; col < d; ++col) {
            std::vector<double> entry(s_count);
            for (std::size_t s = 0; s < s_count; ++s) {
                const Vector shift = fit.beta - estimates[s].beta;
                entry[s] = estimates[s].cov(row, col) + shift(row) * shift(col);
            }
            fit.cov(row, col) = median_of(std::move(entry));
        }
    }
    fit.splits = std::move(estimates);
    return fit;
}

void attach_confidence_intervals(DmlFit& fit, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1]");
    }
    const Index d = fit.beta.size();
    const double z = (alpha == 1.0) ? 0.0 : normal_quantile(1.0 - alpha / 2.0);
    fit.std_errors = Vector(d);
    fit.ci_lower = Vector(d);
    fit.ci_upper = Vector(d);
    for (Index j = 0; j < d; ++j) {
        const double variance = std::max(0.0, fit.cov(j, j));
        const double se = std::sqrt(variance);
        fit.std_errors(j) = se;
        fit.ci_lower(j) = fit.beta(j) - z * se;
        fit.ci_upper(j) = fit.beta(j) + z * se;
        if (se == 0.0) {
            fit.warnings.push_back("degenerate variance for coefficient " + std::to_string(j) +
                                   ": zero-width interval");
        }
    }
}

DmlFit dml_fit(const GroupedDataset& dataset, const DmlConfig& config) {
    const GroupedDataset validated = validate_dataset(dataset);
    validate_config(config, validated.n_groups(), validated.v);

    const Rng base(config.seed);
    const std::size_t s_count = static_cast<std::size_t>(config.repetitions);
    std::vector<SplitEstimate> estimates(s_count);
    std::vector<std::string> failures(s_count);
    std::vector<bool> ok(s_count, false);

    parallel_for(s_count, [&](std::size_t s) {
        try {
            estimates[s] = estimate_single_split(validated, config, base.child(s));
            ok[s] = true;
        } catch (const std::exception& e) {
            failures[s] = e.what();
        }
    });

    std::vector<SplitEstimate> survivors;
    std::vector<int> failed;
    std::vector<std::string> warnings;
    for (std::size_t s = 0; s < s_count; ++s) {
        if (ok[s]) {
            survivors.push_back(std::move(estimates[s]));
        } else {
            failed.push_back(static_cast<int>(s));
            warnings.push_back("repetition " + std::to_string(s) + " failed: " + failures[s]);
        }
    }
    if (survivors.empty()) {
        throw NumericError("all " + std::to_string(s_count) +
                           " repetitions failed; first error: " + failures.front());
    }

    DmlFit fit = aggregate_splits(std::move(survivors));
    fit.failed_repetitions = std::move(failed);
    fit.warnings.insert(fit.warnings.end(), warnings.begin(), warnings.end());
    fit.config = config;
    attach_confidence_intervals(fit, config.alpha);
    return fit;
}

} // namespace dmlme
