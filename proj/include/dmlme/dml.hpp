#pragma once

#include "dmlme/learners.hpp"
#include "dmlme/lmm.hpp"
#include "dmlme/rng.hpp"
#include "dmlme/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dmlme {

struct DmlConfig {
    int k_folds = 2;
    int repetitions = 10;
    LearnerSpec learner;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

struct FoldDiagnostics {
    int fold = 0;
    bool converged = false;
    int iterations = 0;
};

/// Estimate from one sample split: the K-fold average of the per-fold GLS
/// estimates, its covariance (independent folds: sum of covariances / K^2),
/// and fold-averaged variance components as diagnostics.
struct SplitEstimate {
    Vector beta;
    Matrix cov;
    double sigma2 = 0.0;
    Matrix sigma_mat;
    std::vector<FoldDiagnostics> folds;
};

struct DmlFit {
    Vector beta;        ///< componentwise median over splits
    Matrix cov;         ///< median of cov_s + (beta - beta_s)(beta - beta_s)^T
    Vector std_errors;
    Vector ci_lower;
    Vector ci_upper;
    std::vector<SplitEstimate> splits;
    std::vector<int> failed_repetitions;
    std::vector<std::string> warnings;
    DmlConfig config;
};

/// Uniform-random partition of the group ids into k folds of sizes differing
/// by at most one (shuffled round-robin).
FoldPartition split_folds(const std::vector<std::string>& group_ids, int k, Rng rng);

/// One full cross-fitting pass over a given partition: per fold, nuisances
/// are fitted on the complement and evaluated on the fold, and the fold's
/// residuals get a mixed-effects fit. Fold k draws from rng.child(k).
SplitEstimate estimate_single_split(const GroupedDataset& dataset, const DmlConfig& config,
                                    const FoldPartition& partition, Rng rng);

/// Convenience overload that draws the partition from rng.child(0) and runs
/// the folds from rng.child(1).
SplitEstimate estimate_single_split(const GroupedDataset& dataset, const DmlConfig& config,
                                    Rng rng);

/// Median aggregation over repeated splits with the repeated-splitting
/// variance correction. With a single split this is an exact passthrough.
DmlFit aggregate_splits(std::vector<SplitEstimate> estimates);

/// Gaussian confidence intervals beta_j +/- z_{1-alpha/2} se_j. A zero
/// standard error yields a degenerate interval and a warning.
void attach_confidence_intervals(DmlFit& fit, double alpha);

/// Runs the complete procedure: `repetitions` independent split/fit passes
/// (repetition s derives its generator as Rng(seed).child(s)), median
/// aggregation, and confidence intervals. Repetitions that fail are recorded
/// and skipped; the call fails only if every repetition fails.
DmlFit dml_fit(const GroupedDataset& dataset, const DmlConfig& config);

} // namespace dmlme
