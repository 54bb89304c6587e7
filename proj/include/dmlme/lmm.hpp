#pragma once

#include "dmlme/errors.hpp"
#include "dmlme/types.hpp"

#include <string>
#include <vector>

namespace dmlme {

/// Result of a Gaussian mixed-effects fit on residualized data.
struct LmmFit {
    Theta theta;
    double loglik = 0.0;
    Matrix t0_hat;   ///< (1/n) sum of R_x^T V^{-1} R_x over groups
    Matrix beta_cov; ///< estimated covariance of beta on this data
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;
};

struct LmmOptions {
    double score_tol_per_obs = 1e-6; ///< converged when ||score|| <= tol * n_total
    double step_tol = 1e-10;
    int max_iterations = 200;
};

/// Thrown when the optimizer exhausts max_iterations; carries the best
/// iterate found so far.
class NonConvergenceError : public NumericError {
public:
    NonConvergenceError(const std::string& message, LmmFit best)
        : NumericError(message), best_fit(std::move(best)) {}
    LmmFit best_fit;
};

/// Working covariance V = Z Sigma Z^T + I of one group's residual vector.
/// All eigenvalues are >= 1, so V is always safely invertible.
Matrix build_v(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& sigma_mat);

/// Gaussian log-likelihood of the residualized model, up to additive
/// constants: sum over groups of
///   -(n_i/2) log sigma2 - (1/2) log det V_i - (1/2 sigma2) r^T V_i^{-1} r
/// with r = r_y - r_x beta.
double log_likelihood(const ResidualSet& res, const Theta& theta);

/// Analytic gradient of log_likelihood in theta, length d + 1 + q(q+1)/2.
/// Layout: beta (d entries), sigma2, then the lower triangle of Sigma in
/// column-major order ((0,0), (1,0), ..., (q-1,q-1)); off-diagonal entries
/// carry both symmetric partials, i.e. twice the single-entry derivative.
Vector score(const ResidualSet& res, const Theta& theta);

/// Generalized least squares for beta at fixed variance components:
///   beta = (sum R_x^T V^{-1} R_x)^{-1} sum R_x^T V^{-1} R_y.
/// sigma2 cancels and is accepted only to mirror the estimating equation.
Vector solve_beta_gls(const ResidualSet& res, double sigma2,
                      const Eigen::Ref<const Matrix>& sigma_mat);

/// T0 estimate: (1 / n_total) sum over groups of R_x^T V^{-1} R_x.
Matrix estimate_t0(const ResidualSet& res, const Eigen::Ref<const Matrix>& sigma_mat);

/// GLS covariance of beta: sigma2_hat * T0_hat^{-1} / n_total.
Matrix beta_covariance(const ResidualSet& res, double sigma2_hat,
                       const Eigen::Ref<const Matrix>& sigma_mat_hat);

/// Maximum-likelihood fit of (beta, sigma2, Sigma) on residualized data.
/// beta and sigma2 are profiled out in closed form each step; the free
/// Cholesky parameters of Sigma are driven by quasi-Newton ascent with
/// backtracking line search.
LmmFit fit_variance_components(const ResidualSet& res, const LmmOptions& options = {});

} // namespace dmlme
