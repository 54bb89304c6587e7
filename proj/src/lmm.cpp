#include "dmlme/lmm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace dmlme {

namespace {

constexpr double kSigma2Floor = 1e-12;

Index sigma_param_count(Index q) { return q * (q + 1) / 2; }

/// Per-group factorization of V = Z Sigma Z^T + I.
struct GroupSolve {
    Eigen::LLT<Matrix> chol;
    double logdet = 0.0;
};

GroupSolve factor_v(const Eigen::Ref<const Matrix>& z,
                    const Eigen::Ref<const Matrix>& sigma_mat) {
    GroupSolve gs;
    gs.chol.compute(build_v(z, sigma_mat));
    if (gs.chol.info() != Eigen::Success) {
        throw NumericError("V factorization failed; eigenvalues should be >= 1");
    }
    const auto& l = gs.chol.matrixLLT();
    for (Index i = 0; i < l.rows(); ++i) gs.logdet += 2.0 * std::log(l(i, i));
    return gs;
}

/// Packs the symmetric matrix of Sigma partials into the score layout:
/// lower triangle column-major, off-diagonals doubled.
void pack_sigma_gradient(const Matrix& grad_mat, Eigen::Ref<Vector> out) {
    const Index q = grad_mat.rows();
    Index at = 0;
    for (Index col = 0; col < q; ++col) {
        for (Index row = col; row < q; ++row) {
            out(at++) = (row == col) ? grad_mat(row, col) : 2.0 * grad_mat(row, col);
        }
    }
}

struct ProfiledPoint {
    Matrix sigma_mat;
    Vector beta;
    double sigma2 = 0.0;
    double quad = 0.0;        ///< sum of r^T V^{-1} r at the GLS beta
    double sum_logdet = 0.0;
    double loglik = 0.0;
    bool sigma2_floored = false;
};

/// Profiles beta (GLS) and sigma2 (score zero: sigma2 = quad / n_total)
/// at fixed Sigma and evaluates the log-likelihood there.
ProfiledPoint profile_at(const ResidualSet& res, const Matrix& sigma_mat) {
    ProfiledPoint p;
    p.sigma_mat = sigma_mat;
    p.beta = solve_beta_gls(res, 1.0, sigma_mat);
    for (const GroupResiduals& g : res.groups) {
        const GroupSolve gs = factor_v(g.z, sigma_mat);
        const Vector r = g.r_y - g.r_x * p.beta;
        p.quad += r.dot(gs.chol.solve(r));
        p.sum_logdet += gs.logdet;
    }
    const double n = static_cast<double>(res.n_total);
    p.sigma2 = p.quad / n;
    if (!(p.sigma2 > kSigma2Floor)) {
        p.sigma2 = kSigma2Floor;
        p.sigma2_floored = true;
    }
    p.loglik = -0.5 * n * std::log(p.sigma2) - 0.5 * p.sum_logdet - 0.5 * p.quad / p.sigma2;
    return p;
}

/// Matrix of partial derivatives of the log-likelihood in the entries of
/// Sigma (each entry treated independently; the matrix is symmetric).
Matrix sigma_partials(const ResidualSet& res, const Vector& beta, double sigma2,
                      const Matrix& sigma_mat) {
    const Index q = res.q;
    Matrix grad = Matrix::Zero(q, q);
    for (const GroupResiduals& g : res.groups) {
        const GroupSolve gs = factor_v(g.z, sigma_mat);
        const Vector r = g.r_y - g.r_x * beta;
        const Matrix v_inv_z = gs.chol.solve(g.z);
        const Vector zt_v_inv_r = v_inv_z.transpose() * r;
        grad.noalias() += -0.5 * (g.z.transpose() * v_inv_z);
        grad.noalias() += (0.5 / sigma2) * (zt_v_inv_r * zt_v_inv_r.transpose());
    }
    return 0.5 * (grad + grad.transpose()); // kill factorization round-off
}

/// Lower-triangular Cholesky factor parameterization of Sigma: diagonal
/// entries stored on log scale, off-diagonals raw, column-major order.
Matrix unpack_chol(const Vector& params, Index q) {
    Matrix l = Matrix::Zero(q, q);
    Index at = 0;
    for (Index col = 0; col < q; ++col) {
        for (Index row = col; row < q; ++row) {
            l(row, col) = (row == col) ? std::exp(params(at)) : params(at);
            ++at;
        }
    }
    return l;
}

/// Chain rule from Sigma partials to the Cholesky parameters:
/// dl/dL = 2 G L for symmetric G, with the extra L_jj factor on the
/// log-scale diagonal.
Vector chol_gradient(const Matrix& sigma_grad, const Matrix& l) {
    const Index q = l.rows();
    const Matrix grad_l = 2.0 * sigma_grad * l;
    Vector out(sigma_param_count(q));
    Index at = 0;
    for (Index col = 0; col < q; ++col) {
        for (Index row = col; row < q; ++row) {
            out(at++) = (row == col) ? grad_l(row, col) * l(row, col) : grad_l(row, col);
        }
    }
    return out;
}

void check_residual_set(const ResidualSet& res) {
    if (res.groups.empty()) throw DataError("empty residual set");
    if (res.n_total < 1) throw DataError("residual set with no observations");
}

} // namespace

Matrix build_v(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& sigma_mat) {
    Matrix v = z * sigma_mat * z.transpose();
    v = 0.5 * (v + v.transpose()).eval();
    v.diagonal().array() += 1.0;
    return v;
}

double log_likelihood(const ResidualSet& res, const Theta& theta) {
    check_residual_set(res);
    double total = 0.0;
    for (const GroupResiduals& g : res.groups) {
        const GroupSolve gs = factor_v(g.z, theta.sigma_mat);
        const Vector r = g.r_y - g.r_x * theta.beta;
        const double quad = r.dot(gs.chol.solve(r));
        total += -0.5 * static_cast<double>(g.rows()) * std::log(theta.sigma2) -
                 0.5 * gs.logdet - 0.5 * quad / theta.sigma2;
    }
    return total;
}

Vector score(const ResidualSet& res, const Theta& theta) {
    check_residual_set(res);
    const Index d = res.d;
    const Index q = res.q;
    Vector psi = Vector::Zero(d + 1 + sigma_param_count(q));
    Matrix sigma_grad = Matrix::Zero(q, q);

    for (const GroupResiduals& g : res.groups) {
        const GroupSolve gs = factor_v(g.z, theta.sigma_mat);
        const Vector r = g.r_y - g.r_x * theta.beta;
        const Vector v_inv_r = gs.chol.solve(r);
        psi.head(d).noalias() += (g.r_x.transpose() * v_inv_r) / theta.sigma2;
        const double quad = r.dot(v_inv_r);
        psi(d) += -0.5 * static_cast<double>(g.rows()) / theta.sigma2 +
                  0.5 * quad / (theta.sigma2 * theta.sigma2);
        const Matrix v_inv_z = gs.chol.solve(g.z);
        const Vector zt_v_inv_r = v_inv_z.transpose() * r;
        sigma_grad.noalias() += -0.5 * (g.z.transpose() * v_inv_z);
        sigma_grad.noalias() += (0.5 / theta.sigma2) * (zt_v_inv_r * zt_v_inv_r.transpose());
    }
    sigma_grad = 0.5 * (sigma_grad + sigma_grad.transpose()).eval();
    pack_sigma_gradient(sigma_grad, psi.tail(sigma_param_count(q)));
    return psi;
}

Vector solve_beta_gls(const ResidualSet& res, double /*sigma2*/,
                      const Eigen::Ref<const Matrix>& sigma_mat) {
    check_residual_set(res);
    const Index d = res.d;
    Matrix normal = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (const GroupResiduals& g : res.groups) {
        const GroupSolve gs = factor_v(g.z, sigma_mat);
        const Matrix v_inv_rx = gs.chol.solve(g.r_x);
        normal.noalias() += g.r_x.transpose() * v_inv_rx;
        rhs.noalias() += v_inv_rx.transpose() * g.r_y;
    }
    Eigen::FullPivLU<Matrix> lu(normal);
    if (!lu.isInvertible()) {
        throw NumericError("singular GLS design: rank " + std::to_string(lu.rank()) + " of " +
                           std::to_string(d) +
                           " (collinear residualized x or too few observations)");
    }
    return lu.solve(rhs);
}

Matrix estimate_t0(const ResidualSet& res, const Eigen::Ref<const Matrix>& sigma_mat) {
    check_residual_set(res);
    Matrix total = Matrix::Zero(res.d, res.d);
    for (const GroupResiduals& g : res.groups) {
        const GroupSolve gs = factor_v(g.z, sigma_mat);
        total.noalias() += g.r_x.transpose() * gs.chol.solve(g.r_x);
    }
    total /= static_cast<double>(res.n_total);
    return 0.5 * (total + total.transpose());
}

Matrix beta_covariance(const ResidualSet& res, double sigma2_hat,
                       const Eigen::Ref<const Matrix>& sigma_mat_hat) {
    const Matrix t0 = estimate_t0(res, sigma_mat_hat);
    Eigen::FullPivLU<Matrix> lu(t0);
    if (!lu.isInvertible()) {
        throw NumericError("singular GLS design: T0 estimate is rank deficient");
    }
    const Matrix t0_inv = lu.inverse();
    return (sigma2_hat / static_cast<double>(res.n_total)) * t0_inv;
}

LmmFit fit_variance_components(const ResidualSet& res, const LmmOptions& options) {
    check_residual_set(res);
    const Index d = res.d;
    const Index q = res.q;
    const Index n_params = sigma_param_count(q);
    const double n = static_cast<double>(res.n_total);
    if (res.n_total < d + 1 + n_params + 1) {
        throw DataError("too few observations for the variance-component fit: need at least " +
                        std::to_string(d + 1 + n_params + 1) + ", got " +
                        std::to_string(res.n_total));
    }

    auto finish = [&](const ProfiledPoint& p, bool converged, int iterations,
                      std::vector<std::string> warnings) {
        LmmFit fit;
        fit.theta = validate_theta(Theta{p.beta, p.sigma2, p.sigma_mat});
        fit.loglik = p.loglik;
        fit.t0_hat = estimate_t0(res, fit.theta.sigma_mat);
        fit.beta_cov = beta_covariance(res, fit.theta.sigma2, fit.theta.sigma_mat);
        fit.converged = converged;
        fit.iterations = iterations;
        fit.warnings = std::move(warnings);
        return fit;
    };

    // Starting point: Sigma = 0.1 I.
    Vector params = Vector::Zero(n_params);
    {
        Index at = 0;
        for (Index col = 0; col < q; ++col) {
            for (Index row = col; row < q; ++row) {
                params(at++) = (row == col) ? 0.5 * std::log(0.1) : 0.0;
            }
        }
    }

    ProfiledPoint point = profile_at(res, unpack_chol(params, q) *
                                              unpack_chol(params, q).transpose());
    if (point.sigma2_floored) {
        // Degenerate zero-residual input: the error variance sits on its
        // floor and Sigma is unidentified; report Sigma = 0 with a warning.
        ProfiledPoint degenerate = profile_at(res, Matrix::Zero(q, q));
        return finish(degenerate, true, 0,
                      {"degenerate fit: residual variance at floor 1e-12, Sigma set to 0"});
    }

    const double score_tol = options.score_tol_per_obs * n;
    Matrix h_inv = Matrix::Identity(n_params, n_params); // inverse-Hessian approx of -loglik
    Vector grad_prev;
    Vector last_step;

    // Trial evaluation for the line search; overflowing or numerically
    // degenerate parameter points count as rejections, not errors.
    auto try_profile = [&](const Vector& p) -> std::optional<ProfiledPoint> {
        const Matrix l = unpack_chol(p, q);
        if (!l.allFinite()) return std::nullopt;
        const Matrix sigma = l * l.transpose();
        if (!sigma.allFinite()) return std::nullopt;
        try {
            ProfiledPoint candidate = profile_at(res, sigma);
            if (!std::isfinite(candidate.loglik)) return std::nullopt;
            return candidate;
        } catch (const NumericError&) {
            return std::nullopt;
        }
    };
    double best_loglik = -std::numeric_limits<double>::infinity();
    ProfiledPoint best_point = point;
    bool converged = false;
    std::vector<std::string> warnings;
    int iter = 0;

    for (iter = 1; iter <= options.max_iterations; ++iter) {
        const Matrix l = unpack_chol(params, q);
        const Vector full_score =
            score(res, Theta{point.beta, point.sigma2, point.sigma_mat});
        if (full_score.norm() <= score_tol) {
            converged = true;
            break;
        }

        const Matrix g_sigma = sigma_partials(res, point.beta, point.sigma2, point.sigma_mat);
        const Vector grad = -chol_gradient(g_sigma, l); // gradient of -loglik

        // BFGS update from the previous step.
        if (grad_prev.size() > 0) {
            const Vector y = grad - grad_prev;
            const Vector& s = last_step;
            const double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                const double rho = 1.0 / sy;
                const Matrix outer = s * y.transpose();
                h_inv = (Matrix::Identity(n_params, n_params) - rho * outer) * h_inv *
                            (Matrix::Identity(n_params, n_params) - rho * outer.transpose()) +
                        rho * (s * s.transpose());
            }
        }

        Vector direction = -h_inv * grad;
        if (direction.dot(grad) >= 0.0) {
            h_inv = Matrix::Identity(n_params, n_params);
            direction = -grad;
        }
        static constexpr double kMaxStepNorm = 10.0; // exp-scale parameters
        if (direction.norm() > kMaxStepNorm) direction *= kMaxStepNorm / direction.norm();

        // Backtracking Armijo line search on -loglik.
        const double f0 = -point.loglik;
        const double slope = grad.dot(direction);
        double step = 1.0;
        bool accepted = false;
        double sigma_step = 0.0;
        for (int halvings = 0; halvings < 60; ++halvings) {
            if (step * direction.norm() <= options.step_tol) break;
            const Vector trial_params = params + step * direction;
            const std::optional<ProfiledPoint> trial = try_profile(trial_params);
            if (trial && -trial->loglik <= f0 + 1e-4 * step * slope) {
                accepted = true;
                sigma_step = (trial->sigma_mat - point.sigma_mat).norm();
                last_step = step * direction;
                params = trial_params;
                grad_prev = grad;
                point = *trial;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No uphill direction: treat as a local maximum.
            converged = true;
            break;
        }
        if (sigma_step <= options.step_tol) {
            // The parameter itself has stopped moving (Sigma pinned at a
            // boundary): accept as converged.
            converged = true;
            ++iter;
            break;
        }
        if (point.sigma2_floored) {
            warnings.push_back("residual variance clamped to floor during optimization");
        }
        if (point.loglik > best_loglik) {
            best_loglik = point.loglik;
            best_point = point;
        }
    }

    if (!converged) {
        LmmFit best = finish(best_point, false, options.max_iterations, warnings);
        throw NonConvergenceError("variance-component optimizer did not converge in " +
                                      std::to_string(options.max_iterations) + " iterations",
                                  std::move(best));
    }
    if (point.sigma2_floored) {
        warnings.push_back("degenerate fit: residual variance at floor 1e-12");
    }
    return finish(point, true, iter, warnings);
}

} // namespace dmlme
