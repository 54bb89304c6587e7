#pragma once

#include <Eigen/Dense>

#include <string>
#include <unordered_map>
#include <vector>

namespace dmlme {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// One experimental unit: n_i repeated observations of the response y,
/// the linear covariates x (n_i x d), the nonparametric covariates w
/// (n_i x v), and the random-effects design z (n_i x q).
struct Group {
    std::string id;
    Vector y;
    Matrix x;
    Matrix w;
    Matrix z;

    Index rows() const { return y.size(); }
};

struct GroupedDataset {
    std::vector<Group> groups;
    Index d = 0; ///< columns of x, shared by all groups
    Index v = 0; ///< columns of w
    Index q = 0; ///< columns of z
    Index n_total = 0; ///< sum of group sizes
    Index n_max = 0;   ///< largest group size

    Index n_groups() const { return static_cast<Index>(groups.size()); }
};

/// Validates group shapes, finiteness, and id uniqueness; fills in the
/// shared dimensions and observation counts. Idempotent. Throws DataError
/// naming the offending group and coordinate.
GroupedDataset validate_dataset(GroupedDataset dataset);

/// Finite-dimensional model parameter: fixed effects beta, error variance
/// sigma2 > 0, and the scaled random-effects covariance Sigma (q x q,
/// symmetric positive semidefinite).
struct Theta {
    Vector beta;
    double sigma2 = 1.0;
    Matrix sigma_mat;
};

/// Checks the Theta invariants. Eigenvalues of sigma_mat in [-1e-10, 0)
/// are clamped to zero (optimizer iterates may graze the PSD boundary);
/// anything below that tolerance is an error.
Theta validate_theta(Theta theta);

/// Assignment of every group to one of k folds, numbered 0..k-1.
struct FoldPartition {
    std::unordered_map<std::string, int> assignments;
    int k = 0;
};

/// Residualized data for one group: r_x = x - m_x(w), r_y = y - m_y(w),
/// alongside the unchanged random-effects design.
struct GroupResiduals {
    std::string group_id;
    int fold = -1;
    Matrix r_x;
    Vector r_y;
    Matrix z;

    Index rows() const { return r_y.size(); }
};

struct ResidualSet {
    std::vector<GroupResiduals> groups;
    Index d = 0;
    Index q = 0;
    Index n_total = 0;
};

} // namespace dmlme
