#include "dmlme/types.hpp"

#include "dmlme/errors.hpp"

#include <cmath>
#include <unordered_set>

namespace dmlme {

namespace {

void check_finite(const std::string& group_id, const char* field,
                  const Eigen::Ref<const Matrix>& m) {
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            if (!std::isfinite(m(i, j))) {
                throw DataError("group '" + group_id + "': non-finite value in " + field +
                                " at row " + std::to_string(i) + ", column " + std::to_string(j));
            }
        }
    }
}

} // namespace

GroupedDataset validate_dataset(GroupedDataset dataset) {
    if (dataset.groups.empty()) {
        throw DataError("dataset contains no groups");
    }
    if (dataset.groups.size() < 2) {
        throw DataError("dataset must contain at least 2 groups for sample splitting, got 1");
    }

    const Index d = dataset.groups.front().x.cols();
    const Index v = dataset.groups.front().w.cols();
    const Index q = dataset.groups.front().z.cols();
    if (d < 1) throw DataError("x must have at least one column");
    if (v < 1) throw DataError("w must have at least one column");
    if (q < 1) throw DataError("z must have at least one column");

    std::unordered_set<std::string> seen_ids;
    Index n_total = 0;
    Index n_max = 0;
    for (const Group& g : dataset.groups) {
        const Index n = g.rows();
        if (n < 1) {
            throw DataError("group '" + g.id + "': empty group (n_i must be >= 1)");
        }
        if (g.x.rows() != n || g.w.rows() != n || g.z.rows() != n) {
            throw DataError("group '" + g.id + "': row count mismatch (y has " +
                            std::to_string(n) + " rows, x has " + std::to_string(g.x.rows()) +
                            ", w has " + std::to_string(g.w.rows()) + ", z has " +
                            std::to_string(g.z.rows()) + ")");
        }
        if (g.x.cols() != d || g.w.cols() != v || g.z.cols() != q) {
            throw DataError("group '" + g.id + "': column dimensions (" +
                            std::to_string(g.x.cols()) + ", " + std::to_string(g.w.cols()) + ", " +
                            std::to_string(g.z.cols()) + ") differ from the dataset's (" +
                            std::to_string(d) + ", " + std::to_string(v) + ", " +
                            std::to_string(q) + ")");
        }
        check_finite(g.id, "y", g.y);
        check_finite(g.id, "x", g.x);
        check_finite(g.id, "w", g.w);
        check_finite(g.id, "z", g.z);
        if (!seen_ids.insert(g.id).second) {
            throw DataError("duplicate group id '" + g.id + "'");
        }
        n_total += n;
        n_max = std::max(n_max, n);
    }

    dataset.d = d;
    dataset.v = v;
    dataset.q = q;
    dataset.n_total = n_total;
    dataset.n_max = n_max;
    return dataset;
}

Theta validate_theta(Theta theta) {
    for (Index i = 0; i < theta.beta.size(); ++i) {
        if (!std::isfinite(theta.beta(i))) throw DataError("theta: non-finite beta");
    }
    if (!(theta.sigma2 > 0.0) || !std::isfinite(theta.sigma2)) {
        throw DataError("theta: sigma2 must be a positive finite real");
    }
    const Index q = theta.sigma_mat.rows();
    if (theta.sigma_mat.cols() != q) {
        throw DataError("theta: sigma_mat must be square");
    }
    if (q > 0) {
        const double asym = (theta.sigma_mat - theta.sigma_mat.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12) {
            throw DataError("theta: sigma_mat asymmetric beyond tolerance");
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(theta.sigma_mat);
        const Vector& values = eig.eigenvalues();
        if (values.minCoeff() < -1e-10) {
            throw DataError("theta: sigma_mat has eigenvalue " + std::to_string(values.minCoeff()) +
                            " below the PSD tolerance");
        }
        if (values.minCoeff() < 0.0) {
            // Clamp boundary-grazing eigenvalues to zero.
            Vector clamped = values.cwiseMax(0.0);
            theta.sigma_mat =
                eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
            theta.sigma_mat = 0.5 * (theta.sigma_mat + theta.sigma_mat.transpose()).eval();
        }
    }
    return theta;
}

} // namespace dmlme
