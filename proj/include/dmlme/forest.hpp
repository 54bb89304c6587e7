#pragma once

#include "dmlme/rng.hpp"
#include "dmlme/types.hpp"

#include <cstdint>
#include <vector>

namespace dmlme {

/// Single-output regression function fitted on rows of a feature matrix.
class Regressor {
public:
    virtual ~Regressor() = default;
    virtual double predict(const Eigen::Ref<const Vector>& w) const = 0;
};

struct ForestParams {
    int num_trees = 500;
    int min_node_size = 5;
    int mtry = 1;
};

/// Random forest of CART regression trees: variance-reduction splits,
/// bootstrap resampling of rows, mtry features per node, no depth cap.
/// Nodes of size <= min_node_size are terminal; an eligible node may split
/// into children smaller than min_node_size (randomForest semantics).
/// Split ties break toward the lowest feature index, then the lowest
/// threshold, so a fitted forest is a pure function of (data, seed).
class RandomForest final : public Regressor {
public:
    RandomForest(const Eigen::Ref<const Matrix>& features,
                 const Eigen::Ref<const Vector>& targets,
                 const ForestParams& params, std::uint64_t seed);

    double predict(const Eigen::Ref<const Vector>& w) const override;

private:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    struct Tree {
        std::vector<Node> nodes;
    };

    static Tree fit_tree(const Eigen::Ref<const Matrix>& features,
                         const Eigen::Ref<const Vector>& targets,
                         const ForestParams& params, Rng rng);

    std::vector<Tree> trees_;
};

} // namespace dmlme
