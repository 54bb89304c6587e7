#include "dmlme/forest.hpp"

#include "dmlme/errors.hpp"
#include "dmlme/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace dmlme {

namespace {

struct NodeRange {
    int node;
    int begin;
    int end;
};

} // namespace

RandomForest::Tree RandomForest::fit_tree(const Eigen::Ref<const Matrix>& features,
                                          const Eigen::Ref<const Vector>& targets,
                                          const ForestParams& params, Rng rng) {
    const int m_all = static_cast<int>(targets.size());
    const int v = static_cast<int>(features.cols());
    const int min_node = std::max(1, params.min_node_size);
    const int mtry = std::clamp(params.mtry, 1, v);

    // Bootstrap sample of row indices.
    std::vector<int> idx(m_all);
    for (int i = 0; i < m_all; ++i) {
        idx[i] = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(m_all)));
    }

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<NodeRange> stack{{0, 0, m_all}};

    std::vector<int> feature_pool(v);
    std::vector<std::pair<double, double>> sorted; // (feature value, target)
    sorted.reserve(m_all);

    while (!stack.empty()) {
        const NodeRange range = stack.back();
        stack.pop_back();
        const int m = range.end - range.begin;

        double sum = 0.0, sumsq = 0.0;
        for (int i = range.begin; i < range.end; ++i) {
            const double t = targets(idx[i]);
            sum += t;
            sumsq += t * t;
        }
        Node& node = tree.nodes[range.node];
        node.value = sum / m;
        const double sse_parent = std::max(0.0, sumsq - sum * sum / m);
        // randomForest-style stopping: nodes of size <= min_node are terminal,
        // but an eligible node may produce children smaller than min_node.
        if (m <= min_node || sse_parent <= 0.0) {
            continue; // leaf
        }

        // Candidate features: mtry drawn without replacement, evaluated in
        // ascending index order so ties resolve to the lowest feature.
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
        if (mtry < v) {
            for (int j = 0; j < mtry; ++j) {
                const int pick = j + static_cast<int>(rng.uniform_below(
                                         static_cast<std::uint64_t>(v - j)));
                std::swap(feature_pool[j], feature_pool[pick]);
            }
            std::sort(feature_pool.begin(), feature_pool.begin() + mtry);
        }

        double best_gain = 0.0;
        int best_feature = -1;
        double best_threshold = 0.0;

        for (int c = 0; c < mtry; ++c) {
            const int f = feature_pool[c];
            sorted.clear();
            for (int i = range.begin; i < range.end; ++i) {
                sorted.emplace_back(features(idx[i], f), targets(idx[i]));
            }
            std::sort(sorted.begin(), sorted.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double sum_left = 0.0, sumsq_left = 0.0;
            for (int i = 1; i <= m - 1; ++i) {
                const double t = sorted[i - 1].second;
                sum_left += t;
                sumsq_left += t * t;
                const double lo = sorted[i - 1].first;
                const double hi = sorted[i].first;
                if (!(lo < hi)) continue; // split only between distinct values
                const double n_left = i;
                const double n_right = m - i;
                const double sse_left = sumsq_left - sum_left * sum_left / n_left;
                const double sum_right = sum - sum_left;
                const double sse_right = (sumsq - sumsq_left) - sum_right * sum_right / n_right;
                const double gain = sse_parent - std::max(0.0, sse_left) - std::max(0.0, sse_right);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    // Midpoint; fall back to the left value if rounding would
                    // push the threshold onto the right one.
                    double threshold = lo + 0.5 * (hi - lo);
                    if (!(threshold < hi)) threshold = lo;
                    best_threshold = threshold;
                }
            }
        }

        if (best_feature < 0) {
            continue; // no admissible split
        }

        auto* middle = std::partition(idx.data() + range.begin, idx.data() + range.end,
                                      [&](int row) {
                                          return features(row, best_feature) <= best_threshold;
                                      });
        const int split = static_cast<int>(middle - idx.data());

        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        const Node& placed = tree.nodes[range.node];
        stack.push_back({placed.right, split, range.end});
        stack.push_back({placed.left, range.begin, split});
    }

    return tree;
}

RandomForest::RandomForest(const Eigen::Ref<const Matrix>& features,
                           const Eigen::Ref<const Vector>& targets,
                           const ForestParams& params, std::uint64_t seed) {
    if (features.rows() != targets.size()) {
        throw DataError("random forest: feature rows and target length differ");
    }
    if (params.num_trees < 1) {
        throw DataError("random forest: num_trees must be >= 1");
    }
    const Rng base(seed);
    trees_.resize(params.num_trees);
    parallel_for(static_cast<std::size_t>(params.num_trees), [&](std::size_t t) {
        trees_[t] = fit_tree(features, targets, params, base.child(t));
    });
}

double RandomForest::predict(const Eigen::Ref<const Vector>& w) const {
    double total = 0.0;
    for (const Tree& tree : trees_) {
        int at = 0;
        while (tree.nodes[at].feature >= 0) {
            const Node& n = tree.nodes[at];
            at = (w(n.feature) <= n.threshold) ? n.left : n.right;
        }
        total += tree.nodes[at].value;
    }
    return total / static_cast<double>(trees_.size());
}

} // namespace dmlme
