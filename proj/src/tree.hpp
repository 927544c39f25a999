#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "propspec/matrix.hpp"
#include "propspec/random.hpp"

namespace propspec::detail {

enum class SplitCriterion { Gini, Entropy, SquaredError, AbsoluteError };

SplitCriterion parse_criterion(std::string_view text);

struct TreeParams {
    SplitCriterion criterion = SplitCriterion::Gini;
    int max_depth = 0;          ///< 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;       ///< 0 = all features
};

/// Binary CART tree stored as parallel node arrays. Leaves hold either a
/// class-probability vector (classification) or a single value.
class Tree {
public:
    int node_count() const noexcept { return static_cast<int>(feature_.size()); }
    int outputs() const noexcept { return outputs_; }

    int apply(const double* row) const;
    std::span<const double> leaf_value(int node) const;
    void set_leaf_value(int node, std::span<const double> value);
    bool is_leaf(int node) const { return left_[static_cast<std::size_t>(node)] < 0; }

    nlohmann::json to_json() const;
    static Tree from_json(const nlohmann::json& doc);

private:
    friend class TreeBuilder;
    int add_node(std::span<const double> value);

    int outputs_ = 1;
    std::vector<int> feature_;
    std::vector<double> threshold_;
    std::vector<int> left_;
    std::vector<int> right_;
    std::vector<double> value_;  // node_count * outputs_
};

/// Row indices of X sorted by each column, ties by row index. Computing it
/// once lets repeated fits on the same matrix skip per-node sorting.
class ColumnOrder {
public:
    explicit ColumnOrder(const Matrix& X);
    std::span<const std::uint32_t> column(Eigen::Index j) const {
        return {idx_.data() + static_cast<std::size_t>(j) * rows_, rows_};
    }

private:
    std::size_t rows_;
    std::vector<std::uint32_t> idx_;
};

/// Builds a tree on the rows of X with non-zero weight. `num_classes` == 0
/// selects regression on y; otherwise y holds class ids.
Tree build_tree(const Matrix& X, std::span<const double> y, std::span<const double> weights, int num_classes,
                const TreeParams& params, Rng& rng, const ColumnOrder* order = nullptr);

} // namespace propspec::detail
