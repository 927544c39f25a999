#include "tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>

#include "estimator.hpp"
#include "propspec/error.hpp"

namespace propspec::detail {
namespace {

constexpr double kMinGain = 1e-12;

/// Running sum of absolute deviations from the median under insertions.
class MedianAccumulator {
public:
    void push(double v) {
        if (lower_.empty() || v <= lower_.top()) {
            lower_.push(v);
            lower_sum_ += v;
        } else {
            upper_.push(v);
            upper_sum_ += v;
        }
        if (lower_.size() > upper_.size() + 1) {
            const double t = lower_.top();
            lower_.pop();
            lower_sum_ -= t;
            upper_.push(t);
            upper_sum_ += t;
        } else if (upper_.size() > lower_.size()) {
            const double t = upper_.top();
            upper_.pop();
            upper_sum_ -= t;
            lower_.push(t);
            lower_sum_ += t;
        }
    }

    double abs_deviation() const {
        if (lower_.empty()) return 0.0;
        const double m = lower_.top();
        return (m * static_cast<double>(lower_.size()) - lower_sum_) +
               (upper_sum_ - m * static_cast<double>(upper_.size()));
    }

private:
    std::priority_queue<double> lower_;
    std::priority_queue<double, std::vector<double>, std::greater<>> upper_;
    double lower_sum_ = 0.0;
    double upper_sum_ = 0.0;
};

double weighted_median(std::vector<std::pair<double, double>> vw) {
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& p : vw) total += p.second;
    double acc = 0.0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= 0.5 * total) return p.first;
    }
    return vw.empty() ? 0.0 : vw.back().first;
}

double class_impurity(std::span<const double> counts, double total, SplitCriterion c) {
    if (total <= 0.0) return 0.0;
    double out = c == SplitCriterion::Gini ? 1.0 : 0.0;
    for (double n : counts) {
        if (n <= 0.0) continue;
        const double p = n / total;
        if (c == SplitCriterion::Gini)
            out -= p * p;
        else
            out -= p * std::log2(p);
    }
    return out;
}

} // namespace

SplitCriterion parse_criterion(std::string_view text) {
    if (text == "gini") return SplitCriterion::Gini;
    if (text == "entropy") return SplitCriterion::Entropy;
    if (text == "squared_error") return SplitCriterion::SquaredError;
    if (text == "absolute_error") return SplitCriterion::AbsoluteError;
    throw InvalidArgument("unknown split criterion '" + std::string(text) + "'");
}

int Tree::add_node(std::span<const double> value) {
    feature_.push_back(-1);
    threshold_.push_back(0.0);
    left_.push_back(-1);
    right_.push_back(-1);
    value_.insert(value_.end(), value.begin(), value.end());
    return node_count() - 1;
}

int Tree::apply(const double* row) const {
    int node = 0;
    while (left_[static_cast<std::size_t>(node)] >= 0) {
        const auto n = static_cast<std::size_t>(node);
        node = row[feature_[n]] <= threshold_[n] ? left_[n] : right_[n];
    }
    return node;
}

std::span<const double> Tree::leaf_value(int node) const {
    return {value_.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(outputs_),
            static_cast<std::size_t>(outputs_)};
}

void Tree::set_leaf_value(int node, std::span<const double> value) {
    std::copy(value.begin(), value.end(), value_.begin() + static_cast<std::ptrdiff_t>(node) * outputs_);
}

nlohmann::json Tree::to_json() const {
    return {{"outputs", outputs_}, {"feature", feature_}, {"threshold", threshold_},
            {"left", left_},       {"right", right_},     {"value", value_}};
}

Tree Tree::from_json(const nlohmann::json& doc) {
    Tree t;
    t.outputs_ = doc.at("outputs").get<int>();
    t.feature_ = doc.at("feature").get<std::vector<int>>();
    t.threshold_ = doc.at("threshold").get<std::vector<double>>();
    t.left_ = doc.at("left").get<std::vector<int>>();
    t.right_ = doc.at("right").get<std::vector<int>>();
    t.value_ = doc.at("value").get<std::vector<double>>();
    const std::size_t n = t.feature_.size();
    if (n == 0 || t.threshold_.size() != n || t.left_.size() != n || t.right_.size() != n ||
        t.value_.size() != n * static_cast<std::size_t>(t.outputs_))
        throw ParseError("inconsistent tree node arrays");
    for (std::size_t i = 0; i < n; ++i)
        if (t.left_[i] >= static_cast<int>(n) || t.right_[i] >= static_cast<int>(n))
            throw ParseError("tree child index out of range");
    return t;
}

ColumnOrder::ColumnOrder(const Matrix& X) : rows_(static_cast<std::size_t>(X.rows())), idx_(rows_ * static_cast<std::size_t>(X.cols())) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        auto* col = idx_.data() + static_cast<std::size_t>(j) * rows_;
        std::iota(col, col + rows_, std::uint32_t{0});
        std::sort(col, col + rows_, [&](std::uint32_t a, std::uint32_t b) {
            const double xa = X(a, j), xb = X(b, j);
            return xa < xb || (xa == xb && a < b);
        });
    }
}

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> y, std::span<const double> w, int num_classes,
                const TreeParams& params, Rng& rng, const ColumnOrder* order)
        : X_(X), y_(y), w_(w), k_(num_classes), params_(params), rng_(rng), presorted_(order),
          node_of_(y.size(), -1) {
        tree_.outputs_ = k_ > 0 ? k_ : 1;
        features_.resize(static_cast<std::size_t>(X.cols()));
        std::iota(features_.begin(), features_.end(), 0);
    }

    Tree build() {
        std::vector<std::size_t> samples;
        for (std::size_t i = 0; i < y_.size(); ++i)
            if (w_[i] > 0.0) samples.push_back(i);
        if (samples.empty()) throw DegenerateData("tree needs at least one weighted sample");

        struct Task {
            std::vector<std::size_t> samples;
            int node;
            int depth;
        };
        std::vector<Task> stack;
        const std::vector<double> placeholder(static_cast<std::size_t>(tree_.outputs_), 0.0);
        stack.push_back({std::move(samples), tree_.add_node(placeholder), 0});
        while (!stack.empty()) {
            Task task = std::move(stack.back());
            stack.pop_back();
            const auto value = node_value(task.samples);
            tree_.set_leaf_value(task.node, value);

            const bool depth_ok = params_.max_depth <= 0 || task.depth < params_.max_depth;
            if (!depth_ok || static_cast<int>(task.samples.size()) < params_.min_samples_split) continue;
            for (std::size_t i : task.samples) node_of_[i] = task.node;
            const Split split = best_split(task.samples, task.node);
            if (split.feature < 0) continue;

            std::vector<std::size_t> left, right;
            for (std::size_t i : task.samples)
                (X_(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? left : right).push_back(i);
            const auto n = static_cast<std::size_t>(task.node);
            tree_.feature_[n] = split.feature;
            tree_.threshold_[n] = split.threshold;
            const int l = tree_.add_node(value);
            const int r = tree_.add_node(value);
            tree_.left_[n] = l;
            tree_.right_[n] = r;
            // right first so the left subtree is expanded next
            stack.push_back({std::move(right), r, task.depth + 1});
            stack.push_back({std::move(left), l, task.depth + 1});
        }
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = kMinGain;
    };

    std::vector<double> node_value(const std::vector<std::size_t>& samples) const {
        if (k_ > 0) {
            std::vector<double> counts(static_cast<std::size_t>(k_), 0.0);
            double total = 0.0;
            for (std::size_t i : samples) {
                counts[static_cast<std::size_t>(y_[i])] += w_[i];
                total += w_[i];
            }
            if (total > 0.0)
                for (double& c : counts) c /= total;
            return counts;
        }
        if (samples.empty()) return {0.0};
        if (params_.criterion == SplitCriterion::AbsoluteError) {
            std::vector<std::pair<double, double>> vw;
            for (std::size_t i : samples) vw.emplace_back(y_[i], w_[i]);
            return {weighted_median(std::move(vw))};
        }
        double sw = 0.0, swy = 0.0;
        for (std::size_t i : samples) {
            sw += w_[i];
            swy += w_[i] * y_[i];
        }
        return {sw > 0.0 ? swy / sw : 0.0};
    }

    std::span<const int> candidate_features() {
        const int d = static_cast<int>(features_.size());
        const int m = params_.max_features > 0 ? std::min(params_.max_features, d) : d;
        if (m < d) {
            for (int i = 0; i < m; ++i) {
                const auto j = static_cast<std::size_t>(i) + rng_.index(static_cast<std::uint64_t>(d - i));
                std::swap(features_[static_cast<std::size_t>(i)], features_[j]);
            }
        }
        return {features_.data(), static_cast<std::size_t>(m)};
    }

    /// Node rows sorted by (x_f, row). Small nodes sort locally; large ones
    /// filter the presorted column.
    void sorted_by_feature(const std::vector<std::size_t>& samples, int node, int f,
                           std::vector<std::pair<double, std::size_t>>& order) const {
        const std::size_t n = samples.size();
        const auto fi = static_cast<Eigen::Index>(f);
        if (presorted_ != nullptr && n * 8 > y_.size()) {
            std::size_t j = 0;
            for (std::uint32_t i : presorted_->column(fi))
                if (node_of_[i] == node) order[j++] = {X_(static_cast<Eigen::Index>(i), fi), i};
            return;
        }
        for (std::size_t j = 0; j < n; ++j) order[j] = {X_(static_cast<Eigen::Index>(samples[j]), fi), samples[j]};
        std::sort(order.begin(), order.end());
    }

    Split best_split(const std::vector<std::size_t>& samples, int node) {
        Split best;
        const std::size_t n = samples.size();
        const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
        if (n < 2 * min_leaf) return best;

        // node-level totals
        std::vector<double> total_counts(static_cast<std::size_t>(std::max(k_, 1)), 0.0);
        double total_w = 0.0, total_wy = 0.0, total_wyy = 0.0;
        for (std::size_t i : samples) {
            total_w += w_[i];
            if (k_ > 0) {
                total_counts[static_cast<std::size_t>(y_[i])] += w_[i];
            } else {
                total_wy += w_[i] * y_[i];
                total_wyy += w_[i] * y_[i] * y_[i];
            }
        }
        double parent = 0.0;
        if (k_ > 0) {
            parent = total_w * class_impurity(total_counts, total_w, params_.criterion);
        } else if (params_.criterion == SplitCriterion::AbsoluteError) {
            parent = abs_deviation_prefix(samples).back();
        } else {
            parent = total_wyy - total_wy * total_wy / total_w;
        }
        if (parent <= kMinGain) return best;

        std::vector<std::pair<double, std::size_t>> order(n);
        std::vector<double> left_counts(total_counts.size());
        for (int f : candidate_features()) {
            sorted_by_feature(samples, node, f, order);
            if (order.front().first == order.back().first) continue;

            std::vector<double> prefix, suffix;
            if (k_ == 0 && params_.criterion == SplitCriterion::AbsoluteError) {
                std::vector<std::size_t> idx(n);
                for (std::size_t j = 0; j < n; ++j) idx[j] = order[j].second;
                prefix = abs_deviation_prefix(idx);
                std::reverse(idx.begin(), idx.end());
                suffix = abs_deviation_prefix(idx);
            }

            std::fill(left_counts.begin(), left_counts.end(), 0.0);
            double lw = 0.0, lwy = 0.0, lwyy = 0.0;
            for (std::size_t j = 0; j + 1 < n; ++j) {
                const std::size_t i = order[j].second;
                lw += w_[i];
                if (k_ > 0) {
                    left_counts[static_cast<std::size_t>(y_[i])] += w_[i];
                } else {
                    lwy += w_[i] * y_[i];
                    lwyy += w_[i] * y_[i] * y_[i];
                }
                const std::size_t left_n = j + 1;
                if (left_n < min_leaf || n - left_n < min_leaf) continue;
                if (order[j].first == order[j + 1].first) continue;

                double child = 0.0;
                const double rw = total_w - lw;
                if (k_ > 0) {
                    std::vector<double>& rc = right_counts_;
                    rc.resize(total_counts.size());
                    for (std::size_t c = 0; c < rc.size(); ++c) rc[c] = total_counts[c] - left_counts[c];
                    child = lw * class_impurity(left_counts, lw, params_.criterion) +
                            rw * class_impurity(rc, rw, params_.criterion);
                } else if (params_.criterion == SplitCriterion::AbsoluteError) {
                    child = prefix[j] + suffix[n - 2 - j];
                } else {
                    const double rwy = total_wy - lwy;
                    const double rwyy = total_wyy - lwyy;
                    child = (lwyy - lwy * lwy / lw) + (rwyy - rwy * rwy / rw);
                }
                const double gain = parent - child;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = f;
                    // midpoint, but never equal to the upper value
                    double t = 0.5 * (order[j].first + order[j + 1].first);
                    if (!(t < order[j + 1].first)) t = order[j].first;
                    best.threshold = t;
                }
            }
        }
        return best;
    }

    /// prefix[j] = weighted absolute deviation from the median of idx[0..j].
    /// Weights are treated as integer multiplicities.
    std::vector<double> abs_deviation_prefix(const std::vector<std::size_t>& idx) const {
        MedianAccumulator acc;
        std::vector<double> out(idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto reps = std::max<long>(1, std::lround(w_[idx[j]]));
            for (long r = 0; r < reps; ++r) acc.push(y_[idx[j]]);
            out[j] = acc.abs_deviation();
        }
        return out;
    }

    const Matrix& X_;
    std::span<const double> y_;
    std::span<const double> w_;
    int k_;
    TreeParams params_;
    Rng& rng_;
    const ColumnOrder* presorted_;
    std::vector<int> node_of_;
    Tree tree_;
    std::vector<int> features_;
    std::vector<double> right_counts_;
};

Tree build_tree(const Matrix& X, std::span<const double> y, std::span<const double> weights, int num_classes,
                const TreeParams& params, Rng& rng, const ColumnOrder* order) {
    if (static_cast<std::size_t>(X.rows()) != y.size() || y.size() != weights.size())
        throw InvalidArgument("tree inputs have mismatched lengths");
    return TreeBuilder(X, y, weights, num_classes, params, rng, order).build();
}

} // namespace propspec::detail
