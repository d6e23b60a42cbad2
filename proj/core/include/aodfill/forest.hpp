#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aodfill/features.hpp"
#include "aodfill/matrix.hpp"

namespace aodfill {

/// Number of candidate features per split: a fixed count, a fraction of p
/// (resolved as max(1, floor(fraction * p))), or floor(sqrt(p)).
struct MaxFeatures {
    enum class Kind { Count, Fraction, Sqrt };
    Kind kind = Kind::Fraction;
    double value = 1.0;

    static MaxFeatures count(int c) { return {Kind::Count, static_cast<double>(c)}; }
    static MaxFeatures fraction(double f) { return {Kind::Fraction, f}; }
    static MaxFeatures sqrt() { return {Kind::Sqrt, 0.0}; }

    int resolve(int p) const;
    void validate() const; // throws std::invalid_argument

    friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

struct Hyperparams {
    int n_trees = 100;
    std::optional<int> max_depth;  // nullopt = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    MaxFeatures max_features = MaxFeatures::fraction(1.0);
    bool bootstrap = true;
    /// Draw the feature subset once per tree instead of once per split.
    bool subspace_per_tree = false;

    void validate() const; // throws std::invalid_argument

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

/// Regression tree stored as a flat preorder node array; nodes_[0] is the
/// root and children always have larger indices than their parent.
class Tree {
public:
    struct Node {
        std::int32_t feature = -1; // < 0 marks a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0;        // leaf: mean of training targets
        std::int64_t n_samples = 0;

        bool is_leaf() const { return feature < 0; }
        friend bool operator==(const Node&, const Node&) = default;
    };

    Tree() = default;
    static Tree from_nodes(std::vector<Node> nodes); // validates indices

    const std::vector<Node>& nodes() const { return nodes_; }
    bool empty() const { return nodes_.empty(); }

    /// Routes x to a leaf: left iff x[feature] <= threshold.
    double predict_row(std::span<const double> x) const;

    friend bool operator==(const Tree& a, const Tree& b) {
        return a.nodes_ == b.nodes_;
    }

private:
    std::vector<Node> nodes_;
};

struct RandomForestModel {
    std::vector<Tree> trees;
    Hyperparams params;
    FeatureSchema schema;
    std::vector<double> importances; // impurity-decrease share per feature
    std::uint64_t seed = 0;
    std::string target_tag;
};

/// The seed tree t receives inside fit_forest.
std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree_index);

/// Grows one CART regression tree. Splits minimize the summed child SSE
/// over candidate thresholds (midpoints between consecutive distinct
/// sorted values); ties break to the lower feature index, then the lower
/// threshold. A node becomes a leaf at max_depth, below min_samples_split,
/// when the targets are constant, or when no legal split strictly reduces
/// the SSE. Candidate features are drawn without replacement from the
/// node's RNG stream.
Tree fit_tree(const Matrix& X, std::span<const double> y,
              const Hyperparams& params, std::uint64_t rng_seed);

/// Bagged ensemble. Tree t draws its own seed from (seed, t) via a
/// splitmix64 mix, so training is bit-reproducible for any thread count.
/// Importances accumulate each split's SSE decrease onto its feature,
/// summed over all trees and normalized to 1 (all zero when no split
/// exists anywhere). An empty schema is replaced by f0..f{p-1}.
RandomForestModel fit_forest(const Matrix& X, std::span<const double> y,
                             const Hyperparams& params, std::uint64_t seed,
                             FeatureSchema schema = {},
                             std::string target_tag = {}, int threads = 0);

/// Per row, the arithmetic mean of the tree outputs, summed in tree order.
std::vector<double> predict(const RandomForestModel& model, const Matrix& X,
                            int threads = 0);

/// Hyperparameter ranges for the random search. n_trees and max_depth are
/// drawn log-uniformly; when unlimited depth is allowed it is drawn with
/// probability 1/8 before the bounded draw. The remaining integer knobs
/// are uniform; max_features is a uniform choice from the listed options.
struct SearchSpace {
    int n_trees_min = 50;
    int n_trees_max = 500;
    int max_depth_min = 4;
    int max_depth_max = 32;
    bool allow_unlimited_depth = true;
    int min_samples_split_min = 2;
    int min_samples_split_max = 20;
    int min_samples_leaf_min = 1;
    int min_samples_leaf_max = 10;
    std::vector<MaxFeatures> max_features_choices = {
        MaxFeatures::sqrt(), MaxFeatures::fraction(0.33),
        MaxFeatures::fraction(1.0)};

    void validate() const;
};

struct ScoredCandidate {
    Hyperparams params;
    double cv_score = 0.0; // mean R^2 over the folds
};

struct SearchResult {
    Hyperparams best;
    double cv_score = 0.0;
    std::size_t best_index = 0;
    std::vector<ScoredCandidate> candidates; // in draw order
};

/// Draws n_iter candidates, scores each by mean R^2 over a k-fold random
/// CV whose folds are fixed across candidates (derived from seed), and
/// returns the maximizer; ties keep the first drawn.
SearchResult random_search(const Matrix& X, std::span<const double> y,
                           const SearchSpace& space, int n_iter, int k,
                           std::uint64_t seed, int threads = 0);

/// JSON persistence; save -> load -> predict round-trips bit-exactly.
void save_model_json(const RandomForestModel& model,
                     const std::filesystem::path& path);
RandomForestModel load_model_json(const std::filesystem::path& path);

} // namespace aodfill
