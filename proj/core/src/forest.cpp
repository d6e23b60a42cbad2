#include "aodfill/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "aodfill/parallel.hpp"
#include "aodfill/rng.hpp"

namespace aodfill {

namespace {

// Substream labels for derive_seed; fixed so trained models are stable.
constexpr std::uint64_t kTreeStream = 1;
constexpr std::uint64_t kSearchDrawStream = 2;
constexpr std::uint64_t kSearchFoldStream = 3;
constexpr std::uint64_t kSearchFitStream = 4;
constexpr std::uint64_t kSearchFitFoldStream = 5;

struct NodeStats {
    double sum = 0.0;
    double sumsq = 0.0;
    double sse = 0.0;
    double mean = 0.0;
    bool constant = false;
};

// Target statistics summed over the ascending-sorted values, so they do
// not depend on the caller's row order.
NodeStats node_stats(std::vector<double>& scratch) {
    std::sort(scratch.begin(), scratch.end());
    NodeStats s;
    for (const double v : scratch) {
        s.sum += v;
        s.sumsq += v * v;
    }
    const double n = static_cast<double>(scratch.size());
    s.mean = s.sum / n;
    s.sse = s.sumsq - s.sum * s.sum / n;
    s.constant = scratch.front() == scratch.back();
    return s;
}

struct BestSplit {
    double sse = std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
    bool found = false;
};

bool split_beats(double sse, int feature, double threshold, const BestSplit& best) {
    if (sse != best.sse) return sse < best.sse;
    if (feature != best.feature) return feature < best.feature;
    return threshold < best.threshold;
}

std::vector<int> sample_features_without_replacement(int p, int k, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const std::size_t j =
            static_cast<std::size_t>(i) +
            rng.uniform_index(static_cast<std::size_t>(p - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> y,
                const Hyperparams& params, Rng& rng, std::vector<double>* gains)
        : X_(X), y_(y), params_(params), rng_(rng), gains_(gains),
          max_feats_(params.max_features.resolve(static_cast<int>(X.n_cols()))) {
        if (params_.subspace_per_tree)
            tree_features_ = sample_features_without_replacement(
                static_cast<int>(X_.n_cols()), max_feats_, rng_);
    }

    Tree build(std::vector<std::size_t> rows) {
        std::vector<Tree::Node> nodes;
        nodes.reserve(2 * rows.size());
        nodes_ = &nodes;
        build_node(rows, 0);
        nodes_ = nullptr;
        return Tree::from_nodes(std::move(nodes));
    }

private:
    std::int32_t build_node(std::vector<std::size_t>& rows, int depth) {
        std::vector<double> targets;
        targets.reserve(rows.size());
        for (const std::size_t r : rows) targets.push_back(y_[r]);
        const NodeStats stats = node_stats(targets);

        const auto index = static_cast<std::int32_t>(nodes_->size());
        nodes_->emplace_back();

        const bool depth_capped =
            params_.max_depth.has_value() && depth >= *params_.max_depth;
        BestSplit best;
        if (!depth_capped && !stats.constant &&
            rows.size() >= static_cast<std::size_t>(params_.min_samples_split)) {
            const std::vector<int> features =
                params_.subspace_per_tree
                    ? tree_features_
                    : sample_features_without_replacement(
                          static_cast<int>(X_.n_cols()), max_feats_, rng_);
            for (const int f : features) scan_feature(f, rows, best);
        }

        if (!best.found || !(best.sse < stats.sse)) {
            Tree::Node& leaf = (*nodes_)[static_cast<std::size_t>(index)];
            leaf.feature = -1;
            leaf.value = stats.mean;
            leaf.n_samples = static_cast<std::int64_t>(rows.size());
            return index;
        }

        if (gains_)
            (*gains_)[static_cast<std::size_t>(best.feature)] += stats.sse - best.sse;

        std::vector<std::size_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (const std::size_t r : rows) {
            if (X_(r, static_cast<std::size_t>(best.feature)) <= best.threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        {
            Tree::Node& node = (*nodes_)[static_cast<std::size_t>(index)];
            node.feature = best.feature;
            node.threshold = best.threshold;
        }
        const std::int32_t left = build_node(left_rows, depth + 1);
        (*nodes_)[static_cast<std::size_t>(index)].left = left;
        const std::int32_t right = build_node(right_rows, depth + 1);
        (*nodes_)[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    // Prefix-sum scan over the rows sorted by (feature value, target).
    // The target tie-break makes every partial sum a function of the
    // node's multiset only, so permuting training rows cannot change the
    // chosen split.
    void scan_feature(int f, const std::vector<std::size_t>& rows, BestSplit& best) {
        auto& vy = scan_scratch_;
        vy.clear();
        vy.reserve(rows.size());
        for (const std::size_t r : rows)
            vy.emplace_back(X_(r, static_cast<std::size_t>(f)), y_[r]);
        std::sort(vy.begin(), vy.end());

        const std::size_t n = vy.size();
        double total_sum = 0.0, total_sumsq = 0.0;
        for (const auto& [v, t] : vy) {
            total_sum += t;
            total_sumsq += t * t;
        }

        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        double left_sum = 0.0, left_sumsq = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += vy[i].second;
            left_sumsq += vy[i].second * vy[i].second;
            if (vy[i].first == vy[i + 1].first) continue; // not a boundary
            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;
            const double right_sum = total_sum - left_sum;
            const double right_sumsq = total_sumsq - left_sumsq;
            const double sse =
                (left_sumsq - left_sum * left_sum / static_cast<double>(n_left)) +
                (right_sumsq - right_sum * right_sum / static_cast<double>(n_right));
            const double threshold = std::midpoint(vy[i].first, vy[i + 1].first);
            if (!best.found || split_beats(sse, f, threshold, best)) {
                best.sse = sse;
                best.feature = f;
                best.threshold = threshold;
                best.found = true;
            }
        }
    }

    const Matrix& X_;
    std::span<const double> y_;
    const Hyperparams& params_;
    Rng& rng_;
    std::vector<double>* gains_;
    int max_feats_;
    std::vector<int> tree_features_;
    std::vector<Tree::Node>* nodes_ = nullptr;
    std::vector<std::pair<double, double>> scan_scratch_;
};

Tree fit_tree_on_rows(const Matrix& X, std::span<const double> y,
                      const Hyperparams& params, Rng& rng,
                      std::vector<std::size_t> rows, std::vector<double>* gains) {
    TreeBuilder builder(X, y, params, rng, gains);
    return builder.build(std::move(rows));
}

void check_training_inputs(const Matrix& X, std::span<const double> y) {
    if (X.n_rows() == 0 || X.n_cols() == 0)
        throw std::invalid_argument("empty training matrix");
    if (X.n_rows() != y.size())
        throw std::invalid_argument("target length does not match row count");
}

double log_uniform_int(Rng& rng, int lo, int hi) {
    if (hi <= lo) return lo;
    const double u = rng.uniform_real(std::log(static_cast<double>(lo)),
                                      std::log(static_cast<double>(hi) + 1.0));
    const double v = std::floor(std::exp(u));
    return std::clamp(v, static_cast<double>(lo), static_cast<double>(hi));
}

std::optional<double> r2_score(std::span<const double> pred,
                               std::span<const double> obs) {
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - obs[i];
        sse += d * d;
    }
    double mean = 0.0;
    for (const double v : obs) mean += v;
    mean /= static_cast<double>(obs.size());
    double sst = 0.0;
    for (const double v : obs) sst += (v - mean) * (v - mean);
    if (sst == 0.0) return std::nullopt;
    return 1.0 - sse / sst;
}

} // namespace

int MaxFeatures::resolve(int p) const {
    int k = p;
    switch (kind) {
        case Kind::Count:
            k = static_cast<int>(value);
            break;
        case Kind::Fraction:
            k = static_cast<int>(std::floor(value * static_cast<double>(p)));
            break;
        case Kind::Sqrt:
            k = static_cast<int>(std::floor(std::sqrt(static_cast<double>(p))));
            break;
    }
    return std::clamp(k, 1, p);
}

void MaxFeatures::validate() const {
    switch (kind) {
        case Kind::Count:
            if (value < 1.0 || value != std::floor(value))
                throw std::invalid_argument("max_features count must be an integer >= 1");
            break;
        case Kind::Fraction:
            if (!(value > 0.0) || value > 1.0)
                throw std::invalid_argument("max_features fraction must be in (0, 1]");
            break;
        case Kind::Sqrt:
            break;
    }
}

void Hyperparams::validate() const {
    if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
    if (max_depth && *max_depth < 1)
        throw std::invalid_argument("max_depth must be >= 1 or unlimited");
    if (min_samples_split < 2)
        throw std::invalid_argument("min_samples_split must be >= 2");
    if (min_samples_leaf < 1)
        throw std::invalid_argument("min_samples_leaf must be >= 1");
    max_features.validate();
}

std::uint64_t tree_seed(std::uint64_t forest_seed, std::size_t tree_index) {
    return derive_seed(forest_seed, kTreeStream, tree_index);
}

Tree Tree::from_nodes(std::vector<Node> nodes) {
    const auto size = static_cast<std::int32_t>(nodes.size());
    if (nodes.empty()) throw std::invalid_argument("tree must have at least one node");
    for (std::int32_t i = 0; i < size; ++i) {
        const Node& n = nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) continue;
        if (n.left <= i || n.left >= size || n.right <= i || n.right >= size)
            throw std::invalid_argument("tree node child index out of range");
    }
    Tree t;
    t.nodes_ = std::move(nodes);
    return t;
}

double Tree::predict_row(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const Node& n = nodes_[i];
        i = static_cast<std::size_t>(
            x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                  : n.right);
    }
    return nodes_[i].value;
}

Tree fit_tree(const Matrix& X, std::span<const double> y,
              const Hyperparams& params, std::uint64_t rng_seed) {
    params.validate();
    check_training_inputs(X, y);
    Rng rng(rng_seed);
    std::vector<std::size_t> rows(X.n_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return fit_tree_on_rows(X, y, params, rng, std::move(rows), nullptr);
}

RandomForestModel fit_forest(const Matrix& X, std::span<const double> y,
                             const Hyperparams& params, std::uint64_t seed,
                             FeatureSchema schema, std::string target_tag,
                             int threads) {
    params.validate();
    check_training_inputs(X, y);
    const std::size_t p = X.n_cols();
    if (schema.size() == 0) {
        std::vector<std::string> names;
        names.reserve(p);
        for (std::size_t i = 0; i < p; ++i) names.push_back("f" + std::to_string(i));
        schema = FeatureSchema(std::move(names));
    } else if (schema.size() != p) {
        throw std::invalid_argument("schema length does not match feature count");
    }

    const auto n_trees = static_cast<std::size_t>(params.n_trees);
    std::vector<Tree> trees(n_trees);
    std::vector<std::vector<double>> tree_gains(n_trees,
                                                std::vector<double>(p, 0.0));

    parallel_chunks(n_trees, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            Rng rng(tree_seed(seed, t));
            std::vector<std::size_t> rows(X.n_rows());
            if (params.bootstrap) {
                for (auto& r : rows) r = rng.uniform_index(X.n_rows());
            } else {
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            }
            trees[t] =
                fit_tree_on_rows(X, y, params, rng, std::move(rows), &tree_gains[t]);
        }
    });

    // Importance reduction runs in tree order regardless of the thread
    // count that produced the gains.
    std::vector<double> raw(p, 0.0);
    for (const auto& gains : tree_gains)
        for (std::size_t j = 0; j < p; ++j) raw[j] += gains[j];
    double total = 0.0;
    for (const double g : raw) total += g;
    if (total > 0.0)
        for (double& g : raw) g /= total;

    RandomForestModel model;
    model.trees = std::move(trees);
    model.params = params;
    model.schema = std::move(schema);
    model.importances = std::move(raw);
    model.seed = seed;
    model.target_tag = std::move(target_tag);
    return model;
}

std::vector<double> predict(const RandomForestModel& model, const Matrix& X,
                            int threads) {
    if (X.n_cols() != model.schema.size())
        throw std::invalid_argument("prediction matrix has " +
                                    std::to_string(X.n_cols()) +
                                    " columns, model expects " +
                                    std::to_string(model.schema.size()));
    std::vector<double> out(X.n_rows(), 0.0);
    const double n_trees = static_cast<double>(model.trees.size());
    parallel_chunks(X.n_rows(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto row = X.row(r);
            double sum = 0.0;
            for (const Tree& tree : model.trees) sum += tree.predict_row(row);
            out[r] = sum / n_trees;
        }
    });
    return out;
}

void SearchSpace::validate() const {
    if (n_trees_min < 1 || n_trees_max < n_trees_min)
        throw std::invalid_argument("bad n_trees range");
    if (max_depth_min < 1 || max_depth_max < max_depth_min)
        throw std::invalid_argument("bad max_depth range");
    if (min_samples_split_min < 2 || min_samples_split_max < min_samples_split_min)
        throw std::invalid_argument("bad min_samples_split range");
    if (min_samples_leaf_min < 1 || min_samples_leaf_max < min_samples_leaf_min)
        throw std::invalid_argument("bad min_samples_leaf range");
    if (max_features_choices.empty())
        throw std::invalid_argument("max_features_choices must not be empty");
    for (const auto& mf : max_features_choices) mf.validate();
}

SearchResult random_search(const Matrix& X, std::span<const double> y,
                           const SearchSpace& space, int n_iter, int k,
                           std::uint64_t seed, int threads) {
    space.validate();
    check_training_inputs(X, y);
    if (n_iter < 1) throw std::invalid_argument("n_iter must be >= 1");
    if (k < 2) throw std::invalid_argument("cv folds must be >= 2");
    const std::size_t n = X.n_rows();
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("fewer rows than folds");

    // All candidates are drawn up front so the fold stream is independent
    // of n_iter.
    Rng draw_rng(derive_seed(seed, kSearchDrawStream));
    std::vector<Hyperparams> candidates;
    candidates.reserve(static_cast<std::size_t>(n_iter));
    for (int i = 0; i < n_iter; ++i) {
        Hyperparams h;
        h.n_trees = static_cast<int>(
            log_uniform_int(draw_rng, space.n_trees_min, space.n_trees_max));
        if (space.allow_unlimited_depth && draw_rng.next_double() < 0.125) {
            h.max_depth.reset();
        } else {
            h.max_depth = static_cast<int>(
                log_uniform_int(draw_rng, space.max_depth_min, space.max_depth_max));
        }
        h.min_samples_split = static_cast<int>(draw_rng.uniform_int(
            space.min_samples_split_min, space.min_samples_split_max));
        h.min_samples_leaf = static_cast<int>(draw_rng.uniform_int(
            space.min_samples_leaf_min, space.min_samples_leaf_max));
        h.max_features = space.max_features_choices[draw_rng.uniform_index(
            space.max_features_choices.size())];
        candidates.push_back(h);
    }

    // Folds fixed across candidates: seeded shuffle, then round-robin.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng fold_rng(derive_seed(seed, kSearchFoldStream));
    fold_rng.shuffle(perm);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i)
        fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

    std::vector<std::vector<std::size_t>> train_rows(static_cast<std::size_t>(k)),
        test_rows(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        for (int f = 0; f < k; ++f) {
            if (fold[i] == f)
                test_rows[static_cast<std::size_t>(f)].push_back(i);
            else
                train_rows[static_cast<std::size_t>(f)].push_back(i);
        }
    }

    SearchResult result;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        double score_sum = 0.0;
        int scored_folds = 0;
        for (int f = 0; f < k; ++f) {
            const auto& tr = train_rows[static_cast<std::size_t>(f)];
            const auto& te = test_rows[static_cast<std::size_t>(f)];
            const Matrix Xtr = X.take_rows(tr);
            std::vector<double> ytr(tr.size());
            for (std::size_t i = 0; i < tr.size(); ++i) ytr[i] = y[tr[i]];
            const Matrix Xte = X.take_rows(te);
            std::vector<double> yte(te.size());
            for (std::size_t i = 0; i < te.size(); ++i) yte[i] = y[te[i]];

            const auto fit_seed = derive_seed(derive_seed(seed, kSearchFitStream, c),
                                              kSearchFitFoldStream,
                                              static_cast<std::uint64_t>(f));
            const RandomForestModel model =
                fit_forest(Xtr, ytr, candidates[c], fit_seed, {}, {}, threads);
            const std::vector<double> pred = predict(model, Xte, threads);
            if (const auto r2 = r2_score(pred, yte)) {
                score_sum += *r2;
                ++scored_folds;
            }
        }
        const double score =
            scored_folds > 0 ? score_sum / scored_folds
                             : -std::numeric_limits<double>::infinity();
        result.candidates.push_back({candidates[c], score});
        if (score > best_score) {
            best_score = score;
            result.best = candidates[c];
            result.cv_score = score;
            result.best_index = c;
        }
    }
    return result;
}

} // namespace aodfill
