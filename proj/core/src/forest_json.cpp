#include <fstream>

#include "aodfill/errors.hpp"
#include "aodfill/forest.hpp"
#include "json.hpp"

namespace aodfill {

namespace {

using nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

ordered_json max_features_to_json(const MaxFeatures& mf) {
    switch (mf.kind) {
        case MaxFeatures::Kind::Count:
            return {{"kind", "count"}, {"value", static_cast<int>(mf.value)}};
        case MaxFeatures::Kind::Fraction:
            return {{"kind", "fraction"}, {"value", mf.value}};
        case MaxFeatures::Kind::Sqrt:
            return {{"kind", "sqrt"}};
    }
    return {};
}

MaxFeatures max_features_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "count") return MaxFeatures::count(j.at("value").get<int>());
    if (kind == "fraction") return MaxFeatures::fraction(j.at("value").get<double>());
    if (kind == "sqrt") return MaxFeatures::sqrt();
    throw InputError("unknown max_features kind '" + kind + "'");
}

} // namespace

void save_model_json(const RandomForestModel& model,
                     const std::filesystem::path& path) {
    ordered_json params = {
        {"n_trees", model.params.n_trees},
        {"max_depth", model.params.max_depth
                          ? ordered_json(*model.params.max_depth)
                          : ordered_json(nullptr)},
        {"min_samples_split", model.params.min_samples_split},
        {"min_samples_leaf", model.params.min_samples_leaf},
        {"max_features", max_features_to_json(model.params.max_features)},
        {"bootstrap", model.params.bootstrap},
        {"subspace_per_tree", model.params.subspace_per_tree},
    };

    ordered_json trees = ordered_json::array();
    for (const Tree& tree : model.trees) {
        ordered_json nodes = ordered_json::array();
        for (const Tree::Node& n : tree.nodes()) {
            if (n.is_leaf())
                nodes.push_back({{"v", n.value}, {"n", n.n_samples}});
            else
                nodes.push_back(
                    {{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        }
        trees.push_back(std::move(nodes));
    }

    ordered_json doc = {
        {"format_version", kFormatVersion},
        {"target_tag", model.target_tag},
        {"seed", model.seed},
        {"params", std::move(params)},
        {"schema", model.schema.names()},
        {"importances", model.importances},
        {"trees", std::move(trees)},
    };

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write model file " + path.string());
    out << doc.dump(1) << '\n';
    if (!out) throw InputError("write failed for " + path.string());
}

RandomForestModel load_model_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("bad model JSON in " + path.string() + ": " + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != kFormatVersion)
            throw InputError("unsupported model format_version in " + path.string());
        RandomForestModel model;
        model.target_tag = doc.at("target_tag").get<std::string>();
        model.seed = doc.at("seed").get<std::uint64_t>();
        const auto& p = doc.at("params");
        model.params.n_trees = p.at("n_trees").get<int>();
        if (!p.at("max_depth").is_null())
            model.params.max_depth = p.at("max_depth").get<int>();
        model.params.min_samples_split = p.at("min_samples_split").get<int>();
        model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        model.params.max_features = max_features_from_json(p.at("max_features"));
        model.params.bootstrap = p.at("bootstrap").get<bool>();
        model.params.subspace_per_tree = p.value("subspace_per_tree", false);
        model.schema =
            FeatureSchema(doc.at("schema").get<std::vector<std::string>>());
        model.importances = doc.at("importances").get<std::vector<double>>();
        for (const auto& tree_json : doc.at("trees")) {
            std::vector<Tree::Node> nodes;
            nodes.reserve(tree_json.size());
            for (const auto& nj : tree_json) {
                Tree::Node node;
                if (nj.contains("f")) {
                    node.feature = nj.at("f").get<std::int32_t>();
                    node.threshold = nj.at("t").get<double>();
                    node.left = nj.at("l").get<std::int32_t>();
                    node.right = nj.at("r").get<std::int32_t>();
                } else {
                    node.feature = -1;
                    node.value = nj.at("v").get<double>();
                    node.n_samples = nj.at("n").get<std::int64_t>();
                }
                nodes.push_back(node);
            }
            model.trees.push_back(Tree::from_nodes(std::move(nodes)));
        }
        if (model.trees.size() != static_cast<std::size_t>(model.params.n_trees))
            throw InputError("tree count does not match n_trees in " + path.string());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed model in " + path.string() + ": " + e.what());
    }
}

} // namespace aodfill
