#include "aodfill/validation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "aodfill/errors.hpp"
#include "aodfill/rng.hpp"
#include "aodfill/text_format.hpp"
#include "json.hpp"

namespace aodfill {

const char* to_string(FoldKind kind) {
    switch (kind) {
        case FoldKind::Random: return "Random";
        case FoldKind::Spatial: return "Spatial";
        case FoldKind::Temporal: return "Temporal";
    }
    return "Random";
}

FoldKind fold_kind_from_string(const std::string& name) {
    if (name == "Random" || name == "random") return FoldKind::Random;
    if (name == "Spatial" || name == "spatial") return FoldKind::Spatial;
    if (name == "Temporal" || name == "temporal") return FoldKind::Temporal;
    throw ConfigError("unknown CV kind '" + name + "'");
}

namespace {

// Sorted distinct keys get a seeded shuffle, then fold = position % k.
// Sorting first makes the plan a function of the row multiset, not of the
// row order the table happened to arrive in.
template <typename Key>
std::map<Key, int> deal_groups(std::vector<Key> keys, int k, std::uint64_t seed,
                               const char* what) {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    if (keys.size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("fewer distinct " + std::string(what) +
                                    " (" + std::to_string(keys.size()) +
                                    ") than folds (" + std::to_string(k) + ")");
    Rng rng(seed);
    rng.shuffle(keys);
    std::map<Key, int> fold_of;
    for (std::size_t i = 0; i < keys.size(); ++i)
        fold_of[keys[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return fold_of;
}

} // namespace

FoldPlan make_folds(const SampleTable& table, FoldKind kind, int k,
                    std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("fold count must be >= 2");
    const std::size_t n = table.rows.size();
    FoldPlan plan;
    plan.kind = kind;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.resize(n);

    switch (kind) {
        case FoldKind::Random: {
            if (n < static_cast<std::size_t>(k))
                throw std::invalid_argument("fewer rows than folds");
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            Rng rng(seed);
            rng.shuffle(perm);
            for (std::size_t i = 0; i < n; ++i)
                plan.assignment[perm[i]] =
                    static_cast<int>(i % static_cast<std::size_t>(k));
            break;
        }
        case FoldKind::Spatial: {
            std::vector<std::string> sites;
            sites.reserve(n);
            for (const SampleRow& row : table.rows) sites.push_back(row.site_id);
            const auto fold_of = deal_groups(std::move(sites), k, seed, "sites");
            for (std::size_t i = 0; i < n; ++i)
                plan.assignment[i] = fold_of.at(table.rows[i].site_id);
            break;
        }
        case FoldKind::Temporal: {
            std::vector<std::int64_t> dates;
            dates.reserve(n);
            for (const SampleRow& row : table.rows)
                dates.push_back(row.date.serial());
            const auto fold_of = deal_groups(std::move(dates), k, seed, "dates");
            for (std::size_t i = 0; i < n; ++i)
                plan.assignment[i] = fold_of.at(table.rows[i].date.serial());
            break;
        }
    }
    return plan;
}

Metrics compute_metrics(std::span<const double> pred,
                        std::span<const double> obs) {
    if (pred.size() != obs.size())
        throw std::invalid_argument("prediction/observation length mismatch");
    if (pred.empty()) throw std::invalid_argument("empty metric input");
    const double n = static_cast<double>(pred.size());

    double diff_sum = 0.0, diff_sq_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - obs[i];
        diff_sum += d;
        diff_sq_sum += d * d;
    }
    double obs_mean = 0.0;
    for (const double v : obs) obs_mean += v;
    obs_mean /= n;
    double sst = 0.0;
    for (const double v : obs) sst += (v - obs_mean) * (v - obs_mean);

    Metrics m;
    m.n = pred.size();
    m.mbe = diff_sum / n;
    m.rmse = std::sqrt(diff_sq_sum / n);
    if (sst > 0.0) m.r2 = 1.0 - diff_sq_sum / sst;
    return m;
}

CvReport cross_validate(const TrainerFn& trainer, const Matrix& X,
                        std::span<const double> y, const FoldPlan& plan) {
    if (plan.assignment.size() != X.n_rows())
        throw std::invalid_argument("fold plan does not match the table");
    CvReport report;
    report.kind = plan.kind;
    report.k = plan.k;
    report.seed = plan.seed;

    std::vector<double> pooled_pred, pooled_obs;
    pooled_pred.reserve(X.n_rows());
    pooled_obs.reserve(X.n_rows());

    for (int f = 0; f < plan.k; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
            if (plan.assignment[i] == f)
                test_idx.push_back(i);
            else
                train_idx.push_back(i);
        }
        if (train_idx.empty() || test_idx.empty())
            throw std::invalid_argument("fold " + std::to_string(f) + " is empty");

        const Matrix Xtr = X.take_rows(train_idx);
        std::vector<double> ytr(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) ytr[i] = y[train_idx[i]];
        const Matrix Xte = X.take_rows(test_idx);
        std::vector<double> yte(test_idx.size());
        for (std::size_t i = 0; i < test_idx.size(); ++i) yte[i] = y[test_idx[i]];

        const PredictFn predictor = trainer(Xtr, ytr, f);
        const std::vector<double> pred = predictor(Xte);
        if (pred.size() != yte.size())
            throw std::invalid_argument("trainer returned wrong prediction count");

        report.per_fold.push_back(compute_metrics(pred, yte));
        pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
        pooled_obs.insert(pooled_obs.end(), yte.begin(), yte.end());
    }
    report.pooled = compute_metrics(pooled_pred, pooled_obs);
    return report;
}

Matrix table_features(const SampleTable& table) {
    Matrix X(table.rows.size(), table.schema.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const SampleRow& row = table.rows[i];
        if (row.features.size() != table.schema.size())
            throw std::invalid_argument("row feature count does not match schema");
        std::copy(row.features.begin(), row.features.end(), X.row(i).begin());
    }
    return X;
}

std::vector<double> table_targets(const SampleTable& table,
                                  const std::string& band) {
    std::vector<double> y;
    y.reserve(table.rows.size());
    if (band == "AOD047") {
        for (const SampleRow& row : table.rows) y.push_back(row.target_047);
    } else if (band == "AOD055") {
        for (const SampleRow& row : table.rows) y.push_back(row.target_055);
    } else {
        throw std::invalid_argument("unknown band tag '" + band + "'");
    }
    return y;
}

namespace {

nlohmann::ordered_json metrics_to_json(const Metrics& m) {
    return {{"n", m.n},
            {"r2", m.r2 ? nlohmann::ordered_json(*m.r2) : nlohmann::ordered_json(nullptr)},
            {"rmse", m.rmse},
            {"mbe", m.mbe}};
}

nlohmann::ordered_json fold_metrics_to_json(std::size_t fold, const Metrics& m) {
    return {{"fold", fold},
            {"n", m.n},
            {"r2", m.r2 ? nlohmann::ordered_json(*m.r2) : nlohmann::ordered_json(nullptr)},
            {"rmse", m.rmse},
            {"mbe", m.mbe}};
}

} // namespace

std::string cv_report_to_json(const CvReport& report) {
    nlohmann::ordered_json per_fold = nlohmann::ordered_json::array();
    for (std::size_t f = 0; f < report.per_fold.size(); ++f)
        per_fold.push_back(fold_metrics_to_json(f, report.per_fold[f]));
    const nlohmann::ordered_json doc = {{"kind", to_string(report.kind)},
                                        {"k", report.k},
                                        {"seed", report.seed},
                                        {"per_fold", std::move(per_fold)},
                                        {"pooled", metrics_to_json(report.pooled)}};
    return doc.dump(2);
}

std::string cv_report_to_csv(const CvReport& report) {
    std::string out = "kind,k,seed,fold,n,r2,rmse,mbe\n";
    auto line = [&](const std::string& fold, const Metrics& m) {
        out += to_string(report.kind);
        out += ',' + std::to_string(report.k);
        out += ',' + std::to_string(report.seed);
        out += ',' + fold;
        out += ',' + std::to_string(m.n);
        out += ',';
        if (m.r2) out += format_double(*m.r2);
        out += ',' + format_double(m.rmse);
        out += ',' + format_double(m.mbe);
        out += '\n';
    };
    for (std::size_t f = 0; f < report.per_fold.size(); ++f)
        line(std::to_string(f), report.per_fold[f]);
    line("pooled", report.pooled);
    return out;
}

void write_cv_report(const CvReport& report,
                     const std::filesystem::path& json_path,
                     const std::filesystem::path& csv_path) {
    std::ofstream j(json_path, std::ios::binary | std::ios::trunc);
    if (!j) throw InputError("cannot write " + json_path.string());
    j << cv_report_to_json(report) << '\n';
    std::ofstream c(csv_path, std::ios::binary | std::ios::trunc);
    if (!c) throw InputError("cannot write " + csv_path.string());
    c << cv_report_to_csv(report);
}

} // namespace aodfill
