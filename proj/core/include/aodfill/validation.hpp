#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aodfill/features.hpp"
#include "aodfill/matrix.hpp"

namespace aodfill {

enum class FoldKind { Random, Spatial, Temporal };

const char* to_string(FoldKind kind);
FoldKind fold_kind_from_string(const std::string& name);

/// Per-row fold assignment under one blocking regime. Spatial keeps every
/// row of a site in one fold; Temporal does the same per calendar date.
struct FoldPlan {
    FoldKind kind = FoldKind::Random;
    int k = 5;
    std::vector<int> assignment; // one entry per table row, values 0..k-1
    std::uint64_t seed = 0;
};

/// Random: rows shuffled by seed and dealt round-robin. Spatial/Temporal:
/// the distinct site ids / dates (sorted, then seeded shuffle) are dealt
/// round-robin and rows inherit their group's fold. Throws when a fold
/// would be empty (fewer rows/sites/dates than k).
FoldPlan make_folds(const SampleTable& table, FoldKind kind, int k,
                    std::uint64_t seed);

struct Metrics {
    std::optional<double> r2; // unset when the observations have zero variance
    double rmse = 0.0;
    double mbe = 0.0;
    std::size_t n = 0;
};

/// mbe = mean(pred - obs), rmse = sqrt(mean((pred - obs)^2)),
/// r2 = 1 - SSE/SST. Throws on length mismatch or empty input.
Metrics compute_metrics(std::span<const double> pred,
                        std::span<const double> obs);

/// A trainer maps (X_train, y_train, fold_index) to a predictor; the fold
/// index lets deterministic trainers derive a per-fold seed.
using PredictFn = std::function<std::vector<double>(const Matrix&)>;
using TrainerFn =
    std::function<PredictFn(const Matrix&, std::span<const double>, int fold)>;

struct CvReport {
    FoldKind kind = FoldKind::Random;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<Metrics> per_fold;
    Metrics pooled; // over held-out predictions concatenated in fold order
};

/// For each fold f: train on rows with fold != f, predict rows with
/// fold == f (row order preserved). Pooled metrics cover the concatenated
/// held-out predictions.
CvReport cross_validate(const TrainerFn& trainer, const Matrix& X,
                        std::span<const double> y, const FoldPlan& plan);

/// Feature matrix in table row order.
Matrix table_features(const SampleTable& table);
/// Target vector for band tag "AOD047" or "AOD055".
std::vector<double> table_targets(const SampleTable& table,
                                  const std::string& band);

std::string cv_report_to_json(const CvReport& report);
std::string cv_report_to_csv(const CvReport& report);
void write_cv_report(const CvReport& report,
                     const std::filesystem::path& json_path,
                     const std::filesystem::path& csv_path);

} // namespace aodfill
