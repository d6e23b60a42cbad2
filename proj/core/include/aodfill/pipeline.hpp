#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aodfill/date.hpp"
#include "aodfill/forest.hpp"
#include "aodfill/grid.hpp"
#include "aodfill/validation.hpp"

namespace aodfill {

inline constexpr const char* kBand047 = "AOD047";
inline constexpr const char* kBand055 = "AOD055";
inline constexpr const char* kVariantWith = "with_filter";
inline constexpr const char* kVariantWithout = "without_filter";

/// Everything a full run needs. Input layout:
///   <input_root>/stations.csv
///   <input_root>/smoke_<YYYY-MM-DD>.geojson      (absent => no plumes)
///   <input_root>/<YYYY-MM-DD>/<tag>.asc          (AOD047, AOD055, covariates)
/// Output layout:
///   <output_root>/tables/table_<variant>.csv
///   <output_root>/models/<band>_<variant>.json
///   <output_root>/reports/eval.json, eval.csv
///   <output_root>/imputed/<band>_<date>.asc, provenance_<band>_<date>.asc
///   <output_root>/manifest.json
struct RunConfig {
    std::filesystem::path input_root;
    std::filesystem::path output_root;
    DateStamp date_start = DateStamp::from_ymd(2014, 1, 1);
    DateStamp date_end = DateStamp::from_ymd(2014, 1, 1);
    /// window/min_valid apply everywhere; the neighbor-mean FEATURE grids
    /// always exclude the window center so a training cell never sees its
    /// own value.
    FilterConfig filter{11, false, 1};
    std::vector<std::string> covariate_tags;
    std::filesystem::path station_file;
    std::uint64_t seed = 0;
    int search_iters = 10;
    int cv_k = 5;
    int threads = 0;
    /// Multiply AOD values by 1000 at ingest (sources in physical units).
    bool apply_aod_scale = false;

    void validate() const; // throws ConfigError
};

struct Tables {
    SampleTable with_filter;
    SampleTable without_filter;
};

struct ModelPair {
    RandomForestModel with_filter;
    RandomForestModel without_filter;
};

/// Daily grid stack shared by table building and imputation.
struct DayStack {
    Grid aod047;
    Grid aod055;
    std::map<std::string, Grid> features_with;
    std::map<std::string, Grid> features_without;

    DayStack() : aod047(1, 1, 0, 1, 1), aod055(1, 1, 0, 1, 1) {}
};

/// Loads one day's grids, resampling covariates onto the AOD template when
/// their geometry differs and computing the neighbor-mean AOD features.
/// Throws InputError when a required file is missing or malformed.
DayStack load_day_stack(const RunConfig& cfg, const DateStamp& day);

/// Builds both training tables over the date range, concatenated in date
/// order. Days with missing input files are skipped with a warning on
/// stderr; malformed files abort. The two tables may differ only by rows
/// whose neighbor-mean features are unavailable.
Tables build_tables(const RunConfig& cfg);

/// Tunes (random search, cv_k random folds) and fits one model per
/// band x variant on all rows, then persists the four models under
/// output_root/models. Keys of the result: band tags.
std::map<std::string, ModelPair> train_models(const Tables& tables,
                                              const RunConfig& cfg);

struct EvalCell {
    std::string band;
    std::string variant;
    CvReport report;
};

/// Cross-validates each band x variant under all three fold kinds with the
/// tuned hyperparameters; writes reports/eval.json and reports/eval.csv.
/// Returns the 12 cells in (band, variant, regime) order.
std::vector<EvalCell> evaluate_all(const Tables& tables,
                                   const std::map<std::string, ModelPair>& models,
                                   const RunConfig& cfg);

struct ImputedDay {
    Grid aod047;
    Grid aod055;
    /// 0 = raw observation, 1 = with-filter model, 2 = without-filter model.
    Grid provenance_047;
    Grid provenance_055;

    ImputedDay()
        : aod047(1, 1, 0, 1, 1), aod055(1, 1, 0, 1, 1),
          provenance_047(1, 1, 0, 1, 1), provenance_055(1, 1, 0, 1, 1) {}
};

/// Per band: combine_first_valid([observed, with-filter prediction,
/// without-filter prediction]). A model layer is valid exactly where all
/// of its features are valid. Observed cells pass through bit-exactly.
ImputedDay impute_day(const DateStamp& day, const RunConfig& cfg,
                      const std::map<std::string, ModelPair>& models);

/// Full pipeline: tables -> models -> evaluation -> per-day imputation,
/// finishing with manifest.json (config echo + size and FNV-1a hash of
/// every written file). Rerunning with the same inputs and config
/// reproduces every output byte for any thread count.
void run(const RunConfig& cfg);

} // namespace aodfill
