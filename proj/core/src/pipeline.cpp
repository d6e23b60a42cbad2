#include "aodfill/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aodfill/ascii_grid.hpp"
#include "aodfill/errors.hpp"
#include "aodfill/parallel.hpp"
#include "aodfill/rng.hpp"
#include "json.hpp"

namespace aodfill {

namespace {

// Substream labels under the run seed.
constexpr std::uint64_t kTrainStream = 21;
constexpr std::uint64_t kFinalFitStream = 22;
constexpr std::uint64_t kEvalFoldStream = 23;
constexpr std::uint64_t kEvalFitStream = 24;

const std::vector<std::string> kBands = {kBand047, kBand055};
const std::vector<std::string> kVariants = {kVariantWith, kVariantWithout};

std::uint64_t cell_id(std::size_t band, std::size_t variant) {
    return band * 2 + variant;
}

struct WrittenFiles {
    std::filesystem::path root;
    std::vector<std::filesystem::path> relative;

    void note(const std::filesystem::path& path) {
        relative.push_back(std::filesystem::relative(path, root));
    }
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot reopen " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// threads is deliberately absent: it is an execution knob that must not
// change any output byte, and the manifest asserts exactly that.
nlohmann::ordered_json config_echo(const RunConfig& cfg) {
    return {
        {"input_root", cfg.input_root.generic_string()},
        {"output_root", cfg.output_root.generic_string()},
        {"date_start", cfg.date_start.to_string()},
        {"date_end", cfg.date_end.to_string()},
        {"filter",
         {{"window", cfg.filter.window},
          {"include_center", cfg.filter.include_center},
          {"min_valid", cfg.filter.min_valid}}},
        {"covariate_tags", cfg.covariate_tags},
        {"station_file", cfg.station_file.generic_string()},
        {"seed", cfg.seed},
        {"search_iters", cfg.search_iters},
        {"cv_k", cfg.cv_k},
        {"apply_aod_scale", cfg.apply_aod_scale},
    };
}

Grid read_band_grid(const RunConfig& cfg, const std::filesystem::path& path,
                    const std::string& tag) {
    Grid g = read_ascii_grid(path);
    g.set_band_tag(tag);
    if (cfg.apply_aod_scale) {
        Grid scaled = g.like(tag);
        for (int row = 0; row < g.n_rows(); ++row)
            for (int col = 0; col < g.n_cols(); ++col)
                if (g.valid(col, row)) scaled.set(col, row, g.value(col, row) * 1000.0);
        return scaled;
    }
    return g;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("[") + name + "] " + e.what());
    } catch (const InputError& e) {
        throw InputError(std::string("[") + name + "] " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("[") + name + "] " + e.what());
    }
}

} // namespace

void RunConfig::validate() const {
    if (input_root.empty()) throw ConfigError("input_root is required");
    if (output_root.empty()) throw ConfigError("output_root is required");
    if (date_end < date_start) throw ConfigError("date_end precedes date_start");
    if (station_file.empty()) throw ConfigError("station_file is required");
    if (covariate_tags.empty()) throw ConfigError("covariate_tags is empty");
    if (cv_k < 2) throw ConfigError("cv_k must be >= 2");
    if (search_iters < 1) throw ConfigError("search_iters must be >= 1");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    try {
        filter.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

DayStack load_day_stack(const RunConfig& cfg, const DateStamp& day) {
    const std::filesystem::path day_dir = cfg.input_root / day.to_string();
    const auto band_path = [&](const char* band) { return day_dir / (std::string(band) + ".asc"); };

    DayStack stack;
    stack.aod047 = read_band_grid(cfg, band_path(kBand047), kBand047);
    stack.aod055 = read_band_grid(cfg, band_path(kBand055), kBand055);
    if (!stack.aod047.same_geometry(stack.aod055))
        throw InputError("AOD band grids disagree on geometry for " + day.to_string());

    std::map<std::string, Grid> covariates;
    for (const std::string& tag : cfg.covariate_tags) {
        Grid g = read_ascii_grid(day_dir / (tag + ".asc"));
        g.set_band_tag(tag);
        if (!g.same_geometry(stack.aod047)) g = resample_nearest(g, stack.aod047);
        covariates.emplace(tag, std::move(g));
    }

    const std::filesystem::path smoke_path =
        cfg.input_root / ("smoke_" + day.to_string() + ".geojson");
    std::vector<SmokePolygon> polys;
    if (std::filesystem::exists(smoke_path)) {
        polys = read_smoke_geojson(smoke_path);
    } else {
        std::cerr << "warning: no smoke file for " << day.to_string()
                  << ", assuming no plumes\n";
    }
    const Grid smoke = rasterize_smoke(polys, stack.aod047);

    // Feature grids: the neighbor means never include the center cell, so
    // a training row's target cannot leak into its own feature.
    const FilterConfig feature_filter{cfg.filter.window, false, cfg.filter.min_valid};
    Grid nbr047 = mean_filter(stack.aod047, feature_filter, cfg.threads);
    Grid nbr055 = mean_filter(stack.aod055, feature_filter, cfg.threads);
    nbr047.set_band_tag(kNbrAod047);
    nbr055.set_band_tag(kNbrAod055);

    stack.features_with = assemble_feature_grids(
        covariates, smoke, std::make_pair(std::move(nbr047), std::move(nbr055)),
        cfg.covariate_tags);
    stack.features_without =
        assemble_feature_grids(covariates, smoke, std::nullopt, cfg.covariate_tags);
    return stack;
}

namespace {

bool day_inputs_present(const RunConfig& cfg, const DateStamp& day) {
    const std::filesystem::path day_dir = cfg.input_root / day.to_string();
    if (!std::filesystem::exists(day_dir / (std::string(kBand047) + ".asc")) ||
        !std::filesystem::exists(day_dir / (std::string(kBand055) + ".asc")))
        return false;
    for (const std::string& tag : cfg.covariate_tags)
        if (!std::filesystem::exists(day_dir / (tag + ".asc"))) return false;
    return true;
}

} // namespace

Tables build_tables(const RunConfig& cfg) {
    cfg.validate();
    const std::vector<StationSite> stations = read_stations_csv(cfg.station_file);

    Tables tables;
    tables.with_filter.schema = build_feature_schema(cfg.covariate_tags, true);
    tables.without_filter.schema = build_feature_schema(cfg.covariate_tags, false);

    for (DateStamp day = cfg.date_start; day <= cfg.date_end; day = day.next_day()) {
        if (!day_inputs_present(cfg, day)) {
            std::cerr << "warning: skipping " << day.to_string()
                      << " (missing input files)\n";
            continue;
        }
        const DayStack stack = load_day_stack(cfg, day);
        auto rows_with = extract_training_rows(day, stack.aod047, stack.aod055,
                                               stack.features_with, stations,
                                               tables.with_filter.schema);
        auto rows_without = extract_training_rows(day, stack.aod047, stack.aod055,
                                                  stack.features_without, stations,
                                                  tables.without_filter.schema);
        std::move(rows_with.begin(), rows_with.end(),
                  std::back_inserter(tables.with_filter.rows));
        std::move(rows_without.begin(), rows_without.end(),
                  std::back_inserter(tables.without_filter.rows));
    }
    return tables;
}

std::map<std::string, ModelPair> train_models(const Tables& tables,
                                              const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_root / "models");

    std::map<std::string, ModelPair> models;
    for (std::size_t b = 0; b < kBands.size(); ++b) {
        ModelPair pair;
        for (std::size_t v = 0; v < kVariants.size(); ++v) {
            const SampleTable& table =
                v == 0 ? tables.with_filter : tables.without_filter;
            if (table.rows.empty())
                throw InputError("empty training table for variant " + kVariants[v]);
            const Matrix X = table_features(table);
            const std::vector<double> y = table_targets(table, kBands[b]);

            const std::uint64_t search_seed =
                derive_seed(cfg.seed, kTrainStream, cell_id(b, v));
            const SearchResult search =
                random_search(X, y, SearchSpace{}, cfg.search_iters, cfg.cv_k,
                              search_seed, cfg.threads);
            RandomForestModel model = fit_forest(
                X, y, search.best, derive_seed(search_seed, kFinalFitStream),
                table.schema, kBands[b], cfg.threads);
            save_model_json(model, cfg.output_root / "models" /
                                       (kBands[b] + "_" + kVariants[v] + ".json"));
            (v == 0 ? pair.with_filter : pair.without_filter) = std::move(model);
        }
        models.emplace(kBands[b], std::move(pair));
    }
    return models;
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
    return {{"n", m.n},
            {"r2", m.r2 ? nlohmann::ordered_json(*m.r2) : nlohmann::ordered_json(nullptr)},
            {"rmse", m.rmse},
            {"mbe", m.mbe}};
}

nlohmann::ordered_json fold_metrics_json(std::size_t fold, const Metrics& m) {
    return {{"fold", fold},
            {"n", m.n},
            {"r2", m.r2 ? nlohmann::ordered_json(*m.r2) : nlohmann::ordered_json(nullptr)},
            {"rmse", m.rmse},
            {"mbe", m.mbe}};
}

} // namespace

std::vector<EvalCell> evaluate_all(const Tables& tables,
                                   const std::map<std::string, ModelPair>& models,
                                   const RunConfig& cfg) {
    cfg.validate();
    const std::vector<FoldKind> regimes = {FoldKind::Random, FoldKind::Spatial,
                                           FoldKind::Temporal};
    std::vector<EvalCell> cells;
    for (std::size_t b = 0; b < kBands.size(); ++b) {
        const ModelPair& pair = models.at(kBands[b]);
        for (std::size_t v = 0; v < kVariants.size(); ++v) {
            const SampleTable& table =
                v == 0 ? tables.with_filter : tables.without_filter;
            const Hyperparams params =
                (v == 0 ? pair.with_filter : pair.without_filter).params;
            const Matrix X = table_features(table);
            const std::vector<double> y = table_targets(table, kBands[b]);

            for (std::size_t r = 0; r < regimes.size(); ++r) {
                const std::uint64_t regime_seed = derive_seed(
                    cfg.seed, kEvalFoldStream, cell_id(b, v) * 3 + r);
                const FoldPlan plan =
                    make_folds(table, regimes[r], cfg.cv_k, regime_seed);
                const std::uint64_t fit_seed = derive_seed(
                    cfg.seed, kEvalFitStream, cell_id(b, v) * 3 + r);
                const TrainerFn trainer =
                    [&](const Matrix& Xtr, std::span<const double> ytr,
                        int fold) -> PredictFn {
                    RandomForestModel model =
                        fit_forest(Xtr, ytr, params,
                                   derive_seed(fit_seed, 1,
                                               static_cast<std::uint64_t>(fold)),
                                   {}, {}, cfg.threads);
                    return [model = std::move(model),
                            threads = cfg.threads](const Matrix& Xte) {
                        return predict(model, Xte, threads);
                    };
                };
                cells.push_back(
                    {kBands[b], kVariants[v], cross_validate(trainer, X, y, plan)});
            }
        }
    }

    std::filesystem::create_directories(cfg.output_root / "reports");
    nlohmann::ordered_json cell_array = nlohmann::ordered_json::array();
    std::string csv = "band,variant,kind,k,seed,fold,n,r2,rmse,mbe\n";
    for (const EvalCell& cell : cells) {
        nlohmann::ordered_json per_fold = nlohmann::ordered_json::array();
        for (std::size_t f = 0; f < cell.report.per_fold.size(); ++f)
            per_fold.push_back(fold_metrics_json(f, cell.report.per_fold[f]));
        cell_array.push_back({{"band", cell.band},
                              {"variant", cell.variant},
                              {"kind", to_string(cell.report.kind)},
                              {"k", cell.report.k},
                              {"seed", cell.report.seed},
                              {"per_fold", std::move(per_fold)},
                              {"pooled", metrics_json(cell.report.pooled)}});
        const std::string prefix = cell.band + "," + cell.variant + ",";
        std::istringstream lines(cv_report_to_csv(cell.report));
        std::string line;
        std::getline(lines, line); // drop the per-report header
        while (std::getline(lines, line)) csv += prefix + line + "\n";
    }
    const nlohmann::ordered_json doc = {{"cells", std::move(cell_array)}};

    std::ofstream json_out(cfg.output_root / "reports" / "eval.json",
                           std::ios::binary | std::ios::trunc);
    if (!json_out) throw InputError("cannot write eval.json");
    json_out << doc.dump(2) << '\n';
    std::ofstream csv_out(cfg.output_root / "reports" / "eval.csv",
                          std::ios::binary | std::ios::trunc);
    if (!csv_out) throw InputError("cannot write eval.csv");
    csv_out << csv;
    return cells;
}

namespace {

/// Model-prediction layer: valid exactly where every schema feature is
/// valid; values are forest predictions over those cells.
Grid predict_layer(const RandomForestModel& model,
                   const std::map<std::string, Grid>& feature_grids,
                   const DateStamp& day, const Grid& geometry, int threads) {
    const FeatureAssembler assembler(model.schema, feature_grids, day, geometry);
    const std::size_t p = model.schema.size();

    std::vector<std::size_t> cells;
    std::vector<double> scratch(p);
    for (int row = 0; row < geometry.n_rows(); ++row)
        for (int col = 0; col < geometry.n_cols(); ++col)
            if (assembler.at_cell(col, row, scratch))
                cells.push_back(geometry.index(col, row));

    Matrix X(cells.size(), p);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const int row = static_cast<int>(cells[i] / static_cast<std::size_t>(geometry.n_cols()));
        const int col = static_cast<int>(cells[i] % static_cast<std::size_t>(geometry.n_cols()));
        assembler.at_cell(col, row, X.row(i));
    }
    const std::vector<double> pred = predict(model, X, threads);

    Grid out = geometry.like(model.target_tag);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const int row = static_cast<int>(cells[i] / static_cast<std::size_t>(geometry.n_cols()));
        const int col = static_cast<int>(cells[i] % static_cast<std::size_t>(geometry.n_cols()));
        out.set(col, row, pred[i]);
    }
    return out;
}

Grid provenance_of(const Grid& observed, const Grid& with_layer,
                   const Grid& without_layer) {
    Grid out = observed.like("provenance");
    for (int row = 0; row < out.n_rows(); ++row) {
        for (int col = 0; col < out.n_cols(); ++col) {
            if (observed.valid(col, row))
                out.set(col, row, 0.0);
            else if (with_layer.valid(col, row))
                out.set(col, row, 1.0);
            else if (without_layer.valid(col, row))
                out.set(col, row, 2.0);
        }
    }
    return out;
}

} // namespace

ImputedDay impute_day(const DateStamp& day, const RunConfig& cfg,
                      const std::map<std::string, ModelPair>& models) {
    cfg.validate();
    const DayStack stack = load_day_stack(cfg, day);

    ImputedDay result;
    for (std::size_t b = 0; b < kBands.size(); ++b) {
        const Grid& observed = b == 0 ? stack.aod047 : stack.aod055;
        const ModelPair& pair = models.at(kBands[b]);
        const Grid with_layer = predict_layer(pair.with_filter, stack.features_with,
                                              day, observed, cfg.threads);
        const Grid without_layer = predict_layer(
            pair.without_filter, stack.features_without, day, observed, cfg.threads);
        const std::vector<Grid> layers = {observed, with_layer, without_layer};
        Grid combined = combine_first_valid(layers);
        combined.set_band_tag(kBands[b]);
        Grid provenance = provenance_of(observed, with_layer, without_layer);
        if (b == 0) {
            result.aod047 = std::move(combined);
            result.provenance_047 = std::move(provenance);
        } else {
            result.aod055 = std::move(combined);
            result.provenance_055 = std::move(provenance);
        }
    }
    return result;
}

void run(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_root);
    std::filesystem::create_directories(cfg.output_root / "tables");
    std::filesystem::create_directories(cfg.output_root / "imputed");

    WrittenFiles written{cfg.output_root, {}};

    const Tables tables = stage("build_tables", [&] { return build_tables(cfg); });
    stage("build_tables", [&] {
        const auto with_path = cfg.output_root / "tables" / "table_with_filter.csv";
        const auto without_path =
            cfg.output_root / "tables" / "table_without_filter.csv";
        write_sample_table_csv(tables.with_filter, with_path);
        write_sample_table_csv(tables.without_filter, without_path);
        written.note(with_path);
        written.note(without_path);
        return 0;
    });

    const auto models =
        stage("train_models", [&] { return train_models(tables, cfg); });
    for (const auto& band : kBands)
        for (const auto& variant : kVariants)
            written.note(cfg.output_root / "models" / (band + "_" + variant + ".json"));

    stage("evaluate", [&] { return evaluate_all(tables, models, cfg); });
    written.note(cfg.output_root / "reports" / "eval.json");
    written.note(cfg.output_root / "reports" / "eval.csv");

    stage("impute", [&] {
        for (DateStamp day = cfg.date_start; day <= cfg.date_end;
             day = day.next_day()) {
            if (!day_inputs_present(cfg, day)) {
                std::cerr << "warning: not imputing " << day.to_string()
                          << " (missing input files)\n";
                continue;
            }
            const ImputedDay imputed = impute_day(day, cfg, models);
            const auto out = [&](const Grid& g, const std::string& name) {
                const auto path = cfg.output_root / "imputed" /
                                  (name + "_" + day.to_string() + ".asc");
                write_ascii_grid(g, path);
                written.note(path);
            };
            out(imputed.aod047, kBand047);
            out(imputed.aod055, kBand055);
            out(imputed.provenance_047, std::string("provenance_") + kBand047);
            out(imputed.provenance_055, std::string("provenance_") + kBand055);
        }
        return 0;
    });

    stage("manifest", [&] {
        std::sort(written.relative.begin(), written.relative.end());
        nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
        for (const auto& rel : written.relative) {
            const std::string bytes = read_file_bytes(cfg.output_root / rel);
            char hash[32];
            std::snprintf(hash, sizeof hash, "%016llx",
                          static_cast<unsigned long long>(fnv1a64(bytes)));
            outputs.push_back({{"path", rel.generic_string()},
                               {"bytes", bytes.size()},
                               {"fnv1a64", hash}});
        }
        const nlohmann::ordered_json manifest = {{"config", config_echo(cfg)},
                                                 {"outputs", std::move(outputs)}};
        std::ofstream out(cfg.output_root / "manifest.json",
                          std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write manifest.json");
        out << manifest.dump(2) << '\n';
        return 0;
    });
}

} // namespace aodfill
