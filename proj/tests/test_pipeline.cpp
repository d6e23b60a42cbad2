#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "aodfill/ascii_grid.hpp"
#include "aodfill/errors.hpp"
#include "aodfill/pipeline.hpp"
#include "aodfill/synth.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace aodfill;

namespace {

struct Workspace {
    std::filesystem::path root;
    RunConfig cfg;
};

// One shared scene set + config for the whole suite; regenerated fresh on
// first use of each workspace name.
Workspace make_workspace(const std::string& name, int n_days, int n_stations,
                         int size, std::uint64_t seed) {
    Workspace ws;
    ws.root = std::filesystem::temp_directory_path() / ("aodfill_pipe_" + name);
    std::filesystem::remove_all(ws.root);

    SceneSpec spec;
    spec.n_cols = size;
    spec.n_rows = size;
    spec.cell_size = 1000.0;
    spec.correlation_length = 6.0;
    spec.missing_fraction = 0.6;
    spec.n_covariates = 4;
    spec.noise_sd = 60.0;
    spec.n_stations = n_stations;
    spec.date = DateStamp::from_ymd(2014, 1, 1);
    spec.seed = seed;
    write_scene_set(spec, n_days, ws.root / "in");

    ws.cfg.input_root = ws.root / "in";
    ws.cfg.output_root = ws.root / "out";
    ws.cfg.date_start = spec.date;
    ws.cfg.date_end = DateStamp::from_serial(spec.date.serial() + n_days - 1);
    ws.cfg.filter = FilterConfig{11, false, 1};
    ws.cfg.covariate_tags = {"cov_00", "cov_01", "cov_02", "cov_03"};
    ws.cfg.station_file = ws.root / "in" / "stations.csv";
    ws.cfg.seed = seed + 1;
    ws.cfg.search_iters = 2;
    ws.cfg.cv_k = 3;
    ws.cfg.threads = 0;
    return ws;
}

std::string file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("build_tables contract") {
    const Workspace ws = make_workspace("tables", 3, 40, 48, 101);
    const Tables tables = build_tables(ws.cfg);

    CHECK(tables.with_filter.schema.size() ==
          tables.without_filter.schema.size() + 2);
    CHECK(*tables.with_filter.schema.index_of(kNbrAod047) ==
          tables.with_filter.schema.size() - 2);

    REQUIRE(!tables.without_filter.rows.empty());
    CHECK(tables.without_filter.rows.size() <= 40 * 3);
    // the with-filter rows are a subset: same (site, date) keys or fewer
    CHECK(tables.with_filter.rows.size() <= tables.without_filter.rows.size());

    std::set<std::pair<std::string, std::int64_t>> without_keys;
    for (const SampleRow& row : tables.without_filter.rows)
        without_keys.insert({row.site_id, row.date.serial()});
    for (const SampleRow& row : tables.with_filter.rows)
        CHECK(without_keys.count({row.site_id, row.date.serial()}) == 1);

    // rows arrive in date order
    for (std::size_t i = 1; i < tables.without_filter.rows.size(); ++i)
        CHECK(tables.without_filter.rows[i - 1].date.serial() <=
              tables.without_filter.rows[i].date.serial());

    // shared rows agree on everything but the two extra columns
    REQUIRE(!tables.with_filter.rows.empty());
    const SampleRow& w = tables.with_filter.rows.front();
    const SampleRow* match = nullptr;
    for (const SampleRow& row : tables.without_filter.rows)
        if (row.site_id == w.site_id && row.date == w.date) match = &row;
    REQUIRE(match != nullptr);
    CHECK(match->target_047 == w.target_047);
    for (std::size_t i = 0; i < match->features.size(); ++i)
        CHECK(match->features[i] == w.features[i]);
}

TEST_CASE("build_tables skips missing days and rejects corrupt files") {
    Workspace ws = make_workspace("missing", 2, 25, 32, 202);
    // remove one band of day 2: that day must be skipped, not fatal
    std::filesystem::remove(ws.root / "in" / "2014-01-02" / "AOD055.asc");
    const Tables tables = build_tables(ws.cfg);
    for (const SampleRow& row : tables.without_filter.rows)
        CHECK(row.date == DateStamp::from_ymd(2014, 1, 1));

    // corrupt content (file present but unreadable) is an error
    {
        std::ofstream corrupt(ws.root / "in" / "2014-01-01" / "cov_00.asc",
                              std::ios::trunc);
        corrupt << "ncols banana\n";
    }
    CHECK_THROWS_AS(build_tables(ws.cfg), InputError);
}

TEST_CASE("train, evaluate, impute round trip") {
    const Workspace ws = make_workspace("train", 3, 45, 48, 303);
    const Tables tables = build_tables(ws.cfg);
    const auto models = train_models(tables, ws.cfg);

    REQUIRE(models.size() == 2);
    for (const auto& band : {kBand047, kBand055}) {
        const ModelPair& pair = models.at(band);
        CHECK(pair.with_filter.target_tag == band);
        CHECK(pair.with_filter.schema == tables.with_filter.schema);
        CHECK(pair.without_filter.schema == tables.without_filter.schema);
        for (const auto& variant : {kVariantWith, kVariantWithout}) {
            const auto path = ws.cfg.output_root / "models" /
                              (std::string(band) + "_" + variant + ".json");
            CHECK(std::filesystem::exists(path));
            const RandomForestModel loaded = load_model_json(path);
            CHECK(loaded.params == (variant == std::string(kVariantWith)
                                        ? pair.with_filter.params
                                        : pair.without_filter.params));
        }
    }

    const auto cells = evaluate_all(tables, models, ws.cfg);
    CHECK(cells.size() == 12); // 2 bands x 2 variants x 3 regimes
    std::set<std::string> labels;
    for (const EvalCell& cell : cells) {
        labels.insert(cell.band + "/" + cell.variant + "/" +
                      to_string(cell.report.kind));
        CHECK(cell.report.per_fold.size() == 3);
        CHECK(cell.report.pooled.n ==
              (cell.variant == kVariantWith ? tables.with_filter.rows.size()
                                            : tables.without_filter.rows.size()));
    }
    CHECK(labels.size() == 12);
    CHECK(std::filesystem::exists(ws.cfg.output_root / "reports" / "eval.json"));
    CHECK(std::filesystem::exists(ws.cfg.output_root / "reports" / "eval.csv"));

    // imputation: observation-preserving, full coverage, provenance-consistent
    const DateStamp day = DateStamp::from_ymd(2014, 1, 2);
    const ImputedDay imputed = impute_day(day, ws.cfg, models);
    const DayStack stack = load_day_stack(ws.cfg, day);

    CHECK(coverage(imputed.aod047) == 1.0);
    CHECK(coverage(imputed.aod055) == 1.0);
    CHECK(coverage(imputed.provenance_047) == 1.0);

    const FeatureAssembler with_assembler(tables.with_filter.schema,
                                          stack.features_with, day, stack.aod047);
    std::vector<double> scratch(tables.with_filter.schema.size());
    int from_with = 0, from_without = 0;
    for (int row = 0; row < stack.aod047.n_rows(); ++row) {
        for (int col = 0; col < stack.aod047.n_cols(); ++col) {
            const double prov = imputed.provenance_047.value(col, row);
            if (stack.aod047.valid(col, row)) {
                CHECK(imputed.aod047.value(col, row) ==
                      stack.aod047.value(col, row));
                CHECK(prov == 0.0);
            } else if (with_assembler.at_cell(col, row, scratch)) {
                CHECK(prov == 1.0);
                ++from_with;
            } else {
                CHECK(prov == 2.0);
                ++from_without;
            }
        }
    }
    CHECK(from_with > 0); // the with-filter layer actually contributes

    // spot-check a with-layer cell against a direct model prediction
    for (int row = 0; row < stack.aod047.n_rows() && from_with > 0; ++row) {
        for (int col = 0; col < stack.aod047.n_cols(); ++col) {
            if (!stack.aod047.valid(col, row) &&
                with_assembler.at_cell(col, row, scratch)) {
                Matrix X(1, scratch.size());
                for (std::size_t i = 0; i < scratch.size(); ++i) X(0, i) = scratch[i];
                const auto direct = predict(models.at(kBand047).with_filter, X);
                CHECK(imputed.aod047.value(col, row) == direct[0]);
                from_with = 0; // one cell is enough
                break;
            }
        }
    }
}

TEST_CASE("run writes a reproducible manifest") {
    const Workspace ws = make_workspace("run", 3, 30, 40, 404);
    run(ws.cfg);

    const auto manifest_path = ws.cfg.output_root / "manifest.json";
    REQUIRE(std::filesystem::exists(manifest_path));
    const std::string first = file_bytes(manifest_path);

    // 2 days x 2 bands of imputed grids + provenance
    for (const char* day : {"2014-01-01", "2014-01-02", "2014-01-03"}) {
        for (const char* band : {"AOD047", "AOD055"}) {
            CHECK(std::filesystem::exists(ws.cfg.output_root / "imputed" /
                                          (std::string(band) + "_" + day + ".asc")));
            CHECK(std::filesystem::exists(
                ws.cfg.output_root / "imputed" /
                ("provenance_" + std::string(band) + "_" + day + ".asc")));
        }
    }
    CHECK(first.find("imputed/AOD047_2014-01-01.asc") != std::string::npos);
    CHECK(first.find("tables/table_with_filter.csv") != std::string::npos);
    CHECK(first.find("models/AOD055_without_filter.json") != std::string::npos);

    // identical rerun: identical bytes everywhere, manifest included
    const std::string table_first =
        file_bytes(ws.cfg.output_root / "tables" / "table_with_filter.csv");
    run(ws.cfg);
    CHECK(file_bytes(manifest_path) == first);
    CHECK(file_bytes(ws.cfg.output_root / "tables" / "table_with_filter.csv") ==
          table_first);
}

TEST_CASE("config validation and stage-tagged failures") {
    RunConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    Workspace ws = make_workspace("fail", 1, 20, 32, 505);
    ws.cfg.cv_k = 1;
    CHECK_THROWS_AS(run(ws.cfg), ConfigError);
    ws.cfg.cv_k = 3;

    // corrupt an input: the error must carry the stage tag and file name
    {
        std::ofstream corrupt(ws.root / "in" / "2014-01-01" / "AOD047.asc",
                              std::ios::trunc);
        corrupt << "not a grid";
    }
    try {
        run(ws.cfg);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string what = e.what();
        CHECK(what.find("[build_tables]") != std::string::npos);
        CHECK(what.find("AOD047.asc") != std::string::npos);
    }
}

TEST_CASE("a station with no valid window neighbors only reaches the plain table") {
    // handcrafted day: AOD valid at exactly one cell, the station on it
    const auto root =
        std::filesystem::temp_directory_path() / "aodfill_pipe_lonely";
    std::filesystem::remove_all(root);
    const auto day_dir = root / "in" / "2014-01-01";
    std::filesystem::create_directories(day_dir);

    const int n = 25;
    Grid aod(n, n, 0.0, n, 1.0, "AOD047");
    aod.set(12, 12, 345.0);
    write_ascii_grid(aod, day_dir / "AOD047.asc");
    aod.set(12, 12, 222.0);
    write_ascii_grid(aod, day_dir / "AOD055.asc");
    Grid cov(n, n, 0.0, n, 1.0, "cov_00");
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col) cov.set(col, row, 1.0);
    write_ascii_grid(cov, day_dir / "cov_00.asc");
    write_stations_csv(std::vector<StationSite>{{"lone", 12.5, 12.5}},
                       root / "in" / "stations.csv");

    RunConfig cfg;
    cfg.input_root = root / "in";
    cfg.output_root = root / "out";
    cfg.date_start = cfg.date_end = DateStamp::from_ymd(2014, 1, 1);
    cfg.covariate_tags = {"cov_00"};
    cfg.station_file = root / "in" / "stations.csv";
    const Tables tables = build_tables(cfg);

    // the 11x11 window around the only valid cell holds no OTHER valid cell
    CHECK(tables.with_filter.rows.empty());
    REQUIRE(tables.without_filter.rows.size() == 1);
    CHECK(tables.without_filter.rows[0].site_id == "lone");
    CHECK(tables.without_filter.rows[0].target_047 == 345.0);
    CHECK(tables.without_filter.rows[0].target_055 == 222.0);
}

TEST_CASE("apply_aod_scale multiplies targets by 1000 at ingest") {
    Workspace ws = make_workspace("scale", 1, 30, 32, 707);
    const Tables raw = build_tables(ws.cfg);
    ws.cfg.apply_aod_scale = true;
    const Tables scaled = build_tables(ws.cfg);
    REQUIRE(raw.without_filter.rows.size() == scaled.without_filter.rows.size());
    for (std::size_t i = 0; i < raw.without_filter.rows.size(); ++i) {
        CHECK(scaled.without_filter.rows[i].target_047 ==
              raw.without_filter.rows[i].target_047 * 1000.0);
        CHECK(scaled.without_filter.rows[i].target_055 ==
              raw.without_filter.rows[i].target_055 * 1000.0);
    }
}

TEST_CASE("missing covariate day fails imputation with a clear error") {
    Workspace ws = make_workspace("imputefail", 1, 25, 32, 606);
    const Tables tables = build_tables(ws.cfg);
    const auto models = train_models(tables, ws.cfg);
    std::filesystem::remove(ws.root / "in" / "2014-01-01" / "cov_02.asc");
    CHECK_THROWS_AS(impute_day(DateStamp::from_ymd(2014, 1, 1), ws.cfg, models),
                    InputError);
}
