#include <cmath>
#include <cstdio>
#include <filesystem>

#include "aodfill/ascii_grid.hpp"
#include "aodfill/synth.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace aodfill;

namespace {

SceneSpec base_spec() {
    SceneSpec spec;
    spec.n_cols = 128;
    spec.n_rows = 128;
    spec.cell_size = 1000.0;
    spec.correlation_length = 8.0;
    spec.missing_fraction = 0.6;
    spec.n_covariates = 6;
    spec.noise_sd = 60.0;
    spec.n_stations = 50;
    spec.date = DateStamp::from_ymd(2014, 1, 1);
    spec.seed = 0xabcdef;
    return spec;
}

std::vector<double> grid_values(const Grid& g) {
    std::vector<double> out;
    for (int row = 0; row < g.n_rows(); ++row)
        for (int col = 0; col < g.n_cols(); ++col) out.push_back(g.value(col, row));
    return out;
}

} // namespace

TEST_CASE("gen_field determinism and correlation structure") {
    const SceneSpec spec = base_spec();
    const Grid a = gen_field(spec, 0.0);
    const Grid b = gen_field(spec, 0.0);
    CHECK(oracles::grids_identical(a, b));
    CHECK(coverage(a) == 1.0);

    CHECK(oracles::lag1_autocorrelation(a) > 0.8);

    SceneSpec white = spec;
    white.correlation_length = 0.0;
    const Grid w = gen_field(white, 0.0);
    CHECK(std::abs(oracles::lag1_autocorrelation(w)) < 0.1);

    // mapped moments: mean near 300 + offset, sd near 100, floored at 0
    const Grid shifted = gen_field(spec, -30.0);
    double mean = 0.0;
    for (const double v : grid_values(shifted)) {
        CHECK(v >= 0.0);
        mean += v;
    }
    mean /= static_cast<double>(shifted.cell_count());
    CHECK(mean == doctest::Approx(270.0).epsilon(0.05));

    // the two bands share structure without being identical
    const auto va = grid_values(a);
    const auto vb = grid_values(shifted);
    CHECK(oracles::pearson(va, vb) > 0.9);
    CHECK(oracles::pearson(va, vb) < 0.9999);
}

TEST_CASE("gen_mask hits the missing fraction with contiguous blobs") {
    const SceneSpec spec = base_spec();
    const auto mask = gen_mask(spec);
    REQUIRE(mask.size() == 128 * 128);
    std::size_t missing = 0;
    for (const char m : mask) missing += (m != 0);
    const double fraction = static_cast<double>(missing) / static_cast<double>(mask.size());
    CHECK(fraction >= 0.55);
    CHECK(fraction <= 0.65);

    SceneSpec nearly_full = spec;
    nearly_full.missing_fraction = 0.01;
    const auto sparse = gen_mask(nearly_full);
    std::size_t sparse_missing = 0;
    for (const char m : sparse) sparse_missing += (m != 0);
    CHECK(1.0 - static_cast<double>(sparse_missing) /
                    static_cast<double>(sparse.size()) >=
          0.94);

    CHECK(gen_mask(spec) == mask); // determinism

    // blobiness: most missing cells have a missing east neighbor
    std::size_t adjacent = 0, counted = 0;
    for (int row = 0; row < 128; ++row)
        for (int col = 0; col + 1 < 128; ++col) {
            const std::size_t i = static_cast<std::size_t>(row) * 128 + col;
            if (mask[i]) {
                ++counted;
                adjacent += (mask[i + 1] != 0);
            }
        }
    CHECK(static_cast<double>(adjacent) / static_cast<double>(counted) > 0.9);
}

TEST_CASE("covariates split into informative and distractor halves") {
    const SceneSpec spec = base_spec();
    const Grid truth = gen_field(spec, 0.0);
    const auto covs = gen_covariates(spec, truth);
    REQUIRE(covs.size() == 6);
    const auto truth_values = grid_values(truth);

    double worst_informative = 1.0, best_distractor = 0.0;
    for (int k = 0; k < 6; ++k) {
        char tag[16];
        std::snprintf(tag, sizeof tag, "cov_%02d", k);
        REQUIRE(covs.count(tag) == 1);
        const Grid& g = covs.at(tag);
        CHECK(coverage(g) == 1.0);
        const double corr =
            std::abs(oracles::pearson(grid_values(g), truth_values));
        if (k < 3)
            worst_informative = std::min(worst_informative, corr);
        else
            best_distractor = std::max(best_distractor, corr);
    }
    CHECK(worst_informative > best_distractor);
    CHECK(best_distractor < 0.1);

    SceneSpec clean = spec;
    clean.noise_sd = 0.0;
    const auto exact = gen_covariates(clean, truth);
    CHECK(oracles::pearson(grid_values(exact.at("cov_00")), truth_values) ==
          doctest::Approx(1.0).epsilon(1e-9));

    CHECK(oracles::grids_identical(gen_covariates(spec, truth).at("cov_03"),
                                   covs.at("cov_03"))); // stable tags, stable values
}

TEST_CASE("gen_scene composes a consistent bundle") {
    SceneSpec spec = base_spec();
    spec.n_cols = 64;
    spec.n_rows = 64;
    const SceneBundle scene = gen_scene(spec);

    CHECK(coverage(scene.truth_047) == 1.0);
    CHECK(coverage(scene.truth_055) == 1.0);
    CHECK(scene.stations.size() == 50);
    CHECK(scene.covariates.size() == 6);

    // observed equals truth wherever valid; both bands share one mask
    double c47 = coverage(scene.observed_047);
    CHECK(c47 == coverage(scene.observed_055));
    CHECK(c47 == doctest::Approx(0.4).epsilon(0.13));
    for (int row = 0; row < 64; ++row)
        for (int col = 0; col < 64; ++col) {
            CHECK(scene.observed_047.valid(col, row) ==
                  scene.observed_055.valid(col, row));
            if (scene.observed_047.valid(col, row)) {
                CHECK(scene.observed_047.value(col, row) ==
                      scene.truth_047.value(col, row));
                CHECK(scene.observed_055.value(col, row) ==
                      scene.truth_055.value(col, row));
            }
        }

    for (const StationSite& s : scene.stations) {
        CHECK(s.x >= 0.0);
        CHECK(s.x <= 64.0 * spec.cell_size);
        CHECK(scene.truth_047.cell_at(s.x, s.y).has_value());
    }

    // smoke grid values stay in the ordinal range
    for (int row = 0; row < 64; ++row)
        for (int col = 0; col < 64; ++col) {
            CHECK(scene.smoke.value(col, row) >= 0.0);
            CHECK(scene.smoke.value(col, row) <= 3.0);
        }

    // full determinism of the bundle
    const SceneBundle again = gen_scene(spec);
    CHECK(oracles::grids_identical(again.observed_047, scene.observed_047));
    CHECK(oracles::grids_identical(again.smoke, scene.smoke));
    CHECK(again.stations.size() == scene.stations.size());
    for (std::size_t i = 0; i < scene.stations.size(); ++i) {
        CHECK(again.stations[i].site_id == scene.stations[i].site_id);
        CHECK(again.stations[i].x == scene.stations[i].x);
    }
}

TEST_CASE("write_scene_set produces the pipeline layout") {
    SceneSpec spec = base_spec();
    spec.n_cols = 32;
    spec.n_rows = 32;
    spec.n_stations = 10;
    const auto root = std::filesystem::temp_directory_path() / "aodfill_scene_set";
    std::filesystem::remove_all(root);
    write_scene_set(spec, 3, root);

    CHECK(std::filesystem::exists(root / "stations.csv"));
    for (const char* day : {"2014-01-01", "2014-01-02", "2014-01-03"}) {
        CHECK(std::filesystem::exists(root / day / "AOD047.asc"));
        CHECK(std::filesystem::exists(root / day / "AOD055.asc"));
        CHECK(std::filesystem::exists(root / day / "cov_05.asc"));
        CHECK(std::filesystem::exists(root / (std::string("smoke_") + day + ".geojson")));
    }
    CHECK(read_stations_csv(root / "stations.csv").size() == 10);

    // different days get different masks
    const Grid d1 = read_ascii_grid(root / "2014-01-01" / "AOD047.asc");
    const Grid d2 = read_ascii_grid(root / "2014-01-02" / "AOD047.asc");
    CHECK(!oracles::grids_identical(d1, d2));

    CHECK_THROWS_AS(write_scene_set(spec, 0, root), std::invalid_argument);

    SceneSpec bad = spec;
    bad.missing_fraction = 1.5;
    CHECK_THROWS_AS(gen_scene(bad), std::invalid_argument);
}
