#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aodfill/date.hpp"
#include "aodfill/features.hpp"
#include "aodfill/grid.hpp"

namespace aodfill {

/// Parameters for one synthetic day. Everything downstream is a pure
/// function of this struct.
struct SceneSpec {
    int n_cols = 128;
    int n_rows = 128;
    double cell_size = 1000.0;      // map units per cell
    double correlation_length = 8.0; // in cells; 0 = white noise
    double missing_fraction = 0.6;   // target invalid fraction, (0, 1)
    int n_covariates = 6;            // first half informative, rest distractors
    double noise_sd = 60.0;          // additive noise on informative covariates
    int n_stations = 80;
    DateStamp date = DateStamp::from_ymd(2014, 1, 1);
    std::uint64_t seed = 0;

    void validate() const; // throws std::invalid_argument
};

struct SceneBundle {
    Grid truth_047;
    Grid truth_055;
    Grid observed_047;
    Grid observed_055;
    std::map<std::string, Grid> covariates;
    Grid smoke;
    std::vector<SmokePolygon> smoke_polygons;
    std::vector<StationSite> stations;

    SceneBundle()
        : truth_047(1, 1, 0, 1, 1), truth_055(1, 1, 0, 1, 1),
          observed_047(1, 1, 0, 1, 1), observed_055(1, 1, 0, 1, 1),
          smoke(1, 1, 0, 1, 1) {}
};

/// Spatially correlated positive field: white noise smoothed by a Gaussian
/// kernel (sigma = correlation_length, truncated at 3 sigma), affinely
/// mapped to mean 300 + band_offset and sd 100, floored at 0. The two AOD
/// bands share most of their spatial structure (a fixed blend of a common
/// component and a band-keyed component), mirroring how strongly the real
/// bands co-vary.
Grid gen_field(const SceneSpec& spec, double band_offset);

/// Cloud-like missingness: a smoothed noise field thresholded at the
/// empirical quantile of missing_fraction, giving contiguous invalid blobs
/// whose achieved fraction matches the target. true = missing.
std::vector<char> gen_mask(const SceneSpec& spec);

/// n_covariates fully valid grids named cov_00, cov_01, ...; the first
/// ceil(n/2) are truth * a_k + N(0, noise_sd) with a fixed per-tag slope,
/// the rest are white-noise distractors.
std::map<std::string, Grid> gen_covariates(const SceneSpec& spec,
                                           const Grid& truth);

/// n_stations uniform points inside the extent, ids S0000, S0001, ...
std::vector<StationSite> gen_stations(const SceneSpec& spec);

/// Composes the two truth fields (band offsets 0 and -30), one shared
/// missingness mask, covariates derived from truth_047, a handful of
/// random smoke rectangles, and the station list.
SceneBundle gen_scene(const SceneSpec& spec);

/// Writes an n_days scene set in the pipeline's input layout:
///   root/stations.csv                   (one list, shared by all days)
///   root/smoke_<date>.geojson
///   root/<date>/AOD047.asc, AOD055.asc, cov_XX.asc, truth_AOD047.asc, ...
/// Day d uses a seed derived from (spec.seed, date), starting at spec.date.
void write_scene_set(const SceneSpec& spec, int n_days,
                     const std::filesystem::path& input_root);

} // namespace aodfill
