#include "aodfill/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "aodfill/ascii_grid.hpp"
#include "aodfill/rng.hpp"

namespace aodfill {

namespace {

// Substream labels under the scene seed.
constexpr std::uint64_t kFieldSharedStream = 11;
constexpr std::uint64_t kFieldBandStream = 12;
constexpr std::uint64_t kMaskStream = 13;
constexpr std::uint64_t kCovariateStream = 14;
constexpr std::uint64_t kSmokeStream = 15;
constexpr std::uint64_t kStationStream = 16;
constexpr std::uint64_t kDayStream = 17;

// Variance share of the band-common component in gen_field.
constexpr double kSharedVarianceShare = 0.98;

std::vector<double> white_noise(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// Separable Gaussian blur, kernel truncated at 3 sigma and renormalized
// over the in-bounds taps at the borders. sigma == 0 leaves the field as is.
void gaussian_smooth(std::vector<double>& field, int n_cols, int n_rows,
                     double sigma) {
    if (sigma <= 0.0) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i)
        kernel[static_cast<std::size_t>(i + radius)] =
            std::exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));

    std::vector<double> tmp(field.size());
    auto pass = [&](const std::vector<double>& src, std::vector<double>& dst,
                    bool horizontal) {
        for (int row = 0; row < n_rows; ++row) {
            for (int col = 0; col < n_cols; ++col) {
                double sum = 0.0, weight = 0.0;
                for (int off = -radius; off <= radius; ++off) {
                    const int c = horizontal ? col + off : col;
                    const int r = horizontal ? row : row + off;
                    if (c < 0 || c >= n_cols || r < 0 || r >= n_rows) continue;
                    const double w = kernel[static_cast<std::size_t>(off + radius)];
                    sum += w * src[static_cast<std::size_t>(r) *
                                       static_cast<std::size_t>(n_cols) +
                                   static_cast<std::size_t>(c)];
                    weight += w;
                }
                dst[static_cast<std::size_t>(row) *
                        static_cast<std::size_t>(n_cols) +
                    static_cast<std::size_t>(col)] = sum / weight;
            }
        }
    };
    pass(field, tmp, true);
    pass(tmp, field, false);
}

void standardize(std::vector<double>& field) {
    double mean = 0.0;
    for (const double v : field) mean += v;
    mean /= static_cast<double>(field.size());
    double var = 0.0;
    for (const double v : field) var += (v - mean) * (v - mean);
    var /= static_cast<double>(field.size());
    const double sd = std::sqrt(var);
    if (sd == 0.0) return;
    for (double& v : field) v = (v - mean) / sd;
}

std::vector<double> smooth_unit_field(const SceneSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> field = white_noise(
        static_cast<std::size_t>(spec.n_cols) * static_cast<std::size_t>(spec.n_rows),
        rng);
    gaussian_smooth(field, spec.n_cols, spec.n_rows, spec.correlation_length);
    standardize(field);
    return field;
}

Grid grid_shell(const SceneSpec& spec, std::string tag) {
    return Grid(spec.n_cols, spec.n_rows, 0.0,
                static_cast<double>(spec.n_rows) * spec.cell_size, spec.cell_size,
                std::move(tag));
}

void fill_all(Grid& g, const std::vector<double>& values) {
    for (int row = 0; row < g.n_rows(); ++row)
        for (int col = 0; col < g.n_cols(); ++col)
            g.set(col, row, values[g.index(col, row)]);
}

} // namespace

void SceneSpec::validate() const {
    if (n_cols < 1 || n_rows < 1)
        throw std::invalid_argument("scene dimensions must be >= 1");
    if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
    if (correlation_length < 0.0)
        throw std::invalid_argument("correlation_length must be >= 0");
    if (!(missing_fraction > 0.0) || !(missing_fraction < 1.0))
        throw std::invalid_argument("missing_fraction must be in (0, 1)");
    if (n_covariates < 0) throw std::invalid_argument("n_covariates must be >= 0");
    if (noise_sd < 0.0) throw std::invalid_argument("noise_sd must be >= 0");
    if (n_stations < 0) throw std::invalid_argument("n_stations must be >= 0");
}

Grid gen_field(const SceneSpec& spec, double band_offset) {
    spec.validate();
    const std::vector<double> shared =
        smooth_unit_field(spec, derive_seed(spec.seed, kFieldSharedStream));
    const std::vector<double> band = smooth_unit_field(
        spec, derive_seed(spec.seed, kFieldBandStream,
                          std::bit_cast<std::uint64_t>(band_offset)));

    const double w_shared = std::sqrt(kSharedVarianceShare);
    const double w_band = std::sqrt(1.0 - kSharedVarianceShare);
    std::vector<double> blend(shared.size());
    for (std::size_t i = 0; i < blend.size(); ++i)
        blend[i] = w_shared * shared[i] + w_band * band[i];
    standardize(blend);

    const double mean = 300.0 + band_offset;
    for (double& v : blend) v = std::max(0.0, mean + 100.0 * v);

    Grid g = grid_shell(spec, band_offset == 0.0 ? "AOD047" : "AOD055");
    fill_all(g, blend);
    return g;
}

std::vector<char> gen_mask(const SceneSpec& spec) {
    spec.validate();
    std::vector<double> field =
        smooth_unit_field(spec, derive_seed(spec.seed, kMaskStream));
    const std::size_t n = field.size();
    const auto target =
        static_cast<std::size_t>(std::llround(spec.missing_fraction *
                                              static_cast<double>(n)));
    std::vector<char> mask(n, 0);
    if (target == 0) return mask;
    std::vector<double> sorted = field;
    std::nth_element(sorted.begin(), sorted.begin() + (target - 1), sorted.end());
    const double threshold = sorted[target - 1];
    for (std::size_t i = 0; i < n; ++i) mask[i] = field[i] <= threshold ? 1 : 0;
    return mask;
}

std::map<std::string, Grid> gen_covariates(const SceneSpec& spec,
                                           const Grid& truth) {
    spec.validate();
    std::map<std::string, Grid> out;
    const int n_informative = (spec.n_covariates + 1) / 2;
    for (int k = 0; k < spec.n_covariates; ++k) {
        char tag[16];
        std::snprintf(tag, sizeof tag, "cov_%02d", k);
        Rng rng(derive_seed(spec.seed, kCovariateStream,
                            static_cast<std::uint64_t>(k)));
        Grid g = grid_shell(spec, tag);
        if (k < n_informative) {
            // slope decays with k so the informative covariates differ in
            // strength
            const double slope = std::max(0.5, 1.0 - 0.2 * k);
            for (int row = 0; row < g.n_rows(); ++row)
                for (int col = 0; col < g.n_cols(); ++col)
                    g.set(col, row, truth.value(col, row) * slope +
                                        spec.noise_sd * rng.normal());
        } else {
            for (int row = 0; row < g.n_rows(); ++row)
                for (int col = 0; col < g.n_cols(); ++col)
                    g.set(col, row, 300.0 + 100.0 * rng.normal());
        }
        out.emplace(tag, std::move(g));
    }
    return out;
}

std::vector<StationSite> gen_stations(const SceneSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, kStationStream));
    const double width = static_cast<double>(spec.n_cols) * spec.cell_size;
    const double height = static_cast<double>(spec.n_rows) * spec.cell_size;
    const double y_top = height;
    std::vector<StationSite> stations;
    stations.reserve(static_cast<std::size_t>(spec.n_stations));
    for (int i = 0; i < spec.n_stations; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "S%04d", i);
        StationSite s;
        s.site_id = id;
        s.x = rng.next_double() * width;
        s.y = y_top - rng.next_double() * height;
        stations.push_back(std::move(s));
    }
    return stations;
}

namespace {

std::vector<SmokePolygon> gen_smoke_polygons(const SceneSpec& spec) {
    Rng rng(derive_seed(spec.seed, kSmokeStream));
    const double width = static_cast<double>(spec.n_cols) * spec.cell_size;
    const double height = static_cast<double>(spec.n_rows) * spec.cell_size;
    const auto count = static_cast<int>(rng.uniform_int(0, 3));
    std::vector<SmokePolygon> polys;
    for (int i = 0; i < count; ++i) {
        double x0 = rng.next_double() * width, x1 = rng.next_double() * width;
        double y0 = rng.next_double() * height, y1 = rng.next_double() * height;
        if (x1 < x0) std::swap(x0, x1);
        if (y1 < y0) std::swap(y0, y1);
        SmokePolygon poly;
        poly.density = static_cast<SmokeDensity>(rng.uniform_int(1, 3));
        poly.exterior = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
        polys.push_back(std::move(poly));
    }
    return polys;
}

} // namespace

SceneBundle gen_scene(const SceneSpec& spec) {
    spec.validate();
    SceneBundle scene;
    scene.truth_047 = gen_field(spec, 0.0);
    scene.truth_055 = gen_field(spec, -30.0);

    const std::vector<char> mask = gen_mask(spec);
    auto masked = [&](const Grid& truth, const char* tag) {
        Grid g = truth.like(tag);
        for (int row = 0; row < g.n_rows(); ++row)
            for (int col = 0; col < g.n_cols(); ++col)
                if (!mask[g.index(col, row)])
                    g.set(col, row, truth.value(col, row));
        return g;
    };
    scene.observed_047 = masked(scene.truth_047, "AOD047");
    scene.observed_055 = masked(scene.truth_055, "AOD055");

    scene.covariates = gen_covariates(spec, scene.truth_047);
    scene.smoke_polygons = gen_smoke_polygons(spec);
    scene.smoke = rasterize_smoke(scene.smoke_polygons, scene.truth_047);
    scene.stations = gen_stations(spec);
    return scene;
}

void write_scene_set(const SceneSpec& spec, int n_days,
                     const std::filesystem::path& input_root) {
    spec.validate();
    if (n_days < 1) throw std::invalid_argument("n_days must be >= 1");
    std::filesystem::create_directories(input_root);

    // One station list for the whole set: sites are fixed locations that
    // every day shares, which is what the spatial CV blocking relies on.
    write_stations_csv(gen_stations(spec), input_root / "stations.csv");

    DateStamp day = spec.date;
    for (int d = 0; d < n_days; ++d) {
        SceneSpec day_spec = spec;
        day_spec.date = day;
        day_spec.seed = derive_seed(spec.seed, kDayStream,
                                    static_cast<std::uint64_t>(day.serial()));
        const SceneBundle scene = gen_scene(day_spec);

        const std::filesystem::path day_dir = input_root / day.to_string();
        std::filesystem::create_directories(day_dir);
        write_ascii_grid(scene.observed_047, day_dir / "AOD047.asc");
        write_ascii_grid(scene.observed_055, day_dir / "AOD055.asc");
        write_ascii_grid(scene.truth_047, day_dir / "truth_AOD047.asc");
        write_ascii_grid(scene.truth_055, day_dir / "truth_AOD055.asc");
        for (const auto& [tag, grid] : scene.covariates)
            write_ascii_grid(grid, day_dir / (tag + ".asc"));
        write_smoke_geojson(scene.smoke_polygons,
                            input_root / ("smoke_" + day.to_string() + ".geojson"));
        day = day.next_day();
    }
}

} // namespace aodfill
