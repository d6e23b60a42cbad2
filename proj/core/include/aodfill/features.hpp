#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aodfill/date.hpp"
#include "aodfill/grid.hpp"

namespace aodfill {

/// Ordered, unique feature names; the canonical column order for every
/// sample row and model input. Serialized with every trained model.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    std::optional<std::size_t> index_of(const std::string& name) const;

    friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
        return a.names_ == b.names_;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class SmokeDensity : int { Light = 1, Medium = 2, Heavy = 3 };

const char* to_string(SmokeDensity d);
SmokeDensity smoke_density_from_string(const std::string& label); // case-insensitive

/// Closed exterior ring plus optional hole rings (first vertex == last,
/// at least 4 vertices each).
struct SmokePolygon {
    std::vector<Point> exterior;
    std::vector<std::vector<Point>> holes;
    SmokeDensity density = SmokeDensity::Light;
};

struct StationSite {
    std::string site_id;
    double x = 0.0;
    double y = 0.0;
};

struct SampleRow {
    std::string site_id;
    DateStamp date;
    double x = 0.0; // station coordinates
    double y = 0.0;
    double target_047 = 0.0; // scaled AOD (x1000)
    double target_055 = 0.0;
    std::vector<double> features;      // schema order
    std::vector<char> feature_validity; // same length
};

struct SampleTable {
    FeatureSchema schema;
    std::vector<SampleRow> rows;
};

/// [year, cos_month, sin_month, cos_doy, sin_doy]; the cyclical pairs use
/// month/12 and day_of_year over the actual year length.
std::array<double, 5> temporal_encoding(const DateStamp& d);

/// Coordinates pass through unchanged, in (x, y) order.
std::array<double, 2> spatial_encoding(double x, double y);

/// Per cell, the maximum density ordinal among polygons containing the
/// cell center (0 where none); all cells valid. Point-in-polygon is
/// even-odd; a center exactly on an edge counts as inside.
Grid rasterize_smoke(std::span<const SmokePolygon> polygons, const Grid& tmpl);

/// The available date nearest to target (by whole days); ties go to the
/// earlier date. Throws on an empty list.
DateStamp associate_ndvi(const DateStamp& target,
                         std::span<const DateStamp> available);

/// Canonical feature order: covariate tags (as given), smoke, the five
/// temporal encodings, the two coordinates, then the two neighbor-mean AOD
/// features last when with_filter is set.
FeatureSchema build_feature_schema(std::span<const std::string> covariate_tags,
                                   bool with_filter);

inline constexpr const char* kSmokeFeature = "smoke";
inline constexpr const char* kNbrAod047 = "nbr_aod047";
inline constexpr const char* kNbrAod055 = "nbr_aod055";

/// Grid-backed features keyed by feature name: every covariate, the smoke
/// ordinal, and (when supplied) the two filtered-AOD neighbor features.
/// Temporal/spatial encodings are computed lazily per cell, never stored.
/// Throws when a required covariate tag is absent or geometries differ.
std::map<std::string, Grid> assemble_feature_grids(
    const std::map<std::string, Grid>& covariates, const Grid& smoke,
    const std::optional<std::pair<Grid, Grid>>& aod_filtered,
    std::span<const std::string> covariate_tags);

/// Evaluates one schema-ordered feature vector per cell, combining the
/// grid-backed features with the lazily computed encodings. Coordinate
/// features use the cell center.
class FeatureAssembler {
public:
    FeatureAssembler(const FeatureSchema& schema,
                     const std::map<std::string, Grid>& feature_grids,
                     const DateStamp& day, const Grid& geometry);

    /// Fills `out` (schema length); returns false if any feature is invalid.
    bool at_cell(int col, int row, std::span<double> out) const;

    const FeatureSchema& schema() const { return *schema_; }

private:
    enum class Source { GridValue, Year, CosMonth, SinMonth, CosDoy, SinDoy, CoordX, CoordY };
    struct Binding {
        Source source;
        const Grid* grid = nullptr;
    };
    const FeatureSchema* schema_;
    const Grid* geometry_;
    std::vector<Binding> bindings_;
    std::array<double, 5> day_encoding_;
};

/// One row per station whose containing cell has both AOD bands valid and
/// every schema feature valid; rows with any missing feature are dropped.
/// Stations outside the extent produce no row. Row order follows the
/// station list.
std::vector<SampleRow> extract_training_rows(
    const DateStamp& day, const Grid& aod047, const Grid& aod055,
    const std::map<std::string, Grid>& feature_grids,
    std::span<const StationSite> stations, const FeatureSchema& schema);

// --- CSV interchange ---------------------------------------------------

/// Header: site_id,date,x,y,aod047,aod055,<feature names...>. Every row
/// must be feature-complete; missing values are not representable.
void write_sample_table_csv(const SampleTable& table,
                            const std::filesystem::path& path);
SampleTable read_sample_table_csv(const std::filesystem::path& path);

/// Header: site_id,x,y
std::vector<StationSite> read_stations_csv(const std::filesystem::path& path);
void write_stations_csv(std::span<const StationSite> stations,
                        const std::filesystem::path& path);

// --- GeoJSON interchange -----------------------------------------------

/// FeatureCollection of Polygon/MultiPolygon features with a "Density"
/// property in {Light, Medium, Heavy} (value match is case-insensitive).
std::vector<SmokePolygon> read_smoke_geojson(const std::filesystem::path& path);
void write_smoke_geojson(std::span<const SmokePolygon> polygons,
                         const std::filesystem::path& path);

} // namespace aodfill
