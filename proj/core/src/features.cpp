#include "aodfill/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "aodfill/errors.hpp"
#include "aodfill/text_format.hpp"

namespace aodfill {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

FeatureSchema::FeatureSchema(std::vector<std::string> names)
    : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second)
            throw std::invalid_argument("duplicate feature name '" + names_[i] + "'");
    }
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const char* to_string(SmokeDensity d) {
    switch (d) {
        case SmokeDensity::Light: return "Light";
        case SmokeDensity::Medium: return "Medium";
        case SmokeDensity::Heavy: return "Heavy";
    }
    return "Light";
}

SmokeDensity smoke_density_from_string(const std::string& label) {
    std::string s = label;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "light") return SmokeDensity::Light;
    if (s == "medium") return SmokeDensity::Medium;
    if (s == "heavy") return SmokeDensity::Heavy;
    throw InputError("unknown smoke density label '" + label + "'");
}

std::array<double, 5> temporal_encoding(const DateStamp& d) {
    const double month_angle = kTwoPi * static_cast<double>(d.month) / 12.0;
    const double year_len = static_cast<double>(days_in_year(d.year));
    const double doy_angle = kTwoPi * static_cast<double>(d.day_of_year) / year_len;
    return {static_cast<double>(d.year), std::cos(month_angle),
            std::sin(month_angle), std::cos(doy_angle), std::sin(doy_angle)};
}

std::array<double, 2> spatial_encoding(double x, double y) { return {x, y}; }

namespace {

void validate_ring(const std::vector<Point>& ring) {
    if (ring.size() < 4)
        throw InputError("polygon ring must have at least 4 vertices");
    if (ring.front().x != ring.back().x || ring.front().y != ring.back().y)
        throw InputError("polygon ring is not closed (first vertex != last)");
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
    const double cross =
        (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross != 0.0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

// Even-odd rule over all rings (exterior + holes); a point exactly on any
// edge is inside.
bool polygon_contains(const SmokePolygon& poly, const Point& p) {
    bool inside = false;
    auto scan_ring = [&](const std::vector<Point>& ring) -> bool {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const Point& a = ring[i];
            const Point& b = ring[i + 1];
            if (on_segment(p, a, b)) return true;
            if ((a.y > p.y) != (b.y > p.y)) {
                const double x_int = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x_int) inside = !inside;
            }
        }
        return false;
    };
    if (scan_ring(poly.exterior)) return true;
    for (const auto& hole : poly.holes)
        if (scan_ring(hole)) return true;
    return inside;
}

struct Bounds {
    double min_x, min_y, max_x, max_y;
};

Bounds polygon_bounds(const SmokePolygon& poly) {
    Bounds b{poly.exterior[0].x, poly.exterior[0].y, poly.exterior[0].x,
             poly.exterior[0].y};
    for (const Point& p : poly.exterior) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

} // namespace

Grid rasterize_smoke(std::span<const SmokePolygon> polygons, const Grid& tmpl) {
    for (const auto& poly : polygons) {
        validate_ring(poly.exterior);
        for (const auto& hole : poly.holes) validate_ring(hole);
    }
    Grid out = tmpl.like(kSmokeFeature);
    for (int row = 0; row < out.n_rows(); ++row)
        for (int col = 0; col < out.n_cols(); ++col) out.set(col, row, 0.0);

    for (const auto& poly : polygons) {
        const Bounds b = polygon_bounds(poly);
        const double ordinal = static_cast<double>(static_cast<int>(poly.density));
        for (int row = 0; row < out.n_rows(); ++row) {
            const double cy = out.row_center_y(row);
            if (cy < b.min_y || cy > b.max_y) continue;
            for (int col = 0; col < out.n_cols(); ++col) {
                const double cx = out.col_center_x(col);
                if (cx < b.min_x || cx > b.max_x) continue;
                if (out.value(col, row) >= ordinal) continue;
                if (polygon_contains(poly, {cx, cy})) out.set(col, row, ordinal);
            }
        }
    }
    return out;
}

DateStamp associate_ndvi(const DateStamp& target,
                         std::span<const DateStamp> available) {
    if (available.empty())
        throw std::invalid_argument("associate_ndvi: empty date list");
    const std::int64_t t = target.serial();
    const DateStamp* best = &available[0];
    std::int64_t best_dist = std::llabs(available[0].serial() - t);
    for (const DateStamp& d : available.subspan(1)) {
        const std::int64_t dist = std::llabs(d.serial() - t);
        if (dist < best_dist ||
            (dist == best_dist && d.serial() < best->serial())) {
            best = &d;
            best_dist = dist;
        }
    }
    return *best;
}

FeatureSchema build_feature_schema(std::span<const std::string> covariate_tags,
                                   bool with_filter) {
    std::vector<std::string> names(covariate_tags.begin(), covariate_tags.end());
    names.push_back(kSmokeFeature);
    names.insert(names.end(),
                 {"year", "cos_month", "sin_month", "cos_doy", "sin_doy",
                  "coord_x", "coord_y"});
    if (with_filter) {
        names.push_back(kNbrAod047);
        names.push_back(kNbrAod055);
    }
    return FeatureSchema(std::move(names));
}

std::map<std::string, Grid> assemble_feature_grids(
    const std::map<std::string, Grid>& covariates, const Grid& smoke,
    const std::optional<std::pair<Grid, Grid>>& aod_filtered,
    std::span<const std::string> covariate_tags) {
    std::map<std::string, Grid> out;
    for (const std::string& tag : covariate_tags) {
        const auto it = covariates.find(tag);
        if (it == covariates.end())
            throw InputError("missing required covariate '" + tag + "'");
        if (!it->second.same_geometry(smoke))
            throw InputError("covariate '" + tag +
                             "' does not match the template geometry");
        out.emplace(tag, it->second);
    }
    out.emplace(kSmokeFeature, smoke);
    if (aod_filtered) {
        if (!aod_filtered->first.same_geometry(smoke) ||
            !aod_filtered->second.same_geometry(smoke))
            throw InputError("filtered AOD grids do not match the template geometry");
        out.emplace(kNbrAod047, aod_filtered->first);
        out.emplace(kNbrAod055, aod_filtered->second);
    }
    return out;
}

FeatureAssembler::FeatureAssembler(const FeatureSchema& schema,
                                   const std::map<std::string, Grid>& feature_grids,
                                   const DateStamp& day, const Grid& geometry)
    : schema_(&schema), geometry_(&geometry), day_encoding_(temporal_encoding(day)) {
    bindings_.reserve(schema.size());
    for (const std::string& name : schema.names()) {
        Binding b{Source::GridValue, nullptr};
        if (name == "year") b.source = Source::Year;
        else if (name == "cos_month") b.source = Source::CosMonth;
        else if (name == "sin_month") b.source = Source::SinMonth;
        else if (name == "cos_doy") b.source = Source::CosDoy;
        else if (name == "sin_doy") b.source = Source::SinDoy;
        else if (name == "coord_x") b.source = Source::CoordX;
        else if (name == "coord_y") b.source = Source::CoordY;
        else {
            const auto it = feature_grids.find(name);
            if (it == feature_grids.end())
                throw InputError("no grid supplied for feature '" + name + "'");
            if (!it->second.same_geometry(geometry))
                throw InputError("feature grid '" + name +
                                 "' does not match the template geometry");
            b.grid = &it->second;
        }
        bindings_.push_back(b);
    }
}

bool FeatureAssembler::at_cell(int col, int row, std::span<double> out) const {
    bool all_valid = true;
    for (std::size_t i = 0; i < bindings_.size(); ++i) {
        const Binding& b = bindings_[i];
        switch (b.source) {
            case Source::GridValue:
                if (b.grid->valid(col, row)) {
                    out[i] = b.grid->value(col, row);
                } else {
                    out[i] = 0.0;
                    all_valid = false;
                }
                break;
            case Source::Year: out[i] = day_encoding_[0]; break;
            case Source::CosMonth: out[i] = day_encoding_[1]; break;
            case Source::SinMonth: out[i] = day_encoding_[2]; break;
            case Source::CosDoy: out[i] = day_encoding_[3]; break;
            case Source::SinDoy: out[i] = day_encoding_[4]; break;
            case Source::CoordX: out[i] = geometry_->col_center_x(col); break;
            case Source::CoordY: out[i] = geometry_->row_center_y(row); break;
        }
    }
    return all_valid;
}

std::vector<SampleRow> extract_training_rows(
    const DateStamp& day, const Grid& aod047, const Grid& aod055,
    const std::map<std::string, Grid>& feature_grids,
    std::span<const StationSite> stations, const FeatureSchema& schema) {
    if (!aod047.same_geometry(aod055))
        throw std::invalid_argument("AOD band grids must share geometry");
    const FeatureAssembler assembler(schema, feature_grids, day, aod047);
    std::vector<SampleRow> rows;
    std::vector<double> scratch(schema.size());
    for (const StationSite& site : stations) {
        const auto cell = aod047.cell_at(site.x, site.y);
        if (!cell) continue;
        if (!aod047.valid(cell->col, cell->row) ||
            !aod055.valid(cell->col, cell->row))
            continue;
        if (!assembler.at_cell(cell->col, cell->row, scratch)) continue;
        SampleRow row;
        row.site_id = site.site_id;
        row.date = day;
        row.x = site.x;
        row.y = site.y;
        row.target_047 = aod047.value(cell->col, cell->row);
        row.target_055 = aod055.value(cell->col, cell->row);
        row.features = scratch;
        row.feature_validity.assign(schema.size(), 1);
        rows.push_back(std::move(row));
    }
    return rows;
}

// --- CSV ------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

} // namespace

void write_sample_table_csv(const SampleTable& table,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write table " + path.string());
    out << "site_id,date,x,y,aod047,aod055";
    for (const std::string& name : table.schema.names()) out << ',' << name;
    out << '\n';
    for (const SampleRow& row : table.rows) {
        if (row.features.size() != table.schema.size())
            throw std::invalid_argument("row feature count does not match schema");
        for (const char v : row.feature_validity)
            if (!v)
                throw std::invalid_argument(
                    "sample tables cannot represent missing features");
        out << row.site_id << ',' << row.date.to_string() << ','
            << format_double(row.x) << ',' << format_double(row.y) << ','
            << format_double(row.target_047) << ','
            << format_double(row.target_055);
        for (const double f : row.features) out << ',' << format_double(f);
        out << '\n';
    }
    if (!out) throw InputError("write failed for " + path.string());
}

SampleTable read_sample_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open table " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw InputError("empty table file " + path.string());
    const auto header = split_csv_line(line);
    const std::vector<std::string> fixed = {"site_id", "date", "x",
                                            "y",       "aod047", "aod055"};
    if (header.size() < fixed.size())
        throw InputError("table header too short in " + path.string());
    for (std::size_t i = 0; i < fixed.size(); ++i)
        if (header[i] != fixed[i])
            throw InputError("unexpected table column '" + header[i] + "' in " +
                             path.string());
    SampleTable table;
    table.schema = FeatureSchema(
        std::vector<std::string>(header.begin() + fixed.size(), header.end()));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw InputError("wrong field count at " + path.string() + ":" +
                             std::to_string(line_no));
        SampleRow row;
        row.site_id = fields[0];
        row.date = DateStamp::parse(fields[1]);
        auto num = [&](std::size_t i) {
            double v;
            if (!parse_double(fields[i], v))
                throw InputError("bad number '" + fields[i] + "' at " +
                                 path.string() + ":" + std::to_string(line_no));
            return v;
        };
        row.x = num(2);
        row.y = num(3);
        row.target_047 = num(4);
        row.target_055 = num(5);
        row.features.resize(table.schema.size());
        for (std::size_t i = 0; i < row.features.size(); ++i)
            row.features[i] = num(fixed.size() + i);
        row.feature_validity.assign(table.schema.size(), 1);
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::vector<StationSite> read_stations_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open station list " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw InputError("empty station file " + path.string());
    const auto header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "site_id" || header[1] != "x" ||
        header[2] != "y")
        throw InputError("station header must be site_id,x,y in " + path.string());
    std::vector<StationSite> stations;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw InputError("wrong field count at " + path.string() + ":" +
                             std::to_string(line_no));
        StationSite s;
        s.site_id = fields[0];
        if (!parse_double(fields[1], s.x) || !parse_double(fields[2], s.y))
            throw InputError("bad coordinate at " + path.string() + ":" +
                             std::to_string(line_no));
        stations.push_back(std::move(s));
    }
    return stations;
}

void write_stations_csv(std::span<const StationSite> stations,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write station list " + path.string());
    out << "site_id,x,y\n";
    for (const StationSite& s : stations)
        out << s.site_id << ',' << format_double(s.x) << ',' << format_double(s.y)
            << '\n';
    if (!out) throw InputError("write failed for " + path.string());
}

} // namespace aodfill
