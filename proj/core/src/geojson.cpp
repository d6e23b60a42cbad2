#include <fstream>

#include "aodfill/errors.hpp"
#include "aodfill/features.hpp"
#include "json.hpp"

namespace aodfill {

namespace {

using nlohmann::ordered_json;

std::vector<Point> parse_ring(const nlohmann::json& ring) {
    if (!ring.is_array())
        throw InputError("GeoJSON ring is not an array");
    std::vector<Point> out;
    out.reserve(ring.size());
    for (const auto& pos : ring) {
        if (!pos.is_array() || pos.size() < 2)
            throw InputError("GeoJSON position must be [x, y]");
        out.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    if (out.size() < 4 || out.front().x != out.back().x ||
        out.front().y != out.back().y)
        throw InputError("GeoJSON ring must be closed with at least 4 vertices");
    return out;
}

SmokePolygon parse_polygon(const nlohmann::json& rings, SmokeDensity density) {
    if (!rings.is_array() || rings.empty())
        throw InputError("GeoJSON Polygon has no rings");
    SmokePolygon poly;
    poly.density = density;
    poly.exterior = parse_ring(rings[0]);
    for (std::size_t i = 1; i < rings.size(); ++i)
        poly.holes.push_back(parse_ring(rings[i]));
    return poly;
}

ordered_json ring_to_json(const std::vector<Point>& ring) {
    ordered_json out = ordered_json::array();
    for (const Point& p : ring) out.push_back({p.x, p.y});
    return out;
}

} // namespace

std::vector<SmokePolygon> read_smoke_geojson(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open smoke file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError("bad GeoJSON in " + path.string() + ": " + e.what());
    }
    if (!doc.contains("features") || !doc["features"].is_array())
        throw InputError("GeoJSON FeatureCollection expected in " + path.string());

    std::vector<SmokePolygon> polygons;
    for (const auto& feature : doc["features"]) {
        if (!feature.contains("properties") ||
            !feature["properties"].contains("Density"))
            throw InputError("smoke feature without Density property in " +
                             path.string());
        const SmokeDensity density = smoke_density_from_string(
            feature["properties"]["Density"].get<std::string>());
        if (!feature.contains("geometry") || feature["geometry"].is_null())
            throw InputError("smoke feature without geometry in " + path.string());
        const auto& geom = feature["geometry"];
        const std::string type = geom.value("type", "");
        if (type == "Polygon") {
            polygons.push_back(parse_polygon(geom["coordinates"], density));
        } else if (type == "MultiPolygon") {
            for (const auto& member : geom["coordinates"])
                polygons.push_back(parse_polygon(member, density));
        } else {
            throw InputError("unsupported smoke geometry type '" + type + "' in " +
                             path.string());
        }
    }
    return polygons;
}

void write_smoke_geojson(std::span<const SmokePolygon> polygons,
                         const std::filesystem::path& path) {
    ordered_json features = ordered_json::array();
    for (const SmokePolygon& poly : polygons) {
        ordered_json rings = ordered_json::array();
        rings.push_back(ring_to_json(poly.exterior));
        for (const auto& hole : poly.holes) rings.push_back(ring_to_json(hole));
        features.push_back({{"type", "Feature"},
                            {"properties", {{"Density", to_string(poly.density)}}},
                            {"geometry",
                             {{"type", "Polygon"}, {"coordinates", rings}}}});
    }
    ordered_json doc = {{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write smoke file " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw InputError("write failed for " + path.string());
}

} // namespace aodfill
