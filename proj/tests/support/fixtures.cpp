#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace poiact::fixture {

std::filesystem::path data_dir() { return POIACT_DATA_DIR; }

const TaxonomyGraph& seed_taxonomy() {
  static const TaxonomyGraph g = TaxonomyGraph::load_file(data_dir() / "seed_taxonomy.txt");
  return g;
}

std::filesystem::path scratch_dir(std::string_view name) {
  auto dir = std::filesystem::path(POIACT_SCRATCH_DIR) / std::string(name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

double unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

Poi point_poi(const TaxonomyGraph& g, std::string_view type, const LatLon& p, std::int64_t id) {
  Poi poi;
  poi.source_id = id;
  poi.poi_type = g.poi_type_id(type);
  poi.point = p;
  return poi;
}

City synthetic_city(const TaxonomyGraph& g, std::size_t n, std::uint64_t seed, double width_m, double height_m) {
  City city;
  city.bbox = BoundingBox::from_extent(kTrento, width_m, height_m);
  const LocalProjection proj(city.bbox);
  std::mt19937_64 rng(seed);

  // Districts: (center fraction x, y, spread m, theme types)
  struct District {
    double fx, fy, spread;
    std::vector<std::string_view> types;
  };
  const std::vector<District> districts = {
      {0.30, 0.60, 300.0, {"v_restaurant", "v_cafe", "v_bar", "v_pub", "v_fast_food"}},
      {0.70, 0.30, 400.0, {"v_supermarket", "v_clothes", "v_bakery", "v_mall"}},
      {0.55, 0.75, 500.0, {"v_apartments", "v_house", "v_school", "v_kindergarten"}},
      {0.20, 0.20, 600.0, {"v_tree", "v_park", "v_playground", "v_pitch"}},
      {0.85, 0.80, 250.0, {"v_bus_stop", "v_station", "v_parking", "v_fuel"}},
  };
  std::vector<PoiTypeId> background;
  for (std::size_t i = 0; i < g.poi_types().size(); ++i) {
    if (g.poi_types()[i].relevant) background.push_back(static_cast<PoiTypeId>(i));
  }
  std::vector<std::vector<PoiTypeId>> themes;
  for (const auto& d : districts) {
    std::vector<PoiTypeId> ids;
    for (auto t : d.types) {
      if (auto id = g.find_poi_type(t); id && g.poi_type(*id).relevant) ids.push_back(*id);
    }
    if (ids.empty()) ids = background;
    themes.push_back(std::move(ids));
  }

  city.pois.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = unit(rng());
    PointM p;
    PoiTypeId type;
    if (pick < 0.75) {
      const std::size_t k = rng() % districts.size();
      const auto& d = districts[k];
      // Box-Muller on portable uniforms
      const double u1 = std::max(unit(rng()), 1e-300), u2 = unit(rng());
      const double r = d.spread * std::sqrt(-2.0 * std::log(u1));
      p = {d.fx * width_m + r * std::cos(2.0 * M_PI * u2), d.fy * height_m + r * std::sin(2.0 * M_PI * u2)};
      type = themes[k][rng() % themes[k].size()];
    } else {
      p = {unit(rng()) * width_m, unit(rng()) * height_m};
      type = background[rng() % background.size()];
    }
    p.x = std::clamp(p.x, 0.5, width_m - 0.5);
    p.y = std::clamp(p.y, 0.5, height_m - 0.5);
    Poi poi;
    poi.source_id = static_cast<std::int64_t>(i + 1);
    poi.poi_type = type;
    poi.point = proj.to_latlon(p);
    city.pois.push_back(std::move(poi));
  }
  return city;
}

HostelFixture hostel_fixture(const TaxonomyGraph& g) {
  HostelFixture f;
  f.cfg.base_cell_m = 1000.0;
  f.cfg.min_agg_pois = 10;
  f.cfg.h_min = 1;
  f.cfg.h_max = 1;
  f.bbox = BoundingBox::from_extent(kTrento, 4000.0, 2000.0);
  const LocalProjection proj(f.bbox);
  std::int64_t id = 1;
  auto add = [&](std::string_view type, int cell, int count) {
    const double x = (cell % 4) * 1000.0 + 300.0;
    const double y = (cell / 4) * 1000.0 + 300.0 + static_cast<double>(type.size()) * 10.0;
    for (int i = 0; i < count; ++i) f.pois.push_back(point_poi(g, type, proj.to_latlon({x + i * 20.0, y}), id++));
  };
  add("v_hostel", 0, 1);
  add("v_tree", 0, 10);
  add("v_bus_stop", 0, 1);
  for (int c = 1; c < 8; ++c) {
    if (c <= 5) add("v_bus_stop", c, 2);
    if (c == 7) add("v_tree", c, 3);
    if (c == 2) add("v_hostel", c, 2);
    add("v_restaurant", c, 5);
  }
  f.probe = proj.to_latlon({500.0, 500.0});
  return f;
}

void write_synthetic_osm(std::ostream& out, const OsmGenOptions& opt) {
  static constexpr std::array<std::pair<const char*, const char*>, 12> kTyped = {{
      {"amenity", "restaurant"},
      {"amenity", "cafe"},
      {"amenity", "bench"},
      {"shop", "supermarket"},
      {"shop", "clothes"},
      {"tourism", "hostel"},
      {"natural", "tree"},
      {"highway", "bus_stop"},
      {"railway", "station"},
      {"leisure", "park"},
      {"amenity", "unheard_of_value"},
      {"building", "apartments"},
  }};
  std::mt19937_64 rng(opt.seed);
  const LocalProjection proj(opt.bbox);
  const double w = opt.bbox.width_m(), h = opt.bbox.height_m();

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"poiact-tests\">\n";
  out << "  <bounds minlat=\"" << opt.bbox.min_lat << "\" minlon=\"" << opt.bbox.min_lon << "\" maxlat=\""
      << opt.bbox.max_lat << "\" maxlon=\"" << opt.bbox.max_lon << "\"/>\n";
  char buf[64];
  auto typed_tag = [&]() {
    const auto& [k, v] = kTyped[rng() % kTyped.size()];
    out << "    <tag k=\"" << k << "\" v=\"" << v << "\"/>\n";
  };
  for (std::uint64_t i = 1; i <= opt.nodes; ++i) {
    PointM p{unit(rng()) * w, unit(rng()) * h};
    if (unit(rng()) < opt.outside_fraction) p.y = h * 1.5;
    const LatLon c = proj.to_latlon(p);
    const bool typed = unit(rng()) < opt.typed_node_fraction;
    out << "  <node id=\"" << i << "\" version=\"1\" lat=\"";
    std::snprintf(buf, sizeof buf, "%.7f", c.lat);
    out << buf << "\" lon=\"";
    std::snprintf(buf, sizeof buf, "%.7f", c.lon);
    out << buf << '"';
    if (!typed) {
      out << "/>\n";
      continue;
    }
    out << ">\n    <tag k=\"name\" v=\"n" << i << "\"/>\n";
    typed_tag();
    out << "  </node>\n";
  }
  for (std::uint64_t i = 1; i <= opt.ways; ++i) {
    out << "  <way id=\"" << i << "\" version=\"1\">\n";
    const std::uint64_t first = 1 + rng() % std::max<std::uint64_t>(opt.nodes - 4, 1);
    const bool ring = rng() % 2 == 0;
    for (std::uint64_t k = 0; k < 4; ++k) out << "    <nd ref=\"" << first + k << "\"/>\n";
    if (ring) out << "    <nd ref=\"" << first << "\"/>\n";
    if (unit(rng()) < opt.typed_way_fraction) typed_tag();
    out << "  </way>\n";
  }
  for (std::uint64_t i = 1; i <= opt.relations; ++i) {
    out << "  <relation id=\"" << i << "\" version=\"1\">\n";
    out << "    <member type=\"way\" ref=\"" << 1 + rng() % std::max<std::uint64_t>(opt.ways, 1)
        << "\" role=\"outer\"/>\n";
    out << "    <member type=\"node\" ref=\"" << 1 + rng() % std::max<std::uint64_t>(opt.nodes, 1) << "\" role=\"\"/>\n";
    out << "    <tag k=\"type\" v=\"multipolygon\"/>\n";
    typed_tag();
    out << "  </relation>\n";
  }
  out << "</osm>\n";
}

std::vector<PosTerminal> biased_terminals(const TaxonomyGraph& g, const QuadTree& tree, const LocationModel& model,
                                          ActivityId boosted_top, double boost, std::size_t per_leaf,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PosTerminal> out;
  for (const auto& l : tree.leaves()) {
    const auto d = model.p_activity_given_location(l.id);
    if (d.empty()) continue;
    std::vector<double> cdf;
    double s = 0.0;
    for (const auto& [a, p] : d.entries) {
      s += g.rollup_to_parent(a) == boosted_top ? p * boost : p;
      cdf.push_back(s);
    }
    for (std::size_t i = 0; i < per_leaf; ++i) {
      const double u = unit(rng()) * s;
      const auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const auto a = d.entries[std::min(k, cdf.size() - 1)].first;
      const PointM p{(l.rect.x0 + unit(rng()) * l.rect.width()) * 1e-3, (l.rect.y0 + unit(rng()) * l.rect.height()) * 1e-3};
      PosTerminal t;
      t.id = "t" + std::to_string(out.size() + 1);
      t.point = tree.projection().to_latlon(p);
      t.category = g.activity(a).id;
      t.activity = a;
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace poiact::fixture
