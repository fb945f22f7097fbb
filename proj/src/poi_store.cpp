#include "poiact/poi_store.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "binio.hpp"
#include "poiact/error.hpp"

namespace poiact {

namespace {
constexpr char kMagic[9] = "POIACTPS";
}

void write_poi_store(std::ostream& out, const PoiStore& store, const TaxonomyGraph& g) {
  using binio::put;
  // Type table in first-use order keeps the output a function of the input.
  std::map<PoiTypeId, std::uint32_t> index;
  std::vector<PoiTypeId> table;
  for (const auto& p : store.pois) {
    if (index.emplace(p.poi_type, static_cast<std::uint32_t>(table.size())).second) table.push_back(p.poi_type);
  }

  out.write(kMagic, 8);
  put<std::uint32_t>(out, PoiStore::kVersion);
  put(out, store.bbox.min_lat);
  put(out, store.bbox.min_lon);
  put(out, store.bbox.max_lat);
  put(out, store.bbox.max_lon);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(table.size()));
  for (auto id : table) binio::put_string(out, g.poi_type(id).id);

  const std::size_t n = store.pois.size();
  put<std::uint64_t>(out, n);
  std::vector<std::int64_t> ids(n);
  std::vector<std::uint8_t> prov(n), closed(n);
  std::vector<std::uint32_t> types(n);
  std::vector<double> lat(n), lon(n), shape_lat, shape_lon;
  std::vector<std::uint64_t> offsets(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Poi& p = store.pois[i];
    ids[i] = p.source_id;
    prov[i] = static_cast<std::uint8_t>(p.provenance);
    types[i] = index.at(p.poi_type);
    lat[i] = p.point.lat;
    lon[i] = p.point.lon;
    closed[i] = p.closed ? 1 : 0;
    for (const auto& c : p.shape) {
      shape_lat.push_back(c.lat);
      shape_lon.push_back(c.lon);
    }
    offsets[i + 1] = shape_lat.size();
  }
  binio::put_array(out, ids);
  binio::put_array(out, prov);
  binio::put_array(out, types);
  binio::put_array(out, lat);
  binio::put_array(out, lon);
  binio::put_array(out, closed);
  binio::put_array(out, offsets);
  binio::put_array(out, shape_lat);
  binio::put_array(out, shape_lon);
  if (!out) throw Error(ErrorCode::kIo, "failed writing POI store");
}

void write_poi_store_file(const std::filesystem::path& path, const PoiStore& store, const TaxonomyGraph& g) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_poi_store(out, store, g);
}

PoiStore read_poi_store(std::istream& in, const TaxonomyGraph& g) {
  binio::Reader r(in, ErrorCode::kBadSnapshot);
  r.expect_magic(kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != PoiStore::kVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "POI store version " + std::to_string(version));
  }
  PoiStore store;
  store.bbox.min_lat = r.get<double>();
  store.bbox.min_lon = r.get<double>();
  store.bbox.max_lat = r.get<double>();
  store.bbox.max_lon = r.get<double>();
  store.bbox.validate();
  const auto t = r.get<std::uint32_t>();
  std::vector<PoiTypeId> table;
  for (std::uint32_t i = 0; i < t; ++i) table.push_back(g.poi_type_id(r.get_string()));

  const auto n = r.get<std::uint64_t>();
  const auto ids = r.get_array<std::int64_t>(n);
  const auto prov = r.get_array<std::uint8_t>(n);
  const auto types = r.get_array<std::uint32_t>(n);
  const auto lat = r.get_array<double>(n);
  const auto lon = r.get_array<double>(n);
  const auto closed = r.get_array<std::uint8_t>(n);
  const auto offsets = r.get_array<std::uint64_t>(n + 1);
  const auto s = offsets.back();
  const auto shape_lat = r.get_array<double>(s);
  const auto shape_lon = r.get_array<double>(s);

  store.pois.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (types[i] >= table.size() || prov[i] > 2 || offsets[i] > offsets[i + 1]) {
      throw Error(ErrorCode::kBadSnapshot, "corrupt POI row " + std::to_string(i));
    }
    Poi& p = store.pois[i];
    p.source_id = ids[i];
    p.provenance = static_cast<Provenance>(prov[i]);
    p.poi_type = table[types[i]];
    p.point = {lat[i], lon[i]};
    p.closed = closed[i] != 0;
    for (auto k = offsets[i]; k < offsets[i + 1]; ++k) p.shape.push_back({shape_lat[k], shape_lon[k]});
  }
  return store;
}

PoiStore read_poi_store_file(const std::filesystem::path& path, const TaxonomyGraph& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return read_poi_store(in, g);
}

}  // namespace poiact
