#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poiact/geo.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact {

enum class ElementKind : std::uint8_t { kNode, kWay, kRelation };

struct Tag {
  std::string key;
  std::string value;

  friend bool operator==(const Tag&, const Tag&) = default;
};

struct RelationMember {
  ElementKind type = ElementKind::kNode;
  std::int64_t ref = 0;
  std::string role;
};

/// One OSM element as read from XML. Nodes carry `coord`; ways carry ordered
/// `node_refs`; relations carry `members`.
struct RawElement {
  ElementKind kind = ElementKind::kNode;
  std::int64_t id = 0;
  LatLon coord;
  std::vector<std::int64_t> node_refs;
  std::vector<RelationMember> members;
  std::vector<Tag> tags;
};

struct ParseReport {
  std::uint64_t elements_read = 0;     // every node/way/relation in the stream
  std::uint64_t elements_emitted = 0;  // after the bbox and validity filters
  std::uint64_t nodes_outside_bbox = 0;
  std::uint64_t invalid_elements = 0;  // bad coordinates, ways with < 2 refs
  std::vector<std::string> warnings;
};

using ElementSink = std::function<void(RawElement&&)>;

/// Streams elements from OSM XML (plain or gzip, detected from the magic
/// bytes). Nodes outside `bbox` are dropped; ways and relations pass through
/// and are clipped during extraction. Throws MalformedXml with line/column.
void parse_osm_xml(std::istream& in, const BoundingBox& bbox, const ElementSink& sink, ParseReport* report = nullptr);
std::vector<RawElement> parse_osm_xml(std::istream& in, const BoundingBox& bbox, ParseReport* report = nullptr);
void parse_osm_file(const std::filesystem::path& path, const BoundingBox& bbox, const ElementSink& sink,
                    ParseReport* report = nullptr);

/// Canonical POI-type id for a tag list: the first tag whose key carries a
/// POI type decides; `k_<key>_v_<value>` when the value is shared by several
/// keys in the taxonomy, `v_<value>` otherwise. Returns nullopt when no tag
/// key is recognized.
std::optional<std::string> encode_poi_type(std::span<const Tag> tags, const TaxonomyGraph& g);

/// encode_poi_type followed by lookup in the taxonomy, falling back to the
/// key class `k_<key>` for values the taxonomy does not list.
std::optional<PoiTypeId> resolve_poi_type(std::span<const Tag> tags, const TaxonomyGraph& g);

enum class Provenance : std::uint8_t { kNode, kWayCentroid, kRelationCentroid };

struct Poi {
  std::int64_t source_id = 0;
  PoiTypeId poi_type{};
  LatLon point;
  Provenance provenance = Provenance::kNode;
  std::vector<LatLon> shape;  // way geometry for cell intersection; empty otherwise
  bool closed = false;        // shape is a ring
};

struct IngestStats {
  std::uint64_t elements_read = 0;
  std::uint64_t typed_elements = 0;  // a tag key carries a POI type
  std::uint64_t pois_extracted = 0;  // typed and resolved in the taxonomy
  std::uint64_t pois_relevant = 0;
  std::uint64_t pois_discarded = 0;
  std::uint64_t unresolved_ways = 0;  // no member coordinates inside the bbox
  std::uint64_t unresolved_relations = 0;
};

struct ExtractResult {
  std::vector<Poi> pois;
  IngestStats stats;
};

/// Pure extraction over an element sequence: nodes give their own point,
/// ways and relations the centroid of their resolved member coordinates.
ExtractResult extract_pois(std::span<const RawElement> elements, const TaxonomyGraph& g);

/// File ingestion with memory bounded by the nodes that typed ways and
/// relations reference: the file is streamed up to three times (relations ->
/// member ways -> needed nodes) instead of indexing every node. Produces the
/// same result as extract_pois(parse_osm_file(...)) for files in standard
/// node/way/relation order.
ExtractResult ingest_osm_file(const std::filesystem::path& path, const BoundingBox& bbox, const TaxonomyGraph& g,
                              ParseReport* report = nullptr);

}  // namespace poiact
