#include "poiact/osm.hpp"

#include <expat.h>
#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <exception>
#include <fstream>
#include <istream>
#include <unordered_map>
#include <unordered_set>

#include "poiact/error.hpp"

namespace poiact {

namespace {

// ---------------------------------------------------------------------------
// Byte sources: raw istream or zlib inflate over an istream.

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {
    char magic[2] = {0, 0};
    in_.read(magic, 2);
    const auto got = in_.gcount();
    pending_.assign(magic, magic + got);
    gzip_ = got == 2 && static_cast<unsigned char>(magic[0]) == 0x1f && static_cast<unsigned char>(magic[1]) == 0x8b;
    if (gzip_) {
      std::memset(&zs_, 0, sizeof zs_);
      if (inflateInit2(&zs_, 15 + 32) != Z_OK) throw Error(ErrorCode::kIo, "zlib init failed");
      compressed_.resize(1 << 16);
    }
  }
  ~ByteReader() {
    if (gzip_) inflateEnd(&zs_);
  }
  ByteReader(const ByteReader&) = delete;
  ByteReader& operator=(const ByteReader&) = delete;

  /// Fills up to n bytes; returns 0 at end of input.
  std::size_t read(char* buf, std::size_t n) {
    if (!gzip_) {
      std::size_t off = 0;
      if (!pending_.empty()) {
        off = std::min(n, pending_.size());
        std::memcpy(buf, pending_.data(), off);
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(off));
      }
      if (off < n) {
        in_.read(buf + off, static_cast<std::streamsize>(n - off));
        off += static_cast<std::size_t>(in_.gcount());
      }
      return off;
    }
    zs_.next_out = reinterpret_cast<Bytef*>(buf);
    zs_.avail_out = static_cast<uInt>(n);
    while (zs_.avail_out > 0 && !stream_end_) {
      if (zs_.avail_in == 0) {
        std::size_t got = 0;
        if (!pending_.empty()) {
          got = pending_.size();
          std::memcpy(compressed_.data(), pending_.data(), got);
          pending_.clear();
        }
        in_.read(compressed_.data() + got, static_cast<std::streamsize>(compressed_.size() - got));
        got += static_cast<std::size_t>(in_.gcount());
        if (got == 0) break;
        zs_.next_in = reinterpret_cast<Bytef*>(compressed_.data());
        zs_.avail_in = static_cast<uInt>(got);
      }
      const int rc = inflate(&zs_, Z_NO_FLUSH);
      if (rc == Z_STREAM_END) {
        // Concatenated gzip members are legal; continue with the next one.
        if (zs_.avail_in > 0 || in_.peek() != std::char_traits<char>::eof()) {
          inflateReset(&zs_);
        } else {
          stream_end_ = true;
        }
      } else if (rc != Z_OK && rc != Z_BUF_ERROR) {
        throw Error(ErrorCode::kMalformedXml, "corrupt gzip stream");
      } else if (rc == Z_BUF_ERROR && zs_.avail_in == 0 && in_.eof()) {
        break;
      }
    }
    return n - zs_.avail_out;
  }

 private:
  std::istream& in_;
  std::vector<char> pending_;
  std::vector<char> compressed_;
  z_stream zs_{};
  bool gzip_ = false;
  bool stream_end_ = false;
};

// ---------------------------------------------------------------------------
// Expat handlers.

struct ParserState {
  BoundingBox bbox;
  const ElementSink* sink = nullptr;
  ParseReport* report = nullptr;
  XML_Parser parser = nullptr;
  std::exception_ptr error;
  RawElement current;
  bool in_element = false;
  bool skip_current = false;
};

const char* attr(const XML_Char** atts, const char* name) {
  for (int i = 0; atts[i]; i += 2) {
    if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
  }
  return nullptr;
}

template <class T>
bool parse_number(const char* s, T& out) {
  if (!s) return false;
  const char* end = s + std::strlen(s);
  auto r = std::from_chars(s, end, out);
  return r.ec == std::errc{} && r.ptr == end;
}

void warn(ParserState& st, const std::string& msg) {
  if (st.report && st.report->warnings.size() < 100) st.report->warnings.push_back(msg);
}

void start_element(ParserState& st, const char* name, const XML_Char** atts) {
  if (std::strcmp(name, "node") == 0 || std::strcmp(name, "way") == 0 || std::strcmp(name, "relation") == 0) {
    st.current = RawElement{};
    st.in_element = true;
    st.skip_current = false;
    st.current.kind = name[0] == 'n' ? ElementKind::kNode : name[0] == 'w' ? ElementKind::kWay : ElementKind::kRelation;
    if (!parse_number(attr(atts, "id"), st.current.id)) {
      throw Error(ErrorCode::kMalformedXml, std::string("element without numeric id at line ") +
                                               std::to_string(XML_GetCurrentLineNumber(st.parser)));
    }
    if (st.current.kind == ElementKind::kNode) {
      const bool ok = parse_number(attr(atts, "lat"), st.current.coord.lat) &&
                      parse_number(attr(atts, "lon"), st.current.coord.lon);
      if (!ok || st.current.coord.lat < -90.0 || st.current.coord.lat > 90.0 || st.current.coord.lon < -180.0 ||
          st.current.coord.lon > 180.0) {
        st.skip_current = true;
      }
    }
    return;
  }
  if (!st.in_element) {
    if (std::strcmp(name, "osm") == 0) {
      const char* version = attr(atts, "version");
      if (!version || std::strcmp(version, "0.6") != 0) {
        warn(st, std::string("UnknownSchemaVersion: osm version ") + (version ? version : "(none)") + ", continuing");
      }
    }
    return;
  }
  if (std::strcmp(name, "tag") == 0) {
    const char* k = attr(atts, "k");
    const char* v = attr(atts, "v");
    if (k && v) st.current.tags.push_back({k, v});
  } else if (std::strcmp(name, "nd") == 0) {
    std::int64_t ref = 0;
    if (parse_number(attr(atts, "ref"), ref)) st.current.node_refs.push_back(ref);
  } else if (std::strcmp(name, "member") == 0) {
    const char* type = attr(atts, "type");
    RelationMember m;
    if (!type || !parse_number(attr(atts, "ref"), m.ref)) return;
    if (std::strcmp(type, "node") == 0) {
      m.type = ElementKind::kNode;
    } else if (std::strcmp(type, "way") == 0) {
      m.type = ElementKind::kWay;
    } else {
      m.type = ElementKind::kRelation;
    }
    if (const char* role = attr(atts, "role")) m.role = role;
    st.current.members.push_back(std::move(m));
  }
}

void end_element(ParserState& st, const char* name) {
  if (!st.in_element) return;
  if (std::strcmp(name, "node") != 0 && std::strcmp(name, "way") != 0 && std::strcmp(name, "relation") != 0) return;
  st.in_element = false;
  if (st.report) ++st.report->elements_read;
  if (st.skip_current || (st.current.kind == ElementKind::kWay && st.current.node_refs.size() < 2)) {
    if (st.report) ++st.report->invalid_elements;
    return;
  }
  if (st.current.kind == ElementKind::kNode && !st.bbox.contains(st.current.coord)) {
    if (st.report) ++st.report->nodes_outside_bbox;
    return;
  }
  if (st.report) ++st.report->elements_emitted;
  (*st.sink)(std::move(st.current));
}

extern "C" void on_start(void* user, const XML_Char* name, const XML_Char** atts) {
  auto& st = *static_cast<ParserState*>(user);
  if (st.error) return;
  try {
    start_element(st, name, atts);
  } catch (...) {
    st.error = std::current_exception();
    XML_StopParser(st.parser, XML_FALSE);
  }
}

extern "C" void on_end(void* user, const XML_Char* name) {
  auto& st = *static_cast<ParserState*>(user);
  if (st.error) return;
  try {
    end_element(st, name);
  } catch (...) {
    st.error = std::current_exception();
    XML_StopParser(st.parser, XML_FALSE);
  }
}

}  // namespace

void parse_osm_xml(std::istream& in, const BoundingBox& bbox, const ElementSink& sink, ParseReport* report) {
  bbox.validate();
  ByteReader reader(in);
  ParserState st;
  st.bbox = bbox;
  st.sink = &sink;
  st.report = report;
  st.parser = XML_ParserCreate(nullptr);
  if (!st.parser) throw Error(ErrorCode::kIo, "cannot create XML parser");
  struct Guard {
    XML_Parser p;
    ~Guard() { XML_ParserFree(p); }
  } guard{st.parser};
  XML_SetUserData(st.parser, &st);
  XML_SetElementHandler(st.parser, on_start, on_end);

  std::vector<char> buf(1 << 16);
  bool any_input = false;
  for (;;) {
    const std::size_t n = reader.read(buf.data(), buf.size());
    any_input = any_input || n > 0;
    const bool last = n == 0;
    if (XML_Parse(st.parser, buf.data(), static_cast<int>(n), last ? XML_TRUE : XML_FALSE) == XML_STATUS_ERROR) {
      if (st.error) std::rethrow_exception(st.error);
      throw Error(ErrorCode::kMalformedXml,
                  std::string(XML_ErrorString(XML_GetErrorCode(st.parser))) + " at line " +
                      std::to_string(XML_GetCurrentLineNumber(st.parser)) + ", column " +
                      std::to_string(XML_GetCurrentColumnNumber(st.parser)));
    }
    if (st.error) std::rethrow_exception(st.error);
    if (last) break;
  }
  (void)any_input;
}

std::vector<RawElement> parse_osm_xml(std::istream& in, const BoundingBox& bbox, ParseReport* report) {
  std::vector<RawElement> out;
  parse_osm_xml(in, bbox, [&](RawElement&& e) { out.push_back(std::move(e)); }, report);
  return out;
}

void parse_osm_file(const std::filesystem::path& path, const BoundingBox& bbox, const ElementSink& sink,
                    ParseReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  parse_osm_xml(in, bbox, sink, report);
}

// ---------------------------------------------------------------------------
// Type encoding.

namespace {

struct EncodedType {
  std::string canonical;
  std::string key;
  std::string value;
};

std::optional<EncodedType> encode(std::span<const Tag> tags, const TaxonomyGraph& g) {
  const auto& keys = g.recognized_keys();
  for (const auto& t : tags) {
    if (!keys.contains(t.key)) continue;
    EncodedType e{"", t.key, t.value};
    if (g.ambiguous_values().contains(t.value)) {
      e.canonical = "k_" + t.key + "_v_" + t.value;
    } else {
      e.canonical = "v_" + t.value;
    }
    return e;
  }
  return std::nullopt;
}

/// Key class (k_<key>) that a type sits under, if any.
std::optional<PoiTypeId> key_class_of(PoiTypeId id, const TaxonomyGraph& g) {
  std::optional<PoiTypeId> cur = id;
  while (cur) {
    const std::string_view s = g.poi_type(*cur).id;
    if (s.starts_with("k_") && s.find("_v_") == std::string_view::npos) return cur;
    cur = g.poi_type(*cur).parent;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> encode_poi_type(std::span<const Tag> tags, const TaxonomyGraph& g) {
  auto e = encode(tags, g);
  if (!e) return std::nullopt;
  return e->canonical;
}

std::optional<PoiTypeId> resolve_poi_type(std::span<const Tag> tags, const TaxonomyGraph& g) {
  auto e = encode(tags, g);
  if (!e) return std::nullopt;
  const auto key_class = g.find_poi_type("k_" + e->key);
  if (auto id = g.find_poi_type(e->canonical)) {
    // A bare v_<value> must belong to this key; the same value under an
    // unrelated key is a different thing.
    if (!e->canonical.starts_with("v_") || !key_class || key_class_of(*id, g) == key_class) return id;
  }
  if (auto id = g.find_poi_type("k_" + e->key + "_v_" + e->value)) return id;
  return key_class;
}

// ---------------------------------------------------------------------------
// Extraction.

namespace {

std::span<const std::int64_t> unique_ring(std::span<const std::int64_t> refs) {
  if (refs.size() >= 2 && refs.front() == refs.back()) return refs.first(refs.size() - 1);
  return refs;
}

class Extractor {
 public:
  using NodeLookup = std::function<const LatLon*(std::int64_t)>;
  using WayLookup = std::function<const std::vector<LatLon>*(std::int64_t)>;

  explicit Extractor(const TaxonomyGraph& g) : g_(g) {}

  void consume(const RawElement& e, const NodeLookup& nodes, const WayLookup& ways) {
    ++result_.stats.elements_read;
    auto type = resolve_typed(e);
    if (!type) return;
    Poi poi;
    poi.source_id = e.id;
    poi.poi_type = *type;
    switch (e.kind) {
      case ElementKind::kNode:
        poi.point = e.coord;
        poi.provenance = Provenance::kNode;
        break;
      case ElementKind::kWay: {
        poi.provenance = Provenance::kWayCentroid;
        std::vector<LatLon> unique;
        for (auto ref : unique_ring(e.node_refs)) {
          if (const LatLon* c = nodes(ref)) unique.push_back(*c);
        }
        if (unique.empty()) {
          ++result_.stats.unresolved_ways;
          return;
        }
        poi.point = centroid_of(std::span<const LatLon>(unique));
        for (auto ref : e.node_refs) {
          if (const LatLon* c = nodes(ref)) poi.shape.push_back(*c);
        }
        poi.closed = e.node_refs.size() >= 4 && e.node_refs.front() == e.node_refs.back() && unique.size() >= 3;
        if (poi.closed && !(poi.shape.front() == poi.shape.back())) poi.shape.push_back(poi.shape.front());
        break;
      }
      case ElementKind::kRelation: {
        poi.provenance = Provenance::kRelationCentroid;
        std::vector<LatLon> coords;
        for (const auto& m : e.members) {
          if (m.type == ElementKind::kNode) {
            if (const LatLon* c = nodes(m.ref)) coords.push_back(*c);
          } else if (m.type == ElementKind::kWay) {
            if (const auto* w = ways(m.ref)) coords.insert(coords.end(), w->begin(), w->end());
          }
        }
        if (coords.empty()) {
          ++result_.stats.unresolved_relations;
          return;
        }
        poi.point = centroid_of(std::span<const LatLon>(coords));
        break;
      }
    }
    ++result_.stats.pois_extracted;
    if (g_.poi_type(*type).relevant) {
      ++result_.stats.pois_relevant;
      result_.pois.push_back(std::move(poi));
    } else {
      ++result_.stats.pois_discarded;
    }
  }

  std::optional<PoiTypeId> resolve_typed(const RawElement& e) {
    if (!encode(e.tags, g_)) return std::nullopt;
    ++result_.stats.typed_elements;
    return resolve_poi_type(e.tags, g_);
  }

  ExtractResult take() { return std::move(result_); }

 private:
  const TaxonomyGraph& g_;
  ExtractResult result_;
};

/// Unique member-way coordinates used for relation centroids.
std::vector<LatLon> way_coords(std::span<const std::int64_t> refs,
                               const std::function<const LatLon*(std::int64_t)>& nodes) {
  std::vector<LatLon> out;
  for (auto ref : unique_ring(refs)) {
    if (const LatLon* c = nodes(ref)) out.push_back(*c);
  }
  return out;
}

}  // namespace

ExtractResult extract_pois(std::span<const RawElement> elements, const TaxonomyGraph& g) {
  std::unordered_map<std::int64_t, LatLon> node_index;
  std::unordered_set<std::int64_t> member_ways;
  for (const auto& e : elements) {
    if (e.kind == ElementKind::kNode) {
      node_index.emplace(e.id, e.coord);
    } else if (e.kind == ElementKind::kRelation && resolve_poi_type(e.tags, g)) {
      for (const auto& m : e.members) {
        if (m.type == ElementKind::kWay) member_ways.insert(m.ref);
      }
    }
  }
  auto nodes = [&](std::int64_t id) -> const LatLon* {
    auto it = node_index.find(id);
    return it == node_index.end() ? nullptr : &it->second;
  };
  std::unordered_map<std::int64_t, std::vector<LatLon>> way_index;
  for (const auto& e : elements) {
    if (e.kind == ElementKind::kWay && member_ways.contains(e.id)) way_index.emplace(e.id, way_coords(e.node_refs, nodes));
  }
  auto ways = [&](std::int64_t id) -> const std::vector<LatLon>* {
    auto it = way_index.find(id);
    return it == way_index.end() ? nullptr : &it->second;
  };
  Extractor ex(g);
  for (const auto& e : elements) ex.consume(e, nodes, ways);
  return ex.take();
}

ExtractResult ingest_osm_file(const std::filesystem::path& path, const BoundingBox& bbox, const TaxonomyGraph& g,
                              ParseReport* report) {
  // Pass 1: typed relations name the ways and nodes they need.
  std::unordered_set<std::int64_t> member_ways;
  std::unordered_set<std::int64_t> needed_nodes;
  bool saw_relation = false;
  parse_osm_file(path, bbox, [&](RawElement&& e) {
    if (e.kind != ElementKind::kRelation) return;
    saw_relation = true;
    if (!resolve_poi_type(e.tags, g)) return;
    for (const auto& m : e.members) {
      if (m.type == ElementKind::kWay) member_ways.insert(m.ref);
      if (m.type == ElementKind::kNode) needed_nodes.insert(m.ref);
    }
  });
  (void)saw_relation;

  // Pass 2: typed ways and relation-member ways name the nodes they need.
  parse_osm_file(path, bbox, [&](RawElement&& e) {
    if (e.kind != ElementKind::kWay) return;
    if (member_ways.contains(e.id) || resolve_poi_type(e.tags, g)) {
      needed_nodes.insert(e.node_refs.begin(), e.node_refs.end());
    }
  });

  // Pass 3: keep only needed node coordinates and extract in file order.
  std::unordered_map<std::int64_t, LatLon> node_index;
  node_index.reserve(needed_nodes.size());
  std::unordered_map<std::int64_t, std::vector<LatLon>> way_index;
  auto nodes = [&](std::int64_t id) -> const LatLon* {
    auto it = node_index.find(id);
    return it == node_index.end() ? nullptr : &it->second;
  };
  auto ways = [&](std::int64_t id) -> const std::vector<LatLon>* {
    auto it = way_index.find(id);
    return it == way_index.end() ? nullptr : &it->second;
  };
  Extractor ex(g);
  parse_osm_file(
      path, bbox,
      [&](RawElement&& e) {
        if (e.kind == ElementKind::kNode && needed_nodes.contains(e.id)) node_index.emplace(e.id, e.coord);
        if (e.kind == ElementKind::kWay && member_ways.contains(e.id)) way_index.emplace(e.id, way_coords(e.node_refs, nodes));
        ex.consume(e, nodes, ways);
      },
      report);
  return ex.take();
}

}  // namespace poiact
