#include "poiact/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <istream>
#include <ostream>
#include <set>

#include "poiact/error.hpp"
#include "poiact/kernels.hpp"
#include "poiact/stats.hpp"

namespace poiact {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// One CSV record; double quotes delimit fields that contain commas.
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorCode::kMalformedRow, "unterminated quote on line " + std::to_string(line_no));
  out.push_back(trim(cur));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size() && std::isfinite(out);
}

bool is_blank_or_comment(const std::string& line) {
  const auto t = trim(line);
  return t.empty() || t[0] == '#';
}

}  // namespace

CategoryMapping load_category_mapping(std::istream& in, const TaxonomyGraph& g) {
  CategoryMapping m;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    auto f = split_csv(line, line_no);
    if (header) {
      header = false;
      if (f.size() >= 2 && f[0] == "category") continue;
    }
    if (f.size() != 2 || f[0].empty()) {
      throw Error(ErrorCode::kMalformedRow, "mapping line " + std::to_string(line_no) + ": expected category,activity");
    }
    std::optional<ActivityId> act;
    if (!f[1].empty() && f[1] != "-") act = g.activity_id(f[1]);
    if (!m.entries.emplace(f[0], act).second) {
      throw Error(ErrorCode::kDuplicateId, "mapping line " + std::to_string(line_no) + ": duplicate category " + f[0]);
    }
  }
  return m;
}

std::vector<PosTerminal> load_pos(std::istream& in, const CategoryMapping& mapping, PosLoadReport* report) {
  std::vector<PosTerminal> out;
  PosLoadReport rep;
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    auto f = split_csv(line, line_no);
    if (header) {
      header = false;
      if (!f.empty() && f[0] == "terminal_id") continue;
    }
    PosTerminal t;
    if (f.size() != 4 || f[0].empty() || !parse_double(f[1], t.point.lat) || !parse_double(f[2], t.point.lon) ||
        t.point.lat < -90 || t.point.lat > 90 || t.point.lon < -180 || t.point.lon > 180) {
      throw Error(ErrorCode::kMalformedRow, "POS line " + std::to_string(line_no) + ": expected terminal_id,lat,lon,category");
    }
    t.id = f[0];
    t.category = f[3];
    auto it = mapping.entries.find(t.category);
    if (it == mapping.entries.end()) {
      throw Error(ErrorCode::kUnknownCategory, "POS line " + std::to_string(line_no) + ": category '" + t.category + "'");
    }
    t.activity = it->second;
    ++rep.rows;
    if (t.activity) {
      ++rep.mapped;
    } else {
      ++rep.excluded;
      ++rep.excluded_by_category[t.category];
    }
    out.push_back(std::move(t));
  }
  if (report) *report = rep;
  return out;
}

PosIndex::PosIndex(const QuadTree& tree, std::span<const PosTerminal> terminals, std::size_t num_activities)
    : num_activities_(num_activities),
      counts_(tree.leaves().size() * num_activities, 0.0),
      city_(num_activities, 0.0) {
  for (const auto& t : terminals) {
    if (!t.activity) continue;
    auto l = tree.try_locate(t.point);
    if (!l) continue;
    counts_[static_cast<std::size_t>(*l) * num_activities_ + idx(*t.activity)] += 1.0;
    city_[idx(*t.activity)] += 1.0;
    ++indexed_;
  }
}

std::span<const double> PosIndex::counts(LocationId l) const {
  return {counts_.data() + static_cast<std::size_t>(l) * num_activities_, num_activities_};
}

ActivityDistribution PosIndex::city() const {
  auto d = ActivityDistribution::from_dense(city_).normalized_copy();
  if (d.empty()) throw Error(ErrorCode::kEmptyScope, "no mapped POS terminal inside the grid");
  return d;
}

ActivityDistribution PosIndex::scope(std::span<const Neighbor> members) const {
  std::vector<double> acc(num_activities_, 0.0);
  for (const auto& m : members) {
    if (m.lambda > 0.0) kernels::weighted_accumulate(counts(m.id), m.lambda, acc);
  }
  auto d = ActivityDistribution::from_dense(acc).normalized_copy();
  if (d.empty()) throw Error(ErrorCode::kEmptyScope, "no POS terminal within the aggregation radius");
  return d;
}

ActivityDistribution w_pos(std::span<const PosTerminal> terminals, std::size_t num_activities) {
  std::vector<double> counts(num_activities, 0.0);
  for (const auto& t : terminals) {
    if (t.activity) counts[idx(*t.activity)] += 1.0;
  }
  auto d = ActivityDistribution::from_dense(counts).normalized_copy();
  if (d.empty()) throw Error(ErrorCode::kEmptyScope, "no mapped POS terminal in scope");
  return d;
}

ActivityDistribution rescale_poi(const ActivityDistribution& w_poi_l, const ActivityDistribution& w_poi_city,
                                 const ActivityDistribution& w_pos_city) {
  ActivityDistribution out;
  for (const auto& [a, w] : w_poi_l.entries) {
    if (!(w > 0.0)) continue;
    const double poi_c = w_poi_city.get(a);
    if (!(poi_c > 0.0)) {
      throw Error(ErrorCode::kMissingCityMass, "activity " + std::to_string(idx(a)) + " has no city-wide POI weight");
    }
    const double v = w * w_pos_city.get(a) / poi_c;
    if (v > 0.0) out.entries.emplace_back(a, v);
  }
  return out;
}

ActivityDistribution normalize_poi(const ActivityDistribution& w_poi_l, const ActivityDistribution& w_poi_city,
                                   const ActivityDistribution& w_pos_city) {
  return rescale_poi(w_poi_l, w_poi_city, w_pos_city).normalized_copy();
}

ActivityDistribution normalize_pos(const ActivityDistribution& w_pos_l, const ActivityDistribution& w_poi_city,
                                   const ActivityDistribution& w_pos_city) {
  return rescale_poi(w_pos_l, w_pos_city, w_poi_city).normalized_copy();
}

double hellinger(const ActivityDistribution& p, const ActivityDistribution& q) {
  for (const auto* d : {&p, &q}) {
    if (std::abs(d->total() - 1.0) > 1e-9) {
      throw Error(ErrorCode::kUnnormalizedInput, "hellinger needs distributions summing to 1");
    }
  }
  std::set<ActivityId> universe;
  for (const auto& e : p.entries) universe.insert(e.first);
  for (const auto& e : q.entries) universe.insert(e.first);
  std::vector<double> pv, qv;
  pv.reserve(universe.size());
  qv.reserve(universe.size());
  for (auto a : universe) {
    pv.push_back(p.get(a));
    qv.push_back(q.get(a));
  }
  const double s = kernels::sqrt_diff_sq_sum(pv, qv);
  return std::clamp(std::sqrt(s) / std::numbers::sqrt2, 0.0, 1.0);
}

double percentage_difference(double a, double b, PdVariant variant) {
  const double denom = variant == PdVariant::kSum ? a + b : (a + b) / 2.0;
  if (!(denom > 0.0)) return 0.0;
  return std::abs(a - b) / denom;
}

namespace {

bool is_hit(const FeedbackRecord& r, const ActivityDistribution& dist, std::size_t k, Level level,
            const TaxonomyGraph& g, ParentMatch match) {
  if (dist.empty()) return false;
  if (level == Level::kLeaf) {
    for (const auto& x : top_k(dist, k, Level::kLeaf, g)) {
      if (x.activity == r.selected) return true;
    }
    return false;
  }
  const ActivityId target = g.rollup_to_parent(r.selected);
  const auto ranked = match == ParentMatch::kRollupLeafTopK ? top_k(dist, k, Level::kLeaf, g)
                                                            : top_k(dist, k, Level::kParent, g);
  for (const auto& x : ranked) {
    if (g.rollup_to_parent(x.activity) == target) return true;
  }
  return false;
}

}  // namespace

AccuracyResult topk_accuracy(std::span<const FeedbackRecord> feedback, std::span<const ActivityDistribution> predictions,
                             std::size_t k, Level level, const TaxonomyGraph& g, ParentMatch match) {
  if (predictions.size() != feedback.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one prediction per feedback record is required");
  }
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  AccuracyResult res;
  res.records = feedback.size();
  for (std::size_t i = 0; i < feedback.size(); ++i) {
    if (is_hit(feedback[i], predictions[i], k, level, g, match)) ++res.hits;
  }
  if (res.records > 0) res.accuracy = static_cast<double>(res.hits) / static_cast<double>(res.records);
  return res;
}

AccuracyResult topk_accuracy(std::span<const FeedbackRecord> feedback, std::size_t k, Level level,
                             const Predictor& predict, const TaxonomyGraph& g, ParentMatch match) {
  std::vector<ActivityDistribution> predictions;
  predictions.reserve(feedback.size());
  for (const auto& r : feedback) {
    try {
      predictions.push_back(predict(r));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyCandidateSet && e.code() != ErrorCode::kOutOfBounds) throw;
      predictions.emplace_back();
    }
  }
  return topk_accuracy(feedback, predictions, k, level, g, match);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::pair<LandUseKind, std::string_view> kKinds[] = {
    {LandUseKind::kIndustrial, "industrial"}, {LandUseKind::kRecreational, "recreational"},
    {LandUseKind::kCommercial, "commercial"}, {LandUseKind::kRailway, "railway"},
    {LandUseKind::kRetail, "retail"},         {LandUseKind::kResidential, "residential"},
    {LandUseKind::kDense, "dense"},
};
}

std::string_view to_string(LandUseKind k) {
  for (const auto& [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "unknown";
}

std::optional<LandUseKind> parse_land_use(std::string_view s) {
  for (const auto& [kind, name] : kKinds) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::vector<LandUseZone> load_land_use(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("land-use GeoJSON: ") + e.what());
  }
  auto ring_of = [](const nlohmann::json& coords) {
    std::vector<LatLon> ring;
    for (const auto& c : coords) {
      if (!c.is_array() || c.size() < 2) throw Error(ErrorCode::kParse, "land-use GeoJSON: bad coordinate");
      ring.push_back({c[1].get<double>(), c[0].get<double>()});
    }
    if (ring.size() < 3) throw Error(ErrorCode::kParse, "land-use GeoJSON: ring with fewer than 3 vertices");
    return ring;
  };
  std::vector<LandUseZone> zones;
  if (!doc.contains("features") || !doc["features"].is_array()) {
    throw Error(ErrorCode::kParse, "land-use GeoJSON: expected a FeatureCollection");
  }
  std::size_t i = 0;
  for (const auto& f : doc["features"]) {
    ++i;
    const auto& props = f.value("properties", nlohmann::json::object());
    const std::string kind_s = props.value("kind", "");
    auto kind = parse_land_use(kind_s);
    if (!kind) throw Error(ErrorCode::kParse, "land-use feature " + std::to_string(i) + ": unknown kind '" + kind_s + "'");
    LandUseZone z;
    z.kind = *kind;
    z.name = props.value("name", kind_s + "_" + std::to_string(i));
    const auto& geom = f.at("geometry");
    const std::string type = geom.value("type", "");
    if (type == "Polygon") {
      z.rings.push_back(ring_of(geom.at("coordinates").at(0)));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : geom.at("coordinates")) z.rings.push_back(ring_of(poly.at(0)));
    } else {
      throw Error(ErrorCode::kParse, "land-use feature " + std::to_string(i) + ": unsupported geometry " + type);
    }
    zones.push_back(std::move(z));
  }
  return zones;
}

ErrorSummary summarize_errors(std::span<const double> errors) {
  ErrorSummary s;
  if (errors.empty()) return s;
  s.kde_mode = kde_mode(errors);
  const auto fit = logistic_fit(errors);
  s.logistic_location = fit.location;
  s.logistic_scale = fit.scale;
  s.mean = mean_of(errors);
  return s;
}

ActivityDistribution poi_distribution(const NeighborSet& ns, const LocationModel& model, Level level,
                                      const TaxonomyGraph& g) {
  auto d = model.p_activity_given_location_radius(ns.members);
  return level == Level::kParent ? rollup(d, g) : d;
}

ActivityDistribution poi_city_distribution(const QuadTree& tree, const LocationModel& model, Level level,
                                           const TaxonomyGraph& g) {
  std::vector<double> acc(g.activities().size(), 0.0);
  std::size_t n = 0;
  for (const auto& l : tree.leaves()) {
    const auto d = poi_distribution(tree.aggregation_radius(l.id), model, level, g);
    if (d.empty()) continue;
    ++n;
    for (const auto& [a, p] : d.entries) acc[idx(a)] += p;
  }
  if (n == 0) throw Error(ErrorCode::kEmptyScope, "no location carries POI weight");
  for (auto& v : acc) v /= static_cast<double>(n);
  auto out = ActivityDistribution::from_dense(acc);
  out.normalized = true;
  return out;
}

ComparisonReport stratified_report(const QuadTree& tree, const LocationModel& model, const PosIndex& pos,
                                   std::span<const LandUseZone> zones, const TaxonomyGraph& g,
                                   const StratifyOptions& options) {
  if (zones.empty()) throw Error(ErrorCode::kInvalidArgument, "no land-use zones given");
  ComparisonReport report;
  report.seed = options.seed;
  report.options = options;
  report.poi_city = poi_city_distribution(tree, model, options.level, g);
  report.pos_city = pos.city();
  if (options.level == Level::kParent) report.pos_city = rollup(report.pos_city, g);

  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    const LandUseZone& zone = zones[zi];
    ZoneReport zr;
    zr.name = zone.name;
    zr.kind = zone.kind;

    std::vector<std::vector<PointM>> rings;
    for (const auto& r : zone.rings) {
      std::vector<PointM> ring;
      for (const auto& p : r) ring.push_back(tree.projection().to_local(p));
      rings.push_back(std::move(ring));
    }
    std::vector<LocationId> candidates;
    for (const auto& l : tree.leaves()) {
      for (const auto& ring : rings) {
        if (point_in_polygon(l.centroid(), ring)) {
          candidates.push_back(l.id);
          break;
        }
      }
    }
    zr.candidates = candidates.size();
    if (candidates.empty()) {
      zr.skipped = true;
      report.zones.push_back(std::move(zr));
      continue;
    }
    // Each zone draws from its own stream so adding a zone never perturbs another.
    const auto picks = sample_indices(static_cast<std::uint32_t>(candidates.size()), options.sample_size,
                                      options.seed + 0x9e3779b97f4a7c15ULL * (zi + 1));
    std::vector<LocationId> sample;
    for (auto p : picks) sample.push_back(candidates[p]);
    std::sort(sample.begin(), sample.end());
    zr.sampled = sample.size();

    std::map<ActivityId, std::pair<double, std::size_t>> pd_acc;
    std::vector<double> e_local, e_poi, e_pos;
    for (auto id : sample) {
      const NeighborSet ns = tree.aggregation_radius(id);
      if (ns.radius_m > options.outlier_radius_m) {
        ++zr.outliers;
        continue;
      }
      const auto w_poi = poi_distribution(ns, model, options.level, g);
      if (w_poi.empty()) {
        ++zr.no_pos;
        continue;
      }
      ActivityDistribution w_pos_l;
      try {
        w_pos_l = pos.scope(ns.members);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyScope) throw;
        ++zr.no_pos;
        continue;
      }
      if (options.level == Level::kParent) w_pos_l = rollup(w_pos_l, g);
      const auto poi_norm = normalize_poi(w_poi, report.poi_city, report.pos_city);
      const auto pos_norm = normalize_pos(w_pos_l, report.poi_city, report.pos_city);
      if (poi_norm.empty() || pos_norm.empty()) {
        ++zr.no_pos;
        continue;
      }
      LocationComparison c;
      c.location = id;
      c.radius_m = ns.radius_m;
      c.hellinger_local = hellinger(w_poi, w_pos_l);
      c.hellinger_poi_norm = hellinger(poi_norm, w_pos_l);
      c.hellinger_pos_norm = hellinger(w_poi, pos_norm);
      zr.locations.push_back(c);
      e_local.push_back(c.hellinger_local);
      e_poi.push_back(c.hellinger_poi_norm);
      e_pos.push_back(c.hellinger_pos_norm);

      std::set<ActivityId> universe;
      for (const auto& e : poi_norm.entries) universe.insert(e.first);
      for (const auto& e : w_pos_l.entries) universe.insert(e.first);
      for (auto a : universe) {
        auto& slot = pd_acc[a];
        slot.first += percentage_difference(poi_norm.get(a), w_pos_l.get(a), options.pd_variant);
        ++slot.second;
      }
    }
    for (const auto& [a, s] : pd_acc) zr.mean_pd[a] = s.first / static_cast<double>(s.second);
    zr.local = summarize_errors(e_local);
    zr.poi_norm = summarize_errors(e_poi);
    zr.pos_norm = summarize_errors(e_pos);
    report.zones.push_back(std::move(zr));
  }
  return report;
}

namespace {

nlohmann::json summary_json(const ErrorSummary& s) {
  return {{"kde_mode", s.kde_mode},
          {"logistic_location", s.logistic_location},
          {"logistic_scale", s.logistic_scale},
          {"mean", s.mean}};
}

nlohmann::json dist_json(const ActivityDistribution& d, const TaxonomyGraph& g) {
  nlohmann::json o = nlohmann::json::object();
  for (const auto& [a, p] : d.entries) o[g.activity(a).id] = p;
  return o;
}

}  // namespace

nlohmann::json to_json(const ComparisonReport& report, const TaxonomyGraph& g) {
  nlohmann::json zones = nlohmann::json::array();
  for (const auto& z : report.zones) {
    nlohmann::json pd = nlohmann::json::object();
    for (const auto& [a, v] : z.mean_pd) pd[g.activity(a).id] = v;
    zones.push_back({{"name", z.name},
                     {"kind", to_string(z.kind)},
                     {"skipped", z.skipped},
                     {"candidates", z.candidates},
                     {"sampled", z.sampled},
                     {"outliers", z.outliers},
                     {"no_pos", z.no_pos},
                     {"evaluated", z.locations.size()},
                     {"error_local", summary_json(z.local)},
                     {"error_poi_normalized", summary_json(z.poi_norm)},
                     {"error_pos_normalized", summary_json(z.pos_norm)},
                     {"mean_percentage_difference", pd}});
  }
  return {{"poiact_format", "comparison_report"},
          {"version", 1},
          {"seed", report.seed},
          {"sample_size", report.options.sample_size},
          {"outlier_radius_m", report.options.outlier_radius_m},
          {"level", report.options.level == Level::kParent ? "parent" : "leaf"},
          {"pd_variant", report.options.pd_variant == PdVariant::kSum ? "sum" : "mean"},
          {"mode_estimator", "gaussian KDE, Silverman bandwidth; logistic MLE location"},
          {"poi_city", dist_json(report.poi_city, g)},
          {"pos_city", dist_json(report.pos_city, g)},
          {"zones", zones}};
}

void write_location_errors_csv(std::ostream& out, const ComparisonReport& report) {
  out << "# poiact-location-errors 1\n";
  out << "zone,location_id,radius_m,hellinger_local,hellinger_poi_norm,hellinger_pos_norm\n";
  out << std::setprecision(17);
  for (const auto& z : report.zones) {
    for (const auto& c : z.locations) {
      out << z.name << ',' << c.location << ',' << c.radius_m << ',' << c.hellinger_local << ','
          << c.hellinger_poi_norm << ',' << c.hellinger_pos_norm << '\n';
    }
  }
}

void write_category_pd_csv(std::ostream& out, const ComparisonReport& report, const TaxonomyGraph& g) {
  out << "# poiact-category-pd 1\n";
  out << "zone,activity,mean_percentage_difference\n";
  out << std::setprecision(17);
  for (const auto& z : report.zones) {
    for (const auto& [a, v] : z.mean_pd) out << z.name << ',' << g.activity(a).id << ',' << v << '\n';
  }
}

}  // namespace poiact
