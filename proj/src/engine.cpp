#include "poiact/engine.hpp"

#include <charconv>

#include "poiact/error.hpp"
#include "poiact/grid_io.hpp"

namespace poiact {

std::optional<Level> parse_level(std::string_view s) {
  if (s == "leaf") return Level::kLeaf;
  if (s == "parent") return Level::kParent;
  return std::nullopt;
}

std::string_view to_string(Level level) { return level == Level::kParent ? "parent" : "leaf"; }

Engine::Engine(TaxonomyGraph g, QuadTree tree)
    : g_(std::move(g)), tree_(std::move(tree)), model_(g_, tree_.leaves()), prior_(compute_prior(model_, g_)) {}

std::unique_ptr<Engine> Engine::load(const std::filesystem::path& taxonomy, const std::filesystem::path& snapshot) {
  auto g = TaxonomyGraph::load_file(taxonomy);
  auto tree = QuadTree::read_snapshot_file(snapshot, g);
  return std::make_unique<Engine>(std::move(g), std::move(tree));
}

namespace {

std::optional<double> parse_clock(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon > 2 || s.size() != colon + 3) return std::nullopt;
  int h = 0, m = 0;
  auto r1 = std::from_chars(s.data(), s.data() + colon, h);
  auto r2 = std::from_chars(s.data() + colon + 1, s.data() + s.size(), m);
  if (r1.ec != std::errc{} || r1.ptr != s.data() + colon || r2.ec != std::errc{} || r2.ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
  return h + m / 60.0;
}

}  // namespace

TimeClassId Engine::resolve_time(std::string_view s) const {
  if (auto id = g_.find_time_class(s)) return *id;
  const auto hour = parse_clock(s);
  if (!hour) throw Error(ErrorCode::kUnknownTimeClass, "time '" + std::string(s) + "' is neither a class nor HH:MM");
  std::optional<TimeClassId> best;
  double best_m = 0.0;
  for (auto t : g_.leaf_time_classes()) {
    const double m = g_.time_class(t).membership.membership(*hour);
    if (m <= 0.0) continue;
    if (!best || m > best_m || (m == best_m && g_.time_class(t).id < g_.time_class(*best).id)) {
      best = t;
      best_m = m;
    }
  }
  if (!best) throw Error(ErrorCode::kUnknownTimeClass, "no time class covers " + std::string(s));
  return *best;
}

DayClassId Engine::resolve_day(std::string_view s) const {
  if (auto id = g_.find_day_class(s)) return *id;
  const auto wd = parse_weekday(s);
  if (!wd) throw Error(ErrorCode::kUnknownDayClass, "day '" + std::string(s) + "' is neither a class nor a weekday");
  std::optional<DayClassId> best;
  for (auto d : g_.leaf_day_classes()) {
    if (!(g_.day_coverage(d) & (1u << static_cast<unsigned>(*wd)))) continue;
    if (!best || g_.day_class(d).id < g_.day_class(*best).id) best = d;
  }
  if (!best) throw Error(ErrorCode::kUnknownDayClass, "no day class covers " + std::string(s));
  return *best;
}

ActivityDistribution Engine::distribution(const LatLon& p, TimeClassId t, DayClassId d) const {
  const LocationId l = tree_.locate(p);
  return p_activity_given_context({l, t, d}, tree_, model_, g_, prior_);
}

Prediction Engine::predict(const LatLon& p, TimeClassId t, DayClassId d, std::size_t k, Level level) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  Prediction out;
  out.point = p;
  out.time = t;
  out.day = d;
  out.k = k;
  out.level = level;
  out.cell = tree_.locate(p);
  const NeighborSet ns = tree_.aggregation_radius(out.cell);
  out.radius_m = ns.radius_m;
  try {
    const auto dist = combine_with_time(model_.p_activity_given_location_radius(ns.members), t, d, g_, prior_);
    out.ranked = top_k(dist, k, level, g_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptyCandidateSet) throw;
  }
  return out;
}

nlohmann::json Engine::to_json(const Prediction& p) const {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& r : p.ranked) {
    const auto& a = g_.activity(r.activity);
    ranked.push_back({{"activity", a.id}, {"label", a.label}, {"probability", r.probability}});
  }
  return {{"context",
           {{"lat", p.point.lat},
            {"lon", p.point.lon},
            {"time", g_.time_class(p.time).id},
            {"day", g_.day_class(p.day).id},
            {"k", p.k},
            {"level", to_string(p.level)}}},
          {"cell", p.cell},
          {"radius_m", p.radius_m},
          {"ranked", ranked}};
}

ActivityDistribution Engine::predict_record(const FeedbackRecord& r) const { return distribution(r.point, r.time, r.day); }

const std::vector<double>& Engine::leaf_radii() const {
  std::call_once(radii_once_, [this] { radii_ = poiact::leaf_radii(tree_); });
  return radii_;
}

}  // namespace poiact
