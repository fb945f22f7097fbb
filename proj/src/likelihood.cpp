#include "poiact/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "poiact/error.hpp"
#include "poiact/fuzzy.hpp"
#include "poiact/grid_io.hpp"
#include "poiact/kernels.hpp"

namespace poiact {

double ActivityDistribution::get(ActivityId a) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), a,
                             [](const auto& e, ActivityId v) { return e.first < v; });
  return it != entries.end() && it->first == a ? it->second : 0.0;
}

double ActivityDistribution::total() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.second;
  return s;
}

ActivityDistribution ActivityDistribution::from_dense(std::span<const double> w) {
  ActivityDistribution d;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0) d.entries.emplace_back(static_cast<ActivityId>(i), w[i]);
  }
  return d;
}

ActivityDistribution ActivityDistribution::normalized_copy() const {
  ActivityDistribution d;
  const double s = total();
  if (!(s > 0.0)) {
    d.empty_location = true;
    d.normalized = true;
    return d;
  }
  d.entries.reserve(entries.size());
  for (const auto& [a, w] : entries) {
    if (w > 0.0) d.entries.emplace_back(a, w / s);
  }
  d.normalized = true;
  return d;
}

double tf_idf(std::uint64_t n_fl, std::uint64_t max_n_l, std::size_t num_locations, std::size_t df) {
  if (n_fl == 0 || df == 0 || max_n_l == 0) return 0.0;
  const double tf = static_cast<double>(n_fl) / static_cast<double>(max_n_l);
  return tf * std::log(static_cast<double>(num_locations) / static_cast<double>(df));
}

double p_activity_given_time(ActivityId a, TimeClassId t, DayClassId d, const TaxonomyGraph& g) {
  const HourlyMembership& ft = g.time_membership(t);
  const double st = fuzzy_area(ft);
  if (!(st > 0.0)) throw Error(ErrorCode::kDegenerateTimeClass, "time class " + g.time_class(t).id + " has zero area");
  if (!g.is_valid_at(a, t, d)) return 0.0;
  const double inter = fuzzy_area(pointwise_min(g.activity_membership(a), ft));
  return std::clamp(inter / st, 0.0, 1.0);
}

LocationModel::LocationModel(const TaxonomyGraph& g, std::span<const Location> leaves)
    : g_(g), leaves_(leaves), num_activities_(g.activities().size()), df_(g.poi_types().size(), 0),
      w_(leaves.size() * g.activities().size(), 0.0) {
  for (const auto& l : leaves_) {
    for (const auto& c : l.pois) {
      if (c.count > 0) ++df_[idx(c.type)];
    }
  }
  for (const auto& l : leaves_) {
    double* row = w_.data() + static_cast<std::size_t>(l.id) * num_activities_;
    for (const auto& c : l.pois) {
      const auto acts = g_.activities_for_poi(c.type);
      if (acts.empty()) continue;
      const double share = tf_idf(c.type, l.id) / static_cast<double>(acts.size());
      for (auto a : acts) row[idx(a)] += share;
    }
  }
}

std::size_t LocationModel::document_frequency(PoiTypeId f) const { return df_[idx(f)]; }

double LocationModel::tf_idf(PoiTypeId f, LocationId l) const {
  const Location& loc = leaves_[l];
  std::uint64_t max_n = 0;
  for (const auto& c : loc.pois) max_n = std::max<std::uint64_t>(max_n, c.count);
  return poiact::tf_idf(loc.count_of(f), max_n, leaves_.size(), df_[idx(f)]);
}

std::span<const double> LocationModel::weights(LocationId l) const {
  return {w_.data() + static_cast<std::size_t>(l) * num_activities_, num_activities_};
}

ActivityDistribution LocationModel::p_activity_given_location(LocationId l) const {
  return ActivityDistribution::from_dense(weights(l)).normalized_copy();
}

ActivityDistribution LocationModel::p_activity_given_location_radius(std::span<const Neighbor> members) const {
  std::vector<double> acc(num_activities_, 0.0);
  for (const auto& m : members) {
    if (m.lambda > 0.0) kernels::weighted_accumulate(weights(m.id), m.lambda, acc);
  }
  const double total = kernels::sum(acc);
  ActivityDistribution d;
  d.normalized = true;
  if (!(total > 0.0)) {
    d.empty_location = true;
    return d;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (acc[i] > 0.0) d.entries.emplace_back(static_cast<ActivityId>(i), acc[i] / total);
  }
  return d;
}

Prior compute_prior(const LocationModel& model, const TaxonomyGraph& g) {
  // The double sum factorizes: sum_l P(a|l) times sum_(t,d) P(a|t,d).
  const std::size_t n = g.activities().size();
  std::vector<double> loc(n, 0.0), time(n, 0.0);
  for (LocationId l = 0; l < model.num_locations(); ++l) {
    for (const auto& [a, p] : model.p_activity_given_location(l).entries) loc[idx(a)] += p;
  }
  const auto times = g.leaf_time_classes();
  const auto days = g.leaf_day_classes();
  for (std::size_t a = 0; a < n; ++a) {
    for (auto t : times) {
      for (auto d : days) time[a] += p_activity_given_time(static_cast<ActivityId>(a), t, d, g);
    }
  }
  Prior prior;
  prior.p.assign(n, 0.0);
  double s = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    prior.p[a] = loc[a] * time[a];
    s += prior.p[a];
  }
  if (s > 0.0) {
    for (auto& v : prior.p) v /= s;
  }
  return prior;
}

ActivityDistribution combine_with_time(const ActivityDistribution& location_term, TimeClassId t, DayClassId d,
                                       const TaxonomyGraph& g, const Prior& prior) {
  ActivityDistribution out;
  for (const auto& [a, pl] : location_term.entries) {
    const double pt = p_activity_given_time(a, t, d, g);
    const double pa = prior(a);
    if (!(pt > 0.0) || !(pa > 0.0)) continue;
    out.entries.emplace_back(a, pl * pt / pa);
  }
  out = out.normalized_copy();
  if (out.empty()) {
    throw Error(ErrorCode::kEmptyCandidateSet,
                "no activity is valid at " + g.time_class(t).id + "/" + g.day_class(d).id + " here");
  }
  return out;
}

ActivityDistribution p_activity_given_context(const Context& ctx, const QuadTree& tree, const LocationModel& model,
                                              const TaxonomyGraph& g, const Prior& prior) {
  const NeighborSet ns = tree.aggregation_radius(ctx.location);
  return combine_with_time(model.p_activity_given_location_radius(ns.members), ctx.time, ctx.day, g, prior);
}

ActivityDistribution rollup(const ActivityDistribution& dist, const TaxonomyGraph& g) {
  std::vector<double> dense(g.activities().size(), 0.0);
  for (const auto& [a, p] : dist.entries) dense[idx(g.rollup_to_parent(a))] += p;
  ActivityDistribution out = ActivityDistribution::from_dense(dense);
  out.normalized = dist.normalized;
  out.empty_location = dist.empty_location;
  return out;
}

std::vector<RankedActivity> top_k(const ActivityDistribution& dist, std::size_t k, Level level,
                                  const TaxonomyGraph& g) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  const ActivityDistribution& src = level == Level::kParent ? rollup(dist, g) : dist;
  std::vector<RankedActivity> ranked;
  ranked.reserve(src.entries.size());
  for (const auto& [a, p] : src.entries) ranked.push_back({a, p});
  // Entries are id-ordered, so a stable sort on probability breaks ties by id.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedActivity& x, const RankedActivity& y) { return x.probability > y.probability; });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

ActivityDistribution score_region(std::span<const LatLon> polygon, TimeClassId t, DayClassId d, const QuadTree& tree,
                                  const LocationModel& model, const TaxonomyGraph& g, const Prior& prior) {
  std::vector<PointM> ring;
  ring.reserve(polygon.size());
  for (const auto& p : polygon) ring.push_back(tree.projection().to_local(p));
  if (ring.size() >= 2 && ring.front().x == ring.back().x && ring.front().y == ring.back().y) ring.pop_back();
  if (ring.size() < 3) throw Error(ErrorCode::kInvalidArgument, "region polygon needs at least 3 vertices");

  std::vector<double> acc(model.num_activities(), 0.0);
  bool any = false;
  for (const auto& l : tree.leaves()) {
    const double area = l.rect.area_m2();
    if (!(area > 0.0)) continue;
    const double frac = std::min(1.0, clipped_area_m2(ring, l.rect) / area);
    if (!(frac > 0.0)) continue;
    any = true;
    kernels::weighted_accumulate(model.weights(l.id), frac, acc);
  }
  if (!any) throw Error(ErrorCode::kNoOverlap, "region does not overlap the grid");
  return combine_with_time(ActivityDistribution::from_dense(acc).normalized_copy(), t, d, g, prior);
}

std::vector<LeafScore> score_all_leaves(TimeClassId t, DayClassId d, const QuadTree& tree, const LocationModel& model,
                                        const TaxonomyGraph& g, const Prior& prior, unsigned threads) {
  const std::size_t n = tree.leaves().size();
  std::vector<LeafScore> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto id = static_cast<LocationId>(i);
      const NeighborSet ns = tree.aggregation_radius(id);
      out[i].location = id;
      out[i].radius_m = ns.radius_m;
      const auto loc = model.p_activity_given_location_radius(ns.members);
      try {
        out[i].dist = combine_with_time(loc, t, d, g, prior);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyCandidateSet) throw;
        out[i].dist = {};
        out[i].dist.empty_location = loc.empty_location;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      try {
        work(std::min(n, k * chunk), std::min(n, (k + 1) * chunk));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void write_scores_csv(std::ostream& out, std::span<const LeafScore> scores, const TaxonomyGraph& g) {
  out << "# poiact-scores 1\n";
  out << "location_id,activity,probability\n";
  out << std::setprecision(17);
  for (const auto& s : scores) {
    for (const auto& [a, p] : s.dist.entries) out << s.location << ',' << g.activity(a).id << ',' << p << '\n';
  }
}

void write_scores_geojson(std::ostream& out, std::span<const LeafScore> scores, std::size_t k, Level level,
                          const QuadTree& tree, const TaxonomyGraph& g) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& s : scores) {
    nlohmann::json ranked = nlohmann::json::array();
    if (!s.dist.empty()) {
      for (const auto& r : top_k(s.dist, k, level, g)) {
        ranked.push_back({{"activity", g.activity(r.activity).id}, {"probability", r.probability}});
      }
    }
    const Location& l = tree.leaf(s.location);
    features.push_back({
        {"type", "Feature"},
        {"id", l.id},
        {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({leaf_ring(tree, l)})}}},
        {"properties", {{"id", l.id}, {"poi_total", l.poi_total}, {"radius_m", s.radius_m}, {"top_k", ranked}}},
    });
  }
  nlohmann::json doc = {{"type", "FeatureCollection"}, {"poiact_format", "scores"}, {"version", 1},
                        {"features", std::move(features)}};
  out << doc.dump() << '\n';
}

}  // namespace poiact
