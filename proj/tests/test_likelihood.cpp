#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "poiact/error.hpp"
#include "poiact/likelihood.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace poiact;
namespace orc = poiact::oracle;
using poiact::fixture::seed_taxonomy;
using poiact::fixture::unit;

namespace {

Location leaf_with(LocationId id, std::vector<std::pair<std::string, std::uint32_t>> counts) {
  Location l;
  l.id = id;
  l.size_cells = 1;
  l.rect = {0, 0, 1000, 1000};
  for (auto& [t, n] : counts) l.pois.push_back({seed_taxonomy().poi_type_id(t), n});
  std::sort(l.pois.begin(), l.pois.end(), [](auto& a, auto& b) { return a.type < b.type; });
  for (auto& c : l.pois) l.poi_total += c.count;
  return l;
}

struct Built {
  QuadTree tree;
  LocationModel model;
  Prior prior;
  explicit Built(QuadTree t) : tree(std::move(t)), model(seed_taxonomy(), tree.leaves()),
                               prior(compute_prior(model, seed_taxonomy())) {}
};

}  // namespace

TEST(TfIdf, Formula) {
  EXPECT_EQ(tf_idf(3, 3, 5, 5), 0.0);
  EXPECT_NEAR(tf_idf(5, 10, 4, 1), 0.5 * std::log(4.0), 1e-15);
  EXPECT_NEAR(tf_idf(5, 10, 4, 1), 0.6931, 1e-4);
  EXPECT_EQ(tf_idf(0, 10, 4, 1), 0.0);
  EXPECT_EQ(tf_idf(2, 2, 4, 0), 0.0);
}

TEST(ActivityWeight, EqualSplit) {
  const auto& g = seed_taxonomy();
  // v_cafe activates having_breakfast and having_snack.
  std::vector<Location> leaves{leaf_with(0, {{"v_cafe", 3}}), leaf_with(1, {{"v_tree", 1}})};
  const LocationModel m(g, leaves);
  const double tfidf = m.tf_idf(g.poi_type_id("v_cafe"), 0);
  EXPECT_NEAR(tfidf, std::log(2.0), 1e-15);
  EXPECT_EQ(g.activities_for_poi("v_cafe").size(), 2u);
  EXPECT_DOUBLE_EQ(m.activity_weight(g.activity_id("having_breakfast"), 0), tfidf / 2);
  EXPECT_DOUBLE_EQ(m.activity_weight(g.activity_id("having_snack"), 0), tfidf / 2);
  EXPECT_EQ(m.activity_weight(g.activity_id("hiking"), 0), 0.0);
}

TEST(ActivityWeight, TypeEverywhereContributesNothing) {
  const auto& g = seed_taxonomy();
  std::vector<Location> leaves{leaf_with(0, {{"v_bus_stop", 4}, {"v_cafe", 1}}), leaf_with(1, {{"v_bus_stop", 1}}),
                              leaf_with(2, {{"v_bus_stop", 2}, {"v_tree", 3}})};
  const LocationModel m(g, leaves);
  for (LocationId l = 0; l < 3; ++l) EXPECT_EQ(m.activity_weight(g.activity_id("traveling_by_bus"), l), 0.0);
  EXPECT_TRUE(m.p_activity_given_location(1).empty_location);
  EXPECT_TRUE(m.p_activity_given_location(1).empty());
}

TEST(ActivityWeight, ThreeTypeCellMatchesHandSum) {
  const auto& g = seed_taxonomy();
  std::vector<Location> leaves{leaf_with(0, {{"v_hostel", 1}, {"v_tree", 10}, {"v_cafe", 2}}),
                              leaf_with(1, {{"v_cafe", 1}}), leaf_with(2, {{"v_restaurant", 4}})};
  const LocationModel m(g, leaves);
  const double L = 3;
  const double hostel = 1.0 / 10 * std::log(L / 1), tree = 10.0 / 10 * std::log(L / 1), cafe = 2.0 / 10 * std::log(L / 2);
  EXPECT_NEAR(m.activity_weight(g.activity_id("hiking"), 0), tree, 1e-15);
  EXPECT_NEAR(m.activity_weight(g.activity_id("having_breakfast"), 0), hostel / 4 + cafe / 2, 1e-15);
  EXPECT_NEAR(m.activity_weight(g.activity_id("relaxing_at_home"), 0), hostel / 4, 1e-15);
  EXPECT_NEAR(m.activity_weight(g.activity_id("having_snack"), 0), cafe / 2, 1e-15);
}

TEST(LocationTerm, SingleActivityIsCertain) {
  const auto& g = seed_taxonomy();
  std::vector<Location> leaves{leaf_with(0, {{"v_tree", 2}}), leaf_with(1, {{"v_cafe", 1}})};
  const LocationModel m(g, leaves);
  const auto d = m.p_activity_given_location(0);
  ASSERT_EQ(d.entries.size(), 1u);
  EXPECT_EQ(d.entries[0].second, 1.0);
  EXPECT_TRUE(d.normalized);
}

TEST(LocationTerm, RadiusDegenerateAndScaleOut) {
  const auto& g = seed_taxonomy();
  std::vector<Location> leaves{leaf_with(0, {{"v_hostel", 1}, {"v_tree", 4}}), leaf_with(1, {{"v_cafe", 3}}),
                               leaf_with(2, {{"v_hostel", 1}, {"v_tree", 4}}), leaf_with(3, {{"v_bar", 2}})};
  const LocationModel m(g, leaves);
  const std::vector<Neighbor> self{{0, 0.0, 1.0}};
  const auto a = m.p_activity_given_location_radius(self), b = m.p_activity_given_location(0);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) EXPECT_NEAR(a.entries[i].second, b.entries[i].second, 1e-15);

  // Two identical cells at λ = 1 and 0.5 behave like one.
  const std::vector<Neighbor> twins{{0, 0.0, 1.0}, {2, 50.0, 0.5}};
  const auto c = m.p_activity_given_location_radius(twins);
  for (std::size_t i = 0; i < c.entries.size(); ++i) EXPECT_NEAR(c.entries[i].second, b.entries[i].second, 1e-15);

  const std::vector<Neighbor> four{{0, 0, 1.0}, {1, 10, 0.9}, {2, 30, 0.7}, {3, 60, 0.4}};
  std::vector<Neighbor> scaled = four;
  for (auto& n : scaled) n.lambda *= 0.25;
  const auto d1 = m.p_activity_given_location_radius(four), d2 = m.p_activity_given_location_radius(scaled);
  ASSERT_EQ(d1.entries.size(), d2.entries.size());
  const auto want = orc::radius_term(orc::weights(g, leaves), four, g.activities().size());
  for (std::size_t i = 0; i < d1.entries.size(); ++i) {
    EXPECT_NEAR(d1.entries[i].second, d2.entries[i].second, 1e-15);
    EXPECT_LE(orc::rel_err(d1.entries[i].second, want[idx(d1.entries[i].first)]), 1e-12);
  }
  EXPECT_NEAR(d1.total(), 1.0, 1e-12);
}

TEST(TimeTerm, BreakfastInTheMorningIsFourFifths) {
  const auto g = TaxonomyGraph::load_string(R"(poiact-taxonomy 1
time time trap=0,0,24,24
time morning parent=time trap=6,6,11,11
day day members=mon,tue,wed,thu,fri,sat,sun
act eating
act having_breakfast parent=eating
poi k_amenity irrelevant
poi v_cafe parent=k_amenity
rule v_cafe having_breakfast
sched having_breakfast times=morning trap=6,6,10,10
)");
  const double p = p_activity_given_time(g.activity_id("having_breakfast"), g.time_class_id("morning"),
                                         g.day_class_id("day"), g);
  EXPECT_DOUBLE_EQ(p, 0.8);
  // Minute-level integration of the min of the two rectangles.
  const orc::Trap breakfast{6, 6, 10, 10}, morning{6, 6, 11, 11};
  orc::Hp num = 0, den = 0;
  for (int m = 0; m < 24 * 60; ++m) {
    const orc::Hp x = orc::Hp(m) / 60;
    num += std::min(orc::trap_membership(breakfast, x), orc::trap_membership(morning, x));
    den += orc::trap_membership(morning, x);
  }
  EXPECT_LE(orc::rel_err(p, num / den), 1e-12);
}

TEST(TimeTerm, CoveringActivityIsOneAndInvalidDayIsZero) {
  const auto& g = seed_taxonomy();
  // hiking is scheduled over all of morning
  EXPECT_DOUBLE_EQ(p_activity_given_time(g.activity_id("hiking"), g.time_class_id("morning"), g.day_class_id("workday"), g), 1.0);
  EXPECT_EQ(p_activity_given_time(g.activity_id("skiing"), g.time_class_id("morning"), g.day_class_id("workday"), g), 0.0);
  EXPECT_EQ(p_activity_given_time(g.activity_id("having_dinner"), g.time_class_id("morning"), g.day_class_id("workday"), g), 0.0);
}

TEST(TimeTerm, ZeroAreaTimeClassThrows) {
  const auto g = TaxonomyGraph::load_string(R"(poiact-taxonomy 1
time time trap=0,0,24,24
time instant parent=time trap=6,6,6,6
day day members=mon,tue,wed,thu,fri,sat,sun
act eating
poi k_amenity irrelevant
poi v_cafe parent=k_amenity
rule v_cafe eating
)");
  try {
    p_activity_given_time(g.activity_id("eating"), g.time_class_id("instant"), g.day_class_id("day"), g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateTimeClass);
  }
}

TEST(TimeTermProperty, BoundedAndMatchesOracleEverywhere) {
  const auto& g = seed_taxonomy();
  for (std::size_t a = 0; a < g.activities().size(); ++a) {
    for (std::size_t t = 0; t < g.time_classes().size(); ++t) {
      for (std::size_t d = 0; d < g.day_classes().size(); ++d) {
        const auto aa = static_cast<ActivityId>(a);
        const auto tt = static_cast<TimeClassId>(t);
        const auto dd = static_cast<DayClassId>(d);
        const double p = p_activity_given_time(aa, tt, dd, g);
        ASSERT_GE(p, 0.0);
        ASSERT_LE(p, 1.0);
        const auto want = orc::time_term(g, aa, tt, dd);
        ASSERT_LE(orc::rel_err(p, want), 1e-12) << g.activity(aa).id << " " << g.time_class(tt).id;
      }
    }
  }
}

TEST(Prior, MatchesExhaustiveEnumeration) {
  const auto& g = seed_taxonomy();
  std::vector<Location> leaves{leaf_with(0, {{"v_hostel", 1}, {"v_tree", 4}}), leaf_with(1, {{"v_cafe", 3}}),
                               leaf_with(2, {{"v_bar", 2}, {"v_supermarket", 1}})};
  const LocationModel m(g, leaves);
  const auto prior = compute_prior(m, g);
  const auto want = orc::prior(g, leaves);
  double s = 0.0;
  for (std::size_t a = 0; a < prior.p.size(); ++a) {
    s += prior.p[a];
    EXPECT_LE(orc::rel_err(prior.p[a], want[a]), 1e-12) << g.activities()[a].id;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Context, UniformPriorAndFullTimeTermReturnsLocationTerm) {
  const auto& g = seed_taxonomy();
  ActivityDistribution loc;
  loc.entries = {{g.activity_id("hiking"), 0.25}, {g.activity_id("sightseeing"), 0.75}};
  Prior uniform;
  uniform.p.assign(g.activities().size(), 1.0 / g.activities().size());
  const auto d = combine_with_time(loc, g.time_class_id("morning"), g.day_class_id("workday"), g, uniform);
  ASSERT_EQ(d.entries.size(), 2u);
  EXPECT_NEAR(d.get(g.activity_id("hiking")), 0.25, 1e-15);
  EXPECT_NEAR(d.get(g.activity_id("sightseeing")), 0.75, 1e-15);
}

TEST(Context, EmptyCandidateSetThrows) {
  const auto& g = seed_taxonomy();
  ActivityDistribution loc;
  loc.entries = {{g.activity_id("having_dinner"), 1.0}};
  Prior uniform;
  uniform.p.assign(g.activities().size(), 1.0 / g.activities().size());
  try {
    combine_with_time(loc, g.time_class_id("morning"), g.day_class_id("workday"), g, uniform);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCandidateSet);
  }
}

TEST(Context, HostelExampleRanking) {
  const auto& g = seed_taxonomy();
  const auto fx = fixture::hostel_fixture(g);
  const Built b(QuadTree::build(fx.bbox, fx.pois, fx.cfg));
  const auto l = b.tree.locate(fx.probe);
  const auto t = g.time_class_id("morning");
  const auto d = g.day_class_id("workday");
  const auto dist = p_activity_given_context({l, t, d}, b.tree, b.model, g, b.prior);
  const auto ranked = top_k(dist, 10, Level::kLeaf, g);
  std::vector<std::string> ids;
  for (const auto& r : ranked) ids.push_back(g.activity(r.activity).id);
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids[0], "hiking");
  EXPECT_EQ(ids[3], "traveling_by_bus");
  EXPECT_EQ(std::set<std::string>(ids.begin() + 1, ids.begin() + 3),
            (std::set<std::string>{"having_breakfast", "relaxing_at_home"}));
  EXPECT_EQ(dist.get(g.activity_id("having_lunch")), 0.0);
  EXPECT_EQ(dist.get(g.activity_id("having_dinner")), 0.0);
  EXPECT_EQ(top_k(dist, 1, Level::kLeaf, g)[0].activity, g.activity_id("hiking"));

  const auto ns = b.tree.aggregation_radius(l);
  const auto want = orc::context(g, b.tree.leaves(), ns.members, t, d);
  for (const auto& [a, p] : dist.entries) EXPECT_LE(orc::rel_err(p, want[idx(a)]), 1e-9) << g.activity(a).id;
}

TEST(ContextProperty, MatchesBruteForceOnSmallGrids) {
  const auto& g = seed_taxonomy();
  std::mt19937_64 rng(77);
  const auto times = g.leaf_time_classes();
  const auto days = g.leaf_day_classes();
  for (int trial = 0; trial < 6; ++trial) {
    const auto city = fixture::synthetic_city(g, 120, 100 + trial, 800.0, 800.0);
    GridConfig cfg;
    cfg.base_cell_m = 100.0;
    cfg.min_agg_pois = 15;
    const Built b(QuadTree::build(city.bbox, city.pois, cfg));
    ASSERT_LE(b.tree.leaves().size(), 64u);
    for (int q = 0; q < 5; ++q) {
      const LocationId l = rng() % b.tree.leaves().size();
      const auto t = times[rng() % times.size()];
      const auto d = days[rng() % days.size()];
      const auto ns = b.tree.aggregation_radius(l);
      const auto want = orc::context(g, b.tree.leaves(), ns.members, t, d);
      orc::Hp mass = 0;
      for (const auto& v : want) mass += v;
      try {
        const auto dist = p_activity_given_context({l, t, d}, b.tree, b.model, g, b.prior);
        EXPECT_NEAR(dist.total(), 1.0, 1e-9);
        for (std::size_t a = 0; a < want.size(); ++a) {
          EXPECT_LE(orc::rel_err(dist.get(static_cast<ActivityId>(a)), want[a]), 1e-9);
        }
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kEmptyCandidateSet);
        EXPECT_TRUE(mass == 0);
      }
    }
  }
}

TEST(LikelihoodProperty, ScalingCountsKeepsLocationTerm) {
  const auto& g = seed_taxonomy();
  std::vector<Location> a{leaf_with(0, {{"v_hostel", 1}, {"v_tree", 4}, {"v_cafe", 2}}), leaf_with(1, {{"v_cafe", 3}})};
  std::vector<Location> b = a;
  for (auto& c : b[0].pois) c.count *= 7;
  const LocationModel ma(g, a), mb(g, b);
  const auto da = ma.p_activity_given_location(0), db = mb.p_activity_given_location(0);
  ASSERT_EQ(da.entries.size(), db.entries.size());
  for (std::size_t i = 0; i < da.entries.size(); ++i) EXPECT_NEAR(da.entries[i].second, db.entries[i].second, 1e-15);
}

TEST(LikelihoodProperty, EqualSplitConservesTfIdf) {
  const auto& g = seed_taxonomy();
  const auto city = fixture::synthetic_city(g, 1500, 31, 1500.0, 1500.0);
  const auto tree = QuadTree::build(city.bbox, city.pois);
  const LocationModel m(g, tree.leaves());
  for (const auto& l : tree.leaves()) {
    double want = 0.0;
    for (const auto& c : l.pois) {
      if (!g.activities_for_poi(c.type).empty()) want += m.tf_idf(c.type, l.id);
    }
    double got = 0.0;
    for (double w : m.weights(l.id)) got += w;
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, want));
    const auto d = m.p_activity_given_location(l.id);
    if (!d.empty()) {
      EXPECT_NEAR(d.total(), 1.0, 1e-9);
    }
  }
}

TEST(TopK, OrderingTiesAndRollup) {
  const auto& g = seed_taxonomy();
  ActivityDistribution d;
  d.entries = {{g.activity_id("having_breakfast"), 0.2}, {g.activity_id("having_lunch"), 0.2},
               {g.activity_id("hiking"), 0.35}, {g.activity_id("traveling_by_bus"), 0.25}};
  std::sort(d.entries.begin(), d.entries.end());
  d.normalized = true;
  const auto leaf = top_k(d, 10, Level::kLeaf, g);
  ASSERT_EQ(leaf.size(), 4u);
  EXPECT_EQ(leaf[0].activity, g.activity_id("hiking"));
  EXPECT_EQ(leaf[1].activity, g.activity_id("traveling_by_bus"));
  // equal probabilities: smaller id first
  EXPECT_LT(leaf[2].activity, leaf[3].activity);
  const auto parent = top_k(d, 10, Level::kParent, g);
  EXPECT_EQ(parent[0].activity, g.activity_id("eating"));
  EXPECT_NEAR(parent[0].probability, 0.4, 1e-15);
  double s = 0.0;
  for (const auto& r : parent) s += r.probability;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_EQ(top_k(d, 2, Level::kLeaf, g).size(), 2u);
  EXPECT_THROW(top_k(d, 0, Level::kLeaf, g), Error);
}

TEST(ScoreRegion, SingleLeafPolygonEqualsLeafContext) {
  const auto& g = seed_taxonomy();
  const auto fx = fixture::hostel_fixture(g);
  const Built b(QuadTree::build(fx.bbox, fx.pois, fx.cfg));
  const auto l = b.tree.locate(fx.probe);
  const auto& r = b.tree.leaf(l).rect;
  const auto& pj = b.tree.projection();
  const std::vector<LatLon> poly{pj.to_latlon({r.x0 * 1e-3, r.y0 * 1e-3}), pj.to_latlon({r.x1 * 1e-3, r.y0 * 1e-3}),
                                 pj.to_latlon({r.x1 * 1e-3, r.y1 * 1e-3}), pj.to_latlon({r.x0 * 1e-3, r.y1 * 1e-3})};
  const auto t = g.time_class_id("morning");
  const auto d = g.day_class_id("workday");
  const auto region = score_region(poly, t, d, b.tree, b.model, g, b.prior);
  const auto leaf = combine_with_time(b.model.p_activity_given_location(l), t, d, g, b.prior);
  ASSERT_EQ(region.entries.size(), leaf.entries.size());
  for (std::size_t i = 0; i < leaf.entries.size(); ++i) EXPECT_NEAR(region.entries[i].second, leaf.entries[i].second, 1e-9);
}

TEST(ScoreRegion, DisjointPolygonThrows) {
  const auto& g = seed_taxonomy();
  const auto fx = fixture::hostel_fixture(g);
  const Built b(QuadTree::build(fx.bbox, fx.pois, fx.cfg));
  const std::vector<LatLon> far{{10, 10}, {10, 11}, {11, 11}, {11, 10}};
  try {
    score_region(far, g.time_class_id("morning"), g.day_class_id("workday"), b.tree, b.model, g, b.prior);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoOverlap);
  }
}

TEST(ScoreRegion, TransportDistrictRanksTravelFirst) {
  const auto& g = seed_taxonomy();
  const auto bb = BoundingBox::from_extent(fixture::kTrento, 2000.0, 2000.0);
  const LocalProjection pj(bb);
  std::vector<Poi> pois;
  std::mt19937_64 rng(5);
  std::int64_t id = 1;
  auto scatter = [&](const char* type, int n, double x0, double y0, double side) {
    for (int i = 0; i < n; ++i) {
      pois.push_back(fixture::point_poi(g, type, pj.to_latlon({x0 + unit(rng()) * side, y0 + unit(rng()) * side}), id++));
    }
  };
  scatter("v_bus_stop", 60, 1200, 1200, 600);
  scatter("v_station", 20, 1200, 1200, 600);
  scatter("v_tree", 5, 1300, 1300, 500);
  scatter("v_restaurant", 15, 1250, 1250, 500);
  scatter("v_cafe", 200, 0, 0, 900);
  scatter("v_supermarket", 150, 0, 1000, 900);
  const Built b(QuadTree::build(bb, pois));
  // An irregular pentagon over the north-east district.
  const std::vector<LatLon> poly{pj.to_latlon({1150, 1180}), pj.to_latlon({1850, 1150}), pj.to_latlon({1900, 1700}),
                                 pj.to_latlon({1500, 1900}), pj.to_latlon({1180, 1750})};
  const auto dist = score_region(poly, g.time_class_id("mid_morning"), g.day_class_id("workday"), b.tree, b.model, g, b.prior);
  const auto top = top_k(dist, 1, Level::kParent, g);
  EXPECT_EQ(g.activity(top[0].activity).id, g.activity(g.rollup_to_parent(g.activity_id("traveling_by_bus"))).id);
}

TEST(BatchScores, ParallelMatchesSequentialAndExports) {
  const auto& g = seed_taxonomy();
  const auto city = fixture::synthetic_city(g, 1500, 17, 2000.0, 2000.0);
  const Built b(QuadTree::build(city.bbox, city.pois));
  const auto t = g.time_class_id("mid_morning");
  const auto d = g.day_class_id("workday");
  const auto one = score_all_leaves(t, d, b.tree, b.model, g, b.prior, 1);
  const auto many = score_all_leaves(t, d, b.tree, b.model, g, b.prior, 4);
  ASSERT_EQ(one.size(), b.tree.leaves().size());
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].location, i);
    EXPECT_EQ(one[i].dist.entries, many[i].dist.entries);
  }
  std::ostringstream csv, geo;
  write_scores_csv(csv, one, g);
  EXPECT_EQ(csv.str().rfind("# poiact-scores 1\n", 0), 0u);
  write_scores_geojson(geo, one, 3, Level::kLeaf, b.tree, g);
  const auto doc = nlohmann::json::parse(geo.str());
  ASSERT_EQ(doc["features"].size(), one.size());
  EXPECT_LE(doc["features"][0]["properties"]["top_k"].size(), 3u);
}
