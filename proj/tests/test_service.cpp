#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>

#include "poiact/error.hpp"
#include "poiact/grid_io.hpp"
#include "poiact/service.hpp"
#include "support/fixtures.hpp"

using namespace poiact;
using nlohmann::json;
using poiact::fixture::seed_taxonomy;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto city = fixture::synthetic_city(seed_taxonomy(), 3000, 21, 3000.0, 2500.0);
    bbox_ = city.bbox;
    engine_ = std::make_unique<Engine>(seed_taxonomy(), QuadTree::build(city.bbox, city.pois));
  }
  static void TearDownTestSuite() { engine_.reset(); }

  void SetUp() override {
    dir_ = fixture::scratch_dir(std::string("service_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    log_ = std::make_unique<FeedbackLog>(dir_ / "feedback.ndjson");
    service_ = std::make_unique<Service>(*engine_, *log_);
  }

  LatLon centre() const { return {(bbox_.min_lat + bbox_.max_lat) / 2, (bbox_.min_lon + bbox_.max_lon) / 2}; }

  QueryParams predict_query(const LatLon& p) const {
    return {{"lat", std::to_string(p.lat)}, {"lon", std::to_string(p.lon)}, {"time", "mid_morning"}, {"day", "workday"}};
  }

  json feedback_body(const LatLon& p, const std::string& selected) const {
    return {{"lat", p.lat},      {"lon", p.lon},          {"time", "mid_morning"},
            {"day", "workday"},  {"shown", {"hiking"}},   {"selected", selected},
            {"client_timestamp", "2024-05-01T09:00:00Z"}};
  }

  static inline BoundingBox bbox_{};
  static inline std::unique_ptr<Engine> engine_;
  std::filesystem::path dir_;
  std::unique_ptr<FeedbackLog> log_;
  std::unique_ptr<Service> service_;
};

std::string bbox_str(const BoundingBox& b) {
  return std::to_string(b.min_lon) + "," + std::to_string(b.min_lat) + "," + std::to_string(b.max_lon) + "," +
         std::to_string(b.max_lat);
}

}  // namespace

TEST_F(ServiceTest, GridReturnsEveryLeafWithoutViewport) {
  const auto r = service_->get_grid({});
  ASSERT_EQ(r.status, 200);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["type"], "FeatureCollection");
  EXPECT_EQ(j["features"].size(), engine_->tree().leaves().size());
  for (const auto& f : j["features"]) {
    EXPECT_TRUE(f["properties"].contains("radius_m"));
    EXPECT_EQ(f["geometry"]["coordinates"][0].size(), 5u);
  }
}

TEST_F(ServiceTest, GridMatchesOfflineExport) {
  EXPECT_EQ(json::parse(service_->get_grid({}).body), grid_geojson(engine_->tree()));
}

TEST_F(ServiceTest, GridViewportFilters) {
  const auto c = centre();
  const auto vp = BoundingBox::from_extent(c, 400.0, 400.0);
  const auto r = service_->get_grid({{"bbox", bbox_str(vp)}});
  ASSERT_EQ(r.status, 200);
  const auto n = json::parse(r.body)["features"].size();
  EXPECT_GT(n, 0u);
  EXPECT_LT(n, engine_->tree().leaves().size());
  EXPECT_EQ(n, engine_->tree().leaves_in(vp).size());

  const auto far = BoundingBox::from_extent({10.0, 10.0}, 400.0, 400.0);
  EXPECT_EQ(json::parse(service_->get_grid({{"bbox", bbox_str(far)}}).body)["features"].size(), 0u);
}

TEST_F(ServiceTest, GridRejectsMalformedViewport) {
  for (const char* bad : {"1,2,3", "a,b,c,d", "11.2,46.1,11.1,46.0", "1,2,3,4,5"}) {
    const auto r = service_->get_grid({{"bbox", bad}});
    EXPECT_EQ(r.status, 400) << bad;
    EXPECT_EQ(json::parse(r.body)["field"], "bbox");
  }
}

TEST_F(ServiceTest, PredictMatchesEngine) {
  const auto c = centre();
  auto q = predict_query(c);
  q["k"] = "5";
  q["level"] = "parent";
  const auto r = service_->get_predict(q);
  ASSERT_EQ(r.status, 200) << r.body;
  const auto& g = engine_->taxonomy();
  const auto want = engine_->to_json(engine_->predict({std::stod(q["lat"]), std::stod(q["lon"])},
                                                      g.time_class_id("mid_morning"), g.day_class_id("workday"), 5,
                                                      Level::kParent));
  EXPECT_EQ(json::parse(r.body), want);
  EXPECT_LE(want["ranked"].size(), 5u);
}

TEST_F(ServiceTest, PredictDefaultsToEightAndAcceptsWallClock) {
  auto q = predict_query(centre());
  q["time"] = "08:30";
  q["day"] = "tue";
  const auto r = service_->get_predict(q);
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["context"]["k"], 8);
  EXPECT_EQ(j["context"]["time"], "mid_morning");
  EXPECT_EQ(j["context"]["day"], "workday");
  EXPECT_LE(j["ranked"].size(), 8u);
  double prev = 2.0;
  for (const auto& e : j["ranked"]) {
    EXPECT_LE(e["probability"].get<double>(), prev);
    prev = e["probability"];
  }
}

TEST_F(ServiceTest, PredictReportsTheOffendingField) {
  const auto c = centre();
  const std::pair<const char*, const char*> cases[] = {
      {"time", "25:99"}, {"time", "brunch"}, {"day", "someday"}, {"lat", "north"}, {"k", "0"}, {"level", "root"}};
  for (const auto& [field, value] : cases) {
    auto q = predict_query(c);
    q[field] = value;
    const auto r = service_->get_predict(q);
    EXPECT_EQ(r.status, 400) << field;
    EXPECT_EQ(json::parse(r.body)["field"], field);
  }
  auto q = predict_query(c);
  q.erase("lon");
  EXPECT_EQ(json::parse(service_->get_predict(q).body)["field"], "lon");
}

TEST_F(ServiceTest, PredictOutsideTheGridIs404) {
  const auto r = service_->get_predict(predict_query({10.0, 10.0}));
  EXPECT_EQ(r.status, 404);
  EXPECT_TRUE(json::parse(r.body).contains("error"));
}

TEST_F(ServiceTest, FeedbackIsPersistedWithIncreasingIds) {
  const auto body = feedback_body(centre(), "hiking").dump();
  const auto a = service_->post_feedback(body);
  const auto b = service_->post_feedback(body);
  ASSERT_EQ(a.status, 201) << a.body;
  ASSERT_EQ(b.status, 201);
  EXPECT_EQ(json::parse(a.body)["id"], 1);
  EXPECT_EQ(json::parse(b.body)["id"], 2);
  EXPECT_EQ(log_->size(), 2u);
  const auto rec = log_->records()[0];
  EXPECT_EQ(rec.selected, "hiking");
  EXPECT_EQ(rec.client_timestamp, "2024-05-01T09:00:00Z");
  EXPECT_FALSE(rec.server_timestamp.empty());
}

TEST_F(ServiceTest, FeedbackSelectionNeedNotBeAmongShown) {
  const auto r = service_->post_feedback(feedback_body(centre(), "shopping").dump());
  EXPECT_EQ(r.status, 201);
}

TEST_F(ServiceTest, FeedbackValidation) {
  EXPECT_EQ(service_->post_feedback(feedback_body(centre(), "levitating").dump()).status, 422);
  auto unknown_time = feedback_body(centre(), "hiking");
  unknown_time["time"] = "teatime";
  EXPECT_EQ(service_->post_feedback(unknown_time.dump()).status, 422);
  EXPECT_EQ(service_->post_feedback("{not json").status, 400);
  EXPECT_EQ(service_->post_feedback("[1,2]").status, 400);
  auto missing = feedback_body(centre(), "hiking");
  missing.erase("selected");
  EXPECT_EQ(service_->post_feedback(missing.dump()).status, 400);
  EXPECT_EQ(log_->size(), 0u);
}

TEST_F(ServiceTest, AccuracyOfEmptyLogIsNull) {
  const auto r = service_->get_accuracy({});
  ASSERT_EQ(r.status, 200);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["records"], 0);
  EXPECT_TRUE(j["accuracy"].is_null());
}

TEST_F(ServiceTest, AccuracyMatchesOfflineComputation) {
  const auto& g = engine_->taxonomy();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ulat(bbox_.min_lat, bbox_.max_lat), ulon(bbox_.min_lon, bbox_.max_lon);
  std::vector<FeedbackRecord> offline;
  for (int i = 0; i < 60; ++i) {
    const LatLon p{ulat(rng), ulon(rng)};
    const auto sel = g.activities()[rng() % g.activities().size()].id;
    ASSERT_EQ(service_->post_feedback(feedback_body(p, sel).dump()).status, 201);
  }
  for (const auto& s : log_->records()) offline.push_back(resolve_feedback(s, *engine_));
  for (std::size_t k : {1, 3, 8}) {
    for (Level lv : {Level::kLeaf, Level::kParent}) {
      const auto want =
          topk_accuracy(offline, k, lv, [&](const FeedbackRecord& r) { return engine_->predict_record(r); }, g);
      const auto j = json::parse(
          service_->get_accuracy({{"k", std::to_string(k)}, {"level", std::string(to_string(lv))}}).body);
      EXPECT_EQ(j["records"], 60);
      EXPECT_EQ(j["hits"], want.hits);
      EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), *want.accuracy);
    }
  }
  const auto far = BoundingBox::from_extent({10.0, 10.0}, 400.0, 400.0);
  EXPECT_EQ(json::parse(service_->get_accuracy({{"bbox", bbox_str(far)}}).body)["records"], 0);
}

TEST_F(ServiceTest, HttpRoundTripWithCors) {
  httplib::Server server;
  ServiceOptions opt;
  opt.cors_origin = "http://localhost:5173";
  Service svc(*engine_, *log_, opt);
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  const auto c = centre();
  auto res = cli.Get("/predict?lat=" + std::to_string(c.lat) + "&lon=" + std::to_string(c.lon) +
                     "&time=mid_morning&day=workday&k=3");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  EXPECT_LE(json::parse(res->body)["ranked"].size(), 3u);

  res = cli.Post("/feedback", feedback_body(c, "hiking").dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);

  res = cli.Get("/accuracy?k=8");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["records"], 1);

  res = cli.Get("/grid?bbox=oops");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Options("/predict");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  server.stop();
  th.join();
}

// --- feedback log ----------------------------------------------------------

namespace {

StoredFeedback sample_feedback(const std::string& selected) {
  StoredFeedback f;
  f.lat = 46.07;
  f.lon = 11.12;
  f.time = "mid_morning";
  f.day = "workday";
  f.shown = {"hiking", "having_breakfast"};
  f.selected = selected;
  return f;
}

}  // namespace

TEST(FeedbackLog, ReopenReplaysRecords) {
  const auto path = fixture::scratch_dir("fb_reopen") / "log.ndjson";
  {
    FeedbackLog log(path);
    EXPECT_EQ(log.append(sample_feedback("hiking")), 1u);
    EXPECT_EQ(log.append(sample_feedback("shopping")), 2u);
  }
  FeedbackLog log(path);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log.records()[1].selected, "shopping");
  EXPECT_EQ(log.records()[0].shown, (std::vector<std::string>{"hiking", "having_breakfast"}));
  EXPECT_EQ(log.append(sample_feedback("hiking")), 3u);
}

TEST(FeedbackLog, TornFinalLineIsDropped) {
  const auto path = fixture::scratch_dir("fb_torn") / "log.ndjson";
  {
    FeedbackLog log(path);
    log.append(sample_feedback("hiking"));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"id":2,"lat":46.0,"lon":11.1,"ti)";
  }
  {
    FeedbackLog log(path);
    EXPECT_EQ(log.size(), 1u);
    EXPECT_EQ(log.append(sample_feedback("shopping")), 2u);
  }
  FeedbackLog log(path);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log.records()[1].selected, "shopping");
}

TEST(FeedbackLog, CorruptMiddleLineThrows) {
  const auto path = fixture::scratch_dir("fb_corrupt") / "log.ndjson";
  {
    std::ofstream out(path);
    out << "garbage\n" << to_json(sample_feedback("hiking")).dump() << "\n";
  }
  try {
    FeedbackLog log(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos) << e.what();
  }
}

TEST(FeedbackLog, ConcurrentAppendsKeepEveryRecord) {
  const auto path = fixture::scratch_dir("fb_concurrent") / "log.ndjson";
  constexpr int kThreads = 8, kEach = 25;
  {
    FeedbackLog log(path);
    std::vector<std::thread> ts;
    for (int t = 0; t < kThreads; ++t) {
      ts.emplace_back([&] {
        for (int i = 0; i < kEach; ++i) log.append(sample_feedback("hiking"));
      });
    }
    for (auto& t : ts) t.join();
    EXPECT_EQ(log.size(), static_cast<std::size_t>(kThreads * kEach));
  }
  FeedbackLog log(path);
  const auto rs = log.records();
  ASSERT_EQ(rs.size(), static_cast<std::size_t>(kThreads * kEach));
  std::set<std::uint64_t> ids;
  for (const auto& r : rs) ids.insert(r.id);
  EXPECT_EQ(ids.size(), rs.size());
  EXPECT_EQ(*ids.rbegin(), rs.size());
}
