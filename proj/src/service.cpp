#include "poiact/service.hpp"

#include <charconv>
#include <cmath>

#include <httplib.h>

#include "poiact/error.hpp"
#include "poiact/grid_io.hpp"

namespace poiact {

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) { return {status, body.dump()}; }

HttpResponse error_response(int status, const std::string& field, const std::string& message) {
  nlohmann::json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_response(status, body);
}

struct BadParam {
  std::string field;
  std::string message;
};

std::optional<std::string> param(const QueryParams& q, const std::string& name) {
  auto it = q.find(name);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

double number_param(const QueryParams& q, const std::string& name) {
  auto v = param(q, name);
  if (!v) throw BadParam{name, "missing parameter '" + name + "'"};
  double out = 0.0;
  auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc{} || r.ptr != v->data() + v->size() || !std::isfinite(out)) {
    throw BadParam{name, "parameter '" + name + "' is not a number"};
  }
  return out;
}

std::size_t k_param(const QueryParams& q, std::size_t def) {
  auto v = param(q, "k");
  if (!v) return def;
  std::size_t out = 0;
  auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc{} || r.ptr != v->data() + v->size() || out == 0) {
    throw BadParam{"k", "parameter 'k' must be a positive integer"};
  }
  return out;
}

Level level_param(const QueryParams& q) {
  auto v = param(q, "level");
  if (!v) return Level::kLeaf;
  auto l = parse_level(*v);
  if (!l) throw BadParam{"level", "parameter 'level' must be leaf or parent"};
  return *l;
}

/// west,south,east,north (GeoJSON bbox order).
std::optional<BoundingBox> bbox_param(const QueryParams& q) {
  auto v = param(q, "bbox");
  if (!v) return std::nullopt;
  double vals[4];
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const auto end = i < 3 ? v->find(',', pos) : v->size();
    if (end == std::string::npos) throw BadParam{"bbox", "bbox must be west,south,east,north"};
    auto r = std::from_chars(v->data() + pos, v->data() + end, vals[i]);
    if (r.ec != std::errc{} || r.ptr != v->data() + end || !std::isfinite(vals[i])) {
      throw BadParam{"bbox", "bbox must be west,south,east,north"};
    }
    pos = end + 1;
  }
  BoundingBox b{vals[1], vals[0], vals[3], vals[2]};
  try {
    b.validate();
  } catch (const Error&) {
    throw BadParam{"bbox", "bbox must satisfy west < east and south < north"};
  }
  return b;
}

template <class F>
HttpResponse guarded(F&& f) {
  try {
    return f();
  } catch (const BadParam& e) {
    return error_response(400, e.field, e.message);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kOutOfBounds:
        return error_response(404, "", e.what());
      case ErrorCode::kUnknownActivity:
      case ErrorCode::kUnknownTimeClass:
      case ErrorCode::kUnknownDayClass:
        return error_response(422, "", e.what());
      case ErrorCode::kInvalidArgument:
      case ErrorCode::kParse:
        return error_response(400, "", e.what());
      default:
        return error_response(500, "", e.what());
    }
  }
}

}  // namespace

Service::Service(const Engine& engine, FeedbackLog& log, ServiceOptions options)
    : engine_(engine), log_(log), options_(std::move(options)) {}

HttpResponse Service::get_grid(const QueryParams& q) const {
  return guarded([&] {
    const auto& tree = engine_.tree();
    std::vector<LocationId> ids;
    if (auto vp = bbox_param(q)) {
      ids = tree.leaves_in(*vp);
    } else {
      for (const auto& l : tree.leaves()) ids.push_back(l.id);
    }
    return json_response(200, grid_geojson(tree, ids, engine_.leaf_radii()));
  });
}

HttpResponse Service::get_predict(const QueryParams& q) const {
  return guarded([&] {
    const double lat = number_param(q, "lat");
    const double lon = number_param(q, "lon");
    const auto time_s = param(q, "time");
    const auto day_s = param(q, "day");
    if (!time_s) throw BadParam{"time", "missing parameter 'time'"};
    if (!day_s) throw BadParam{"day", "missing parameter 'day'"};
    TimeClassId t;
    DayClassId d;
    try {
      t = engine_.resolve_time(*time_s);
    } catch (const Error& e) {
      throw BadParam{"time", e.what()};
    }
    try {
      d = engine_.resolve_day(*day_s);
    } catch (const Error& e) {
      throw BadParam{"day", e.what()};
    }
    const auto k = k_param(q, options_.default_k);
    const auto level = level_param(q);
    return json_response(200, engine_.to_json(engine_.predict({lat, lon}, t, d, k, level)));
  });
}

HttpResponse Service::post_feedback(const std::string& body) const {
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw BadParam{"", "body is not valid JSON"};
    }
    if (!j.is_object()) throw BadParam{"", "body must be a JSON object"};
    StoredFeedback f = stored_feedback_from_json(j);
    // Validates every name; unknown ones surface as 422.
    const FeedbackRecord resolved = resolve_feedback(f, engine_);
    const auto& g = engine_.taxonomy();
    f.time = g.time_class(resolved.time).id;
    f.day = g.day_class(resolved.day).id;
    const auto id = log_.append(std::move(f));
    return json_response(201, {{"id", id}});
  });
}

HttpResponse Service::get_accuracy(const QueryParams& q) const {
  return guarded([&] {
    const auto k = k_param(q, options_.default_k);
    const auto level = level_param(q);
    const auto zone = bbox_param(q);
    std::vector<FeedbackRecord> records;
    for (const auto& s : log_.records()) {
      if (zone && !zone->contains({s.lat, s.lon})) continue;
      records.push_back(resolve_feedback(s, engine_));
    }
    const auto res = topk_accuracy(
        records, k, level, [&](const FeedbackRecord& r) { return engine_.predict_record(r); }, engine_.taxonomy());
    nlohmann::json body = {{"k", k}, {"level", to_string(level)}, {"records", res.records}, {"hits", res.hits}};
    body["accuracy"] = res.accuracy ? nlohmann::json(*res.accuracy) : nlohmann::json(nullptr);
    return json_response(200, body);
  });
}

void Service::mount(httplib::Server& server) const {
  auto to_params = [](const httplib::Request& req) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    return q;
  };
  auto send = [this](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", options_.cors_origin);
    res.set_content(r.body, "application/json");
  };
  server.Get("/grid", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_grid(to_params(req)));
  });
  server.Get("/predict", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_predict(to_params(req)));
  });
  server.Post("/feedback", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, post_feedback(req.body));
  });
  server.Get("/accuracy", [=, this](const httplib::Request& req, httplib::Response& res) {
    send(res, get_accuracy(to_params(req)));
  });
  server.Options(R"(/.*)", [this](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", options_.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

}  // namespace poiact
