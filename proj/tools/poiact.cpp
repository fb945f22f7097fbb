// poiact: ingest -> grid -> predict -> evaluate pipeline, plus serve/check.
//
// Exit codes: 0 ok, 1 invariant violation (check), 2 usage or input error.
// POIACT_LOG=quiet|info|debug controls stderr chatter (default info).

#include <CLI11.hpp>
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "poiact/engine.hpp"
#include "poiact/error.hpp"
#include "poiact/evaluation.hpp"
#include "poiact/feedback_log.hpp"
#include "poiact/grid.hpp"
#include "poiact/grid_io.hpp"
#include "poiact/kernels.hpp"
#include "poiact/likelihood.hpp"
#include "poiact/osm.hpp"
#include "poiact/poi_store.hpp"
#include "poiact/service.hpp"
#include "poiact/taxonomy.hpp"

namespace fs = std::filesystem;
using namespace poiact;

namespace {

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* v = std::getenv("POIACT_LOG");
    if (!v) return LogLevel::kInfo;
    const std::string s = v;
    if (s == "quiet" || s == "error") return LogLevel::kQuiet;
    if (s == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::cerr << "poiact: " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::cerr << "poiact[debug]: " << msg << '\n';
}

struct InvariantViolation {
  std::vector<std::string> messages;
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(ErrorCode::kIo, std::string(what) + " not found: " + p.string());
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p, const char* what) {
  require_file(p, what);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, std::string("cannot read ") + what + " " + p.string());
  return in;
}

/// west,south,east,north
BoundingBox parse_bbox(const std::string& s) {
  double v[4];
  std::istringstream in(s);
  std::string part;
  int i = 0;
  while (std::getline(in, part, ',')) {
    if (i >= 4) break;
    try {
      std::size_t used = 0;
      v[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kDegenerateBbox, "bbox must be west,south,east,north");
    }
    ++i;
  }
  if (i != 4 || in.rdbuf()->in_avail() > 0) throw Error(ErrorCode::kDegenerateBbox, "bbox must be west,south,east,north");
  BoundingBox b{v[1], v[0], v[3], v[2]};
  b.validate();
  return b;
}

void add_grid_flags(CLI::App* cmd, GridConfig& cfg) {
  cmd->add_option("--base-cell-m,--cell-size", cfg.base_cell_m, "Base cell side in meters")->capture_default_str();
  cmd->add_option("--h-min", cfg.h_min, "Leaves below this POI count are flagged sparse")->capture_default_str();
  cmd->add_option("--h-max", cfg.h_max, "Split nodes holding more POIs than this")->capture_default_str();
  cmd->add_option("--r0-m", cfg.r0_m, "Initial aggregation radius")->capture_default_str();
  cmd->add_option("--dr-m", cfg.dr_m, "Aggregation radius step")->capture_default_str();
  cmd->add_option("--r-max-m", cfg.r_max_m, "Aggregation radius cap")->capture_default_str();
  cmd->add_option("--min-agg-pois", cfg.min_agg_pois, "POIs needed to stop expanding the radius")->capture_default_str();
}

std::string config_header(const GridConfig& c) {
  std::ostringstream o;
  o << "# grid config: base_cell_m=" << c.base_cell_m << " h_min=" << c.h_min << " h_max=" << c.h_max
    << " r0_m=" << c.r0_m << " dr_m=" << c.dr_m << " r_max_m=" << c.r_max_m << " min_agg_pois=" << c.min_agg_pois;
  return o.str();
}

nlohmann::json stats_json(const IngestStats& s, const ParseReport& r) {
  return {{"elements_read", s.elements_read},
          {"elements_outside_bbox", r.nodes_outside_bbox},
          {"invalid_elements", r.invalid_elements},
          {"typed_elements", s.typed_elements},
          {"pois_extracted", s.pois_extracted},
          {"pois_relevant", s.pois_relevant},
          {"pois_discarded", s.pois_discarded},
          {"unresolved_ways", s.unresolved_ways},
          {"unresolved_relations", s.unresolved_relations},
          {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  fs::path osm, taxonomy, out;
  std::string bbox;
  bool in_memory = false;
};

int cmd_ingest(const IngestArgs& a) {
  require_file(a.osm, "OSM file");
  const auto g = TaxonomyGraph::load_file(a.taxonomy);
  const BoundingBox bbox = parse_bbox(a.bbox);
  ParseReport report;
  ExtractResult res;
  if (a.in_memory) {
    std::vector<RawElement> elements;
    parse_osm_file(a.osm, bbox, [&](RawElement&& e) { elements.push_back(std::move(e)); }, &report);
    res = extract_pois(elements, g);
  } else {
    res = ingest_osm_file(a.osm, bbox, g, &report);
  }
  res.stats.elements_read = report.elements_read;
  write_poi_store_file(a.out, {bbox, res.pois}, g);
  log_info("wrote " + std::to_string(res.pois.size()) + " POIs to " + a.out.string());
  std::cout << stats_json(res.stats, report).dump(2) << '\n';
  return 0;
}

struct GridArgs {
  fs::path store, taxonomy, snapshot, geojson;
  GridConfig cfg;
};

int cmd_grid(const GridArgs& a) {
  const auto g = TaxonomyGraph::load_file(a.taxonomy);
  const auto store = read_poi_store_file(a.store, g);
  GridBuildReport rep;
  const auto tree = QuadTree::build(store.bbox, store.pois, a.cfg, &rep);
  tree.write_snapshot_file(a.snapshot, g);
  if (!a.geojson.empty()) {
    auto out = open_out(a.geojson);
    out << grid_geojson(tree).dump() << '\n';
  }
  std::size_t sparse = 0;
  std::uint64_t max_count = 0, min_count = UINT64_MAX;
  for (const auto& l : tree.leaves()) {
    sparse += l.sparse ? 1 : 0;
    max_count = std::max(max_count, l.poi_total);
    min_count = std::min(min_count, l.poi_total);
  }
  const auto dims = tree.base_dims();
  std::cout << config_header(a.cfg) << '\n'
            << "base_grid " << dims.cols << " x " << dims.rows << '\n'
            << "leaves " << tree.leaves().size() << '\n'
            << "sparse_leaves " << sparse << '\n'
            << "pois_in " << rep.pois_in << '\n'
            << "pois_assigned " << rep.pois_assigned << '\n'
            << "pois_out_of_bounds " << rep.out_of_bounds << '\n'
            << "leaf_poi_total_sum " << tree.total_count() << '\n'
            << "leaf_poi_min " << (tree.leaves().empty() ? 0 : min_count) << '\n'
            << "leaf_poi_max " << max_count << '\n';
  return 0;
}

struct PredictArgs {
  fs::path taxonomy, snapshot, out_csv, out_geojson;
  double lat = NAN, lon = NAN;
  std::string time, day, level = "leaf";
  std::size_t k = 8;
  bool json = false;
  bool all_cells = false;
};

int cmd_predict(const PredictArgs& a) {
  const auto engine = Engine::load(a.taxonomy, a.snapshot);
  const auto level = parse_level(a.level);
  if (!level) throw Error(ErrorCode::kInvalidArgument, "--level must be leaf or parent");
  const auto t = engine->resolve_time(a.time);
  const auto d = engine->resolve_day(a.day);
  const auto& g = engine->taxonomy();
  if (a.all_cells) {
    const auto scores = score_all_leaves(t, d, engine->tree(), engine->model(), g, engine->prior());
    if (!a.out_csv.empty()) {
      auto out = open_out(a.out_csv);
      write_scores_csv(out, scores, g);
    }
    if (!a.out_geojson.empty()) {
      auto out = open_out(a.out_geojson);
      write_scores_geojson(out, scores, a.k, *level, engine->tree(), g);
    }
    std::cout << "scored " << scores.size() << " cells for " << g.time_class(t).id << "/" << g.day_class(d).id
              << '\n';
    return 0;
  }
  if (std::isnan(a.lat) || std::isnan(a.lon)) throw Error(ErrorCode::kInvalidArgument, "--lat and --lon are required");
  const auto p = engine->predict({a.lat, a.lon}, t, d, a.k, *level);
  if (a.json) {
    std::cout << engine->to_json(p).dump() << '\n';
    return 0;
  }
  std::cout << "# cell " << p.cell << " radius_m " << p.radius_m << " time " << g.time_class(t).id << " day "
            << g.day_class(d).id << " level " << to_string(*level) << '\n';
  if (p.ranked.empty()) std::cout << "# no activity fits this context\n";
  int rank = 1;
  for (const auto& r : p.ranked) {
    std::cout << rank++ << '\t' << g.activity(r.activity).id << '\t' << r.probability << '\n';
  }
  return 0;
}

struct EvaluateArgs {
  fs::path taxonomy, snapshot, pos, mapping, landuse, out_dir, feedback;
  std::uint64_t seed = 1;
  std::uint32_t sample_size = 100;
  double outlier_radius_m = 1000.0;
  std::string level = "parent";
  std::string pd = "sum";
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto engine = Engine::load(a.taxonomy, a.snapshot);
  const auto& g = engine->taxonomy();
  auto mapping_in = open_in(a.mapping, "mapping file");
  const auto mapping = load_category_mapping(mapping_in, g);
  auto pos_in = open_in(a.pos, "POS file");
  PosLoadReport pos_report;
  const auto terminals = load_pos(pos_in, mapping, &pos_report);
  auto landuse_in = open_in(a.landuse, "land-use file");
  const auto zones = load_land_use(landuse_in);

  StratifyOptions opt;
  opt.seed = a.seed;
  opt.sample_size = a.sample_size;
  opt.outlier_radius_m = a.outlier_radius_m;
  const auto level = parse_level(a.level);
  if (!level) throw Error(ErrorCode::kInvalidArgument, "--level must be leaf or parent");
  opt.level = *level;
  if (a.pd == "sum") {
    opt.pd_variant = PdVariant::kSum;
  } else if (a.pd == "mean") {
    opt.pd_variant = PdVariant::kMean;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "--pd must be sum or mean");
  }

  const PosIndex index(engine->tree(), terminals, g.activities().size());
  const auto report = stratified_report(engine->tree(), engine->model(), index, zones, g, opt);
  fs::create_directories(a.out_dir);
  auto doc = to_json(report, g);
  doc["pos_rows"] = pos_report.rows;
  doc["pos_excluded"] = pos_report.excluded_by_category;

  if (!a.feedback.empty()) {
    require_file(a.feedback, "feedback log");
    FeedbackLog log(a.feedback);
    std::vector<FeedbackRecord> records;
    for (const auto& s : log.records()) records.push_back(resolve_feedback(s, *engine));
    std::vector<ActivityDistribution> preds;
    for (const auto& r : records) {
      try {
        preds.push_back(engine->predict_record(r));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEmptyCandidateSet && e.code() != ErrorCode::kOutOfBounds) throw;
        preds.emplace_back();
      }
    }
    auto out = open_out(a.out_dir / "accuracy.csv");
    out << "# poiact-accuracy 1\nk,level,records,hits,accuracy\n";
    nlohmann::json acc = nlohmann::json::array();
    for (std::size_t k = 1; k <= g.activities().size(); ++k) {
      for (Level lv : {Level::kLeaf, Level::kParent}) {
        const auto r = topk_accuracy(records, preds, k, lv, g);
        out << k << ',' << to_string(lv) << ',' << r.records << ',' << r.hits << ','
            << (r.accuracy ? std::to_string(*r.accuracy) : "") << '\n';
        if (k == 8) acc.push_back({{"k", k}, {"level", to_string(lv)}, {"hits", r.hits}, {"records", r.records}});
      }
    }
    doc["accuracy_k8"] = acc;
  }

  {
    auto out = open_out(a.out_dir / "report.json");
    out << doc.dump(2) << '\n';
  }
  {
    auto out = open_out(a.out_dir / "location_errors.csv");
    write_location_errors_csv(out, report);
  }
  {
    auto out = open_out(a.out_dir / "category_pd.csv");
    write_category_pd_csv(out, report, g);
  }
  for (const auto& z : report.zones) {
    std::cout << "zone " << z.name << " kind=" << to_string(z.kind) << " sampled=" << z.sampled
              << " outliers=" << z.outliers << " evaluated=" << z.locations.size();
    if (z.skipped) {
      std::cout << " skipped (no locations)\n";
      continue;
    }
    std::cout << " mode_local=" << z.local.kde_mode << " mode_poi_norm=" << z.poi_norm.kde_mode
              << " mode_pos_norm=" << z.pos_norm.kde_mode << '\n';
  }
  return 0;
}

struct ServeArgs {
  fs::path taxonomy, snapshot, feedback = "feedback.ndjson";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors = "*";
};

int cmd_serve(const ServeArgs& a) {
  const auto engine = Engine::load(a.taxonomy, a.snapshot);
  FeedbackLog log(a.feedback);
  ServiceOptions opt;
  opt.cors_origin = a.cors;
  Service service(*engine, log, opt);
  httplib::Server server;
  service.mount(server);
  log_info("serving on http://" + a.host + ":" + std::to_string(a.port) + " (kernels: " +
           std::string(kernels::isa_name(kernels::active().isa)) + ")");
  if (!server.listen(a.host, a.port)) throw Error(ErrorCode::kIo, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

struct CheckArgs {
  fs::path taxonomy, snapshot;
};

int cmd_check(const CheckArgs& a) {
  std::vector<std::string> violations;
  auto g = TaxonomyGraph::load_file(a.taxonomy);  // throws on integrity errors
  const auto counts = g.counts();
  std::cout << "taxonomy ok: " << counts.poi_types << " POI types (" << counts.relevant_poi_types << " relevant), "
            << counts.activities << " activities, " << counts.time_classes << " time classes, " << counts.day_classes
            << " day classes\n";
  const std::string round_trip = TaxonomyGraph::load_string(g.serialize()).serialize();
  if (round_trip != g.serialize()) violations.push_back("taxonomy does not round-trip through serialize/load");
  if (!a.snapshot.empty()) {
    Engine engine(std::move(g), QuadTree::read_snapshot_file(a.snapshot, TaxonomyGraph::load_file(a.taxonomy)));
    const auto check = check_grid(engine.tree());
    violations.insert(violations.end(), check.violations.begin(), check.violations.end());
    std::size_t empty = 0;
    for (const auto& l : engine.tree().leaves()) {
      const auto d = engine.model().p_activity_given_location(l.id);
      if (d.empty()) {
        ++empty;
        continue;
      }
      if (std::abs(d.total() - 1.0) > 1e-9) violations.push_back("P(a|l) not normalized at leaf " + std::to_string(l.id));
    }
    double prior_sum = 0.0;
    for (double v : engine.prior().p) prior_sum += v;
    if (!engine.tree().leaves().empty() && empty < engine.tree().leaves().size() && std::abs(prior_sum - 1.0) > 1e-9) {
      violations.push_back("prior does not sum to 1");
    }
    std::cout << "grid: " << engine.tree().leaves().size() << " leaves, " << empty << " without POI weight\n";
  }
  if (!violations.empty()) throw InvariantViolation{violations};
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"POI-based human activity inference"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Extract typed POIs from OSM XML into a POI store");
  c_ingest->add_option("--osm", ingest.osm, "OSM XML file (.osm or gzip)")->required();
  c_ingest->add_option("--taxonomy", ingest.taxonomy, "Taxonomy file")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--bbox", ingest.bbox, "west,south,east,north")->required();
  c_ingest->add_option("--out", ingest.out, "POI store to write")->required();
  c_ingest->add_flag("--in-memory", ingest.in_memory, "Index every node instead of streaming three passes");

  GridArgs grid;
  auto* c_grid = app.add_subcommand("grid", "Build the quad-tree grid from a POI store");
  c_grid->add_option("--store", grid.store, "POI store")->required()->check(CLI::ExistingFile);
  c_grid->add_option("--taxonomy", grid.taxonomy, "Taxonomy file")->required()->check(CLI::ExistingFile);
  c_grid->add_option("--snapshot", grid.snapshot, "Grid snapshot to write")->required();
  c_grid->add_option("--geojson", grid.geojson, "Leaf polygons as GeoJSON");
  add_grid_flags(c_grid, grid.cfg);

  PredictArgs predict;
  auto* c_predict = app.add_subcommand("predict", "Rank activities for a location and time");
  c_predict->add_option("--taxonomy", predict.taxonomy, "Taxonomy file")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--snapshot", predict.snapshot, "Grid snapshot")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--lat", predict.lat, "Latitude");
  c_predict->add_option("--lon", predict.lon, "Longitude");
  c_predict->add_option("--time", predict.time, "Time class id or HH:MM")->required();
  c_predict->add_option("--day", predict.day, "Day class id or weekday (mon..sun)")->required();
  c_predict->add_option("-k,--k", predict.k, "Number of activities")->capture_default_str()->check(CLI::PositiveNumber);
  c_predict->add_option("--level", predict.level, "leaf or parent")->capture_default_str();
  c_predict->add_flag("--json", predict.json, "Print the same JSON document as GET /predict");
  c_predict->add_flag("--all-cells", predict.all_cells, "Score every leaf (batch export)");
  c_predict->add_option("--out-csv", predict.out_csv, "Batch rows (with --all-cells)");
  c_predict->add_option("--out-geojson", predict.out_geojson, "Batch GeoJSON with per-leaf top-k (with --all-cells)");

  EvaluateArgs evaluate;
  auto* c_eval = app.add_subcommand("evaluate", "Compare POI and POS activity distributions by land use");
  c_eval->add_option("--taxonomy", evaluate.taxonomy, "Taxonomy file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--snapshot", evaluate.snapshot, "Grid snapshot")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--pos", evaluate.pos, "POS terminals CSV")->required();
  c_eval->add_option("--mapping", evaluate.mapping, "category,activity CSV")->required();
  c_eval->add_option("--landuse", evaluate.landuse, "Land-use GeoJSON")->required();
  c_eval->add_option("--out-dir", evaluate.out_dir, "Report directory")->required();
  c_eval->add_option("--feedback", evaluate.feedback, "Feedback log for top-k accuracy tables");
  c_eval->add_option("--seed", evaluate.seed, "Sampling seed")->capture_default_str();
  c_eval->add_option("--sample-size", evaluate.sample_size, "Locations per zone")->capture_default_str();
  c_eval->add_option("--outlier-radius-m", evaluate.outlier_radius_m, "Exclude larger radii")->capture_default_str();
  c_eval->add_option("--level", evaluate.level, "leaf or parent")->capture_default_str();
  c_eval->add_option("--pd", evaluate.pd, "Percentage difference denominator: sum or mean")->capture_default_str();

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "HTTP service for the web app");
  c_serve->add_option("--taxonomy", serve.taxonomy, "Taxonomy file")->required()->check(CLI::ExistingFile);
  c_serve->add_option("--snapshot", serve.snapshot, "Grid snapshot")->required()->check(CLI::ExistingFile);
  c_serve->add_option("--feedback-log", serve.feedback, "NDJSON feedback log")->capture_default_str();
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port)->capture_default_str();
  c_serve->add_option("--cors-origin", serve.cors)->capture_default_str();

  CheckArgs check;
  auto* c_check = app.add_subcommand("check", "Validate taxonomy integrity, grid tiling and normalization");
  c_check->add_option("--taxonomy", check.taxonomy, "Taxonomy file")->required()->check(CLI::ExistingFile);
  c_check->add_option("--snapshot", check.snapshot, "Grid snapshot")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  log_debug(std::string("kernels: ") + std::string(kernels::isa_name(kernels::active().isa)));
  try {
    if (*c_ingest) return cmd_ingest(ingest);
    if (*c_grid) return cmd_grid(grid);
    if (*c_predict) return cmd_predict(predict);
    if (*c_eval) return cmd_evaluate(evaluate);
    if (*c_serve) return cmd_serve(serve);
    if (*c_check) return cmd_check(check);
  } catch (const InvariantViolation& v) {
    for (const auto& m : v.messages) std::cerr << "poiact: violation: " << m << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "poiact: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "poiact: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
