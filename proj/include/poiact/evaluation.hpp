#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "poiact/geo.hpp"
#include "poiact/grid.hpp"
#include "poiact/likelihood.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact {

// ---------------------------------------------------------------------------
// POS terminals

/// Category -> activity; a nullopt value marks a category excluded on purpose
/// (e.g. ATM).
struct CategoryMapping {
  std::map<std::string, std::optional<ActivityId>> entries;
};

/// CSV with header `category,activity`; an activity of `-` or empty excludes
/// the category. Throws UnknownActivity, MalformedRow.
CategoryMapping load_category_mapping(std::istream& in, const TaxonomyGraph& g);

struct PosTerminal {
  std::string id;
  LatLon point;
  std::string category;
  std::optional<ActivityId> activity;  // nullopt when the category is excluded
};

struct PosLoadReport {
  std::size_t rows = 0;
  std::size_t mapped = 0;
  std::size_t excluded = 0;
  std::map<std::string, std::size_t> excluded_by_category;
};

/// CSV with header `terminal_id,lat,lon,category`. Throws UnknownCategory for a
/// category the mapping neither maps nor excludes, MalformedRow (with line
/// number) for unparsable rows.
std::vector<PosTerminal> load_pos(std::istream& in, const CategoryMapping& mapping, PosLoadReport* report = nullptr);

/// POS activity counts per leaf, for λ-weighted scopes.
class PosIndex {
 public:
  PosIndex(const QuadTree& tree, std::span<const PosTerminal> terminals, std::size_t num_activities);

  /// Relative frequency over the whole city (all mapped terminals in the bbox).
  ActivityDistribution city() const;
  /// λ-weighted relative frequency over a neighbourhood. Throws EmptyScope.
  ActivityDistribution scope(std::span<const Neighbor> members) const;
  std::span<const double> counts(LocationId l) const;
  std::size_t terminals_indexed() const { return indexed_; }

 private:
  std::size_t num_activities_;
  std::vector<double> counts_;  // leaves x activities
  std::vector<double> city_;
  std::size_t indexed_ = 0;
};

/// Relative frequency of mapped activities among terminals. Throws EmptyScope.
ActivityDistribution w_pos(std::span<const PosTerminal> terminals, std::size_t num_activities);

// ---------------------------------------------------------------------------
// Distribution comparison

/// W_poi(a,l) * W_pos(a,c) / W_poi(a,c) without renormalization.
/// Throws MissingCityMass when W_poi(a,c) = 0 for some a in w_poi_l.
ActivityDistribution rescale_poi(const ActivityDistribution& w_poi_l, const ActivityDistribution& w_poi_city,
                                 const ActivityDistribution& w_pos_city);
/// rescale_poi followed by renormalization to sum 1.
ActivityDistribution normalize_poi(const ActivityDistribution& w_poi_l, const ActivityDistribution& w_poi_city,
                                   const ActivityDistribution& w_pos_city);
/// Mirror image: W_pos(a,l) * W_poi(a,c) / W_pos(a,c), renormalized.
ActivityDistribution normalize_pos(const ActivityDistribution& w_pos_l, const ActivityDistribution& w_poi_city,
                                   const ActivityDistribution& w_pos_city);

/// (1/√2) √Σ (√p_i − √q_i)² over the union of supports. Throws
/// UnnormalizedInput unless both sum to 1 ± 1e-9.
double hellinger(const ActivityDistribution& p, const ActivityDistribution& q);

enum class PdVariant {
  kSum,   // |a − b| / (a + b)
  kMean,  // |a − b| / ((a + b) / 2)
};

/// Zero when both values are zero.
double percentage_difference(double a, double b, PdVariant variant = PdVariant::kSum);

// ---------------------------------------------------------------------------
// Top-k accuracy

struct FeedbackRecord {
  std::uint64_t id = 0;
  LatLon point;
  TimeClassId time{};
  DayClassId day{};
  std::vector<ActivityId> shown;
  ActivityId selected{};
  std::string timestamp;
};

/// How a parent-level hit is decided.
enum class ParentMatch {
  /// The selection's top-level ancestor is among the ancestors of the leaf
  /// top-k. A correct leaf-level prediction can never become a miss.
  kRollupLeafTopK,
  /// The selection's ancestor is among the top-k of the rolled-up
  /// distribution (parents re-ranked by summed probability).
  kRerankParents,
};

struct AccuracyResult {
  std::size_t records = 0;
  std::size_t hits = 0;
  std::optional<double> accuracy;  // nullopt when there are no records
};

using Predictor = std::function<ActivityDistribution(const FeedbackRecord&)>;

/// A record counts as a hit when its selection appears in the top-k of the
/// prediction recomputed for its context; records whose context has no
/// candidates count as misses.
AccuracyResult topk_accuracy(std::span<const FeedbackRecord> feedback, std::size_t k, Level level,
                             const Predictor& predict, const TaxonomyGraph& g,
                             ParentMatch match = ParentMatch::kRollupLeafTopK);

/// Same, over precomputed predictions (one per record, same order).
AccuracyResult topk_accuracy(std::span<const FeedbackRecord> feedback, std::span<const ActivityDistribution> predictions,
                             std::size_t k, Level level, const TaxonomyGraph& g,
                             ParentMatch match = ParentMatch::kRollupLeafTopK);

// ---------------------------------------------------------------------------
// Land-use stratified comparison

enum class LandUseKind { kIndustrial, kRecreational, kCommercial, kRailway, kRetail, kResidential, kDense };

std::string_view to_string(LandUseKind k);
std::optional<LandUseKind> parse_land_use(std::string_view s);

struct LandUseZone {
  LandUseKind kind = LandUseKind::kResidential;
  std::string name;
  std::vector<std::vector<LatLon>> rings;  // outer rings; holes ignored
};

/// GeoJSON FeatureCollection of Polygon/MultiPolygon features with a `kind`
/// property (and optional `name`).
std::vector<LandUseZone> load_land_use(std::istream& in);

struct StratifyOptions {
  std::uint32_t sample_size = 100;
  std::uint64_t seed = 1;
  double outlier_radius_m = 1000.0;
  Level level = Level::kParent;
  PdVariant pd_variant = PdVariant::kSum;
};

struct LocationComparison {
  LocationId location = 0;
  double radius_m = 0.0;
  double hellinger_local = 0.0;
  double hellinger_poi_norm = 0.0;
  double hellinger_pos_norm = 0.0;
};

struct ErrorSummary {
  double kde_mode = 0.0;
  double logistic_location = 0.0;
  double logistic_scale = 0.0;
  double mean = 0.0;
};

struct ZoneReport {
  std::string name;
  LandUseKind kind = LandUseKind::kResidential;
  std::size_t candidates = 0;  // leaves whose centroid lies in the zone
  std::size_t sampled = 0;
  std::size_t outliers = 0;  // aggregation radius above the cutoff
  std::size_t no_pos = 0;    // no POS mass within the radius
  std::vector<LocationComparison> locations;
  std::map<ActivityId, double> mean_pd;  // per category, POI-normalized vs POS
  ErrorSummary local, poi_norm, pos_norm;
  bool skipped = false;  // no candidate locations
};

struct ComparisonReport {
  std::uint64_t seed = 0;
  StratifyOptions options;
  ActivityDistribution poi_city;
  ActivityDistribution pos_city;
  std::vector<ZoneReport> zones;
};

ErrorSummary summarize_errors(std::span<const double> errors);

/// W_poi(·,l) for comparison: P(a|l,r) at the requested level.
ActivityDistribution poi_distribution(const NeighborSet& ns, const LocationModel& model, Level level,
                                      const TaxonomyGraph& g);

/// City-wide W_poi: mean of the non-empty per-location distributions.
ActivityDistribution poi_city_distribution(const QuadTree& tree, const LocationModel& model, Level level,
                                           const TaxonomyGraph& g);

ComparisonReport stratified_report(const QuadTree& tree, const LocationModel& model, const PosIndex& pos,
                                   std::span<const LandUseZone> zones, const TaxonomyGraph& g,
                                   const StratifyOptions& options);

nlohmann::json to_json(const ComparisonReport& report, const TaxonomyGraph& g);
/// Plot-ready tables: per-location errors and per-category differences.
void write_location_errors_csv(std::ostream& out, const ComparisonReport& report);
void write_category_pd_csv(std::ostream& out, const ComparisonReport& report, const TaxonomyGraph& g);

}  // namespace poiact
