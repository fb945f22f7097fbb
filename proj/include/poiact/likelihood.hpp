#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "poiact/grid.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact {

struct ActivityDistribution {
  std::vector<std::pair<ActivityId, double>> entries;  // sorted by id, weights >= 0
  bool normalized = false;
  bool empty_location = false;  // no activating POI mass in scope

  double get(ActivityId a) const;
  double total() const;
  bool empty() const { return entries.empty(); }

  /// Keeps strictly positive entries of a dense vector indexed by ActivityId.
  static ActivityDistribution from_dense(std::span<const double> w);
  /// Divides by the total; an all-zero input yields an empty distribution
  /// flagged empty_location.
  ActivityDistribution normalized_copy() const;
};

/// N(f,l)/max_w N(w,l) * ln(|L|/df). Zero when n_fl or df is zero.
double tf_idf(std::uint64_t n_fl, std::uint64_t max_n_l, std::size_t num_locations, std::size_t df);

/// S(min(FM(a), FM(t))) / S(FM(t)) when a is valid at (t,d), else 0.
/// Throws DegenerateTimeClass when S(FM(t)) = 0.
double p_activity_given_time(ActivityId a, TimeClassId t, DayClassId d, const TaxonomyGraph& g);

/// Per-location activity weights W(a,l) over a fixed leaf set.
class LocationModel {
 public:
  LocationModel(const TaxonomyGraph& g, std::span<const Location> leaves);

  std::size_t num_locations() const { return leaves_.size(); }
  std::size_t num_activities() const { return num_activities_; }
  std::size_t document_frequency(PoiTypeId f) const;

  double tf_idf(PoiTypeId f, LocationId l) const;
  double activity_weight(ActivityId a, LocationId l) const { return weights(l)[idx(a)]; }
  /// Dense W(., l) indexed by ActivityId.
  std::span<const double> weights(LocationId l) const;

  ActivityDistribution p_activity_given_location(LocationId l) const;
  /// sum_i W(a,l_i) λ_i / sum_i sum_j W(a_j,l_i) λ_i.
  ActivityDistribution p_activity_given_location_radius(std::span<const Neighbor> members) const;

 private:
  const TaxonomyGraph& g_;
  std::span<const Location> leaves_;
  std::size_t num_activities_;
  std::vector<std::uint32_t> df_;
  std::vector<double> w_;  // leaves x activities
};

/// P(a) ∝ sum_l sum_(t,d) P(a|l) P(a|t,d), uniform over locations and over
/// leaf time x leaf day slots.
struct Prior {
  std::vector<double> p;  // indexed by ActivityId, sums to 1

  double operator()(ActivityId a) const { return p[idx(a)]; }
};

Prior compute_prior(const LocationModel& model, const TaxonomyGraph& g);

/// Combines a location term with the time term and prior: score(a) =
/// P(a|loc) P(a|t,d) / P(a); activities with a zero time term are dropped and
/// the rest renormalized. Throws EmptyCandidateSet when nothing survives.
ActivityDistribution combine_with_time(const ActivityDistribution& location_term, TimeClassId t, DayClassId d,
                                       const TaxonomyGraph& g, const Prior& prior);

struct Context {
  LocationId location = 0;
  TimeClassId time{};
  DayClassId day{};
};

ActivityDistribution p_activity_given_context(const Context& ctx, const QuadTree& tree, const LocationModel& model,
                                              const TaxonomyGraph& g, const Prior& prior);

enum class Level { kLeaf, kParent };

struct RankedActivity {
  ActivityId activity{};
  double probability = 0.0;

  friend bool operator==(const RankedActivity&, const RankedActivity&) = default;
};

/// Sums probabilities into top-level ancestors.
ActivityDistribution rollup(const ActivityDistribution& dist, const TaxonomyGraph& g);

/// Highest probabilities first, ties by activity id; at kParent the
/// distribution is rolled up before ranking. k larger than the support
/// returns everything.
std::vector<RankedActivity> top_k(const ActivityDistribution& dist, std::size_t k, Level level,
                                  const TaxonomyGraph& g);

/// Location term for an arbitrary polygon: W(a) summed over leaves weighted
/// by the fraction of each leaf covered, then combined with time and prior.
/// Throws NoOverlap when the polygon covers no leaf area.
ActivityDistribution score_region(std::span<const LatLon> polygon, TimeClassId t, DayClassId d, const QuadTree& tree,
                                  const LocationModel& model, const TaxonomyGraph& g, const Prior& prior);

struct LeafScore {
  LocationId location = 0;
  double radius_m = 0.0;
  ActivityDistribution dist;  // empty when nothing is valid or no POI mass
};

/// Scores every leaf for (t,d); parallel by leaf, output in leaf order.
std::vector<LeafScore> score_all_leaves(TimeClassId t, DayClassId d, const QuadTree& tree, const LocationModel& model,
                                        const TaxonomyGraph& g, const Prior& prior, unsigned threads = 0);

/// One row per (location, activity): location_id,activity,probability.
void write_scores_csv(std::ostream& out, std::span<const LeafScore> scores, const TaxonomyGraph& g);
/// GeoJSON FeatureCollection with a per-leaf `top_k` array.
void write_scores_geojson(std::ostream& out, std::span<const LeafScore> scores, std::size_t k, Level level,
                          const QuadTree& tree, const TaxonomyGraph& g);

}  // namespace poiact
