#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "poiact/evaluation.hpp"
#include "poiact/grid.hpp"
#include "poiact/likelihood.hpp"
#include "poiact/taxonomy.hpp"

namespace poiact {

std::optional<Level> parse_level(std::string_view s);
std::string_view to_string(Level level);

struct Prediction {
  LatLon point;
  TimeClassId time{};
  DayClassId day{};
  std::size_t k = 8;
  Level level = Level::kLeaf;
  LocationId cell = 0;
  double radius_m = 0.0;
  std::vector<RankedActivity> ranked;  // empty when no activity fits the context
};

/// Loaded taxonomy + grid with the derived location model and prior. The
/// CLI and the HTTP service both answer through this class.
class Engine {
 public:
  Engine(TaxonomyGraph g, QuadTree tree);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  static std::unique_ptr<Engine> load(const std::filesystem::path& taxonomy, const std::filesystem::path& snapshot);

  const TaxonomyGraph& taxonomy() const { return g_; }
  const QuadTree& tree() const { return tree_; }
  const LocationModel& model() const { return model_; }
  const Prior& prior() const { return prior_; }

  /// A class id, or wall-clock HH:MM mapped to the leaf time class with the
  /// highest membership at that minute (ties: smallest id string).
  TimeClassId resolve_time(std::string_view s) const;
  /// A class id, or a weekday name (mon..sun) mapped to the leaf day class
  /// covering it (ties: smallest id string).
  DayClassId resolve_day(std::string_view s) const;

  /// Context distribution at a point; throws OutOfBounds, EmptyCandidateSet.
  ActivityDistribution distribution(const LatLon& p, TimeClassId t, DayClassId d) const;
  Prediction predict(const LatLon& p, TimeClassId t, DayClassId d, std::size_t k, Level level) const;
  nlohmann::json to_json(const Prediction& p) const;

  /// Prediction used to score a feedback record.
  ActivityDistribution predict_record(const FeedbackRecord& r) const;

  /// Aggregation radius per leaf, computed once.
  const std::vector<double>& leaf_radii() const;

 private:
  TaxonomyGraph g_;
  QuadTree tree_;
  LocationModel model_;
  Prior prior_;
  mutable std::once_flag radii_once_;
  mutable std::vector<double> radii_;
};

}  // namespace poiact
