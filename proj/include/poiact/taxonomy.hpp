#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "poiact/fuzzy.hpp"

namespace poiact {

enum class PoiTypeId : std::uint32_t {};
enum class ActivityId : std::uint32_t {};
enum class TimeClassId : std::uint32_t {};
enum class DayClassId : std::uint32_t {};

template <class E>
constexpr std::size_t idx(E e) {
  return static_cast<std::size_t>(e);
}

enum class Weekday : std::uint8_t { kMon, kTue, kWed, kThu, kFri, kSat, kSun };
using WeekdayMask = std::uint8_t;  // bit i == Weekday(i)

std::optional<Weekday> parse_weekday(std::string_view s);

struct PoiType {
  std::string id;
  std::optional<PoiTypeId> parent;
  bool relevant = true;
};

struct ActivityClass {
  std::string id;
  std::optional<ActivityId> parent;
  int depth = 0;
  std::string label;
};

struct FuzzyTimeClass {
  std::string id;
  std::optional<TimeClassId> parent;
  TrapezoidFuzzySet membership;
};

struct DayClass {
  std::string id;
  std::optional<DayClassId> parent;
  WeekdayMask members = 0;  // own members; parents also cover their children's
};

struct ActivationRule {
  PoiTypeId poi_type;
  std::vector<ActivityId> activities;
};

struct Schedule {
  ActivityId activity;
  std::vector<TimeClassId> times;
  std::vector<DayClassId> days;
  std::optional<TrapezoidFuzzySet> membership;  // explicit FM(a); else union of times
  bool inherited = false;
};

struct TaxonomyCounts {
  std::size_t poi_types = 0;
  std::size_t relevant_poi_types = 0;
  std::size_t activities = 0;
  std::size_t top_level_activities = 0;
  std::size_t time_classes = 0;
  std::size_t day_classes = 0;
  std::size_t rules = 0;
  std::size_t explicit_schedules = 0;
};

struct TaxonomyLoadOptions {
  /// Relevant POI types with no rule on themselves or any ancestor are a load
  /// error by default; when set they are demoted to irrelevant instead.
  bool demote_uncovered_types = false;
  /// Activities without a `sched` record inherit their parent's schedule
  /// (roots default to every time and day). When false they are an error.
  bool inherit_schedules = true;
};

/// Immutable POI-type / activity / time / day hierarchies with the activation
/// ("what can be done at") and schedule ("usually done during/on") relations.
/// All reasoning queries are answered from closures computed at load.
class TaxonomyGraph {
 public:
  static constexpr int kFormatVersion = 1;
  static constexpr int kMaxActivityLevels = 4;

  static TaxonomyGraph load(std::istream& in, const TaxonomyLoadOptions& opts = {});
  static TaxonomyGraph load_file(const std::filesystem::path& path, const TaxonomyLoadOptions& opts = {});
  static TaxonomyGraph load_string(std::string_view text, const TaxonomyLoadOptions& opts = {});

  /// Canonical text form; load(serialize()) yields an equal graph.
  std::string serialize() const;

  TaxonomyCounts counts() const;

  std::span<const PoiType> poi_types() const { return poi_types_; }
  std::span<const ActivityClass> activities() const { return activities_; }
  std::span<const FuzzyTimeClass> time_classes() const { return time_classes_; }
  std::span<const DayClass> day_classes() const { return day_classes_; }
  std::span<const ActivationRule> rules() const { return rules_; }
  std::span<const Schedule> schedules() const { return schedules_; }  // indexed by ActivityId

  const PoiType& poi_type(PoiTypeId id) const { return poi_types_[idx(id)]; }
  const ActivityClass& activity(ActivityId id) const { return activities_[idx(id)]; }
  const FuzzyTimeClass& time_class(TimeClassId id) const { return time_classes_[idx(id)]; }
  const DayClass& day_class(DayClassId id) const { return day_classes_[idx(id)]; }

  std::optional<PoiTypeId> find_poi_type(std::string_view id) const;
  std::optional<ActivityId> find_activity(std::string_view id) const;
  std::optional<TimeClassId> find_time_class(std::string_view id) const;
  std::optional<DayClassId> find_day_class(std::string_view id) const;

  PoiTypeId poi_type_id(std::string_view id) const;        // throws UnknownPoiType
  ActivityId activity_id(std::string_view id) const;       // throws UnknownActivity
  TimeClassId time_class_id(std::string_view id) const;    // throws UnknownTimeClass
  DayClassId day_class_id(std::string_view id) const;      // throws UnknownDayClass

  /// VAL(poi, a): the rule of `p` and of all its ancestors, sorted by id;
  /// empty iff `p` is irrelevant.
  std::span<const ActivityId> activities_for_poi(PoiTypeId p) const { return poi_activities_[idx(p)]; }
  std::span<const ActivityId> activities_for_poi(std::string_view p) const {
    return activities_for_poi(poi_type_id(p));
  }

  /// VAL(a, t, d): whether `a`'s schedule meets {t, its ancestors and
  /// descendants} and likewise for `d`.
  bool is_valid_at(ActivityId a, TimeClassId t, DayClassId d) const;
  std::vector<ActivityId> activities_valid_at(TimeClassId t, DayClassId d) const;

  /// Depth-0 ancestor (the activity itself at depth 0).
  ActivityId rollup_to_parent(ActivityId a) const { return rollup_[idx(a)]; }

  /// FM(a) and FM(t) sampled hourly.
  const HourlyMembership& activity_membership(ActivityId a) const { return activity_fm_[idx(a)]; }
  const HourlyMembership& time_membership(TimeClassId t) const { return time_fm_[idx(t)]; }

  /// Weekdays covered by a day class (own members plus descendants').
  WeekdayMask day_coverage(DayClassId d) const { return day_cover_[idx(d)]; }

  std::vector<TimeClassId> leaf_time_classes() const;
  std::vector<DayClassId> leaf_day_classes() const;
  std::vector<ActivityId> top_level_activities() const;

  bool time_related(TimeClassId x, TimeClassId y) const {
    return time_related_[idx(x) * time_classes_.size() + idx(y)];
  }
  bool day_related(DayClassId x, DayClassId y) const {
    return day_related_[idx(x) * day_classes_.size() + idx(y)];
  }

  /// Keys that carry a POI type (from `k_<key>` and `k_<key>_v_<value>` ids).
  const std::unordered_set<std::string>& recognized_keys() const { return recognized_keys_; }
  /// Values that need the key prefix because they appear under several keys.
  const std::unordered_set<std::string>& ambiguous_values() const { return ambiguous_values_; }

 private:
  TaxonomyGraph() = default;
  void finalize_schedules(const std::vector<std::optional<Schedule>>& explicit_sched,
                          const TaxonomyLoadOptions& opts);
  void finalize(const TaxonomyLoadOptions& opts);

  std::vector<PoiType> poi_types_;
  std::vector<ActivityClass> activities_;
  std::vector<FuzzyTimeClass> time_classes_;
  std::vector<DayClass> day_classes_;
  std::vector<ActivationRule> rules_;
  std::vector<Schedule> schedules_;

  std::unordered_map<std::string, PoiTypeId> poi_index_;
  std::unordered_map<std::string, ActivityId> activity_index_;
  std::unordered_map<std::string, TimeClassId> time_index_;
  std::unordered_map<std::string, DayClassId> day_index_;

  std::vector<std::vector<ActivityId>> poi_activities_;
  std::vector<ActivityId> rollup_;
  std::vector<HourlyMembership> activity_fm_;
  std::vector<HourlyMembership> time_fm_;
  std::vector<WeekdayMask> day_cover_;
  std::vector<bool> time_related_;  // ancestor-or-self or descendant-or-self
  std::vector<bool> day_related_;
  std::unordered_set<std::string> recognized_keys_;
  std::unordered_set<std::string> ambiguous_values_;

  friend class TaxonomyParser;
};

}  // namespace poiact
