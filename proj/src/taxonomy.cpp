#include "poiact/taxonomy.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "poiact/error.hpp"

namespace poiact {

namespace {

constexpr std::string_view kHeader = "poiact-taxonomy";
constexpr std::array<std::string_view, 7> kWeekdayNames = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};

struct Token {
  std::string key;    // empty for positional tokens
  std::string value;
};

struct Record {
  std::string kind;
  std::string id;
  std::vector<Token> tokens;
  int line = 0;
};

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_words(std::string_view line, int lineno) {
  std::vector<std::string> words;
  std::string cur;
  bool in_quotes = false;
  bool have = false;
  for (char ch : line) {
    if (in_quotes) {
      if (ch == '"') {
        in_quotes = false;
      } else {
        cur.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
      have = true;
    } else if (ch == ' ' || ch == '\t' || ch == '\r') {
      if (have) words.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur.push_back(ch);
      have = true;
    }
  }
  if (in_quotes) parse_fail(lineno, "unterminated quote");
  if (have) words.push_back(std::move(cur));
  return words;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? s.size() : comma;
    if (end > start) out.emplace_back(s.substr(start, end - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// "6", "6.5" or "06:30".
double parse_hour(std::string_view s, int line) {
  const auto colon = s.find(':');
  if (colon != std::string_view::npos) {
    int h = 0, m = 0;
    auto r1 = std::from_chars(s.data(), s.data() + colon, h);
    auto r2 = std::from_chars(s.data() + colon + 1, s.data() + s.size(), m);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != s.data() + colon ||
        r2.ptr != s.data() + s.size() || m < 0 || m >= 60) {
      parse_fail(line, "bad hour '" + std::string(s) + "'");
    }
    return h + m / 60.0;
  }
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) parse_fail(line, "bad hour '" + std::string(s) + "'");
  return v;
}

TrapezoidFuzzySet parse_trap(const std::string& value, bool wrap, int line) {
  const auto parts = split_list(value);
  if (parts.size() != 4) parse_fail(line, "trap= needs four hours a,b,c,d");
  double v[4];
  for (int i = 0; i < 4; ++i) v[i] = parse_hour(parts[i], line);
  try {
    return TrapezoidFuzzySet(v[0], v[1], v[2], v[3], wrap);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidMembership, "line " + std::to_string(line) + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_trap(const TrapezoidFuzzySet& t) {
  auto fold = [&](double x) { return (t.wraps_midnight() && x >= kHoursPerDay && x != t.a()) ? x - kHoursPerDay : x; };
  std::string s = "trap=" + format_double(t.a()) + "," + format_double(fold(t.b())) + "," +
                  format_double(fold(t.c())) + "," + format_double(fold(t.d()));
  if (t.wraps_midnight()) s += " wrap";
  return s;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(" \t#") == std::string::npos && !s.empty()) return s;
  return "\"" + s + "\"";
}

/// Parent-chain walk shared by all four hierarchies. Returns depth per node.
template <class Node, class Id>
std::vector<int> resolve_depths(const std::vector<Node>& nodes, std::string_view what) {
  std::vector<int> depth(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::vector<std::size_t> chain;
    std::size_t cur = i;
    while (depth[cur] < 0) {
      if (std::find(chain.begin(), chain.end(), cur) != chain.end()) {
        throw Error(ErrorCode::kCycleDetected, std::string(what) + " hierarchy cycle through '" + nodes[cur].id + "'");
      }
      chain.push_back(cur);
      if (!nodes[cur].parent) {
        depth[cur] = 0;
        break;
      }
      cur = idx(*nodes[cur].parent);
    }
    int d = depth[cur];
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      if (*it == cur) continue;
      depth[*it] = ++d;
    }
  }
  return depth;
}

template <class Node>
std::vector<bool> related_matrix(const std::vector<Node>& nodes) {
  const std::size_t n = nodes.size();
  std::vector<bool> rel(n * n, false);
  for (std::size_t i = 0; i < n; ++i) {
    rel[i * n + i] = true;
    auto p = nodes[i].parent;
    while (p) {
      const std::size_t a = idx(*p);
      rel[i * n + a] = true;
      rel[a * n + i] = true;
      p = nodes[a].parent;
    }
  }
  return rel;
}

}  // namespace

std::optional<Weekday> parse_weekday(std::string_view s) {
  std::string lower(s.substr(0, 3));
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kWeekdayNames.size(); ++i) {
    if (lower == kWeekdayNames[i]) return static_cast<Weekday>(i);
  }
  return std::nullopt;
}

class TaxonomyParser {
 public:
  static TaxonomyGraph parse(std::istream& in, const TaxonomyLoadOptions& opts) {
    std::vector<Record> records;
    std::string raw;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string_view line(raw);
      if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
      const auto hash = line.find('#');
      // '#' inside quotes is rare enough that labels simply may not contain it.
      if (hash != std::string_view::npos) line = line.substr(0, hash);
      auto words = split_words(line, lineno);
      if (words.empty()) continue;
      if (!header_seen) {
        if (words[0] != kHeader || words.size() != 2) {
          parse_fail(lineno, "missing '" + std::string(kHeader) + " <version>' header");
        }
        if (words[1] != std::to_string(TaxonomyGraph::kFormatVersion)) {
          throw Error(ErrorCode::kUnsupportedVersion, "taxonomy format version " + words[1]);
        }
        header_seen = true;
        continue;
      }
      if (words.size() < 2) parse_fail(lineno, "record needs a kind and an id");
      Record rec{words[0], words[1], {}, lineno};
      for (std::size_t i = 2; i < words.size(); ++i) {
        const auto eq = words[i].find('=');
        if (eq == std::string::npos) {
          rec.tokens.push_back({"", words[i]});
        } else {
          rec.tokens.push_back({words[i].substr(0, eq), words[i].substr(eq + 1)});
        }
      }
      records.push_back(std::move(rec));
    }
    if (!header_seen) throw Error(ErrorCode::kParse, "empty taxonomy file");

    TaxonomyGraph g;
    // Declarations first so parent= and rule references may point forward.
    std::vector<std::pair<std::size_t, std::string>> poi_parents, act_parents, time_parents, day_parents;
    for (const auto& r : records) {
      if (r.kind == "poi") {
        declare(g.poi_index_, g.poi_types_, r, PoiType{r.id, std::nullopt, true}, "poi type");
        for (const auto& t : r.tokens) {
          if (t.key == "parent") {
            poi_parents.emplace_back(g.poi_types_.size() - 1, t.value);
          } else if (t.key.empty() && t.value == "irrelevant") {
            g.poi_types_.back().relevant = false;
          } else {
            parse_fail(r.line, "unexpected token '" + t.value + "' on poi");
          }
        }
      } else if (r.kind == "act") {
        declare(g.activity_index_, g.activities_, r, ActivityClass{r.id, std::nullopt, 0, ""}, "activity");
        for (const auto& t : r.tokens) {
          if (t.key == "parent") {
            act_parents.emplace_back(g.activities_.size() - 1, t.value);
          } else if (t.key == "label") {
            g.activities_.back().label = t.value;
          } else {
            parse_fail(r.line, "unexpected token '" + t.value + "' on act");
          }
        }
      } else if (r.kind == "time") {
        declare(g.time_index_, g.time_classes_, r,
                FuzzyTimeClass{r.id, std::nullopt, TrapezoidFuzzySet::whole_day()}, "time class");
        const bool wrap = has_flag(r, "wrap");
        for (const auto& t : r.tokens) {
          if (t.key == "parent") {
            time_parents.emplace_back(g.time_classes_.size() - 1, t.value);
          } else if (t.key == "trap") {
            g.time_classes_.back().membership = parse_trap(t.value, wrap, r.line);
          } else if (!(t.key.empty() && t.value == "wrap")) {
            parse_fail(r.line, "unexpected token '" + t.value + "' on time");
          }
        }
      } else if (r.kind == "day") {
        declare(g.day_index_, g.day_classes_, r, DayClass{r.id, std::nullopt, 0}, "day class");
        for (const auto& t : r.tokens) {
          if (t.key == "parent") {
            day_parents.emplace_back(g.day_classes_.size() - 1, t.value);
          } else if (t.key == "members") {
            for (const auto& m : split_list(t.value)) {
              auto wd = parse_weekday(m);
              if (!wd || m.size() < 3) parse_fail(r.line, "unknown weekday '" + m + "'");
              g.day_classes_.back().members |= static_cast<WeekdayMask>(1u << static_cast<unsigned>(*wd));
            }
          } else {
            parse_fail(r.line, "unexpected token '" + t.value + "' on day");
          }
        }
      } else if (r.kind != "rule" && r.kind != "sched") {
        parse_fail(r.line, "unknown record kind '" + r.kind + "'");
      }
    }
    link(poi_parents, g.poi_types_, g.poi_index_, "poi type");
    link(act_parents, g.activities_, g.activity_index_, "activity");
    link(time_parents, g.time_classes_, g.time_index_, "time class");
    link(day_parents, g.day_classes_, g.day_index_, "day class");

    std::vector<std::optional<Schedule>> explicit_sched(g.activities_.size());
    std::vector<bool> has_rule(g.poi_types_.size(), false);
    for (const auto& r : records) {
      if (r.kind == "rule") {
        const auto p = resolve(g.poi_index_, r.id, "rule", r.line);
        if (has_rule[idx(p)]) throw Error(ErrorCode::kDuplicateId, "second rule for poi type '" + r.id + "'");
        has_rule[idx(p)] = true;
        ActivationRule rule{p, {}};
        for (const auto& t : r.tokens) {
          if (!t.key.empty()) parse_fail(r.line, "rule takes a comma-separated activity list");
          for (const auto& a : split_list(t.value)) rule.activities.push_back(resolve(g.activity_index_, a, "rule", r.line));
        }
        std::sort(rule.activities.begin(), rule.activities.end());
        rule.activities.erase(std::unique(rule.activities.begin(), rule.activities.end()), rule.activities.end());
        if (rule.activities.empty()) parse_fail(r.line, "rule for '" + r.id + "' lists no activities");
        g.rules_.push_back(std::move(rule));
      } else if (r.kind == "sched") {
        const auto a = resolve(g.activity_index_, r.id, "sched", r.line);
        if (explicit_sched[idx(a)]) throw Error(ErrorCode::kDuplicateId, "second schedule for '" + r.id + "'");
        Schedule s{a, {}, {}, std::nullopt, false};
        const bool wrap = has_flag(r, "wrap");
        for (const auto& t : r.tokens) {
          if (t.key == "times") {
            for (const auto& x : split_list(t.value)) s.times.push_back(resolve(g.time_index_, x, "sched", r.line));
          } else if (t.key == "days") {
            for (const auto& x : split_list(t.value)) s.days.push_back(resolve(g.day_index_, x, "sched", r.line));
          } else if (t.key == "trap") {
            s.membership = parse_trap(t.value, wrap, r.line);
          } else if (!(t.key.empty() && t.value == "wrap")) {
            parse_fail(r.line, "unexpected token '" + t.value + "' on sched");
          }
        }
        explicit_sched[idx(a)] = std::move(s);
      }
    }

    g.schedules_.resize(g.activities_.size());
    for (std::size_t i = 0; i < g.activities_.size(); ++i) {
      if (explicit_sched[i]) g.schedules_[i] = std::move(*explicit_sched[i]);
      g.schedules_[i].activity = static_cast<ActivityId>(i);
    }
    g.finalize_schedules(explicit_sched, opts);
    g.finalize(opts);
    return g;
  }

 private:
  static bool has_flag(const Record& r, std::string_view flag) {
    return std::any_of(r.tokens.begin(), r.tokens.end(),
                       [&](const Token& t) { return t.key.empty() && t.value == flag; });
  }

  template <class Map, class Vec, class Node>
  static void declare(Map& index, Vec& vec, const Record& r, Node node, std::string_view what) {
    using Id = typename Map::mapped_type;
    if (!index.emplace(r.id, static_cast<Id>(vec.size())).second) {
      throw Error(ErrorCode::kDuplicateId, std::string(what) + " '" + r.id + "' declared twice (line " +
                                               std::to_string(r.line) + ")");
    }
    vec.push_back(std::move(node));
  }

  template <class Map>
  static typename Map::mapped_type resolve(const Map& index, const std::string& id, std::string_view where, int line) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::kDanglingReference,
                  "'" + id + "' referenced by " + std::string(where) + " on line " + std::to_string(line));
    }
    return it->second;
  }

  template <class Vec, class Map>
  static void link(const std::vector<std::pair<std::size_t, std::string>>& parents, Vec& vec, const Map& index,
                   std::string_view what) {
    for (const auto& [child, parent] : parents) {
      auto it = index.find(parent);
      if (it == index.end()) {
        throw Error(ErrorCode::kDanglingReference,
                    "'" + parent + "' named as parent of " + std::string(what) + " '" + vec[child].id + "'");
      }
      vec[child].parent = it->second;
    }
  }
};

void TaxonomyGraph::finalize_schedules(const std::vector<std::optional<Schedule>>& explicit_sched,
                                       const TaxonomyLoadOptions& opts) {
  const auto depth = resolve_depths<ActivityClass, ActivityId>(activities_, "activity");
  std::vector<TimeClassId> root_times;
  std::vector<DayClassId> root_days;
  for (std::size_t i = 0; i < time_classes_.size(); ++i) {
    if (!time_classes_[i].parent) root_times.push_back(static_cast<TimeClassId>(i));
  }
  for (std::size_t i = 0; i < day_classes_.size(); ++i) {
    if (!day_classes_[i].parent) root_days.push_back(static_cast<DayClassId>(i));
  }
  std::vector<std::size_t> order(activities_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return depth[x] < depth[y]; });
  for (std::size_t i : order) {
    activities_[i].depth = depth[i];
    if (depth[i] >= kMaxActivityLevels) {
      throw Error(ErrorCode::kParse, "activity '" + activities_[i].id + "' exceeds four hierarchy levels");
    }
    if (explicit_sched[i]) {
      if (schedules_[i].times.empty()) schedules_[i].times = root_times;
      if (schedules_[i].days.empty()) schedules_[i].days = root_days;
      continue;
    }
    if (!opts.inherit_schedules) {
      throw Error(ErrorCode::kMissingSchedule, "activity '" + activities_[i].id + "' has no schedule");
    }
    if (activities_[i].parent) {
      schedules_[i] = schedules_[idx(*activities_[i].parent)];
    } else {
      schedules_[i] = Schedule{static_cast<ActivityId>(i), root_times, root_days, std::nullopt, false};
    }
    schedules_[i].activity = static_cast<ActivityId>(i);
    schedules_[i].inherited = true;
  }
}

void TaxonomyGraph::finalize(const TaxonomyLoadOptions& opts) {
  resolve_depths<PoiType, PoiTypeId>(poi_types_, "poi type");
  resolve_depths<FuzzyTimeClass, TimeClassId>(time_classes_, "time class");
  resolve_depths<DayClass, DayClassId>(day_classes_, "day class");

  if (time_classes_.empty()) throw Error(ErrorCode::kParse, "taxonomy declares no time classes");
  if (day_classes_.empty()) throw Error(ErrorCode::kParse, "taxonomy declares no day classes");

  // Child membership may never exceed its parent's (checked per minute).
  for (const auto& t : time_classes_) {
    if (!t.parent) continue;
    const auto& parent = time_classes_[idx(*t.parent)];
    for (int minute = 0; minute < kHoursPerDay * 60; ++minute) {
      const double h = minute / 60.0;
      if (t.membership.membership(h) > parent.membership.membership(h) + 1e-12) {
        throw Error(ErrorCode::kInvalidMembership,
                    "time class '" + t.id + "' exceeds parent '" + parent.id + "' at hour " + format_double(h));
      }
    }
  }

  // Day coverage: own members plus all descendants.
  day_cover_.assign(day_classes_.size(), 0);
  for (std::size_t i = 0; i < day_classes_.size(); ++i) {
    std::optional<DayClassId> cur = static_cast<DayClassId>(i);
    while (cur) {
      day_cover_[idx(*cur)] |= day_classes_[i].members;
      cur = day_classes_[idx(*cur)].parent;
    }
  }
  WeekdayMask leaf_cover = 0;
  for (auto d : leaf_day_classes()) leaf_cover |= day_classes_[idx(d)].members;
  for (unsigned wd = 0; wd < 7; ++wd) {
    if (!(leaf_cover & (1u << wd))) {
      throw Error(ErrorCode::kParse, "weekday '" + std::string(kWeekdayNames[wd]) + "' is not covered by any leaf day class");
    }
  }

  time_related_ = related_matrix(time_classes_);
  day_related_ = related_matrix(day_classes_);

  // Activation closure up the POI-type hierarchy.
  std::vector<const ActivationRule*> rule_of(poi_types_.size(), nullptr);
  for (const auto& r : rules_) {
    if (!poi_types_[idx(r.poi_type)].relevant) {
      throw Error(ErrorCode::kParse, "rule attached to irrelevant poi type '" + poi_types_[idx(r.poi_type)].id + "'");
    }
    rule_of[idx(r.poi_type)] = &r;
  }
  poi_activities_.assign(poi_types_.size(), {});
  for (std::size_t i = 0; i < poi_types_.size(); ++i) {
    if (!poi_types_[i].relevant) continue;
    std::vector<ActivityId> acts;
    std::optional<PoiTypeId> cur = static_cast<PoiTypeId>(i);
    while (cur) {
      if (const auto* r = rule_of[idx(*cur)]) acts.insert(acts.end(), r->activities.begin(), r->activities.end());
      cur = poi_types_[idx(*cur)].parent;
    }
    std::sort(acts.begin(), acts.end());
    acts.erase(std::unique(acts.begin(), acts.end()), acts.end());
    if (acts.empty()) {
      if (!opts.demote_uncovered_types) {
        throw Error(ErrorCode::kMissingRule, "relevant poi type '" + poi_types_[i].id + "' activates no activity");
      }
      poi_types_[i].relevant = false;
    }
    poi_activities_[i] = std::move(acts);
  }

  rollup_.resize(activities_.size());
  for (std::size_t i = 0; i < activities_.size(); ++i) {
    std::size_t cur = i;
    while (activities_[cur].parent) cur = idx(*activities_[cur].parent);
    rollup_[i] = static_cast<ActivityId>(cur);
  }

  time_fm_.resize(time_classes_.size());
  for (std::size_t i = 0; i < time_classes_.size(); ++i) time_fm_[i] = sample_hourly(time_classes_[i].membership);
  activity_fm_.resize(activities_.size());
  for (std::size_t i = 0; i < activities_.size(); ++i) {
    const auto& s = schedules_[i];
    if (s.membership) {
      activity_fm_[i] = sample_hourly(*s.membership);
    } else {
      HourlyMembership u{};
      for (auto t : s.times) {
        for (int h = 0; h < kHoursPerDay; ++h) u[h] = std::max(u[h], time_fm_[idx(t)][h]);
      }
      activity_fm_[i] = u;
    }
  }

  recognized_keys_.clear();
  ambiguous_values_.clear();
  for (const auto& p : poi_types_) {
    const std::string_view id = p.id;
    if (!id.starts_with("k_")) continue;
    const auto v = id.find("_v_", 2);
    if (v == std::string_view::npos) {
      recognized_keys_.emplace(id.substr(2));
    } else {
      recognized_keys_.emplace(id.substr(2, v - 2));
      ambiguous_values_.emplace(id.substr(v + 3));
    }
  }
}

TaxonomyGraph TaxonomyGraph::load(std::istream& in, const TaxonomyLoadOptions& opts) {
  return TaxonomyParser::parse(in, opts);
}

TaxonomyGraph TaxonomyGraph::load_file(const std::filesystem::path& path, const TaxonomyLoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open taxonomy file " + path.string());
  return load(in, opts);
}

TaxonomyGraph TaxonomyGraph::load_string(std::string_view text, const TaxonomyLoadOptions& opts) {
  std::istringstream in{std::string(text)};
  return load(in, opts);
}

std::string TaxonomyGraph::serialize() const {
  std::ostringstream out;
  out << kHeader << ' ' << kFormatVersion << '\n';
  for (const auto& t : time_classes_) {
    out << "time " << t.id;
    if (t.parent) out << " parent=" << time_classes_[idx(*t.parent)].id;
    out << ' ' << format_trap(t.membership) << '\n';
  }
  for (const auto& d : day_classes_) {
    out << "day " << d.id;
    if (d.parent) out << " parent=" << day_classes_[idx(*d.parent)].id;
    if (d.members) {
      out << " members=";
      bool first = true;
      for (unsigned wd = 0; wd < 7; ++wd) {
        if (!(d.members & (1u << wd))) continue;
        out << (first ? "" : ",") << kWeekdayNames[wd];
        first = false;
      }
    }
    out << '\n';
  }
  for (const auto& a : activities_) {
    out << "act " << a.id;
    if (a.parent) out << " parent=" << activities_[idx(*a.parent)].id;
    if (!a.label.empty()) out << " label=" << quote_if_needed(a.label);
    out << '\n';
  }
  for (const auto& p : poi_types_) {
    out << "poi " << p.id;
    if (p.parent) out << " parent=" << poi_types_[idx(*p.parent)].id;
    if (!p.relevant) out << " irrelevant";
    out << '\n';
  }
  for (const auto& r : rules_) {
    out << "rule " << poi_types_[idx(r.poi_type)].id << ' ';
    for (std::size_t i = 0; i < r.activities.size(); ++i) out << (i ? "," : "") << activities_[idx(r.activities[i])].id;
    out << '\n';
  }
  for (const auto& s : schedules_) {
    if (s.inherited) continue;
    out << "sched " << activities_[idx(s.activity)].id << " times=";
    for (std::size_t i = 0; i < s.times.size(); ++i) out << (i ? "," : "") << time_classes_[idx(s.times[i])].id;
    out << " days=";
    for (std::size_t i = 0; i < s.days.size(); ++i) out << (i ? "," : "") << day_classes_[idx(s.days[i])].id;
    if (s.membership) out << ' ' << format_trap(*s.membership);
    out << '\n';
  }
  return out.str();
}

TaxonomyCounts TaxonomyGraph::counts() const {
  TaxonomyCounts c;
  c.poi_types = poi_types_.size();
  c.relevant_poi_types = static_cast<std::size_t>(
      std::count_if(poi_types_.begin(), poi_types_.end(), [](const PoiType& p) { return p.relevant; }));
  c.activities = activities_.size();
  c.top_level_activities = static_cast<std::size_t>(
      std::count_if(activities_.begin(), activities_.end(), [](const ActivityClass& a) { return a.depth == 0; }));
  c.time_classes = time_classes_.size();
  c.day_classes = day_classes_.size();
  c.rules = rules_.size();
  c.explicit_schedules = static_cast<std::size_t>(
      std::count_if(schedules_.begin(), schedules_.end(), [](const Schedule& s) { return !s.inherited; }));
  return c;
}

namespace {
template <class Map>
auto find_in(const Map& m, std::string_view id) -> std::optional<typename Map::mapped_type> {
  auto it = m.find(std::string(id));
  if (it == m.end()) return std::nullopt;
  return it->second;
}
}  // namespace

std::optional<PoiTypeId> TaxonomyGraph::find_poi_type(std::string_view id) const { return find_in(poi_index_, id); }
std::optional<ActivityId> TaxonomyGraph::find_activity(std::string_view id) const { return find_in(activity_index_, id); }
std::optional<TimeClassId> TaxonomyGraph::find_time_class(std::string_view id) const { return find_in(time_index_, id); }
std::optional<DayClassId> TaxonomyGraph::find_day_class(std::string_view id) const { return find_in(day_index_, id); }

PoiTypeId TaxonomyGraph::poi_type_id(std::string_view id) const {
  if (auto r = find_poi_type(id)) return *r;
  throw Error(ErrorCode::kUnknownPoiType, std::string(id));
}
ActivityId TaxonomyGraph::activity_id(std::string_view id) const {
  if (auto r = find_activity(id)) return *r;
  throw Error(ErrorCode::kUnknownActivity, std::string(id));
}
TimeClassId TaxonomyGraph::time_class_id(std::string_view id) const {
  if (auto r = find_time_class(id)) return *r;
  throw Error(ErrorCode::kUnknownTimeClass, std::string(id));
}
DayClassId TaxonomyGraph::day_class_id(std::string_view id) const {
  if (auto r = find_day_class(id)) return *r;
  throw Error(ErrorCode::kUnknownDayClass, std::string(id));
}

bool TaxonomyGraph::is_valid_at(ActivityId a, TimeClassId t, DayClassId d) const {
  const auto& s = schedules_[idx(a)];
  const bool time_ok = std::any_of(s.times.begin(), s.times.end(), [&](TimeClassId x) { return time_related(x, t); });
  if (!time_ok) return false;
  return std::any_of(s.days.begin(), s.days.end(), [&](DayClassId x) { return day_related(x, d); });
}

std::vector<ActivityId> TaxonomyGraph::activities_valid_at(TimeClassId t, DayClassId d) const {
  if (idx(t) >= time_classes_.size()) throw Error(ErrorCode::kUnknownTimeClass, std::to_string(idx(t)));
  if (idx(d) >= day_classes_.size()) throw Error(ErrorCode::kUnknownDayClass, std::to_string(idx(d)));
  std::vector<ActivityId> out;
  for (std::size_t i = 0; i < activities_.size(); ++i) {
    if (is_valid_at(static_cast<ActivityId>(i), t, d)) out.push_back(static_cast<ActivityId>(i));
  }
  return out;
}

std::vector<TimeClassId> TaxonomyGraph::leaf_time_classes() const {
  std::vector<bool> has_child(time_classes_.size(), false);
  for (const auto& t : time_classes_) {
    if (t.parent) has_child[idx(*t.parent)] = true;
  }
  std::vector<TimeClassId> out;
  for (std::size_t i = 0; i < time_classes_.size(); ++i) {
    if (!has_child[i]) out.push_back(static_cast<TimeClassId>(i));
  }
  return out;
}

std::vector<DayClassId> TaxonomyGraph::leaf_day_classes() const {
  std::vector<bool> has_child(day_classes_.size(), false);
  for (const auto& d : day_classes_) {
    if (d.parent) has_child[idx(*d.parent)] = true;
  }
  std::vector<DayClassId> out;
  for (std::size_t i = 0; i < day_classes_.size(); ++i) {
    if (!has_child[i]) out.push_back(static_cast<DayClassId>(i));
  }
  return out;
}

std::vector<ActivityId> TaxonomyGraph::top_level_activities() const {
  std::vector<ActivityId> out;
  for (std::size_t i = 0; i < activities_.size(); ++i) {
    if (activities_[i].depth == 0) out.push_back(static_cast<ActivityId>(i));
  }
  return out;
}

}  // namespace poiact
