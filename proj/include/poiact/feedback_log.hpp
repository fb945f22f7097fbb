#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "poiact/engine.hpp"
#include "poiact/evaluation.hpp"

namespace poiact {

/// A feedback submission as persisted: ids are taxonomy strings so the log
/// stays readable and survives taxonomy reloads.
struct StoredFeedback {
  std::uint64_t id = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::string time;
  std::string day;
  std::vector<std::string> shown;
  std::string selected;
  std::string client_timestamp;
  std::string server_timestamp;
};

nlohmann::json to_json(const StoredFeedback& f);
/// Throws Parse on missing or mistyped fields.
StoredFeedback stored_feedback_from_json(const nlohmann::json& j);

/// Resolves names against the engine's taxonomy (throws Unknown* errors).
FeedbackRecord resolve_feedback(const StoredFeedback& f, const Engine& engine);

/// Append-only newline-delimited JSON log. Each append is written with a
/// single write(2) and fsync'd before the id is returned; readers see a
/// consistent in-memory copy.
class FeedbackLog {
 public:
  /// Opens (creating if needed) and replays the existing log. A trailing
  /// line without a newline (torn write) is ignored; any other malformed
  /// line throws Parse.
  explicit FeedbackLog(std::filesystem::path path);
  ~FeedbackLog();
  FeedbackLog(const FeedbackLog&) = delete;
  FeedbackLog& operator=(const FeedbackLog&) = delete;

  /// Assigns the next id and a server timestamp, persists, returns the id.
  std::uint64_t append(StoredFeedback record);
  std::vector<StoredFeedback> records() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::shared_mutex mu_;
  std::vector<StoredFeedback> records_;
  std::uint64_t next_id_ = 1;
};

}  // namespace poiact
