#include "poiact/feedback_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "poiact/error.hpp"

namespace poiact {

nlohmann::json to_json(const StoredFeedback& f) {
  return {{"id", f.id},
          {"lat", f.lat},
          {"lon", f.lon},
          {"time", f.time},
          {"day", f.day},
          {"shown", f.shown},
          {"selected", f.selected},
          {"client_timestamp", f.client_timestamp},
          {"server_timestamp", f.server_timestamp}};
}

StoredFeedback stored_feedback_from_json(const nlohmann::json& j) {
  try {
    StoredFeedback f;
    f.id = j.value("id", std::uint64_t{0});
    f.lat = j.at("lat").get<double>();
    f.lon = j.at("lon").get<double>();
    f.time = j.at("time").get<std::string>();
    f.day = j.at("day").get<std::string>();
    f.shown = j.value("shown", std::vector<std::string>{});
    f.selected = j.at("selected").get<std::string>();
    f.client_timestamp = j.value("client_timestamp", std::string{});
    f.server_timestamp = j.value("server_timestamp", std::string{});
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("feedback record: ") + e.what());
  }
}

FeedbackRecord resolve_feedback(const StoredFeedback& f, const Engine& engine) {
  const auto& g = engine.taxonomy();
  FeedbackRecord r;
  r.id = f.id;
  r.point = {f.lat, f.lon};
  r.time = engine.resolve_time(f.time);
  r.day = engine.resolve_day(f.day);
  for (const auto& s : f.shown) r.shown.push_back(g.activity_id(s));
  r.selected = g.activity_id(f.selected);
  r.timestamp = f.client_timestamp;
  return r;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

FeedbackLog::FeedbackLog(std::filesystem::path path) : path_(std::move(path)) {
  {
    std::ifstream in(path_, std::ios::binary);
    if (in) {
      std::stringstream ss;
      ss << in.rdbuf();
      const std::string data = ss.str();
      std::size_t pos = 0;
      std::size_t line_no = 0;
      while (pos < data.size()) {
        const auto nl = data.find('\n', pos);
        if (nl == std::string::npos) {
          // Drop a torn final write so the next append starts on a fresh line.
          std::filesystem::resize_file(path_, pos);
          break;
        }
        ++line_no;
        const std::string line = data.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::kParse, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto rec = stored_feedback_from_json(j);
        next_id_ = std::max(next_id_, rec.id + 1);
        records_.push_back(std::move(rec));
      }
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot open feedback log " + path_.string() + ": " + std::strerror(errno));
}

FeedbackLog::~FeedbackLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t FeedbackLog::append(StoredFeedback record) {
  std::unique_lock lock(mu_);
  record.id = next_id_;
  record.server_timestamp = utc_now();
  const std::string line = to_json(record).dump() + "\n";
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("feedback append failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error(ErrorCode::kIo, std::string("feedback fsync failed: ") + std::strerror(errno));
  ++next_id_;
  records_.push_back(std::move(record));
  return records_.back().id;
}

std::vector<StoredFeedback> FeedbackLog::records() const {
  std::shared_lock lock(mu_);
  return records_;
}

std::size_t FeedbackLog::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

}  // namespace poiact
