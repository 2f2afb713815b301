#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

namespace tfv {

/// Append-only log of one JSON record per line. Each append rewrites the
/// file through a temporary sibling and a rename, so a crash leaves either
/// the old or the new log. Without a path the log lives in memory only.
class AppendLog {
 public:
  explicit AppendLog(std::optional<std::filesystem::path> path = std::nullopt);

  void append(const nlohmann::json& record);
  std::vector<nlohmann::json> records() const;
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> records_;
  std::string contents_;
};

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace tfv
