#include "tfv/append_log.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {

AppendLog::AppendLog(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
  if (!path_ || !std::filesystem::exists(*path_)) return;
  contents_ = read_file_bytes(*path_);
  std::istringstream in(contents_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records_.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::IoError, path_->string() + ":" + std::to_string(line_no) +
                                          ": corrupt log record: " + e.what());
    }
  }
}

void AppendLog::append(const nlohmann::json& record) {
  std::lock_guard lock(mu_);
  std::string next = contents_ + record.dump() + "\n";
  if (path_) write_file_atomic(*path_, next);
  contents_ = std::move(next);
  records_.push_back(record);
}

std::vector<nlohmann::json> AppendLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t AppendLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace tfv
