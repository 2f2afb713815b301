#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tfv/dataset.hpp"
#include "tfv/projection.hpp"
#include "tfv/trajectory.hpp"

namespace tfv::test {

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("tfv-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline CaseRecord make_case(const std::string& id, CaseParams params,
                            const std::vector<std::vector<float>>& rows,
                            const std::string& channel = "pressure") {
  CaseRecord rec;
  rec.case_id = id;
  rec.params = params;
  ChannelData cd;
  cd.embedding.case_id = id;
  cd.embedding.channel = channel;
  cd.embedding.n_frames = static_cast<std::uint32_t>(rows.size());
  cd.embedding.dim = rows.empty() ? 0 : static_cast<std::uint32_t>(rows[0].size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    cd.embedding.values.insert(cd.embedding.values.end(), rows[t].begin(), rows[t].end());
    cd.frames.push_back({id, channel, static_cast<std::uint32_t>(t), 0.1 * double(t + 1),
                         "images/" + id + "_" + std::to_string(t) + ".png"});
  }
  rec.channels.emplace(channel, std::move(cd));
  return rec;
}

inline Trajectory make_traj(const std::string& id, const std::vector<Point2>& pts) {
  Trajectory t{id, "pressure", {}};
  for (std::size_t i = 0; i < pts.size(); ++i) t.points.push_back({static_cast<std::uint32_t>(i), pts[i]});
  return t;
}

inline ProjectionResult make_projection(const std::map<std::string, std::vector<Point2>>& cases,
                                        const std::string& id = "proj-test") {
  ProjectionResult r;
  r.id = id;
  r.spec.channel = "pressure";
  for (const auto& [cid, pts] : cases) {
    r.spec.scope.push_back(cid);
    for (std::size_t i = 0; i < pts.size(); ++i)
      r.coords.emplace(FrameKey{cid, static_cast<std::uint32_t>(i)}, pts[i]);
  }
  return r;
}

}  // namespace tfv::test
