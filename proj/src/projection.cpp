#include "tfv/projection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {
namespace {

using nlohmann::json;

std::vector<std::string> normalize_scope(const Dataset& dataset, const std::string& channel,
                                         std::vector<std::string> scope) {
  if (scope.empty()) throw Error(ErrorCode::InvalidArgument, "projection scope is empty");
  std::sort(scope.begin(), scope.end());
  scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
  for (const auto& id : scope) (void)dataset.channel_data(id, channel);
  return scope;
}

json spec_json(const ProjectionSpec& spec) {
  json j;
  j["channel"] = spec.channel;
  j["method"] = std::string(to_string(spec.method));
  j["scope"] = spec.scope;
  j["method_params"] = spec.method_params;
  return j;
}

void apply_sign_convention(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  if (v(best) < 0.0) v = -v;
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::InvalidArgument,
                "line " + std::to_string(line) + ": bad real literal '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(ProjectionMethod m) {
  return m == ProjectionMethod::Pca ? "pca" : "external";
}

ProjectionMethod parse_projection_method(std::string_view s) {
  if (s == "pca") return ProjectionMethod::Pca;
  if (s == "external") return ProjectionMethod::External;
  throw Error(ErrorCode::InvalidArgument, "unknown projection method '" + std::string(s) + "'");
}

std::string projection_id(const ProjectionSpec& spec) {
  auto j = spec_json(spec);
  if (spec.method == ProjectionMethod::External) {
    if (!spec.external_file)
      throw Error(ErrorCode::InvalidArgument, "external projection requires a file");
    j["external_sha256"] = sha256_hex(read_file_bytes(*spec.external_file));
  }
  return short_digest(j.dump());
}

Pca2d pca_2d(const Eigen::MatrixXd& rows) {
  const auto n = rows.rows();
  const auto dim = rows.cols();
  if (n < 3) throw Error(ErrorCode::TooFewFrames, "PCA needs at least 3 frames");
  if (dim < 2) throw Error(ErrorCode::InvalidArgument, "PCA needs embedding dim >= 2");

  Pca2d out;
  const Eigen::VectorXd mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  out.stats.mean.assign(mean.data(), mean.data() + dim);

  if ((centered.array() == 0.0).all()) {
    out.stats.degenerate = true;
    out.stats.components = Eigen::MatrixXd::Zero(dim, 2);
    out.stats.components(0, 0) = 1.0;
    out.stats.components(1, 1) = 1.0;
    out.coords = Eigen::MatrixX2d::Zero(n, 2);
    return out;
  }

  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::InvalidArgument, "covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  Eigen::MatrixXd comps(dim, 2);
  comps.col(0) = solver.eigenvectors().col(dim - 1);
  comps.col(1) = solver.eigenvectors().col(dim - 2);
  apply_sign_convention(comps.col(0));
  apply_sign_convention(comps.col(1));
  out.stats.eigenvalues[0] = std::max(0.0, solver.eigenvalues()(dim - 1));
  out.stats.eigenvalues[1] = std::max(0.0, solver.eigenvalues()(dim - 2));
  out.stats.components = comps;
  out.coords = centered * comps;
  return out;
}

ProjectionResult fit_pca_2d(const Dataset& dataset, const std::string& channel,
                            std::vector<std::string> scope) {
  ProjectionResult result;
  result.spec.channel = channel;
  result.spec.method = ProjectionMethod::Pca;
  result.spec.scope = normalize_scope(dataset, channel, std::move(scope));

  std::size_t n = 0;
  std::uint32_t dim = 0;
  for (const auto& id : result.spec.scope) {
    const auto& cd = dataset.channel_data(id, channel);
    n += cd.embedding.n_frames;
    dim = cd.embedding.dim;
  }
  if (n < 3) throw Error(ErrorCode::TooFewFrames, "PCA needs at least 3 frames in scope");

  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), dim);
  std::vector<FrameKey> keys;
  keys.reserve(n);
  Eigen::Index r = 0;
  for (const auto& id : result.spec.scope) {
    const auto& emb = dataset.channel_data(id, channel).embedding;
    for (std::uint32_t t = 0; t < emb.n_frames; ++t, ++r) {
      auto row = emb.row(t);
      for (std::uint32_t c = 0; c < dim; ++c) rows(r, c) = row[c];
      keys.push_back({id, t});
    }
  }

  auto pca = pca_2d(rows);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    result.coords.emplace(keys[i], Point2{pca.coords(idx, 0), pca.coords(idx, 1)});
  }
  result.fit_stats = std::move(pca.stats);
  result.id = projection_id(result.spec);
  return result;
}

std::vector<ExternalRow> parse_projection_csv(std::string_view text) {
  std::vector<ExternalRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "case_id,t_index,x,y")
        throw Error(ErrorCode::InvalidArgument, "projection file header must be case_id,t_index,x,y");
      header_seen = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 4)
      throw Error(ErrorCode::InvalidArgument,
                  "line " + std::to_string(line_no) + ": expected 4 fields");
    ExternalRow row;
    row.key.case_id = std::string(fields[0]);
    auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(),
                                     row.key.t_index);
    if (ec != std::errc() || ptr != fields[1].data() + fields[1].size())
      throw Error(ErrorCode::InvalidArgument,
                  "line " + std::to_string(line_no) + ": bad t_index");
    row.point = {parse_double(fields[2], line_no), parse_double(fields[3], line_no)};
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw Error(ErrorCode::InvalidArgument, "projection file is empty");
  return rows;
}

std::string format_projection_csv(const CoordMap& coords) {
  std::ostringstream out;
  out.precision(17);
  out << "case_id,t_index,x,y\n";
  for (const auto& [k, p] : coords) out << k.case_id << ',' << k.t_index << ',' << p.x << ',' << p.y << '\n';
  return out.str();
}

ProjectionResult import_external_projection(const Dataset& dataset, const std::string& channel,
                                            std::vector<std::string> scope,
                                            const std::filesystem::path& file,
                                            std::map<std::string, std::string> method_params) {
  ProjectionResult result;
  result.spec.channel = channel;
  result.spec.method = ProjectionMethod::External;
  result.spec.scope = normalize_scope(dataset, channel, std::move(scope));
  result.spec.external_file = file;
  result.spec.method_params = std::move(method_params);

  const std::set<std::string> in_scope(result.spec.scope.begin(), result.spec.scope.end());
  for (auto& row : parse_projection_csv(read_file_bytes(file))) {
    if (!in_scope.contains(row.key.case_id))
      throw Error(ErrorCode::UnknownCase, "projection row for case " + row.key.case_id +
                                              " which is not in scope");
    const auto& cd = dataset.channel_data(row.key.case_id, channel);
    if (row.key.t_index >= cd.frames.size())
      throw Error(ErrorCode::UnknownCase, "projection row for unknown frame " + row.key.case_id +
                                              "/" + std::to_string(row.key.t_index));
    auto key = row.key;
    if (!result.coords.emplace(std::move(row.key), row.point).second)
      throw Error(ErrorCode::DuplicateRow, "duplicate projection row for " + key.case_id + "/" +
                                               std::to_string(key.t_index));
  }
  for (const auto& id : result.spec.scope) {
    const auto n = dataset.channel_data(id, channel).frames.size();
    for (std::uint32_t t = 0; t < n; ++t)
      if (!result.coords.contains({id, t}))
        throw Error(ErrorCode::MissingFrameCoordinate,
                    "projection file has no coordinate for " + id + "/" + std::to_string(t));
  }
  result.id = projection_id(result.spec);
  return result;
}

void quantize_coords(CoordMap& coords) {
  for (auto& [k, p] : coords) {
    p.x = static_cast<double>(static_cast<float>(p.x));
    p.y = static_cast<double>(static_cast<float>(p.y));
  }
}

ProjectionCache::ProjectionCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {}

std::shared_ptr<const ProjectionResult> ProjectionCache::find(const std::string& id) const {
  {
    std::lock_guard lock(mu_);
    auto it = entries_.find(id);
    if (it != entries_.end()) return it->second;
  }
  auto loaded = load_from_disk(id);
  if (!loaded) return nullptr;
  std::lock_guard lock(mu_);
  return entries_.emplace(id, *loaded).first->second;
}

std::shared_ptr<const ProjectionResult> ProjectionCache::insert(ProjectionResult result) {
  quantize_coords(result.coords);
  std::lock_guard lock(mu_);
  auto it = entries_.find(result.id);
  if (it != entries_.end()) return it->second;
  persist(result);
  auto ptr = std::make_shared<const ProjectionResult>(std::move(result));
  entries_.emplace(ptr->id, ptr);
  return ptr;
}

void ProjectionCache::persist(const ProjectionResult& result) const {
  if (!dir_) return;
  const auto base = *dir_ / "projections" / result.id;
  EmbeddingMatrix m;
  m.n_frames = static_cast<std::uint32_t>(result.coords.size());
  m.dim = 2;
  json frames = json::array();
  for (const auto& [k, p] : result.coords) {
    m.values.push_back(static_cast<float>(p.x));
    m.values.push_back(static_cast<float>(p.y));
    frames.push_back({k.case_id, k.t_index});
  }
  write_embedding_file(m, base / "coords.tfv");
  auto side = spec_json(result.spec);
  side["id"] = result.id;
  side["frames"] = std::move(frames);
  if (result.spec.external_file) side["external_file"] = result.spec.external_file->string();
  if (result.fit_stats) {
    side["eigenvalues"] = {result.fit_stats->eigenvalues[0], result.fit_stats->eigenvalues[1]};
    side["mean"] = result.fit_stats->mean;
    side["degenerate"] = result.fit_stats->degenerate;
  }
  write_file_atomic(base / "spec.json", side.dump(2));
}

std::optional<std::shared_ptr<const ProjectionResult>> ProjectionCache::load_from_disk(
    const std::string& id) const {
  if (!dir_) return std::nullopt;
  const auto base = *dir_ / "projections" / id;
  if (!std::filesystem::exists(base / "spec.json") || !std::filesystem::exists(base / "coords.tfv"))
    return std::nullopt;
  const auto side = json::parse(read_file_bytes(base / "spec.json"));
  const auto m = read_embedding_file(base / "coords.tfv");
  const auto& frames = side.at("frames");
  if (m.dim != 2 || m.n_frames != frames.size())
    throw Error(ErrorCode::ShapeMismatch, "corrupt projection cache entry " + id);

  ProjectionResult r;
  r.id = id;
  r.spec.channel = side.at("channel").get<std::string>();
  r.spec.method = parse_projection_method(side.at("method").get<std::string>());
  r.spec.scope = side.at("scope").get<std::vector<std::string>>();
  r.spec.method_params = side.at("method_params").get<std::map<std::string, std::string>>();
  if (side.contains("external_file"))
    r.spec.external_file = side["external_file"].get<std::string>();
  if (side.contains("eigenvalues")) {
    PcaFitStats stats;
    stats.eigenvalues[0] = side["eigenvalues"][0].get<double>();
    stats.eigenvalues[1] = side["eigenvalues"][1].get<double>();
    stats.mean = side["mean"].get<std::vector<double>>();
    stats.degenerate = side.value("degenerate", false);
    r.fit_stats = std::move(stats);
  }
  for (std::size_t i = 0; i < frames.size(); ++i)
    r.coords.emplace(FrameKey{frames[i][0].get<std::string>(), frames[i][1].get<std::uint32_t>()},
                     Point2{m.values[2 * i], m.values[2 * i + 1]});
  return std::make_shared<const ProjectionResult>(std::move(r));
}

}  // namespace tfv
