#include "tfv/service.hpp"

#include <charconv>
#include <iostream>

#include <httplib.h>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {
namespace {

using nlohmann::json;

// Raised inside handlers for conditions that are not domain errors.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

json error_body(std::string_view code, std::string_view message) {
  return {{"schema_version", kSchemaVersion},
          {"error", {{"code", std::string(code)}, {"message", std::string(message)}}}};
}

void send_json(httplib::Response& res, json body, int status = 200) {
  body["schema_version"] = kSchemaVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{400, "InvalidArgument", "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError{400, "InvalidArgument", std::string("malformed JSON body: ") + e.what()};
  }
}

template <typename T>
T field(const json& body, const char* key) {
  if (!body.contains(key)) throw HttpError{400, "InvalidArgument", std::string("missing field '") + key + "'"};
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw HttpError{400, "InvalidArgument", std::string("field '") + key + "' has the wrong type"};
  }
}

std::optional<double> query_double(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto s = req.get_param_value(key);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw HttpError{400, "InvalidArgument", std::string("query parameter '") + key + "' is not a number"};
  return v;
}

std::uint64_t parse_uint(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw HttpError{400, "InvalidArgument", std::string(what) + " must be a non-negative integer"};
  return v;
}

int parse_int(const std::string& s, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw HttpError{400, "InvalidArgument", std::string(what) + " must be an integer"};
  return v;
}

json points_json(const Trajectory& t) {
  json pts = json::array();
  for (const auto& p : t.points) pts.push_back({{"t_index", p.t_index}, {"x", p.p.x}, {"y", p.p.y}});
  return pts;
}

json params_json(const CaseParams& p) {
  return {{"P_MPa", p.p_static_mpa}, {"T_K", p.t_static_k}, {"H2O_pct", p.h2o_pct}};
}

json projection_json(const ProjectionResult& r) {
  json coords = json::array();
  for (const auto& [k, p] : r.coords)
    coords.push_back({{"case_id", k.case_id}, {"t_index", k.t_index}, {"x", p.x}, {"y", p.y}});
  json j = {{"projection_id", r.id},
            {"status", "done"},
            {"channel", r.spec.channel},
            {"method", std::string(to_string(r.spec.method))},
            {"case_ids", r.spec.scope},
            {"method_params", r.spec.method_params},
            {"coords", std::move(coords)}};
  if (r.fit_stats)
    j["fit_stats"] = {{"eigenvalues", {r.fit_stats->eigenvalues[0], r.fit_stats->eigenvalues[1]}},
                      {"mean", r.fit_stats->mean},
                      {"degenerate", r.fit_stats->degenerate}};
  return j;
}

json cluster_json(const ClusterModel& m) {
  json labels = json::array();
  std::size_t noise = 0;
  for (const auto& [k, l] : m.labels) {
    labels.push_back({{"case_id", k.case_id}, {"t_index", k.t_index}, {"label", l}});
    if (l == kNoiseLabel) ++noise;
  }
  json centroids = json::array();
  for (const auto& [cid, k] : m.centroids) {
    const auto& p = m.centroid_coords.at(cid);
    centroids.push_back({{"cluster_id", cid}, {"case_id", k.case_id}, {"t_index", k.t_index},
                         {"x", p.x}, {"y", p.y}});
  }
  return {{"clustering_id", m.id},
          {"projection_id", m.params.projection_id},
          {"eps", m.params.eps},
          {"min_samples", m.params.min_samples},
          {"n_clusters", m.cluster_count},
          {"n_noise", noise},
          {"labels", std::move(labels)},
          {"centroids", std::move(centroids)}};
}

json annotation_json(const AnnotationRecord& a) {
  return {{"clustering_id", a.key.clustering_id},
          {"cluster_id", a.key.cluster_id},
          {"centroid", {{"case_id", a.centroid.case_id}, {"t_index", a.centroid.t_index}}},
          {"text", a.text},
          {"author", a.author},
          {"created_at", a.created_at},
          {"updated_at", a.updated_at},
          {"version", a.version}};
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

std::string_view to_string(JobKind k) {
  switch (k) {
    case JobKind::Projection: return "projection";
    case JobKind::Clustering: return "clustering";
    case JobKind::Similarity: return "similarity";
  }
  return "projection";
}

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Pending: return "pending";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "pending";
}

json to_json(const JobHandle& job) {
  json j = {{"job_id", job.job_id},
            {"kind", std::string(to_string(job.kind))},
            {"status", std::string(to_string(job.status))}};
  if (job.status == JobStatus::Done) j["result_ref"] = job.result_ref;
  if (job.status == JobStatus::Failed)
    j["error"] = {{"code", job.error_code}, {"message", job.error_message}};
  return j;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCase:
    case ErrorCode::UnknownChannel:
    case ErrorCode::UnknownCluster:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::NoAnnotatedCentroids:
      return 409;
    case ErrorCode::VlmUnavailable:
      return 503;
    case ErrorCode::VlmMalformedResponse:
      return 502;
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

// ---------------------------------------------------------------------------
// JobRunner

JobRunner::JobRunner(std::size_t workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t i = 0; i < workers; ++i)
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
}

JobRunner::~JobRunner() {
  for (auto& w : workers_) w.request_stop();
  cv_.notify_all();
}

JobHandle JobRunner::submit(const std::string& id, JobKind kind, std::function<std::string()> work) {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it != jobs_.end() && it->second.status != JobStatus::Failed) return it->second;
  JobHandle h{id, kind, JobStatus::Pending, {}, {}, {}};
  jobs_[id] = h;
  queue_.emplace_back(id, std::move(work));
  cv_.notify_all();
  return h;
}

std::optional<JobHandle> JobRunner::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::optional<JobHandle> JobRunner::wait(const std::string& id) const {
  std::unique_lock lock(mu_);
  std::optional<JobHandle> out;
  cv_.wait(lock, [&] {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) return true;
    if (it->second.status == JobStatus::Done || it->second.status == JobStatus::Failed) {
      out = it->second;
      return true;
    }
    return false;
  });
  return out;
}

void JobRunner::worker_loop(std::stop_token stop) {
  for (;;) {
    std::pair<std::string, std::function<std::string()>> item;
    {
      std::unique_lock lock(mu_);
      if (!cv_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      jobs_[item.first].status = JobStatus::Running;
    }
    JobHandle result = [&] {
      std::lock_guard lock(mu_);
      return jobs_[item.first];
    }();
    try {
      result.result_ref = item.second();
      result.status = JobStatus::Done;
    } catch (const Error& e) {
      result.status = JobStatus::Failed;
      result.error_code = std::string(to_string(e.code()));
      result.error_message = e.what();
    } catch (const std::exception& e) {
      result.status = JobStatus::Failed;
      result.error_code = "Internal";
      result.error_message = e.what();
    }
    {
      std::lock_guard lock(mu_);
      jobs_[item.first] = result;
    }
    cv_.notify_all();
  }
}

// ---------------------------------------------------------------------------
// Service

struct Service::Impl {
  explicit Impl(const ServiceOptions& o)
      : projections(o.cache_dir),
        annotations(o.cache_dir ? std::optional(*o.cache_dir / "annotations.jsonl") : std::nullopt),
        reports(o.cache_dir ? std::optional(*o.cache_dir / "reports.jsonl") : std::nullopt),
        vlm(make_vlm_backend(o.vlm)),
        cache_dir(o.cache_dir) {}

  ProjectionCache projections;
  DissimilarityCache dissimilarities;
  AnnotationStore annotations;
  ReportStore reports;
  std::unique_ptr<VlmBackend> vlm;
  std::optional<std::filesystem::path> cache_dir;

  std::mutex cluster_mu;
  std::map<std::string, std::shared_ptr<const ClusterModel>> clusterings;
  std::mutex similarity_mu;
  std::map<std::string, std::shared_ptr<const SimilarityMatrix>> similarity_results;

  std::shared_ptr<const ProjectionResult> projection(const std::string& id) {
    auto p = projections.find(id);
    if (!p) throw HttpError{404, "NotFound", "unknown or unfinished projection " + id};
    return p;
  }

  std::shared_ptr<const ClusterModel> cluster(const ClusteringParams& params) {
    const auto id = clustering_id(params);
    {
      std::lock_guard lock(cluster_mu);
      if (auto it = clusterings.find(id); it != clusterings.end()) return it->second;
    }
    auto proj = projection(params.projection_id);
    auto model = std::make_shared<const ClusterModel>(
        select_centroids(dbscan(*proj, params.eps, params.min_samples), proj->coords));
    if (cache_dir)
      write_file_atomic(*cache_dir / "clusterings" / (id + ".json"),
                        json{{"projection_id", params.projection_id},
                             {"eps", params.eps},
                             {"min_samples", params.min_samples}}
                            .dump());
    std::lock_guard lock(cluster_mu);
    return clusterings.emplace(id, model).first->second;
  }

  // Models are recomputed from persisted parameters after a restart.
  std::shared_ptr<const ClusterModel> cluster(const std::string& id) {
    {
      std::lock_guard lock(cluster_mu);
      if (auto it = clusterings.find(id); it != clusterings.end()) return it->second;
    }
    if (cache_dir) {
      const auto path = *cache_dir / "clusterings" / (id + ".json");
      if (std::filesystem::exists(path)) {
        const auto j = json::parse(read_file_bytes(path));
        return cluster(ClusteringParams{j.at("eps").get<double>(),
                                        j.at("min_samples").get<std::uint32_t>(),
                                        j.at("projection_id").get<std::string>()});
      }
    }
    throw HttpError{404, "NotFound", "unknown clustering " + id};
  }
};

Service::Service(ServiceOptions options)
    : options_(std::move(options)),
      jobs_(std::make_unique<JobRunner>(options_.workers)),
      impl_(std::make_unique<Impl>(options_)) {
  if (!options_.dataset) throw Error(ErrorCode::InvalidArgument, "service needs a dataset");
}

Service::~Service() = default;

void Service::register_routes(httplib::Server& server) {
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guarded = [](Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const HttpError& e) {
        send_json(res, error_body(e.code, e.message), e.status);
      } catch (const Error& e) {
        send_json(res, error_body(to_string(e.code()), e.what()), http_status_for(e.code()));
      } catch (const std::exception& e) {
        send_json(res, error_body("Internal", e.what()), 500);
      }
    };
  };

  const Dataset& ds = *options_.dataset;
  Impl& impl = *impl_;
  JobRunner& jobs = *jobs_;

  server.Get("/api/health", guarded([&](const httplib::Request&, httplib::Response& res) {
    send_json(res, {{"status", "ok"}, {"dataset_name", ds.name()}, {"n_cases", ds.case_count()},
                    {"channels", ds.channels()}, {"vlm_model", impl.vlm->model_id()}});
  }));

  server.Get("/api/cases", guarded([&](const httplib::Request& req, httplib::Response& res) {
    ParamFilter f;
    f.p_mpa = {query_double(req, "p_min"), query_double(req, "p_max")};
    f.t_k = {query_double(req, "t_min"), query_double(req, "t_max")};
    f.h2o_pct = {query_double(req, "h2o_min"), query_double(req, "h2o_max")};
    json rows = json::array();
    for (const auto& id : filter_cases(ds, f)) {
      const auto& rec = ds.at(id);
      json counts = json::object();
      for (const auto& [ch, cd] : rec.channels) counts[ch] = cd.frames.size();
      rows.push_back({{"case_id", id}, {"params", params_json(rec.params)}, {"frame_counts", counts}});
    }
    send_json(res, {{"cases", std::move(rows)}});
  }));

  server.Post("/api/projection", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto channel = field<std::string>(body, "channel");
    auto scope = body.contains("case_ids") ? field<std::vector<std::string>>(body, "case_ids")
                                           : ds.case_ids();
    const auto method = parse_projection_method(body.value("method", std::string("pca")));
    std::map<std::string, std::string> method_params;
    if (body.contains("method_params"))
      for (const auto& [k, v] : body["method_params"].items())
        method_params[k] = v.is_string() ? v.get<std::string>() : v.dump();

    ProjectionSpec spec;
    spec.channel = channel;
    spec.method = method;
    std::sort(scope.begin(), scope.end());
    scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
    if (scope.empty()) throw HttpError{400, "InvalidArgument", "case_ids is empty"};
    for (const auto& id : scope) (void)ds.channel_data(id, channel);
    spec.scope = scope;
    if (method == ProjectionMethod::External) {
      std::filesystem::path file = field<std::string>(body, "external_file");
      if (file.is_relative()) file = ds.root() / file;
      if (!std::filesystem::exists(file))
        throw HttpError{400, "MissingFile", "external projection file not found: " + file.string()};
      spec.external_file = file;
      spec.method_params = method_params;
    }
    const auto id = projection_id(spec);

    auto job = jobs.submit(id, JobKind::Projection, [&, spec, id] {
      if (impl.projections.find(id)) return id;
      auto result = spec.method == ProjectionMethod::Pca
                        ? fit_pca_2d(ds, spec.channel, spec.scope)
                        : import_external_projection(ds, spec.channel, spec.scope,
                                                     *spec.external_file, spec.method_params);
      return impl.projections.insert(std::move(result))->id;
    });
    send_json(res, to_json(job), 202);
  }));

  server.Get(R"(/api/projection/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (auto p = impl.projections.find(id)) {
      send_json(res, projection_json(*p));
      return;
    }
    auto job = jobs.find(id);
    if (!job) throw HttpError{404, "NotFound", "unknown projection " + id};
    send_json(res, to_json(*job), job->status == JobStatus::Failed ? 200 : 202);
  }));

  server.Get(R"(/api/jobs/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto job = jobs.find(id);
    if (!job) throw HttpError{404, "NotFound", "unknown job " + id};
    send_json(res, to_json(*job));
  }));

  server.Post("/api/clustering", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    ClusteringParams params;
    params.projection_id = field<std::string>(body, "projection_id");
    params.eps = field<double>(body, "eps");
    const auto min_samples = field<std::int64_t>(body, "min_samples");
    if (!(params.eps > 0.0) || min_samples < 1)
      throw HttpError{400, "InvalidArgument", "eps must be > 0 and min_samples >= 1"};
    params.min_samples = static_cast<std::uint32_t>(min_samples);
    send_json(res, cluster_json(*impl.cluster(params)));
  }));

  server.Get(R"(/api/clustering/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
    send_json(res, cluster_json(*impl.cluster(std::string(req.matches[1]))));
  }));

  server.Get(R"(/api/trajectory/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto proj = impl.projection(req.matches[1]);
               const auto traj = build_trajectory(*proj, req.matches[2]);
               const auto conv = convergence_radius(traj);
               send_json(res, {{"projection_id", proj->id},
                               {"case_id", traj.case_id},
                               {"channel", traj.channel},
                               {"points", points_json(traj)},
                               {"convergence", {{"k", conv.k_window},
                                                {"radius", conv.radius},
                                                {"tail_mean", {conv.tail_mean.x, conv.tail_mean.y}}}}});
             }));

  server.Get(R"(/api/similar/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto proj = impl.projection(req.matches[1]);
               const std::string case_id = req.matches[2];
               const std::size_t k =
                   req.has_param("k") ? parse_uint(req.get_param_value("k"), "k") : kDefaultTopK;
               if (k < 1) throw HttpError{400, "InvalidArgument", "k must be >= 1"};
               json results = json::array();
               for (const auto& s : top_k_similar(*proj, case_id, k, &impl.dissimilarities))
                 results.push_back({{"case_id", s.case_id},
                                    {"value", s.value},
                                    {"points", points_json(build_trajectory(*proj, s.case_id))}});
               send_json(res, {{"projection_id", proj->id},
                               {"case_id", case_id},
                               {"k", k},
                               {"target_points", points_json(build_trajectory(*proj, case_id))},
                               {"results", std::move(results)}});
             }));

  server.Post("/api/similarity", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    auto proj = impl.projection(field<std::string>(body, "projection_id"));
    const auto id = "sim-" + proj->id;
    auto job = jobs.submit(id, JobKind::Similarity, [&, proj, id] {
      auto m = std::make_shared<const SimilarityMatrix>(similarity_matrix(*proj, &impl.dissimilarities));
      std::lock_guard lock(impl.similarity_mu);
      impl.similarity_results[id] = std::move(m);
      return id;
    });
    send_json(res, to_json(job), 202);
  }));

  server.Get(R"(/api/similarity/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::shared_ptr<const SimilarityMatrix> m;
    {
      std::lock_guard lock(impl.similarity_mu);
      if (auto it = impl.similarity_results.find(id); it != impl.similarity_results.end()) m = it->second;
    }
    if (!m) {
      auto job = jobs.find(id);
      if (!job) throw HttpError{404, "NotFound", "unknown similarity job " + id};
      send_json(res, to_json(*job), 202);
      return;
    }
    send_json(res, {{"job_id", id}, {"status", "done"}, {"case_ids", m->case_ids},
                    {"excluded", m->excluded}, {"values", m->values}});
  }));

  server.Get(R"(/api/frames/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
    const std::string case_id = req.matches[1];
    const auto channel = req.has_param("channel") ? req.get_param_value("channel") : ds.channels().front();
    const auto& cd = ds.channel_data(case_id, channel);
    json frames = json::array();
    for (const auto& f : cd.frames)
      frames.push_back({{"t_index", f.t_index},
                        {"time_ms", f.time_ms},
                        {"image_url", "/api/image/" + case_id + "/" + channel + "/" + std::to_string(f.t_index)}});
    send_json(res, {{"case_id", case_id}, {"channel", channel}, {"frames", std::move(frames)}});
  }));

  server.Get(R"(/api/image/([^/]+)/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               const auto& cd = ds.channel_data(req.matches[1], req.matches[2]);
               const auto t = parse_uint(req.matches[3], "t_index");
               if (t >= cd.frames.size()) throw HttpError{404, "NotFound", "no such frame"};
               const auto path = ds.root() / cd.frames[t].image_path;
               if (!std::filesystem::exists(path)) throw HttpError{404, "NotFound", "image file missing"};
               res.set_content(read_file_bytes(path), content_type_for(path));
             }));

  server.Put(R"(/api/annotation/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto model = impl.cluster(std::string(req.matches[1]));
               const int cluster_id = parse_int(req.matches[2], "cluster_id");
               if (cluster_id == kNoiseLabel)
                 throw HttpError{409, "UnknownCluster", "noise points cannot be annotated"};
               const auto body = parse_body(req);
               const auto rec = impl.annotations.save(*model, cluster_id, field<std::string>(body, "text"),
                                                      body.value("author", std::string("anonymous")));
               send_json(res, annotation_json(rec));
             }));

  server.Get(R"(/api/annotation/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               const ClusterKey key{req.matches[1], parse_int(req.matches[2], "cluster_id")};
               auto history = impl.annotations.history(key);
               if (history.empty()) throw HttpError{404, "NotFound", "no annotation for this cluster"};
               auto j = annotation_json(history.back());
               j["versions"] = history.size();
               send_json(res, j);
             }));

  server.Get(R"(/api/annotation/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
    json list = json::array();
    for (const auto& a : impl.annotations.latest_for(req.matches[1])) list.push_back(annotation_json(a));
    send_json(res, {{"clustering_id", std::string(req.matches[1])}, {"annotations", std::move(list)}});
  }));

  auto generator_for = [&impl](const std::string& clustering_id) {
    auto model = impl.cluster(clustering_id);
    auto proj = impl.projection(model->params.projection_id);
    return std::pair{model, proj};
  };

  server.Post("/api/report/frame", guarded([&, generator_for](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    auto [model, proj] = generator_for(field<std::string>(body, "clustering_id"));
    const auto k = body.value("k", static_cast<std::size_t>(kDefaultContextK));
    if (k < 1) throw HttpError{400, "InvalidArgument", "k must be >= 1"};
    ReportGenerator gen(ds, *proj, *model, impl.annotations, impl.reports, *impl.vlm);
    const auto report = gen.generate_frame_report(
        {field<std::string>(body, "case_id"), field<std::uint32_t>(body, "t_index")}, k);
    send_json(res, to_json(report));
  }));

  server.Post("/api/report/transition", guarded([&, generator_for](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    auto [model, proj] = generator_for(field<std::string>(body, "clustering_id"));
    const auto case_id = field<std::string>(body, "case_id");
    const auto t = field<std::uint32_t>(body, "t_index");
    std::optional<Transition> found;
    for (const auto& tr : detect_transitions(case_id, *model))
      if (tr.t_index == t) found = tr;
    if (!found) throw HttpError{404, "NotFound", "no cluster transition at that frame"};
    ReportGenerator gen(ds, *proj, *model, impl.annotations, impl.reports, *impl.vlm);
    send_json(res, to_json(gen.generate_transition_report(
                       case_id, *found, body.value("k", static_cast<std::size_t>(kDefaultContextK)))));
  }));

  server.Post("/api/report/case", guarded([&, generator_for](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    auto [model, proj] = generator_for(field<std::string>(body, "clustering_id"));
    ReportGenerator gen(ds, *proj, *model, impl.annotations, impl.reports, *impl.vlm);
    send_json(res, to_json(gen.generate_case_summary(
                       field<std::string>(body, "case_id"),
                       body.value("k", static_cast<std::size_t>(kDefaultContextK)))));
  }));

  server.Get(R"(/api/report/frame/([^/]+)/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto r = impl.reports.find(ReportKind::Frame, req.matches[1], req.matches[2],
                                          static_cast<std::uint32_t>(parse_uint(req.matches[3], "t_index")));
               if (!r) throw HttpError{404, "NotFound", "no frame report"};
               send_json(res, to_json(*r));
             }));

  server.Put(R"(/api/report/frame/([^/]+)/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               const auto body = parse_body(req);
               const auto text = field<std::string>(body, "text");
               if (text.empty()) throw HttpError{400, "EmptyText", "report text is empty"};
               send_json(res, to_json(impl.reports.edit(
                                  ReportKind::Frame, req.matches[1], req.matches[2],
                                  static_cast<std::uint32_t>(parse_uint(req.matches[3], "t_index")), text)));
             }));

  server.Get(R"(/api/report/case/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto r = impl.reports.find(ReportKind::Case, req.matches[1], req.matches[2]);
               if (!r) throw HttpError{404, "NotFound", "no case report"};
               send_json(res, to_json(*r));
             }));

  server.Get(R"(/api/transitions/([^/]+)/([^/]+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               auto model = impl.cluster(std::string(req.matches[1]));
               const std::string case_id = req.matches[2];
               (void)ds.at(case_id);
               json list = json::array();
               for (const auto& t : detect_transitions(case_id, *model))
                 list.push_back({{"t_index", t.t_index}, {"from_cluster", t.from_cluster},
                                 {"to_cluster", t.to_cluster}, {"involves_noise", t.involves_noise}});
               send_json(res, {{"clustering_id", model->id}, {"case_id", case_id}, {"transitions", std::move(list)}});
             }));

  if (options_.static_dir && std::filesystem::is_directory(*options_.static_dir))
    server.set_mount_point("/", options_.static_dir->string());

  if (options_.log_requests)
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      std::cerr << json{{"ts", utc_timestamp()}, {"method", req.method}, {"path", req.path},
                        {"status", res.status}, {"bytes", res.body.size()}}
                       .dump()
                << '\n';
    });
}

void run_server(ServiceOptions options, const std::string& host, int port) {
  Service service(std::move(options));
  httplib::Server server;
  service.register_routes(server);
  std::cerr << json{{"ts", utc_timestamp()}, {"event", "listening"}, {"host", host}, {"port", port},
                    {"dataset", service.dataset().name()}}
                   .dump()
            << '\n';
  if (!server.listen(host, port))
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace tfv
