#include "tfv/reports.hpp"

#include <atomic>
#include <cstdio>
#include <thread>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {
namespace {

using nlohmann::json;

json text_part(std::string text) { return {{"type", "text"}, {"text", std::move(text)}}; }

json image_part(std::string url) {
  return {{"type", "image_url"}, {"image_url", {{"url", std::move(url)}}}};
}

std::string format_distance(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", d);
  return buf;
}

std::string frame_label(const FrameKey& f) {
  return f.case_id + "/t=" + std::to_string(f.t_index);
}

json chat_body(json user_content) {
  return {{"messages",
           json::array({{{"role", "system"}, {"content", std::string(kSystemPrompt)}},
                        {{"role", "user"}, {"content", std::move(user_content)}}})},
          {"temperature", 0}};
}

std::string mime_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

std::string_view to_string(ReportKind k) {
  switch (k) {
    case ReportKind::Frame: return "frame";
    case ReportKind::Case: return "case";
    case ReportKind::Transition: return "transition";
  }
  return "frame";
}

ReportKind parse_report_kind(std::string_view s) {
  if (s == "frame") return ReportKind::Frame;
  if (s == "case") return ReportKind::Case;
  if (s == "transition") return ReportKind::Transition;
  throw Error(ErrorCode::InvalidArgument, "unknown report kind '" + std::string(s) + "'");
}

json to_json(const Report& r) {
  json refs = json::array();
  for (const auto& c : r.context_refs)
    refs.push_back({{"cluster_id", c.cluster_id},
                    {"centroid", {{"case_id", c.centroid.case_id}, {"t_index", c.centroid.t_index}}},
                    {"distance", c.distance},
                    {"annotation_version", c.annotation_version}});
  json j = {{"kind", std::string(to_string(r.kind))},
            {"clustering_id", r.clustering_id},
            {"case_id", r.case_id},
            {"t_index", r.t_index ? json(*r.t_index) : json(nullptr)},
            {"text", r.text},
            {"context_refs", std::move(refs)},
            {"model_id", r.model_id},
            {"generated_at", r.generated_at},
            {"edited", r.edited},
            {"prompt_version", r.prompt_version},
            {"prompt_sha256", r.prompt_sha256}};
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  r.kind = parse_report_kind(j.at("kind").get<std::string>());
  r.clustering_id = j.at("clustering_id").get<std::string>();
  r.case_id = j.at("case_id").get<std::string>();
  if (!j.at("t_index").is_null()) r.t_index = j["t_index"].get<std::uint32_t>();
  r.text = j.at("text").get<std::string>();
  for (const auto& c : j.at("context_refs"))
    r.context_refs.push_back({c.at("cluster_id").get<int>(),
                              {c.at("centroid").at("case_id").get<std::string>(),
                               c.at("centroid").at("t_index").get<std::uint32_t>()},
                              c.at("distance").get<double>(),
                              c.at("annotation_version").get<std::uint32_t>()});
  r.model_id = j.value("model_id", std::string{});
  r.generated_at = j.value("generated_at", std::string{});
  r.edited = j.value("edited", false);
  r.prompt_version = j.value("prompt_version", std::string(kPromptVersion));
  r.prompt_sha256 = j.value("prompt_sha256", std::string{});
  return r;
}

ReportStore::ReportStore(std::optional<std::filesystem::path> path) : log_(std::move(path)) {
  for (const auto& j : log_.records()) {
    auto r = report_from_json(j);
    latest_[key_of(r.kind, r.clustering_id, r.case_id, r.t_index)] = std::move(r);
  }
}

ReportStore::Key ReportStore::key_of(ReportKind kind, const std::string& clustering_id,
                                     const std::string& case_id,
                                     std::optional<std::uint32_t> t_index) {
  return {static_cast<int>(kind), clustering_id, case_id, t_index ? std::int64_t(*t_index) : -1};
}

void ReportStore::save(const Report& report) {
  if (report.text.empty()) throw Error(ErrorCode::EmptyText, "report text is empty");
  std::lock_guard lock(mu_);
  log_.append(to_json(report));
  latest_[key_of(report.kind, report.clustering_id, report.case_id, report.t_index)] = report;
}

std::optional<Report> ReportStore::find(ReportKind kind, const std::string& clustering_id,
                                        const std::string& case_id,
                                        std::optional<std::uint32_t> t_index) const {
  std::lock_guard lock(mu_);
  auto it = latest_.find(key_of(kind, clustering_id, case_id, t_index));
  if (it == latest_.end()) return std::nullopt;
  return it->second;
}

Report ReportStore::edit(ReportKind kind, const std::string& clustering_id,
                         const std::string& case_id, std::optional<std::uint32_t> t_index,
                         const std::string& text) {
  auto current = find(kind, clustering_id, case_id, t_index);
  if (!current) throw Error(ErrorCode::NotFound, "no report to edit for " + case_id);
  current->text = text;
  current->edited = true;
  current->generated_at = utc_timestamp();
  save(*current);
  return *current;
}

std::vector<Transition> detect_transitions(const std::string& case_id, const ClusterModel& model) {
  std::vector<Transition> out;
  const std::pair<const FrameKey, int>* prev = nullptr;
  for (auto it = model.labels.lower_bound({case_id, 0});
       it != model.labels.end() && it->first.case_id == case_id; ++it) {
    if (prev && prev->second != it->second)
      out.push_back({it->first.t_index, prev->second, it->second,
                     prev->second == kNoiseLabel || it->second == kNoiseLabel});
    prev = &*it;
  }
  return out;
}

std::vector<std::uint32_t> subsample_frames(std::uint32_t n_frames, std::size_t max_images) {
  std::vector<std::uint32_t> out;
  if (n_frames == 0) return out;
  if (n_frames <= max_images || max_images < 2) {
    const auto n = max_images < 2 ? std::min<std::size_t>(n_frames, max_images) : n_frames;
    for (std::uint32_t t = 0; t < n; ++t) out.push_back(t);
    return out;
  }
  const std::uint64_t span = n_frames - 1;
  const std::uint64_t steps = max_images - 1;
  for (std::uint64_t i = 0; i < max_images; ++i)
    out.push_back(static_cast<std::uint32_t>((i * span + steps / 2) / steps));
  return out;
}

std::string image_data_url(const Dataset& dataset, const std::string& channel,
                           const FrameKey& frame) {
  const auto& cd = dataset.channel_data(frame.case_id, channel);
  if (frame.t_index >= cd.frames.size())
    throw Error(ErrorCode::UnknownCase, "no frame " + frame_label(frame));
  const auto path = dataset.root() / cd.frames[frame.t_index].image_path;
  return "data:" + mime_for(path) + ";base64," + base64_encode(read_file_bytes(path));
}

ReportGenerator::ReportGenerator(const Dataset& dataset, const ProjectionResult& projection,
                                 const ClusterModel& model, const AnnotationStore& annotations,
                                 ReportStore& reports, VlmBackend& vlm)
    : dataset_(dataset),
      projection_(projection),
      model_(model),
      annotations_(annotations),
      reports_(reports),
      vlm_(vlm) {}

Point2 ReportGenerator::coord_of(const FrameKey& frame) const {
  auto it = projection_.coords.find(frame);
  if (it == projection_.coords.end())
    throw Error(ErrorCode::UnknownCase, "frame " + frame_label(frame) + " is not in projection " +
                                            projection_.id);
  return it->second;
}

VlmRequest ReportGenerator::frame_request(const std::vector<FrameKey>& targets,
                                          const std::vector<ContextEntry>& context) const {
  const auto& channel = projection_.spec.channel;
  VlmRequest req;
  json content = json::array();
  for (std::size_t i = 0; i < context.size(); ++i) {
    const auto& c = context[i];
    content.push_back(image_part(image_data_url(dataset_, channel, c.centroid)));
    content.push_back(text_part("Expert annotation " + std::to_string(i + 1) + " (latent distance " +
                                format_distance(c.distance) + "): " + c.annotation));
    req.context_texts.push_back(c.annotation);
  }
  for (const auto& t : targets) content.push_back(image_part(image_data_url(dataset_, channel, t)));
  content.push_back(text_part(std::string(kFrameInstruction)));
  req.body = chat_body(std::move(content));
  for (const auto& t : targets) {
    if (!req.target_label.empty()) req.target_label += " -> ";
    req.target_label += frame_label(t);
  }
  return req;
}

VlmRequest ReportGenerator::case_request(const std::string& case_id,
                                         const std::vector<std::string>& frame_texts) const {
  const auto& channel = projection_.spec.channel;
  const auto& cd = dataset_.channel_data(case_id, channel);
  VlmRequest req;
  json content = json::array();
  for (auto t : subsample_frames(static_cast<std::uint32_t>(cd.frames.size()))) {
    content.push_back(text_part("Frame t=" + std::to_string(t)));
    content.push_back(image_part(image_data_url(dataset_, channel, {case_id, t})));
  }
  for (std::size_t t = 0; t < frame_texts.size(); ++t)
    content.push_back(text_part("Frame " + std::to_string(t) + " description: " + frame_texts[t]));
  content.push_back(text_part(std::string(kCaseInstruction)));
  req.body = chat_body(std::move(content));
  req.target_label = case_id + " (case summary)";
  req.context_texts = frame_texts;
  return req;
}

VlmRequest ReportGenerator::rebuild_request(const Report& report) const {
  std::vector<ContextEntry> context;
  for (const auto& ref : report.context_refs) {
    auto ann = annotations_.version({report.clustering_id, ref.cluster_id}, ref.annotation_version);
    if (!ann)
      throw Error(ErrorCode::NotFound, "annotation version " + std::to_string(ref.annotation_version) +
                                           " of cluster " + std::to_string(ref.cluster_id) +
                                           " is missing");
    ContextEntry e;
    e.cluster_id = ref.cluster_id;
    e.centroid = ref.centroid;
    e.distance = ref.distance;
    e.annotation = ann->text;
    e.annotation_version = ref.annotation_version;
    context.push_back(std::move(e));
  }
  if (!report.t_index) throw Error(ErrorCode::InvalidArgument, "case reports carry no context refs");
  std::vector<FrameKey> targets;
  if (report.kind == ReportKind::Transition) targets.push_back({report.case_id, *report.t_index - 1});
  targets.push_back({report.case_id, *report.t_index});
  return frame_request(targets, context);
}

Report ReportGenerator::run(ReportKind kind, const std::string& case_id,
                            std::optional<std::uint32_t> t_index,
                            const std::vector<ContextEntry>& context, const VlmRequest& request) {
  Report r;
  r.kind = kind;
  r.clustering_id = model_.id;
  r.case_id = case_id;
  r.t_index = t_index;
  for (const auto& c : context)
    r.context_refs.push_back({c.cluster_id, c.centroid, c.distance, c.annotation_version});
  r.prompt_sha256 = sha256_hex(request.body.dump());
  r.text = vlm_.complete(request);
  if (r.text.empty()) throw Error(ErrorCode::VlmMalformedResponse, "VLM returned empty text");
  r.model_id = vlm_.model_id();
  r.generated_at = utc_timestamp();
  reports_.save(r);
  return r;
}

Report ReportGenerator::generate_frame_report(const FrameKey& frame, std::size_t k) {
  const auto context = nearest_annotated_centroids(model_, annotations_, coord_of(frame), k);
  return run(ReportKind::Frame, frame.case_id, frame.t_index, context, frame_request({frame}, context));
}

Report ReportGenerator::generate_transition_report(const std::string& case_id,
                                                   const Transition& transition, std::size_t k) {
  if (transition.t_index == 0)
    throw Error(ErrorCode::InvalidArgument, "a transition needs a preceding frame");
  const FrameKey before{case_id, transition.t_index - 1};
  const FrameKey after{case_id, transition.t_index};
  const auto a = coord_of(before);
  const auto b = coord_of(after);
  const Point2 mid{(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
  const auto context = nearest_annotated_centroids(model_, annotations_, mid, k);
  return run(ReportKind::Transition, case_id, transition.t_index, context,
             frame_request({before, after}, context));
}

Report ReportGenerator::generate_case_summary(const std::string& case_id, std::size_t k) {
  const auto n = static_cast<std::uint32_t>(
      dataset_.channel_data(case_id, projection_.spec.channel).frames.size());
  std::vector<std::string> texts(n);
  std::vector<std::uint32_t> missing;
  for (std::uint32_t t = 0; t < n; ++t) {
    if (auto r = reports_.find(ReportKind::Frame, model_.id, case_id, t))
      texts[t] = r->text;
    else
      missing.push_back(t);
  }

  if (!missing.empty()) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
      for (auto i = next++; i < missing.size(); i = next++) {
        try {
          texts[missing[i]] = generate_frame_report({case_id, missing[i]}, k).text;
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < 2; ++w) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
  }
  return run(ReportKind::Case, case_id, std::nullopt, {}, case_request(case_id, texts));
}

}  // namespace tfv
