#include "tfv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tfv/error.hpp"

namespace tfv {
namespace {

using nlohmann::json;

void check_interval(const Interval& iv, const char* name) {
  if (iv.min && iv.max && *iv.min > *iv.max)
    throw Error(ErrorCode::InvalidRange, std::string(name) + " range has min > max");
}

void validate_params(const CaseRecord& rec) {
  for (double v : {rec.params.p_static_mpa, rec.params.t_static_k, rec.params.h2o_pct}) {
    if (!std::isfinite(v) || v <= 0.0)
      throw Error(ErrorCode::MalformedManifest,
                  "case " + rec.case_id + " has a non-positive or non-finite parameter");
  }
}

void validate_channel(const std::string& case_id, const std::string& channel,
                      const ChannelData& cd) {
  for (std::size_t i = 0; i < cd.frames.size(); ++i) {
    const auto& f = cd.frames[i];
    if (f.t_index != i)
      throw Error(ErrorCode::MalformedManifest,
                  "case " + case_id + "/" + channel + ": t_index values must be 0..n-1 contiguous");
    if (i > 0 && !(f.time_ms > cd.frames[i - 1].time_ms))
      throw Error(ErrorCode::MalformedManifest,
                  "case " + case_id + "/" + channel + ": time_ms must be strictly increasing");
  }
  if (cd.embedding.n_frames != cd.frames.size())
    throw Error(ErrorCode::ShapeMismatch,
                "case " + case_id + "/" + channel + ": embedding has " +
                    std::to_string(cd.embedding.n_frames) + " rows for " +
                    std::to_string(cd.frames.size()) + " frames");
  if (cd.embedding.values.size() !=
      static_cast<std::size_t>(cd.embedding.n_frames) * cd.embedding.dim)
    throw Error(ErrorCode::ShapeMismatch, "case " + case_id + "/" + channel + ": bad value count");
  for (float v : cd.embedding.values)
    if (!std::isfinite(v))
      throw Error(ErrorCode::NonFiniteEmbedding,
                  "case " + case_id + "/" + channel + ": embedding contains a non-finite value");
}

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::MalformedManifest, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedManifest, where + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

std::size_t CaseRecord::frame_count(const std::string& channel) const {
  auto it = channels.find(channel);
  return it == channels.end() ? 0 : it->second.frames.size();
}

Dataset::Dataset(std::string name, std::vector<std::string> channels,
                 std::vector<CaseRecord> cases, std::filesystem::path root,
                 std::string embedding_provenance)
    : name_(std::move(name)),
      channels_(std::move(channels)),
      root_(std::move(root)),
      provenance_(std::move(embedding_provenance)) {
  std::map<std::string, std::uint32_t> dims;
  for (auto& rec : cases) {
    validate_params(rec);
    for (const auto& [ch, cd] : rec.channels) {
      if (std::find(channels_.begin(), channels_.end(), ch) == channels_.end())
        throw Error(ErrorCode::MalformedManifest,
                    "case " + rec.case_id + " uses undeclared channel " + ch);
      validate_channel(rec.case_id, ch, cd);
      auto [it, inserted] = dims.emplace(ch, cd.embedding.dim);
      if (!inserted && it->second != cd.embedding.dim)
        throw Error(ErrorCode::ShapeMismatch, "channel " + ch + " has inconsistent embedding dim");
    }
    auto id = rec.case_id;
    if (!cases_.emplace(id, std::move(rec)).second)
      throw Error(ErrorCode::DuplicateCase, "duplicate case_id " + id);
  }
}

std::size_t Dataset::frame_count(const std::string& channel) const {
  std::size_t n = 0;
  for (const auto& [id, rec] : cases_) n += rec.frame_count(channel);
  return n;
}

std::size_t Dataset::total_frame_count() const {
  std::size_t n = 0;
  for (const auto& ch : channels_) n += frame_count(ch);
  return n;
}

std::vector<std::string> Dataset::case_ids() const {
  std::vector<std::string> ids;
  ids.reserve(cases_.size());
  for (const auto& [id, rec] : cases_) ids.push_back(id);
  return ids;
}

const CaseRecord& Dataset::at(const std::string& id) const {
  auto it = cases_.find(id);
  if (it == cases_.end()) throw Error(ErrorCode::UnknownCase, "unknown case " + id);
  return it->second;
}

const ChannelData& Dataset::channel_data(const std::string& case_id,
                                         const std::string& channel) const {
  const auto& rec = at(case_id);
  auto it = rec.channels.find(channel);
  if (it == rec.channels.end())
    throw Error(ErrorCode::UnknownChannel, "case " + case_id + " has no channel " + channel);
  return it->second;
}

std::vector<std::string> Dataset::filter(const ParamFilter& f) const {
  check_interval(f.p_mpa, "pressure");
  check_interval(f.t_k, "temperature");
  check_interval(f.h2o_pct, "h2o");
  std::vector<std::string> out;
  for (const auto& [id, rec] : cases_) {
    if (f.p_mpa.contains(rec.params.p_static_mpa) && f.t_k.contains(rec.params.t_static_k) &&
        f.h2o_pct.contains(rec.params.h2o_pct))
      out.push_back(id);
  }
  return out;
}

std::vector<std::string> filter_cases(const Dataset& dataset, const ParamFilter& f) {
  return dataset.filter(f);
}

DatasetHandle load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open manifest " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedManifest, std::string("manifest parse error: ") + e.what());
  }

  const auto root = manifest_path.parent_path();
  auto name = required<std::string>(doc, "dataset_name", "manifest");
  auto channels = required<std::vector<std::string>>(doc, "channels", "manifest");
  std::string provenance = doc.value("embedding_provenance", std::string{});
  if (!doc.contains("cases") || !doc["cases"].is_array())
    throw Error(ErrorCode::MalformedManifest, "manifest: 'cases' must be an array");

  std::vector<CaseRecord> records;
  for (const auto& jc : doc["cases"]) {
    CaseRecord rec;
    rec.case_id = required<std::string>(jc, "case_id", "case entry");
    const std::string where = "case " + rec.case_id;
    const auto& jp = jc.contains("params") ? jc["params"] : json();
    rec.params.p_static_mpa = required<double>(jp, "P_MPa", where);
    rec.params.t_static_k = required<double>(jp, "T_K", where);
    rec.params.h2o_pct = required<double>(jp, "H2O_pct", where);

    if (!jc.contains("channels") || !jc["channels"].is_object())
      throw Error(ErrorCode::MalformedManifest, where + ": 'channels' must be an object");
    for (const auto& [ch, jch] : jc["channels"].items()) {
      ChannelData cd;
      const auto emb_rel = required<std::string>(jch, "embedding_file", where + "/" + ch);
      const auto emb_path = root / emb_rel;
      if (!std::filesystem::exists(emb_path))
        throw Error(ErrorCode::MissingFile, "missing embedding file " + emb_path.string());
      cd.embedding = read_embedding_file(emb_path);
      cd.embedding.case_id = rec.case_id;
      cd.embedding.channel = ch;
      if (!jch.contains("frames") || !jch["frames"].is_array())
        throw Error(ErrorCode::MalformedManifest, where + "/" + ch + ": 'frames' must be an array");
      for (const auto& jf : jch["frames"]) {
        FrameRef f;
        f.case_id = rec.case_id;
        f.channel = ch;
        f.t_index = required<std::uint32_t>(jf, "t_index", where);
        f.time_ms = required<double>(jf, "time_ms", where);
        f.image_path = required<std::string>(jf, "image", where);
        cd.frames.push_back(std::move(f));
      }
      std::sort(cd.frames.begin(), cd.frames.end(),
                [](const FrameRef& a, const FrameRef& b) { return a.t_index < b.t_index; });
      rec.channels.emplace(ch, std::move(cd));
    }
    records.push_back(std::move(rec));
  }
  return std::make_shared<const Dataset>(std::move(name), std::move(channels), std::move(records),
                                         root, std::move(provenance));
}

}  // namespace tfv
