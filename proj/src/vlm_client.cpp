#include "tfv/vlm_client.hpp"

#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "tfv/digest.hpp"
#include "tfv/error.hpp"

namespace tfv {
namespace {

std::string env_or(const char* name, std::string fallback = {}) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::move(fallback);
}

}  // namespace

VlmConfig VlmConfig::from_env() {
  VlmConfig c;
  c.url = env_or("TFV_VLM_URL");
  c.model = env_or("TFV_VLM_MODEL", "gemma-3-27b-it");
  c.api_key = env_or("TFV_VLM_API_KEY");
  c.mock = env_or("TFV_VLM_MOCK") == "1" || c.url.empty();
  if (auto t = env_or("TFV_VLM_TIMEOUT_S"); !t.empty()) c.timeout = std::chrono::seconds(std::stoi(t));
  return c;
}

std::string MockVlmBackend::complete(const VlmRequest& request) {
  std::string material = request.target_label;
  for (const auto& t : request.context_texts) {
    material.push_back('\x1f');
    material += t;
  }
  std::ostringstream out;
  out << "[mock " << short_digest(material) << "] " << request.target_label << ": ";
  if (request.context_texts.empty()) {
    out << "no expert context.";
  } else {
    out << "closest to \"" << request.context_texts.front() << "\"";
    if (request.context_texts.size() > 1)
      out << " (+" << request.context_texts.size() - 1 << " more references)";
    out << '.';
  }
  return out.str();
}

std::string parse_chat_completion(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    std::string text;
    if (content.is_string()) {
      text = content.get<std::string>();
    } else if (content.is_array()) {
      for (const auto& part : content)
        if (part.value("type", "") == "text") text += part.value("text", "");
    }
    if (text.empty()) throw Error(ErrorCode::VlmMalformedResponse, "VLM returned empty content");
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::VlmMalformedResponse, std::string("bad VLM response: ") + e.what());
  }
}

HttpVlmBackend::HttpVlmBackend(VlmConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "TFV_VLM_URL must include a scheme: " + config_.url);
  const auto path_start = config_.url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : config_.url.substr(path_start);
}

std::string HttpVlmBackend::complete(const VlmRequest& request) {
  auto body = request.body;
  body["model"] = config_.model;
  const auto payload = body.dump();

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    auto res = client.Post(path_, headers, payload, "application/json");
    if (res && res->status == 200) return parse_chat_completion(res->body);
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status >= 400 && res->status < 500 && res->status != 429) break;
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorCode::VlmUnavailable, "VLM request to " + config_.url + " failed: " + last_error);
}

std::unique_ptr<VlmBackend> make_vlm_backend(const VlmConfig& config) {
  if (config.mock || config.url.empty()) return std::make_unique<MockVlmBackend>();
  return std::make_unique<HttpVlmBackend>(config);
}

}  // namespace tfv
