#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tfv {

struct VlmConfig {
  std::string url;  // full chat-completions URL, e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string api_key;
  bool mock = false;
  std::chrono::seconds timeout{120};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  int max_in_flight = 2;

  /// Reads TFV_VLM_URL, TFV_VLM_MODEL, TFV_VLM_API_KEY, TFV_VLM_MOCK,
  /// TFV_VLM_TIMEOUT_S. Mock mode is also chosen when no URL is set.
  static VlmConfig from_env();
};

/// One chat request plus the inputs the mock backend derives its text from.
struct VlmRequest {
  nlohmann::json body;  // OpenAI-compatible chat-completions payload (without "model")
  std::string target_label;
  std::vector<std::string> context_texts;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual std::string complete(const VlmRequest& request) = 0;
  virtual std::string model_id() const = 0;
};

/// Deterministic digest-based text; no network.
class MockVlmBackend final : public VlmBackend {
 public:
  std::string complete(const VlmRequest& request) override;
  std::string model_id() const override { return "mock-vlm-v1"; }
};

/// OpenAI-compatible HTTP client with bounded concurrency and exponential
/// backoff. Throws VlmUnavailable once retries are exhausted and
/// VlmMalformedResponse when the reply lacks choices[0].message.content.
class HttpVlmBackend final : public VlmBackend {
 public:
  explicit HttpVlmBackend(VlmConfig config);
  std::string complete(const VlmRequest& request) override;
  std::string model_id() const override { return config_.model; }

 private:
  VlmConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::counting_semaphore<64> in_flight_;
};

std::unique_ptr<VlmBackend> make_vlm_backend(const VlmConfig& config);

/// Extracts choices[0].message.content from a chat-completions response body.
std::string parse_chat_completion(const std::string& body);

}  // namespace tfv
