#pragma once

#include <cstdint>
#include <string>

#include "affbench/chat.hpp"

namespace affbench::remote {

struct RetryPolicy {
  int count = 2;        // retries after the first attempt
  int backoff_ms = 200;
};

struct BackendConfig {
  std::string endpoint;       // e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model;
  std::string api_key_env;    // name of the env var holding the key; empty = none
  double temperature = 0.0;
  int max_tokens = 0;         // 0 = omit from the request
  int timeout_ms = 30000;
  RetryPolicy retry;
  double requests_per_second = 0.0;  // 0 = unlimited
  bool inline_base64_images = true;  // false = file:// URLs for local servers

  static BackendConfig from_json(const nlohmann::json& j);
  static BackendConfig from_file(const std::string& path);
};

/// OpenAI-compatible chat-completions client. Encodes the message sequence
/// into a content-array body (images inlined as base64 data URLs), issues one
/// POST per complete() call, and returns the assistant text verbatim.
///
/// Errors: Error(Auth) on 401/403, Error(OverLimit) on context-length
/// rejections, Error(Backend) after retry exhaustion.
class RemoteChatBackend : public chat::TextBackend {
 public:
  explicit RemoteChatBackend(BackendConfig config);
  std::string complete(const chat::MessageSequence& messages) override;

  /// Request body for a message sequence; exposed for tests.
  static nlohmann::ordered_json build_request_body(const BackendConfig& config,
                                                   const chat::MessageSequence& messages);

 private:
  BackendConfig config_;
  std::string host_;
  int port_ = 80;
  std::string path_;
  bool https_ = false;
};

/// Shared token bucket keyed by endpoint; the only cross-session mutable
/// structure, internally synchronized.
void rate_limit_acquire(const std::string& endpoint, double requests_per_second);

std::string base64_encode(std::string_view data);

}  // namespace affbench::remote
