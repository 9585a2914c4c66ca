#include "affbench/remote.hpp"

#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "affbench/error.hpp"
#include "affbench/util.hpp"

namespace affbench::remote {

using nlohmann::json;
using nlohmann::ordered_json;

BackendConfig BackendConfig::from_json(const json& j) {
  BackendConfig c;
  c.endpoint = j.at("endpoint").get<std::string>();
  c.model = j.at("model").get<std::string>();
  if (j.contains("api_key_env")) c.api_key_env = j.at("api_key_env").get<std::string>();
  if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
  if (j.contains("max_tokens")) c.max_tokens = j.at("max_tokens").get<int>();
  if (j.contains("timeout_ms")) c.timeout_ms = j.at("timeout_ms").get<int>();
  if (j.contains("retry")) {
    c.retry.count = j.at("retry").value("count", c.retry.count);
    c.retry.backoff_ms = j.at("retry").value("backoff_ms", c.retry.backoff_ms);
  }
  if (j.contains("requests_per_second"))
    c.requests_per_second = j.at("requests_per_second").get<double>();
  if (j.contains("inline_base64_images"))
    c.inline_base64_images = j.at("inline_base64_images").get<bool>();
  if (c.temperature < 0) throw Error(ErrorKind::Config, "temperature must be >= 0");
  if (c.timeout_ms <= 0) throw Error(ErrorKind::Config, "timeout_ms must be > 0");
  return c;
}

BackendConfig BackendConfig::from_file(const std::string& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "bad backend config " + path + ": " + e.what());
  }
}

std::string base64_encode(std::string_view data) {
  static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 2 < data.size()) {
    std::uint32_t v = std::uint32_t(std::uint8_t(data[i])) << 16 |
                      std::uint32_t(std::uint8_t(data[i + 1])) << 8 |
                      std::uint32_t(std::uint8_t(data[i + 2]));
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back(table[v & 63]);
    i += 3;
  }
  if (i + 1 == data.size()) {
    std::uint32_t v = std::uint32_t(std::uint8_t(data[i])) << 16;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    std::uint32_t v = std::uint32_t(std::uint8_t(data[i])) << 16 |
                      std::uint32_t(std::uint8_t(data[i + 1])) << 8;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(table[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

namespace {

std::string mime_for(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : to_lower_ascii(path.substr(dot + 1));
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "webp") return "image/webp";
  if (ext == "gif") return "image/gif";
  return "image/png";
}

struct TokenBucket {
  double tokens = 1.0;
  std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();
};

std::mutex g_bucket_mutex;
std::map<std::string, TokenBucket> g_buckets;

}  // namespace

void rate_limit_acquire(const std::string& endpoint, double requests_per_second) {
  if (requests_per_second <= 0) return;
  for (;;) {
    double wait_s = 0;
    {
      std::lock_guard<std::mutex> lock(g_bucket_mutex);
      TokenBucket& b = g_buckets[endpoint];
      auto now = std::chrono::steady_clock::now();
      double elapsed = std::chrono::duration<double>(now - b.last).count();
      b.last = now;
      b.tokens = std::min(1.0, b.tokens + elapsed * requests_per_second);
      if (b.tokens >= 1.0) {
        b.tokens -= 1.0;
        return;
      }
      wait_s = (1.0 - b.tokens) / requests_per_second;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
  }
}

RemoteChatBackend::RemoteChatBackend(BackendConfig config) : config_(std::move(config)) {
  std::string url = config_.endpoint;
  if (url.rfind("https://", 0) == 0) {
    https_ = true;
    url = url.substr(8);
    port_ = 443;
  } else if (url.rfind("http://", 0) == 0) {
    url = url.substr(7);
  } else {
    throw Error(ErrorKind::Config, "endpoint must start with http:// or https://");
  }
  auto slash = url.find('/');
  std::string hostport = slash == std::string::npos ? url : url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
  auto colon = hostport.find(':');
  if (colon == std::string::npos) {
    host_ = hostport;
  } else {
    host_ = hostport.substr(0, colon);
    port_ = std::stoi(hostport.substr(colon + 1));
  }
  if (https_)
    throw Error(ErrorKind::Config,
                "https endpoints need a TLS-enabled build; point at an http proxy instead");
}

ordered_json RemoteChatBackend::build_request_body(const BackendConfig& config,
                                                   const chat::MessageSequence& messages) {
  ordered_json body;
  body["model"] = config.model;
  ordered_json msgs = ordered_json::array();
  for (const auto& m : messages) {
    ordered_json jm;
    jm["role"] = chat::role_name(m.role);
    if (m.image_refs.empty()) {
      jm["content"] = m.text;
    } else {
      ordered_json content = ordered_json::array();
      content.push_back(ordered_json{{"type", "text"}, {"text", m.text}});
      for (const auto& ref : m.image_refs) {
        std::string url;
        if (config.inline_base64_images) {
          url = "data:" + mime_for(ref) + ";base64," + base64_encode(read_file(ref));
        } else {
          url = "file://" + ref;
        }
        content.push_back(
            ordered_json{{"type", "image_url"}, {"image_url", ordered_json{{"url", url}}}});
      }
      jm["content"] = std::move(content);
    }
    msgs.push_back(std::move(jm));
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = config.temperature;
  if (config.max_tokens > 0) body["max_tokens"] = config.max_tokens;
  return body;
}

std::string RemoteChatBackend::complete(const chat::MessageSequence& messages) {
  const std::string body = build_request_body(config_, messages).dump();
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= config_.retry.count; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry.backoff_ms * attempt));
    rate_limit_acquire(config_.endpoint, config_.requests_per_second);

    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw Error(ErrorKind::Auth, "authentication rejected (" + std::to_string(res->status) +
                                       "): " + res->body);
    if (res->status >= 400) {
      const std::string lowered = to_lower_ascii(res->body);
      if (res->status == 413 || contains(lowered, "context_length") ||
          contains(lowered, "context length") || contains(lowered, "too many tokens"))
        throw Error(ErrorKind::OverLimit, "context-length rejection: " + res->body);
      last_error = "http " + std::to_string(res->status) + ": " + res->body;
      continue;
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
      last_error = "unexpected response body: " + res->body;
      continue;
    }
    const json& content = parsed["choices"][0]["message"]["content"];
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string out;
      for (const auto& part : content)
        if (part.contains("text")) out += part["text"].get<std::string>();
      return out;
    }
    last_error = "response content is neither string nor array";
  }
  throw Error(ErrorKind::AgentError,
              "backend failed after " + std::to_string(config_.retry.count + 1) +
                  " attempts: " + last_error);
}

}  // namespace affbench::remote
