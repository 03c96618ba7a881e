// HTTP transport for chat_complete. Kept in its own translation unit so the
// cpp-httplib header is compiled once.
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "errors.hpp"
#include "generation.hpp"
#include "httplib.h"

namespace prag {
namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("invalid endpoint URL '" + url + "'");
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

// Bounds in-flight requests per endpoint.
class Limiter {
 public:
  explicit Limiter(int capacity) : free_(capacity) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int free_;
};

std::shared_ptr<Limiter> limiter_for(const std::string& endpoint, int capacity) {
  static std::mutex mu;
  static std::unordered_map<std::string, std::shared_ptr<Limiter>> limiters;
  std::lock_guard lock(mu);
  auto& slot = limiters[endpoint];
  if (!slot) slot = std::make_shared<Limiter>(capacity);
  return slot;
}

bool retryable(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string chat_complete(const GeneratorConfig& config, std::string_view user_content,
                          double temperature) {
  if (config.kind != GeneratorKind::kHttpLlm) {
    throw ConfigError("chat_complete requires an http_llm generator");
  }
  config.validate();
  const auto url = split_url(config.endpoint);
  const auto body = chat_request_body(config, user_content, temperature).dump();

  httplib::Headers headers;
  if (!config.auth_header.empty()) {
    const auto colon = config.auth_header.find(':');
    auto value = config.auth_header.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    headers.emplace(config.auth_header.substr(0, colon), value);
  }

  auto limiter = limiter_for(config.endpoint, config.max_concurrency);
  auto delay = std::chrono::milliseconds(config.initial_backoff_ms);
  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(delay.count()) * config.backoff_factor));
    }
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::milliseconds(config.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    limiter->acquire();
    auto res = client.Post(url.path, headers, body, "application/json");
    limiter->release();

    if (!res) {
      last_status = 0;
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return parse_chat_response(res->body);
    last_status = res->status;
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable(res->status)) break;
  }
  throw GenerationError(last_status, "chat completion to " + config.endpoint + " failed: " +
                                         last_error);
}

}  // namespace prag
