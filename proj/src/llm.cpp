#include "ubiphysio/llm.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace ubiphysio {

using nlohmann::json;

const char* to_string(LlmError::Kind kind) {
  switch (kind) {
    case LlmError::Kind::Network: return "network";
    case LlmError::Kind::Timeout: return "timeout";
    case LlmError::Kind::Credential: return "credential";
    case LlmError::Kind::HttpStatus: return "http-status";
    case LlmError::Kind::BadResponse: return "bad-response";
  }
  return "unknown";
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string mock_completion(const std::string& prompt) {
  static constexpr const char* kOpeners[] = {
      "Nice effort, let's fine-tune that movement.",
      "Good start, keep your breathing steady.",
      "You're doing well, slow down a little.",
      "Great focus, now let's polish the form.",
  };
  static constexpr const char* kCues[] = {
      "Keep your back long and your core gently braced.",
      "Let your knees track over your toes and share the load evenly.",
      "Move through a comfortable range and stop before any pain.",
      "Keep your head level and your shoulders relaxed.",
  };
  const std::uint64_t h = fnv1a64(prompt);
  return fmt::format("[mock {:016x}] {} {}", h, kOpeners[h % 4], kCues[(h >> 8) % 4]);
}

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash
};

Endpoint split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw LlmError(LlmError::Kind::Network, "endpoint URL needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

}  // namespace

LlmClient::LlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.timeout_s <= 0.0) throw ValidationError("LLM timeout must be positive");
  if (cfg_.max_in_flight < 1) throw ValidationError("LLM max_in_flight must be >= 1");
}

std::string LlmClient::generate(const std::string& prompt) const {
  if (cfg_.mock) return mock_completion(prompt);
  if (cfg_.base_url.empty()) throw LlmError(LlmError::Kind::Network, "no endpoint URL configured");
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (!key || !*key) {
    throw LlmError(LlmError::Kind::Credential, "environment variable " + cfg_.api_key_env + " is not set");
  }

  const Endpoint ep = split_url(cfg_.base_url);
  httplib::Client cli(ep.origin);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  cli.set_bearer_token_auth(key);

  json body = {{"model", cfg_.model}, {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  spdlog::debug("LLM request: {} prompt bytes to {}", prompt.size(), cfg_.base_url);
  const auto t0 = std::chrono::steady_clock::now();
  auto res = cli.Post(ep.path + "/chat/completions", body.dump(), "application/json");
  if (!res) {
    auto err = res.error();
    // httplib reports an expired read timeout as a plain read error.
    const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && waited >= 0.95 * cfg_.timeout_s);
    auto kind = timed_out ? LlmError::Kind::Timeout : LlmError::Kind::Network;
    std::string msg = fmt::format("LLM request failed: {}", httplib::to_string(err));
    spdlog::error("{} ({})", msg, to_string(kind));
    throw LlmError(kind, msg);
  }
  if (res->status == 401 || res->status == 403) {
    spdlog::error("LLM endpoint rejected the credential (HTTP {})", res->status);
    throw LlmError(LlmError::Kind::Credential, fmt::format("credential rejected (HTTP {})", res->status), res->status);
  }
  if (res->status < 200 || res->status >= 300) {
    spdlog::error("LLM endpoint returned HTTP {}", res->status);
    throw LlmError(LlmError::Kind::HttpStatus, fmt::format("endpoint returned HTTP {}", res->status), res->status);
  }
  try {
    auto j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    spdlog::error("LLM response could not be parsed: {}", e.what());
    throw LlmError(LlmError::Kind::BadResponse, std::string("malformed completion response: ") + e.what(),
                   res->status);
  }
}

std::vector<LlmClient::BatchItem> LlmClient::generate_batch(const std::vector<std::string>& prompts) const {
  std::vector<BatchItem> out(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        out[i].text = generate(prompts[i]);
      } catch (const LlmError& e) {
        out[i].error = e;
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg_.max_in_flight), prompts.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace ubiphysio
