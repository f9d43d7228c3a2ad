#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ubiphysio/llm.hpp"

using namespace ubiphysio;
using nlohmann::json;

namespace {

// Local chat-completions stand-in. The route chosen by the first word of the
// prompt decides how it misbehaves.
class FakeEndpoint {
 public:
  FakeEndpoint() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++in_flight_;
      int seen = peak_.load();
      while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
      }
      {
        std::lock_guard lock(mu_);
        last_auth_ = req.get_header_value("Authorization");
      }
      auto body = json::parse(req.body);
      const std::string prompt = body["messages"][0]["content"];
      if (prompt.rfind("slow", 0) == 0) std::this_thread::sleep_for(std::chrono::milliseconds(1500));
      if (prompt.rfind("busy", 0) == 0) std::this_thread::sleep_for(std::chrono::milliseconds(60));

      if (prompt.rfind("deny", 0) == 0) {
        res.status = 401;
      } else if (prompt.rfind("boom", 0) == 0) {
        res.status = 500;
      } else if (prompt.rfind("junk", 0) == 0) {
        res.set_content("{not json", "application/json");
      } else {
        json reply = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "echo " + prompt}}}}})}};
        res.set_content(reply.dump(), "application/json");
      }
      --in_flight_;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int peak() const { return peak_.load(); }
  std::string last_auth() const {
    std::lock_guard lock(mu_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> in_flight_{0}, peak_{0};
  mutable std::mutex mu_;
  std::string last_auth_;
};

// A port that was bound but never listened on, so connecting is refused.
int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

LlmConfig config_for(const FakeEndpoint& ep) {
  LlmConfig c;
  c.base_url = ep.url();
  c.api_key_env = "UBIPHYSIO_TEST_KEY";
  c.timeout_s = 0.5;
  return c;
}

LlmError::Kind kind_of(const LlmClient& cli, const std::string& prompt) {
  try {
    cli.generate(prompt);
  } catch (const LlmError& e) {
    return e.kind();
  }
  FAIL("expected an LlmError for '" << prompt << "'");
  return LlmError::Kind::Network;
}

}  // namespace

TEST_SUITE("llm") {
  TEST_CASE("mock replies are deterministic and keyed on the prompt") {
    LlmConfig c;
    c.mock = true;
    LlmClient cli(c);
    CHECK(cli.generate("abc") == cli.generate("abc"));
    CHECK(cli.generate("abc") != cli.generate("abd"));
    CHECK(cli.generate("abc").rfind("[mock ", 0) == 0);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("successful completion sends the bearer key") {
    FakeEndpoint ep;
    setenv("UBIPHYSIO_TEST_KEY", "sk-test", 1);
    LlmClient cli(config_for(ep));
    CHECK(cli.generate("hello") == "echo hello");
    CHECK(ep.last_auth() == "Bearer sk-test");
  }

  TEST_CASE("failures map to distinct error kinds") {
    FakeEndpoint ep;
    setenv("UBIPHYSIO_TEST_KEY", "sk-test", 1);
    LlmClient cli(config_for(ep));
    CHECK(kind_of(cli, "deny me") == LlmError::Kind::Credential);
    CHECK(kind_of(cli, "boom") == LlmError::Kind::HttpStatus);
    CHECK(kind_of(cli, "junk") == LlmError::Kind::BadResponse);
    CHECK(kind_of(cli, "slow") == LlmError::Kind::Timeout);

    unsetenv("UBIPHYSIO_TEST_KEY");
    CHECK(kind_of(cli, "hello") == LlmError::Kind::Credential);
  }

  TEST_CASE("a closed port is a network error") {
    const int port = unused_port();
    setenv("UBIPHYSIO_TEST_KEY", "sk-test", 1);
    LlmConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    c.api_key_env = "UBIPHYSIO_TEST_KEY";
    c.timeout_s = 2.0;
    CHECK(kind_of(LlmClient(c), "hello") == LlmError::Kind::Network);
  }

  TEST_CASE("batch keeps order, reports per-item errors and caps concurrency") {
    FakeEndpoint ep;
    setenv("UBIPHYSIO_TEST_KEY", "sk-test", 1);
    auto cfg = config_for(ep);
    cfg.max_in_flight = 3;
    LlmClient cli(cfg);
    std::vector<std::string> prompts;
    for (int i = 0; i < 9; ++i) prompts.push_back("busy " + std::to_string(i));
    prompts.push_back("boom");
    auto out = cli.generate_batch(prompts);
    REQUIRE(out.size() == 10);
    for (int i = 0; i < 9; ++i) {
      CHECK_FALSE(out[i].error.has_value());
      CHECK(out[i].text == "echo busy " + std::to_string(i));
    }
    REQUIRE(out[9].error.has_value());
    CHECK(out[9].error->kind() == LlmError::Kind::HttpStatus);
    CHECK(ep.peak() <= 3);
    CHECK(ep.peak() >= 2);
  }

  TEST_CASE("invalid client settings are rejected") {
    LlmConfig c;
    c.timeout_s = 0;
    CHECK_THROWS_AS(LlmClient{c}, ValidationError);
    c.timeout_s = 1;
    c.max_in_flight = 0;
    CHECK_THROWS_AS(LlmClient{c}, ValidationError);
  }
}
