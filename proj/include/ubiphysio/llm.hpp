#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ubiphysio/errors.hpp"

namespace ubiphysio {

struct LlmConfig {
  std::string base_url;  // e.g. "https://api.example.com/v1"; requests go to <base>/chat/completions
  std::string model = "gpt-4";
  std::string api_key_env = "UBIPHYSIO_API_KEY";
  double timeout_s = 30.0;
  int max_in_flight = 4;
  bool mock = false;
};

class LlmError : public Error {
 public:
  enum class Kind { Network, Timeout, Credential, HttpStatus, BadResponse };
  LlmError(Kind kind, const std::string& what, int status = 0) : Error(what), kind_(kind), status_(status) {}
  Kind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

const char* to_string(LlmError::Kind kind);

// Deterministic canned reply keyed on a 64-bit FNV-1a digest of the prompt.
std::string mock_completion(const std::string& prompt);
std::uint64_t fnv1a64(const std::string& data);

class LlmClient {
 public:
  explicit LlmClient(LlmConfig cfg);

  // Returns the first choice's message content. Throws LlmError.
  std::string generate(const std::string& prompt) const;

  struct BatchItem {
    std::string text;
    std::optional<LlmError> error;
  };
  // Runs the prompts concurrently with at most max_in_flight requests open.
  std::vector<BatchItem> generate_batch(const std::vector<std::string>& prompts) const;

  const LlmConfig& config() const { return cfg_; }

 private:
  LlmConfig cfg_;
};

}  // namespace ubiphysio
