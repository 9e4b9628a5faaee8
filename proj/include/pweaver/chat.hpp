#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pweaver::llm {

enum class Role { user, assistant };

std::string_view role_name(Role role);

struct Turn {
  Role role = Role::user;
  std::string text;

  bool operator==(const Turn&) const = default;
};

enum class FinishReason { stop, length, error };

std::string_view finish_reason_name(FinishReason reason);

struct ChatRequest {
  std::string model;
  std::string system;
  std::vector<Turn> turns;
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<std::int64_t> seed;

  bool operator==(const ChatRequest&) const = default;
};

/// Returns a description of the first violated invariant, or nullopt when valid.
std::optional<std::string> validate(const ChatRequest& req);

struct ChatResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  bool cached = false;
};

/// Scripted responses for the mock backend. Rules are evaluated in order,
/// first match wins; regex rules may reference capture groups in the
/// response via $1..$9. A default response is mandatory.
struct MockRule {
  enum class Kind { substring, regex };
  Kind kind = Kind::substring;
  std::string pattern;
  std::string response;
};

struct MockScript {
  std::vector<MockRule> rules;
  std::string default_response;

  nlohmann::json to_json() const;
  static MockScript from_json(const nlohmann::json& j);
  static MockScript load_file(const std::filesystem::path& path);
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_backoff{250};
};

enum class BackendKind { live, mock };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string base_url;
  std::string api_key_env = "PF_API_KEY";
  std::string model = "mock-model";
  int max_in_flight = 4;
  RetryPolicy retry;
  std::string cache_dir;  // empty disables caching; PF_CACHE_DIR overrides
  MockScript script;      // consulted when kind == mock

  nlohmann::json to_json() const;
  static BackendConfig from_json(const nlohmann::json& j);
};

std::optional<std::string> validate(const BackendConfig& config);

}  // namespace pweaver::llm
