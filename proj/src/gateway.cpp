#include "pweaver/gateway.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

#include "pweaver/digest.hpp"

namespace pweaver::llm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view role_name(Role role) { return role == Role::user ? "user" : "assistant"; }

std::string_view finish_reason_name(FinishReason reason) {
  switch (reason) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

static FinishReason finish_reason_from_name(std::string_view name) {
  if (name == "stop") return FinishReason::stop;
  if (name == "length") return FinishReason::length;
  return FinishReason::error;
}

std::optional<std::string> validate(const ChatRequest& req) {
  if (req.model.empty()) return "model must be non-empty";
  if (req.turns.empty()) return "turns must be non-empty";
  if (req.turns.back().role != Role::user) return "last turn must have role user";
  if (req.temperature < 0.0 || req.temperature > 2.0) return "temperature must be within [0, 2]";
  if (req.max_tokens <= 0) return "max_tokens must be positive";
  return std::nullopt;
}

std::optional<std::string> validate(const BackendConfig& config) {
  if (config.kind == BackendKind::live) {
    if (config.base_url.empty()) return "live backend requires base_url";
    if (config.api_key_env.empty()) return "live backend requires api_key_env";
  } else if (config.script.default_response.empty()) {
    return "mock backend requires a default response";
  }
  if (config.max_in_flight < 1) return "max_in_flight must be >= 1";
  if (config.retry.max_attempts < 1) return "retry.max_attempts must be >= 1";
  return std::nullopt;
}

json MockScript::to_json() const {
  json rules_json = json::array();
  for (const auto& rule : rules) {
    json r;
    r[rule.kind == MockRule::Kind::substring ? "substring" : "regex"] = rule.pattern;
    r["response"] = rule.response;
    rules_json.push_back(std::move(r));
  }
  return json{{"rules", std::move(rules_json)}, {"default", default_response}};
}

MockScript MockScript::from_json(const json& j) {
  MockScript script;
  if (!j.contains("default")) {
    throw std::runtime_error("mock script requires a \"default\" response");
  }
  script.default_response = j.at("default").get<std::string>();
  for (const auto& r : j.value("rules", json::array())) {
    MockRule rule;
    if (r.contains("substring")) {
      rule.kind = MockRule::Kind::substring;
      rule.pattern = r.at("substring").get<std::string>();
    } else if (r.contains("regex")) {
      rule.kind = MockRule::Kind::regex;
      rule.pattern = r.at("regex").get<std::string>();
    } else {
      throw std::runtime_error("mock rule needs a \"substring\" or \"regex\" matcher");
    }
    rule.response = r.at("response").get<std::string>();
    script.rules.push_back(std::move(rule));
  }
  return script;
}

MockScript MockScript::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock script: " + path.string());
  json j;
  in >> j;
  return from_json(j);
}

json BackendConfig::to_json() const {
  json j{{"kind", kind == BackendKind::live ? "live" : "mock"},
         {"base_url", base_url},
         {"api_key_env", api_key_env},
         {"model", model},
         {"max_in_flight", max_in_flight},
         {"retry",
          {{"max_attempts", retry.max_attempts},
           {"base_backoff_ms", static_cast<std::int64_t>(retry.base_backoff.count())}}},
         {"cache_dir", cache_dir}};
  if (kind == BackendKind::mock) j["mock_script"] = script.to_json();
  return j;
}

BackendConfig BackendConfig::from_json(const json& j) {
  BackendConfig c;
  const std::string kind = j.value("kind", "mock");
  if (kind == "live") {
    c.kind = BackendKind::live;
  } else if (kind == "mock") {
    c.kind = BackendKind::mock;
  } else {
    throw std::runtime_error("backend kind must be \"live\" or \"mock\", got: " + kind);
  }
  c.base_url = j.value("base_url", "");
  c.api_key_env = j.value("api_key_env", "PF_API_KEY");
  c.model = j.value("model", c.kind == BackendKind::mock ? "mock-model" : "");
  c.max_in_flight = j.value("max_in_flight", 4);
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    c.retry.max_attempts = r.value("max_attempts", 4);
    c.retry.base_backoff = std::chrono::milliseconds(r.value("base_backoff_ms", 250));
  }
  c.cache_dir = j.value("cache_dir", "");
  if (j.contains("mock_script")) {
    const auto& m = j.at("mock_script");
    c.script = m.is_string() ? MockScript::load_file(m.get<std::string>()) : MockScript::from_json(m);
  }
  return c;
}

std::string render_request_text(const ChatRequest& req) {
  std::string out;
  out += "system: ";
  out += req.system;
  out += '\n';
  for (const auto& turn : req.turns) {
    out += role_name(turn.role);
    out += ": ";
    out += turn.text;
    out += '\n';
  }
  return out;
}

json canonical_request(const ChatRequest& req, const std::string& backend_id) {
  // nlohmann::json objects are key-sorted, so field insertion order and any
  // serializer whitespace cannot leak into the digest.
  json turns = json::array();
  for (const auto& turn : req.turns) {
    turns.push_back(json::array({std::string(role_name(turn.role)), turn.text}));
  }
  json j{{"backend_id", backend_id}, {"model", req.model},       {"system", req.system},
         {"turns", std::move(turns)}, {"temperature", req.temperature}, {"max_tokens", req.max_tokens},
         {"seed", req.seed ? json(*req.seed) : json(nullptr)}};
  return j;
}

std::string cache_key(const ChatRequest& req, const std::string& backend_id) {
  return sha256_hex(canonical_request(req, backend_id).dump());
}

MockTransport::MockTransport(MockScript script) : script_(std::move(script)) {
  id_ = "mock:" + sha256_hex(script_.to_json().dump()).substr(0, 12);
}

std::string MockTransport::id() const { return id_; }

ChatResponse MockTransport::send(const ChatRequest& req) {
  const std::string rendered = render_request_text(req);
  for (const auto& rule : script_.rules) {
    if (rule.kind == MockRule::Kind::substring) {
      if (rendered.find(rule.pattern) != std::string::npos) {
        return ChatResponse{rule.response, FinishReason::stop, false};
      }
    } else {
      std::smatch match;
      if (std::regex_search(rendered, match, std::regex(rule.pattern))) {
        return ChatResponse{match.format(rule.response), FinishReason::stop, false};
      }
    }
  }
  return ChatResponse{script_.default_response, FinishReason::stop, false};
}

LiveTransport::LiveTransport(BackendConfig config) : config_(std::move(config)) {
  if (auto err = validate(config_)) throw GatewayError("invalid backend config: " + *err);
}

std::string LiveTransport::id() const { return "live:" + config_.base_url; }

ChatResponse LiveTransport::send(const ChatRequest& req) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw GatewayError("API key not found in environment variable " + config_.api_key_env);
  }

  json messages = json::array();
  if (!req.system.empty()) {
    messages.push_back({{"role", "system"}, {"content", req.system}});
  }
  for (const auto& turn : req.turns) {
    messages.push_back({{"role", std::string(role_name(turn.role))}, {"content", turn.text}});
  }
  json body{{"model", req.model},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
  if (req.seed) body["seed"] = *req.seed;

  std::string base = config_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();

  httplib::Client client(base);
  client.set_connection_timeout(30, 0);
  client.set_read_timeout(300, 0);
  httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

  auto result = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!result) {
    throw TransportError("transport failure: " + httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    throw HttpError(result->status,
                    "backend returned status " + std::to_string(result->status) + ": " + result->body);
  }

  json parsed;
  try {
    parsed = json::parse(result->body);
  } catch (const json::exception& e) {
    throw GatewayError(std::string("response body is not valid JSON: ") + e.what());
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() || parsed["choices"].empty() ||
      !parsed["choices"][0].contains("message") || !parsed["choices"][0]["message"].contains("content")) {
    throw GatewayError("response body lacks choices[0].message.content");
  }

  ChatResponse response;
  response.text = parsed["choices"][0]["message"]["content"].get<std::string>();
  response.finish_reason =
      finish_reason_from_name(parsed["choices"][0].value("finish_reason", "stop")) == FinishReason::length
          ? FinishReason::length
          : FinishReason::stop;
  return response;
}

void Gateway::Slots::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void Gateway::Slots::release() {
  {
    std::lock_guard lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

static std::shared_ptr<Transport> make_transport(const BackendConfig& config) {
  if (config.kind == BackendKind::mock) return std::make_shared<MockTransport>(config.script);
  return std::make_shared<LiveTransport>(config);
}

Gateway::Gateway(BackendConfig config) : Gateway(std::move(config), nullptr) {}

Gateway::Gateway(BackendConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (auto err = validate(config_)) throw GatewayError("invalid backend config: " + *err);
  if (!transport_) transport_ = make_transport(config_);
  cache_dir_ = config_.cache_dir;
  if (const char* env = std::getenv("PF_CACHE_DIR"); env != nullptr && *env != '\0') {
    cache_dir_ = env;
  }
  if (!cache_dir_.empty()) fs::create_directories(cache_dir_);
  slots_ = std::make_unique<Slots>(config_.max_in_flight);
}

std::optional<ChatResponse> Gateway::cache_lookup(const std::string& key) const {
  std::ifstream in(fs::path(cache_dir_) / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    json j;
    in >> j;
    if (j.at("key").get<std::string>() != key) return std::nullopt;
    ChatResponse response;
    response.text = j.at("text").get<std::string>();
    response.finish_reason = finish_reason_from_name(j.at("finish_reason").get<std::string>());
    response.cached = true;
    return response;
  } catch (const std::exception&) {
    return std::nullopt;  // corrupt cache entry counts as a miss
  }
}

void Gateway::cache_store(const std::string& key, const ChatResponse& response) const {
  const json j{{"key", key},
               {"text", response.text},
               {"finish_reason", std::string(finish_reason_name(response.finish_reason))}};
  const fs::path final_path = fs::path(cache_dir_) / (key + ".json");
  const fs::path tmp_path = fs::path(cache_dir_) / (key + ".tmp" + std::to_string(::getpid()));
  std::ofstream out(tmp_path);
  out << j.dump();
  out.close();
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) fs::remove(tmp_path, ec);
}

ChatResponse Gateway::send_with_retry(const ChatRequest& req) {
  auto backoff = config_.retry.base_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      ++calls_;
      return transport_->send(req);
    } catch (const GatewayError& e) {
      const auto* http = dynamic_cast<const HttpError*>(&e);
      const bool retryable =
          dynamic_cast<const TransportError*>(&e) != nullptr ||
          (http != nullptr && (http->status() == 429 || (http->status() >= 500 && http->status() < 600)));
      if (!retryable || attempt >= config_.retry.max_attempts) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

ChatResponse Gateway::complete(const ChatRequest& req) {
  if (auto err = validate(req)) throw GatewayError("invalid request: " + *err);

  std::string key;
  if (!cache_dir_.empty()) {
    key = cache_key(req, transport_->id());
    if (auto hit = cache_lookup(key)) return *hit;
  }

  slots_->acquire();
  ChatResponse response;
  try {
    response = send_with_retry(req);
  } catch (...) {
    slots_->release();
    throw;
  }
  slots_->release();

  if (!key.empty()) {
    cache_store(key, response);
    // First stored response defines the cached value from now on.
    if (auto stored = cache_lookup(key)) {
      stored->cached = false;
      return *stored;
    }
  }
  return response;
}

std::vector<ChatResponse> Gateway::complete_batch(const std::vector<ChatRequest>& reqs) {
  std::vector<ChatResponse> out(reqs.size());
  if (reqs.empty()) return out;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < reqs.size(); i = next.fetch_add(1)) {
      try {
        out[i] = complete(reqs[i]);
      } catch (const std::exception& e) {
        out[i] = ChatResponse{e.what(), FinishReason::error, false};
      }
    }
  };

  const std::size_t n_threads = std::min<std::size_t>(config_.max_in_flight, reqs.size());
  if (n_threads <= 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace pweaver::llm
