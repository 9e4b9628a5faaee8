#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "pweaver/chat.hpp"

namespace pweaver::llm {

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network-level failure (connection refused, timeout). Always retryable.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Non-success HTTP status. Retryable for 429 and 5xx.
class HttpError : public GatewayError {
 public:
  HttpError(int status, const std::string& message) : GatewayError(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// One backend exchange. Implementations throw GatewayError subclasses on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual ChatResponse send(const ChatRequest& req) = 0;
  virtual std::string id() const = 0;
};

class MockTransport : public Transport {
 public:
  explicit MockTransport(MockScript script);
  ChatResponse send(const ChatRequest& req) override;
  std::string id() const override;

 private:
  MockScript script_;
  std::string id_;
};

/// OpenAI-compatible chat-completions wire client.
class LiveTransport : public Transport {
 public:
  explicit LiveTransport(BackendConfig config);
  ChatResponse send(const ChatRequest& req) override;
  std::string id() const override;

 private:
  BackendConfig config_;
};

/// Flat text rendering of a request, used for mock rule matching.
std::string render_request_text(const ChatRequest& req);

/// Canonical JSON for hashing: stable field order, no insignificant whitespace.
nlohmann::json canonical_request(const ChatRequest& req, const std::string& backend_id);

/// SHA-256 hex digest of the canonical request serialization.
std::string cache_key(const ChatRequest& req, const std::string& backend_id);

/// Uniform access to a chat backend with response caching, bounded
/// concurrency, and retry with exponential backoff.
class Gateway {
 public:
  explicit Gateway(BackendConfig config);
  Gateway(BackendConfig config, std::shared_ptr<Transport> transport);

  /// Single completion. Throws GatewayError when the backend fails after retries.
  ChatResponse complete(const ChatRequest& req);

  /// Order-preserving batch; per-item failures become error responses,
  /// never exceptions. At most max_in_flight requests are outstanding.
  std::vector<ChatResponse> complete_batch(const std::vector<ChatRequest>& reqs);

  const BackendConfig& config() const { return config_; }
  std::string backend_id() const { return transport_->id(); }
  const std::string& cache_dir() const { return cache_dir_; }
  std::uint64_t calls_issued() const { return calls_.load(); }

 private:
  ChatResponse send_with_retry(const ChatRequest& req);
  std::optional<ChatResponse> cache_lookup(const std::string& key) const;
  void cache_store(const std::string& key, const ChatResponse& response) const;

  class Slots {
   public:
    explicit Slots(int count) : available_(count) {}
    void acquire();
    void release();

   private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
  };

  BackendConfig config_;
  std::shared_ptr<Transport> transport_;
  std::string cache_dir_;
  std::unique_ptr<Slots> slots_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace pweaver::llm
