#pragma once

// Chat-completions transport plus deterministic record/replay. chat() never
// throws: every failure maps to a ChatOutcome variant. Recording wraps any
// client and appends each call to a transcript; replay serves a transcript
// back in order, verifying that each incoming request hashes to the recorded
// prompt hash.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <chrono>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ahrs/common.hpp"
#include "ahrs/transcript.hpp"

namespace ahrs {

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 256;
  double timeout_s = 30.0;
};

struct ChatOutcome {
  enum class Kind { success, transport_error, http_error, timeout };
  Kind kind = Kind::transport_error;
  std::string text;  // content on success, diagnostic otherwise
  int status = 0;    // http_error only

  bool ok() const { return kind == Kind::success; }

  static ChatOutcome success(std::string content) {
    return {Kind::success, std::move(content), 0};
  }
  static ChatOutcome transport(std::string what) {
    return {Kind::transport_error, std::move(what), 0};
  }
  static ChatOutcome http(int status, std::string body_excerpt) {
    return {Kind::http_error, std::move(body_excerpt), status};
  }
  static ChatOutcome timed_out() {
    return {Kind::timeout, "request timed out", 0};
  }

  std::string kind_string() const {
    switch (kind) {
      case Kind::success: return "success";
      case Kind::transport_error: return "transport_error";
      case Kind::http_error: return strprintf("http_error:%d", status);
      case Kind::timeout: return "timeout";
    }
    return "transport_error";
  }
};

// Canonical request serialization; hashed for transcript records.
// nlohmann::json orders object keys, so this is byte-stable.
inline std::string request_bytes(const ChatRequest& req) {
  return nlohmann::json{{"model", req.model},
                        {"system", req.system},
                        {"user", req.user},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_tokens}}
      .dump();
}

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatOutcome chat(const ChatRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// HTTP transport
// ---------------------------------------------------------------------------

struct EndpointConfig {
  std::string base_url = "https://api.openai.com";
  std::string api_key;
  std::string model = "gpt-4o";
  std::string chat_path = "/v1/chat/completions";
  int max_retries = 2;                          // on transport errors
  std::vector<double> backoff_s = {1.0, 2.0};   // before retry 1, 2

  static EndpointConfig from_env() {
    EndpointConfig cfg;
    if (const char* v = std::getenv("LLM_BASE_URL")) cfg.base_url = v;
    if (const char* v = std::getenv("LLM_API_KEY")) cfg.api_key = v;
    if (const char* v = std::getenv("LLM_MODEL")) cfg.model = v;
    return cfg;
  }
};

class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig config) : config_(std::move(config)) {}

  ChatOutcome chat(const ChatRequest& request) override {
    ChatOutcome outcome = ChatOutcome::transport("not attempted");
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        double delay = attempt - 1 < static_cast<int>(config_.backoff_s.size())
                           ? config_.backoff_s[attempt - 1]
                           : config_.backoff_s.empty()
                                 ? 0.0
                                 : config_.backoff_s.back();
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      outcome = attempt_once(request);
      if (outcome.ok()) return outcome;
      bool retryable = outcome.kind == ChatOutcome::Kind::transport_error ||
                       outcome.kind == ChatOutcome::Kind::timeout ||
                       (outcome.kind == ChatOutcome::Kind::http_error &&
                        (outcome.status == 429 || outcome.status >= 500));
      if (!retryable) return outcome;
    }
    return outcome;
  }

 private:
  ChatOutcome attempt_once(const ChatRequest& request) {
    httplib::Client client(config_.base_url);
    auto timeout = std::chrono::duration<double>(request.timeout_s);
    client.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_write_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

    std::string model = request.model.empty() ? config_.model : request.model;
    nlohmann::json body = {
        {"model", model},
        {"messages",
         {{{"role", "system"}, {"content", request.system}},
          {{"role", "user"}, {"content", request.user}}}},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto res = client.Post(config_.chat_path, headers, body.dump(),
                           "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout)
        return ChatOutcome::timed_out();
      return ChatOutcome::transport(httplib::to_string(err));
    }
    if (res->status != 200)
      return ChatOutcome::http(res->status, res->body.substr(0, 512));

    nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") ||
        parsed["choices"].empty())
      return ChatOutcome::transport("malformed chat-completions body");
    const auto& msg = parsed["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content"))
      return ChatOutcome::transport("missing message content");
    return ChatOutcome::success(msg["message"]["content"].get<std::string>());
  }

  EndpointConfig config_;
};

// ---------------------------------------------------------------------------
// Offline clients
// ---------------------------------------------------------------------------

// Returns canned responses in order, cycling. Useful for offline smoke runs
// and for producing transcripts without network access.
class ScriptedChatClient : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> responses)
      : responses_(std::move(responses)) {
    require(!responses_.empty(), Errc::invalid_value,
            "scripted client needs at least one response");
  }

  ChatOutcome chat(const ChatRequest&) override {
    const std::string& r = responses_[cursor_ % responses_.size()];
    ++cursor_;
    return ChatOutcome::success(r);
  }

  size_t calls() const { return cursor_; }

 private:
  std::vector<std::string> responses_;
  size_t cursor_ = 0;
};

// Wraps a client and appends every call to a transcript. A call is staged on
// chat() and written on commit(); callers that know the parse outcome commit
// with annotations, and anything left staged is flushed with defaults so
// every call yields exactly one record, in order.
class RecordingClient : public ChatClient {
 public:
  RecordingClient(ChatClient& inner, const std::string& transcript_path)
      : inner_(inner), writer_(transcript_path) {}

  ~RecordingClient() { flush(); }

  ChatOutcome chat(const ChatRequest& request) override {
    flush();
    ChatOutcome outcome = inner_.chat(request);
    TranscriptRecord rec;
    rec.prompt = request_bytes(request);
    rec.prompt_hash = sha256_hex(rec.prompt);
    rec.response = outcome.text;
    rec.kind = outcome.kind_string();
    rec.failed = !outcome.ok();
    rec.timestamp = utc_timestamp();
    pending_ = std::move(rec);
    return outcome;
  }

  // Annotate and write the staged record.
  void commit(long tick, long epoch, const std::string& parsed, bool failed) {
    require(pending_.has_value(), Errc::io_error, "no staged record");
    pending_->tick = tick;
    pending_->epoch = epoch;
    pending_->parsed = parsed;
    pending_->failed = pending_->failed || failed;
    writer_.append(*pending_);
    pending_.reset();
  }

  void flush() {
    if (pending_.has_value()) {
      writer_.append(*pending_);
      pending_.reset();
    }
  }

 private:
  ChatClient& inner_;
  TranscriptWriter writer_;
  std::optional<TranscriptRecord> pending_;
};

// Serves recorded responses in order. Each incoming request must hash to the
// recorded prompt hash, and each stored prompt must still match its own hash;
// any mismatch raises ReplayPromptDrift.
class ReplayClient : public ChatClient {
 public:
  explicit ReplayClient(const std::string& transcript_path)
      : records_(read_transcript(transcript_path)) {}

  ChatOutcome chat(const ChatRequest& request) override {
    if (cursor_ >= records_.size())
      fail(Errc::replay_exhausted,
           strprintf("call %zu but transcript has %zu records", cursor_ + 1,
                     records_.size()));
    const TranscriptRecord& rec = records_[cursor_];
    require(sha256_hex(rec.prompt) == rec.prompt_hash,
            Errc::replay_prompt_drift,
            strprintf("stored record %zu fails its integrity hash", cursor_));
    std::string incoming = sha256_hex(request_bytes(request));
    require(incoming == rec.prompt_hash, Errc::replay_prompt_drift,
            strprintf("request %zu does not match recorded prompt", cursor_));
    ++cursor_;
    if (rec.kind == "success") return ChatOutcome::success(rec.response);
    if (rec.kind == "timeout") return ChatOutcome::timed_out();
    if (rec.kind.rfind("http_error:", 0) == 0)
      return ChatOutcome::http(std::atoi(rec.kind.c_str() + 11), rec.response);
    return ChatOutcome::transport(rec.response);
  }

  size_t remaining() const { return records_.size() - cursor_; }

 private:
  std::vector<TranscriptRecord> records_;
  size_t cursor_ = 0;
};

}  // namespace ahrs
