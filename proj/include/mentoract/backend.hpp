#pragma once

// Language-model abstraction: a scripted replay backend for deterministic
// runs and an OpenAI-compatible wire-protocol client for live runs.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace mentoract::backend {

using json = nlohmann::json;

class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

class ReplayUnderrun : public BackendError {
 public:
  ReplayUnderrun(const std::string& task, int index)
      : BackendError("fixture exhausted for task '" + task + "' at call index " +
                     std::to_string(index)),
        task_id(task),
        call_index(index) {}
  std::string task_id;
  int call_index;
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct BackendConfig {
  std::string endpoint;       // live URL or fixture path
  std::string model_id;
  double temperature = 0.0;   // determinism-first default
  int max_tokens = 1024;
  std::string template_set = "default";
  std::string api_key_env = "MENTORACT_API_KEY";
};

// Why a completion is being requested. The scripted backend ignores this;
// recording backends use it to pick a response without sniffing prompts.
enum class CallPurpose {
  ActorStep,
  ActorPlan,
  ExperienceSummary,
  PoolMaintenance,
  LessonExtraction,
  PlanConstruction,
  BaselineReflection,
};

struct CallContext {
  std::string task_id;
  CallPurpose purpose = CallPurpose::ActorStep;
};

class Backend {
 public:
  virtual ~Backend() = default;

  std::string complete(const CallContext& ctx, const std::vector<ChatMessage>& messages) {
    if (messages.empty()) throw BackendError("complete: empty message list");
    for (const auto& m : messages) {
      if (m.content.empty())
        throw BackendError("complete: empty content in a '" + m.role + "' message");
      chars_ += static_cast<long long>(m.content.size());
    }
    ++calls_;
    return do_complete(ctx, messages);
  }

  long long calls() const { return calls_.load(); }
  long long prompt_chars() const { return chars_.load(); }

 protected:
  virtual std::string do_complete(const CallContext& ctx,
                                  const std::vector<ChatMessage>& messages) = 0;

 private:
  std::atomic<long long> calls_{0};
  std::atomic<long long> chars_{0};
};

struct FixtureEntry {
  std::string task;
  int index = 0;
  std::string response;
};

// Replay script keyed by (task id, call index), loaded from JSON Lines.
class Fixture {
 public:
  static Fixture load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BackendError("cannot open fixture file: " + path);
    Fixture f;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json doc;
      try {
        doc = json::parse(line);
        FixtureEntry e;
        e.task = doc.at("task").get<std::string>();
        e.index = doc.at("index").get<int>();
        e.response = doc.at("response").get<std::string>();
        f.add(std::move(e));
      } catch (const json::exception& ex) {
        throw BackendError("fixture " + path + " line " + std::to_string(line_no) +
                           ": " + ex.what());
      }
    }
    return f;
  }

  void add(FixtureEntry entry) {
    auto key = std::make_pair(entry.task, entry.index);
    if (!by_key_.emplace(key, entry.response).second)
      throw BackendError("fixture: duplicate key (task '" + entry.task + "', index " +
                         std::to_string(entry.index) + ")");
    entries_.push_back(std::move(entry));
  }

  const std::string* find(const std::string& task, int index) const {
    auto it = by_key_.find(std::make_pair(task, index));
    return it == by_key_.end() ? nullptr : &it->second;
  }

  const std::vector<FixtureEntry>& entries() const { return entries_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BackendError("cannot write fixture file: " + path);
    for (const auto& e : entries_) {
      json doc{{"task", e.task}, {"index", e.index}, {"response", e.response}};
      out << doc.dump() << "\n";
    }
  }

 private:
  std::vector<FixtureEntry> entries_;
  std::map<std::pair<std::string, int>, std::string> by_key_;
};

// Pure function of (fixture, per-task call sequence). Each key is consumed
// at most once because the per-task index only moves forward.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(Fixture fixture) : fixture_(std::move(fixture)) {}

  struct RecordedCall {
    std::string task_id;
    int index;
    CallPurpose purpose;
    std::vector<ChatMessage> messages;
  };

  const std::vector<RecordedCall>& call_log() const { return log_; }

 protected:
  std::string do_complete(const CallContext& ctx,
                          const std::vector<ChatMessage>& messages) override {
    std::lock_guard<std::mutex> lock(mutex_);
    int index = next_index_[ctx.task_id]++;
    log_.push_back({ctx.task_id, index, ctx.purpose, messages});
    const std::string* response = fixture_.find(ctx.task_id, index);
    if (!response) throw ReplayUnderrun(ctx.task_id, index);
    return *response;
  }

 private:
  Fixture fixture_;
  std::map<std::string, int> next_index_;
  std::vector<RecordedCall> log_;
  std::mutex mutex_;
};

namespace detail {

struct ParsedUrl {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path prefix, may be empty
};

inline ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw BackendError("endpoint URL must start with http:// or https://: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace detail

// POST {endpoint}/chat/completions. Transport failures and 429 responses are
// retried up to 3 times with exponential backoff before giving up.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(BackendConfig config, double backoff_base_seconds = 2.0)
      : config_(std::move(config)), backoff_base_(backoff_base_seconds) {
    if (config_.endpoint.empty()) throw BackendError("live backend: empty endpoint");
    if (config_.max_tokens <= 0) throw BackendError("live backend: max_tokens must be positive");
    if (config_.temperature < 0) throw BackendError("live backend: temperature must be >= 0");
  }

 protected:
  std::string do_complete(const CallContext&,
                          const std::vector<ChatMessage>& messages) override {
    json body;
    body["model"] = config_.model_id;
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    auto msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = std::move(msgs);

    auto url = detail::split_url(config_.endpoint);
    std::string path = url.prefix + "/chat/completions";
    std::string last_error;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
      if (attempt > 0) {
        auto delay = backoff_base_ * static_cast<double>(1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      httplib::Client client(url.base);
      client.set_read_timeout(120, 0);
      httplib::Headers headers;
      if (const char* key = std::getenv(config_.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
      auto res = client.Post(path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429) {
        last_error = "HTTP 429";
        continue;
      }
      if (res->status != 200)
        throw BackendError("backend HTTP " + std::to_string(res->status) + ": " +
                           res->body);
      try {
        json doc = json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw BackendError(std::string("malformed completion response: ") + e.what());
      }
    }
    throw BackendError("backend unreachable after " + std::to_string(kMaxRetries + 1) +
                       " attempts: " + last_error);
  }

 private:
  static constexpr int kMaxRetries = 3;
  BackendConfig config_;
  double backoff_base_;
};

}  // namespace mentoract::backend
