#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;
Role role_from_string(std::string_view s);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Sampling {
    double temperature = 0.0;
    int max_tokens = 2048;
};

struct BackendConfig {
    std::string backend_id;
    /// `http://…`/`https://…`, `mock:<rules file or dir>`, or `replay:<transcript>`.
    std::string endpoint;
    std::string model_name;
    Sampling sampling;
    int rate_limit = 4;
    double request_timeout = 120.0;
    int max_attempts = 3;
    double retry_backoff = 0.5;
    /// Environment variable holding the bearer token; empty selects
    /// BIDHI_API_KEY_<BACKEND_ID>.
    std::string api_key_env;

    /// Throws ConfigError on the first violated invariant.
    void validate() const;
    std::string resolved_api_key_env() const;
};

/// Table-1 roster, as named configurations without endpoints.
std::span<const BackendConfig> backend_presets();
std::optional<BackendConfig> find_preset(std::string_view backend_id);

enum class Stage { Generation, TestGeneration, Repair };

std::string_view to_string(Stage stage) noexcept;
Stage stage_from_string(std::string_view s);

/// Identifies one model call within a suite: a task run can make calls of
/// different purpose at the same attempt index, hence `stage`.
struct CallKey {
    std::string task_id;
    std::string approach;
    Stage stage = Stage::Generation;
    int attempt = 0;

    /// `task/approach/stage/attempt`; what mock call_key patterns match.
    std::string str() const;

    friend auto operator<=>(const CallKey&, const CallKey&) = default;
};

struct CallRecord {
    CallKey key;
    std::vector<ChatMessage> request;
    std::string response;
    double latency = 0.0;
};

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);
void to_json(nlohmann::json& j, const CallKey& k);
void from_json(const nlohmann::json& j, CallKey& k);
void to_json(nlohmann::json& j, const CallRecord& r);
void from_json(const nlohmann::json& j, CallRecord& r);

/// Uniform chat-completion interface. Implementations must be safe for
/// concurrent calls.
class ChatBackend {
public:
    explicit ChatBackend(BackendConfig config) : config_(std::move(config)) {}
    virtual ~ChatBackend() = default;

    ChatBackend(const ChatBackend&) = delete;
    ChatBackend& operator=(const ChatBackend&) = delete;

    /// Checks that `messages` is non-empty and ends with a user turn, then
    /// dispatches to the implementation.
    std::string complete(std::span<const ChatMessage> messages, const CallKey& key);

    const BackendConfig& config() const noexcept { return config_; }

private:
    virtual std::string do_complete(std::span<const ChatMessage> messages, const CallKey& key) = 0;

    BackendConfig config_;
};

struct MockRule {
    /// Substring of the last user message; empty matches anything.
    std::string contains;
    /// Glob over CallKey::str(); unset matches any key.
    std::optional<std::string> call_key;
    std::string response;
};

/// Scripted backend: first rule (in declaration order) whose conditions
/// hold wins. Stateless, so results do not depend on call order.
class MockBackend final : public ChatBackend {
public:
    MockBackend(BackendConfig config, std::vector<MockRule> rules);

    const std::vector<MockRule>& rules() const noexcept { return rules_; }

private:
    std::string do_complete(std::span<const ChatMessage> messages, const CallKey& key) override;

    std::vector<MockRule> rules_;
};

/// Reads `{"rules": [{"contains", "call_key", "response"}...]}`. A directory
/// path resolves to `<dir>/rules.json`.
std::vector<MockRule> load_mock_rules(const std::filesystem::path& path);

/// Serves recorded responses by call key; a key that was never recorded is
/// a ReplayMiss, never a live call.
class ReplayBackend final : public ChatBackend {
public:
    ReplayBackend(BackendConfig config, std::span<const CallRecord> records);

    std::size_t size() const noexcept { return responses_.size(); }

private:
    std::string do_complete(std::span<const ChatMessage> messages, const CallKey& key) override;

    std::map<CallKey, std::string> responses_;
};

/// POSTs `{model, messages, temperature, max_tokens}` and reads `{content}`.
/// At most `rate_limit` requests are in flight per instance. Connection
/// failures, 429 and 5xx are retried with exponential backoff.
class HttpBackend final : public ChatBackend {
public:
    explicit HttpBackend(BackendConfig config);
    ~HttpBackend() override;

private:
    std::string do_complete(std::span<const ChatMessage> messages, const CallKey& key) override;

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Append-only transcript: one JSON line per CallRecord, flushed per record.
/// append() is safe to call from many threads; lines never interleave.
class TranscriptWriter {
public:
    explicit TranscriptWriter(const std::filesystem::path& path);

    void append(const CallRecord& record);
    std::size_t appended() const;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::ofstream out_;
    std::size_t appended_ = 0;
};

void record_transcript(const std::filesystem::path& store_path, std::span<const CallRecord> records);

/// Reads a transcript in file order. A final line without a newline that
/// fails to parse is treated as a crash remnant and dropped; any other bad
/// line throws IoError. A missing file reads as empty.
std::vector<CallRecord> read_transcript(const std::filesystem::path& path);

/// Decorator that forwards to `inner` and appends every successful call to
/// a transcript.
class RecordingBackend final : public ChatBackend {
public:
    RecordingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<TranscriptWriter> writer);

private:
    std::string do_complete(std::span<const ChatMessage> messages, const CallKey& key) override;

    std::shared_ptr<ChatBackend> inner_;
    std::shared_ptr<TranscriptWriter> writer_;
};

/// Builds the backend selected by the endpoint scheme.
std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config);

} // namespace bidhi
