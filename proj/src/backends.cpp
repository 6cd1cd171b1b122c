#include "bidhi/backends.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"
#include "http_common.hpp"

#include <array>
#include <cctype>
#include <cstdlib>
#include <semaphore>
#include <thread>

namespace bidhi {

std::string_view to_string(Role role) noexcept {
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(std::string_view s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw Error("unknown chat role '" + std::string(s) + "'");
}

std::string_view to_string(Stage stage) noexcept {
    switch (stage) {
    case Stage::Generation: return "generation";
    case Stage::TestGeneration: return "test_generation";
    case Stage::Repair: return "repair";
    }
    return "generation";
}

Stage stage_from_string(std::string_view s) {
    if (s == "generation") return Stage::Generation;
    if (s == "test_generation") return Stage::TestGeneration;
    if (s == "repair") return Stage::Repair;
    throw Error("unknown call stage '" + std::string(s) + "'");
}

std::string CallKey::str() const {
    return task_id + "/" + approach + "/" + std::string(to_string(stage)) + "/" + std::to_string(attempt);
}

void to_json(nlohmann::json& j, const ChatMessage& m) {
    j = nlohmann::json{{"role", to_string(m.role)}, {"content", m.content}};
}

void from_json(const nlohmann::json& j, ChatMessage& m) {
    m.role = role_from_string(j.at("role").get<std::string>());
    m.content = j.at("content").get<std::string>();
}

void to_json(nlohmann::json& j, const CallKey& k) {
    j = nlohmann::json{{"task_id", k.task_id},
                       {"approach", k.approach},
                       {"stage", to_string(k.stage)},
                       {"attempt", k.attempt}};
}

void from_json(const nlohmann::json& j, CallKey& k) {
    k.task_id = j.at("task_id").get<std::string>();
    k.approach = j.at("approach").get<std::string>();
    k.stage = stage_from_string(j.at("stage").get<std::string>());
    k.attempt = j.at("attempt").get<int>();
}

void to_json(nlohmann::json& j, const CallRecord& r) {
    j = nlohmann::json{{"call_key", r.key}, {"request", r.request}, {"response", r.response},
                       {"latency", r.latency}};
}

void from_json(const nlohmann::json& j, CallRecord& r) {
    r.key = j.at("call_key").get<CallKey>();
    r.request = j.at("request").get<std::vector<ChatMessage>>();
    r.response = j.at("response").get<std::string>();
    r.latency = j.value("latency", 0.0);
}

void BackendConfig::validate() const {
    if (backend_id.empty()) throw ConfigError("backend_id", "must be non-empty");
    if (endpoint.empty()) throw ConfigError(backend_id + ".endpoint", "must be non-empty");
    if (rate_limit < 1) throw ConfigError(backend_id + ".rate_limit", "must be >= 1");
    if (!(request_timeout > 0)) throw ConfigError(backend_id + ".request_timeout", "must be > 0");
    if (!(sampling.temperature >= 0)) throw ConfigError(backend_id + ".temperature", "must be >= 0");
    if (sampling.max_tokens < 1) throw ConfigError(backend_id + ".max_tokens", "must be positive");
    if (max_attempts < 1) throw ConfigError(backend_id + ".max_attempts", "must be >= 1");
    if (retry_backoff < 0) throw ConfigError(backend_id + ".retry_backoff", "must be >= 0");
}

std::string BackendConfig::resolved_api_key_env() const {
    if (!api_key_env.empty()) return api_key_env;
    std::string name = "BIDHI_API_KEY_";
    for (char c : backend_id)
        name.push_back(std::isalnum(static_cast<unsigned char>(c))
                           ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                           : '_');
    return name;
}

std::span<const BackendConfig> backend_presets() {
    static const std::array<BackendConfig, 7> presets = [] {
        auto make = [](const char* id, const char* model) {
            BackendConfig c;
            c.backend_id = id;
            c.model_name = model;
            return c;
        };
        return std::array<BackendConfig, 7>{
            make("llama3.2-3b", "meta.llama3-2-3b-instruct-v1:0"),
            make("llama3.2-11b", "meta.llama3-2-11b-instruct-v1:0"),
            make("llama3.2-90b", "meta.llama3-2-90b-instruct-v1:0"),
            make("llama4-scout-17b", "meta.llama4-scout-17b-instruct-v1:0"),
            make("llama4-maverick-17b", "meta.llama4-maverick-17b-instruct-v1:0"),
            make("gpt-oss-20b", "openai.gpt-oss-20b-1:0"),
            make("gpt-oss-120b", "openai.gpt-oss-120b-1:0"),
        };
    }();
    return presets;
}

std::optional<BackendConfig> find_preset(std::string_view backend_id) {
    for (const auto& p : backend_presets())
        if (p.backend_id == backend_id) return p;
    return std::nullopt;
}

std::string ChatBackend::complete(std::span<const ChatMessage> messages, const CallKey& key) {
    if (messages.empty()) throw BackendError("complete: no messages for " + key.str());
    if (messages.back().role != Role::User)
        throw BackendError("complete: last message must have role user for " + key.str());
    return do_complete(messages, key);
}

// Mock

MockBackend::MockBackend(BackendConfig config, std::vector<MockRule> rules)
    : ChatBackend(std::move(config)), rules_(std::move(rules)) {}

std::string MockBackend::do_complete(std::span<const ChatMessage> messages, const CallKey& key) {
    const std::string& last = messages.back().content;
    const auto key_str = key.str();
    for (const auto& rule : rules_) {
        if (!rule.contains.empty() && last.find(rule.contains) == std::string::npos) continue;
        if (rule.call_key && !glob_match(*rule.call_key, key_str)) continue;
        return rule.response;
    }
    throw MockRuleMiss("no mock rule matches call " + key_str);
}

std::vector<MockRule> load_mock_rules(const std::filesystem::path& path) {
    auto file = path;
    if (std::filesystem::is_directory(file)) file /= "rules.json";
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(file));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file.string(), std::string("invalid mock rules: ") + e.what());
    }
    if (!doc.contains("rules") || !doc["rules"].is_array())
        throw ConfigError(file.string(), "expected an object with a 'rules' array");
    std::vector<MockRule> rules;
    for (std::size_t i = 0; i < doc["rules"].size(); ++i) {
        const auto& r = doc["rules"][i];
        const auto field = file.string() + ":rules[" + std::to_string(i) + "]";
        if (!r.is_object() || !r.contains("response") || !r["response"].is_string())
            throw ConfigError(field, "each rule needs a string 'response'");
        MockRule rule;
        rule.response = r["response"].get<std::string>();
        rule.contains = r.value("contains", std::string{});
        if (r.contains("call_key")) rule.call_key = r["call_key"].get<std::string>();
        rules.push_back(std::move(rule));
    }
    return rules;
}

// Replay

ReplayBackend::ReplayBackend(BackendConfig config, std::span<const CallRecord> records)
    : ChatBackend(std::move(config)) {
    // Later entries win: a resumed run may re-record a regenerated cell.
    for (const auto& r : records) responses_.insert_or_assign(r.key, r.response);
}

std::string ReplayBackend::do_complete(std::span<const ChatMessage>, const CallKey& key) {
    auto it = responses_.find(key);
    if (it == responses_.end()) throw ReplayMiss("no recorded response for " + key.str());
    return it->second;
}

// HTTP

struct HttpBackend::Impl {
    explicit Impl(int limit) : in_flight(limit) {}
    std::counting_semaphore<> in_flight;
};

HttpBackend::HttpBackend(BackendConfig config)
    : ChatBackend(std::move(config)), impl_(std::make_unique<Impl>(this->config().rate_limit)) {
    detail::parse_url(this->config().endpoint);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::do_complete(std::span<const ChatMessage> messages, const CallKey& key) {
    const auto& cfg = config();
    nlohmann::json payload{{"model", cfg.model_name},
                           {"messages", nlohmann::json(std::vector<ChatMessage>(messages.begin(), messages.end()))},
                           {"temperature", cfg.sampling.temperature},
                           {"max_tokens", cfg.sampling.max_tokens}};
    const auto body = payload.dump();

    std::string token;
    if (const char* env = std::getenv(cfg.resolved_api_key_env().c_str())) token = env;

    detail::HttpOutcome last;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        if (attempt > 0) {
            const double delay = cfg.retry_backoff * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        {
            impl_->in_flight.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{impl_->in_flight};
            last = detail::post_json(cfg.endpoint, body, cfg.request_timeout, token);
        }

        if (last.kind == detail::HttpOutcome::Kind::Ok && last.status >= 200 && last.status < 300) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(last.body);
            } catch (const nlohmann::json::exception&) {
                throw BackendHttpError(last.status, "response is not JSON for " + key.str());
            }
            if (!doc.is_object() || !doc.contains("content") || !doc["content"].is_string())
                throw BackendHttpError(last.status, "response lacks string 'content' for " + key.str());
            return doc["content"].get<std::string>();
        }
        const bool transient = last.kind != detail::HttpOutcome::Kind::Ok || last.status == 429 ||
                               last.status >= 500;
        if (!transient) break;
    }

    if (last.kind == detail::HttpOutcome::Kind::Timeout)
        throw BackendTimeout("backend " + cfg.backend_id + " timed out for " + key.str());
    if (last.kind == detail::HttpOutcome::Kind::ConnectionFailed)
        throw BackendHttpError(0, last.detail + " for " + key.str());
    throw BackendHttpError(last.status, last.body.substr(0, 200));
}

// Transcript

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path) : path_(path) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open transcript " + path_.string());
}

void TranscriptWriter::append(const CallRecord& record) {
    auto line = nlohmann::json(record).dump();
    line.push_back('\n');
    std::lock_guard lock(mu_);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw IoError("write to transcript " + path_.string() + " failed");
    ++appended_;
}

std::size_t TranscriptWriter::appended() const {
    std::lock_guard lock(mu_);
    return appended_;
}

void record_transcript(const std::filesystem::path& store_path, std::span<const CallRecord> records) {
    TranscriptWriter writer(store_path);
    for (const auto& r : records) writer.append(r);
}

std::vector<CallRecord> read_transcript(const std::filesystem::path& path) {
    std::vector<CallRecord> out;
    if (!std::filesystem::exists(path)) return out;
    const auto text = read_file(path);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        const bool terminated = nl != std::string::npos;
        const auto line = text.substr(pos, terminated ? nl - pos : std::string::npos);
        pos = terminated ? nl + 1 : text.size();
        if (trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<CallRecord>());
        } catch (const std::exception& e) {
            if (!terminated) break;
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad transcript line: " + e.what());
        }
    }
    return out;
}

// Recording

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<TranscriptWriter> writer)
    : ChatBackend(inner->config()), inner_(std::move(inner)), writer_(std::move(writer)) {}

std::string RecordingBackend::do_complete(std::span<const ChatMessage> messages, const CallKey& key) {
    const auto start = std::chrono::steady_clock::now();
    auto response = inner_->complete(messages, key);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    writer_->append(CallRecord{key, {messages.begin(), messages.end()}, response, elapsed.count()});
    return response;
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& config) {
    config.validate();
    const auto& ep = config.endpoint;
    if (ep.starts_with("mock:"))
        return std::make_shared<MockBackend>(config, load_mock_rules(ep.substr(5)));
    if (ep.starts_with("replay:")) {
        const std::filesystem::path store = ep.substr(7);
        if (!std::filesystem::exists(store))
            throw ConfigError(config.backend_id + ".endpoint", "replay transcript not found: " + store.string());
        const auto records = read_transcript(store);
        return std::make_shared<ReplayBackend>(config, records);
    }
    if (ep.starts_with("http://") || ep.starts_with("https://")) return std::make_shared<HttpBackend>(config);
    throw ConfigError(config.backend_id + ".endpoint", "unsupported endpoint '" + ep + "'");
}

} // namespace bidhi
