#include "bidhi/config.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <nlohmann/json.hpp>

namespace bidhi {

namespace {

using nlohmann::json;

template <typename T>
T get_field(const json& obj, const char* key, const std::string& field, T fallback) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(field.empty() ? key : field + "." + key, "has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute()) return p;
    return base / p;
}

std::string resolve_endpoint(const std::filesystem::path& base, const std::string& endpoint) {
    for (const char* scheme : {"mock:", "replay:", "stub:"}) {
        const std::string_view sv(scheme);
        if (endpoint.starts_with(sv))
            return std::string(sv) + resolve(base, endpoint.substr(sv.size())).string();
    }
    return endpoint;
}

void reject_secrets(const json& obj, const std::string& field) {
    for (const char* key : {"api_key", "apikey", "token", "secret", "password"})
        if (obj.contains(key))
            throw ConfigError(field + "." + key,
                              "secrets are not read from config files; name an environment variable in api_key_env");
}

BackendConfig parse_backend(const json& obj, const std::string& field, const std::filesystem::path& base) {
    if (!obj.is_object()) throw ConfigError(field, "must be an object");
    reject_secrets(obj, field);
    BackendConfig c;
    const auto preset = get_field<std::string>(obj, "preset", field, "");
    if (!preset.empty()) {
        auto p = find_preset(preset);
        if (!p) throw ConfigError(field + ".preset", "unknown preset '" + preset + "'");
        c = *p;
    }
    c.backend_id = get_field<std::string>(obj, "id", field, c.backend_id);
    c.endpoint = resolve_endpoint(base, get_field<std::string>(obj, "endpoint", field, c.endpoint));
    c.model_name = get_field<std::string>(obj, "model", field, c.model_name);
    c.sampling.temperature = get_field<double>(obj, "temperature", field, c.sampling.temperature);
    c.sampling.max_tokens = get_field<int>(obj, "max_tokens", field, c.sampling.max_tokens);
    c.rate_limit = get_field<int>(obj, "rate_limit", field, c.rate_limit);
    c.request_timeout = get_field<double>(obj, "request_timeout", field, c.request_timeout);
    c.max_attempts = get_field<int>(obj, "max_attempts", field, c.max_attempts);
    c.retry_backoff = get_field<double>(obj, "retry_backoff", field, c.retry_backoff);
    c.api_key_env = get_field<std::string>(obj, "api_key_env", field, c.api_key_env);
    if (c.backend_id.empty()) throw ConfigError(field + ".id", "missing (set 'id' or 'preset')");
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(field, e.what());
    }
    return c;
}

TranslatorConfig parse_translator(const json& obj, const std::string& field, const std::filesystem::path& base) {
    if (!obj.is_object()) throw ConfigError(field, "must be an object");
    reject_secrets(obj, field);
    TranslatorConfig t;
    t.translator_id = get_field<std::string>(obj, "id", field, "");
    t.endpoint = get_field<std::string>(obj, "endpoint", field, "");
    if (t.translator_id == "stub") t.endpoint = resolve(base, t.endpoint.starts_with("stub:") ? t.endpoint.substr(5) : t.endpoint).string();
    t.timeout = get_field<double>(obj, "timeout", field, t.timeout);
    t.source_lang = get_field<std::string>(obj, "source_lang", field, t.source_lang);
    t.target_lang = get_field<std::string>(obj, "target_lang", field, t.target_lang);
    try {
        t.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(field, e.what());
    }
    return t;
}

} // namespace

void SuiteConfig::validate() const {
    if (corpus.empty()) throw ConfigError("corpus", "missing corpus path");
    if (backends.empty()) throw ConfigError("backends", "at least one backend is required");
    for (std::size_t i = 0; i < backends.size(); ++i) {
        backends[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (backends[j].backend_id == backends[i].backend_id)
                throw ConfigError("backends[" + std::to_string(i) + "].id",
                                  "duplicate backend id '" + backends[i].backend_id + "'");
    }
    if (approaches.empty()) throw ConfigError("approaches", "at least one approach is required");
    if (parallelism < 1) throw ConfigError("parallelism", "must be >= 1");
    if (!(exec_timeout > 0)) throw ConfigError("timeouts.exec", "must be > 0");
    if (max_repairs < 0) throw ConfigError("repair.max_repairs", "must be >= 0");
    if (testgen_limit < 1) throw ConfigError("testgen_limit", "must be >= 1");
    for (auto a : approaches) {
        if (a == Approach::TranslateA && !translator_a)
            throw ConfigError("translators.A", "TRANSLATE_A requires a translator");
        if (a == Approach::TranslateB && !translator_b)
            throw ConfigError("translators.B", "TRANSLATE_B requires a translator");
    }
}

SuiteConfig parse_suite_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("<root>", "must be a JSON object");
    reject_secrets(doc, "<root>");

    SuiteConfig c;
    c.corpus = resolve(base_dir, get_field<std::string>(doc, "corpus", "", ""));
    if (auto it = doc.find("backends"); it != doc.end()) {
        if (!it->is_array()) throw ConfigError("backends", "must be an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            c.backends.push_back(parse_backend((*it)[i], "backends[" + std::to_string(i) + "]", base_dir));
    }
    if (auto it = doc.find("approaches"); it != doc.end()) {
        if (!it->is_array()) throw ConfigError("approaches", "must be an array of names");
        std::string joined;
        for (const auto& a : *it) {
            if (!a.is_string()) throw ConfigError("approaches", "must be an array of names");
            joined += a.get<std::string>() + ",";
        }
        c.approaches = parse_approach_list(joined);
    }
    c.templates_dir = resolve(base_dir, get_field<std::string>(doc, "templates_dir", "", ""));
    c.run_dir = resolve(base_dir, get_field<std::string>(doc, "run_dir", "", "runs"));
    c.suite_id = get_field<std::string>(doc, "suite_id", "", "");
    c.parallelism = get_field<int>(doc, "parallelism", "", c.parallelism);
    if (auto it = doc.find("timeouts"); it != doc.end() && it->is_object())
        c.exec_timeout = get_field<double>(*it, "exec", "timeouts", c.exec_timeout);
    if (auto it = doc.find("repair"); it != doc.end() && it->is_object())
        c.max_repairs = get_field<int>(*it, "max_repairs", "repair", c.max_repairs);
    c.testgen_limit = get_field<int>(doc, "testgen_limit", "", c.testgen_limit);
    c.infra_mode = infra_mode_from_string(get_field<std::string>(doc, "infra_mode", "", "incorrect"));
    if (auto it = doc.find("translators"); it != doc.end()) {
        if (!it->is_object()) throw ConfigError("translators", "must be an object with keys A and/or B");
        if (it->contains("A")) c.translator_a = parse_translator((*it)["A"], "translators.A", base_dir);
        if (it->contains("B")) c.translator_b = parse_translator((*it)["B"], "translators.B", base_dir);
    }
    c.translation_cache = resolve(base_dir, get_field<std::string>(doc, "translation_cache", "", ""));
    if (auto it = doc.find("sandbox"); it != doc.end() && it->is_object()) {
        c.python = get_field<std::string>(*it, "python", "sandbox", c.python);
        c.max_processes = get_field<std::size_t>(*it, "max_processes", "sandbox", c.max_processes);
        c.memory_limit_mb = get_field<std::size_t>(*it, "memory_limit_mb", "sandbox", c.memory_limit_mb);
    }
    c.score = get_field<bool>(doc, "score", "", c.score);
    c.keep_artifacts = get_field<bool>(doc, "keep_artifacts", "", c.keep_artifacts);
    return c;
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("--config", "file not found: " + path.string());
    return parse_suite_config(read_file(path), path.has_parent_path() ? path.parent_path() : ".");
}

BackendConfig parse_backend_flag(std::string_view spec) {
    std::string id;
    std::string endpoint(spec);
    // An '=' before any scheme separator names the backend.
    if (const auto eq = spec.find('='); eq != std::string_view::npos && eq < spec.find(':')) {
        id = std::string(spec.substr(0, eq));
        endpoint = std::string(spec.substr(eq + 1));
    }
    BackendConfig c;
    if (auto preset = find_preset(id)) c = *preset;
    c.endpoint = endpoint;
    if (id.empty()) {
        auto rest = endpoint;
        if (const auto colon = rest.find(':'); colon != std::string::npos) rest = rest.substr(colon + 1);
        while (!rest.empty() && rest.back() == '/') rest.pop_back();
        auto name = std::filesystem::path(rest).filename().string();
        if (name.empty()) name = "backend";
        id = name;
    }
    c.backend_id = id;
    c.validate();
    return c;
}

} // namespace bidhi
