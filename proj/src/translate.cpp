#include "bidhi/translate.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"
#include "http_common.hpp"

#include <nlohmann/json.hpp>

namespace bidhi {

void TranslatorConfig::validate() const {
    if (translator_id.empty()) throw ConfigError("translator_id", "must be non-empty");
    if (!(timeout > 0)) throw ConfigError(translator_id + ".timeout", "must be > 0");
    if (translator_id != "identity" && endpoint.empty())
        throw ConfigError(translator_id + ".endpoint", "must be set");
}

std::string Translator::translate(const std::string& text) {
    if (text.empty()) throw TranslatorError("cannot translate empty text");
    return do_translate(text);
}

StubTranslator::StubTranslator(std::map<std::string, std::string> fixture, std::string id)
    : fixture_(std::move(fixture)), id_(std::move(id)) {}

StubTranslator StubTranslator::from_file(const std::filesystem::path& path, std::string id) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
        return StubTranslator(doc.get<std::map<std::string, std::string>>(), std::move(id));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string(), std::string("invalid stub fixture: ") + e.what());
    }
}

std::string StubTranslator::do_translate(const std::string& text) {
    auto it = fixture_.find(text);
    if (it == fixture_.end())
        throw StubMiss("stub translator has no entry for text with sha256 " + sha256_hex(text));
    return it->second;
}

HttpTranslator::HttpTranslator(TranslatorConfig config) : config_(std::move(config)) {
    detail::parse_url(config_.endpoint);
}

std::string HttpTranslator::do_translate(const std::string& text) {
    const nlohmann::json payload{
        {"source_lang", config_.source_lang}, {"target_lang", config_.target_lang}, {"text", text}};
    const auto out = detail::post_json(config_.endpoint, payload.dump(), config_.timeout, "");
    using Kind = detail::HttpOutcome::Kind;
    if (out.kind == Kind::Timeout) throw TranslatorTimeout("translator " + config_.translator_id + " timed out");
    if (out.kind == Kind::ConnectionFailed) throw TranslatorHttpError(0, out.detail);
    if (out.status < 200 || out.status >= 300) throw TranslatorHttpError(out.status, out.body.substr(0, 200));
    try {
        const auto doc = nlohmann::json::parse(out.body);
        return doc.at("text").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw TranslatorHttpError(out.status, "response lacks string 'text'");
    }
}

CachingTranslator::CachingTranslator(std::unique_ptr<Translator> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {}

std::filesystem::path CachingTranslator::entry_path(const std::string& text) const {
    return dir_ / path_component(inner_->id()) / (sha256_hex(text) + ".txt");
}

std::string CachingTranslator::do_translate(const std::string& text) {
    const auto path = entry_path(text);
    if (std::filesystem::exists(path)) return read_file(path);
    auto result = inner_->translate(text);
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, result);
    return result;
}

std::unique_ptr<Translator> make_translator(const TranslatorConfig& config,
                                            const std::optional<std::filesystem::path>& cache_dir) {
    config.validate();
    if (config.translator_id == "identity") return std::make_unique<IdentityTranslator>();
    if (config.translator_id == "stub") {
        auto path = config.endpoint;
        if (path.starts_with("stub:")) path = path.substr(5);
        return std::make_unique<StubTranslator>(StubTranslator::from_file(path));
    }
    std::unique_ptr<Translator> http = std::make_unique<HttpTranslator>(config);
    if (cache_dir) return std::make_unique<CachingTranslator>(std::move(http), *cache_dir);
    return http;
}

std::string translate_instruction(const TranslatorConfig& config, const std::string& text) {
    return make_translator(config)->translate(text);
}

} // namespace bidhi
