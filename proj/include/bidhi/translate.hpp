#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace bidhi {

/// `translator_id` selects the implementation: `identity`, `stub` (the
/// endpoint names a JSON fixture `{source: translation}`), or any other id
/// (e.g. `google`, `nllb`) for the HTTP contract at `endpoint`.
struct TranslatorConfig {
    std::string translator_id;
    std::string endpoint;
    double timeout = 30.0;
    std::string source_lang = "bn";
    std::string target_lang = "en";

    void validate() const;
};

class Translator {
public:
    virtual ~Translator() = default;

    /// Throws TranslatorError on empty input.
    std::string translate(const std::string& text);

    virtual const std::string& id() const noexcept = 0;

private:
    virtual std::string do_translate(const std::string& text) = 0;
};

class IdentityTranslator final : public Translator {
public:
    const std::string& id() const noexcept override { return id_; }

private:
    std::string do_translate(const std::string& text) override { return text; }

    std::string id_ = "identity";
};

/// Whole-instruction exact-match lookup; unseen text is a StubMiss.
class StubTranslator final : public Translator {
public:
    explicit StubTranslator(std::map<std::string, std::string> fixture, std::string id = "stub");

    static StubTranslator from_file(const std::filesystem::path& path, std::string id = "stub");

    const std::string& id() const noexcept override { return id_; }

private:
    std::string do_translate(const std::string& text) override;

    std::map<std::string, std::string> fixture_;
    std::string id_;
};

/// POST `{source_lang, target_lang, text}` → `{text}`.
class HttpTranslator final : public Translator {
public:
    explicit HttpTranslator(TranslatorConfig config);

    const std::string& id() const noexcept override { return config_.translator_id; }

private:
    std::string do_translate(const std::string& text) override;

    TranslatorConfig config_;
};

/// Disk cache in front of another translator. Layout:
/// `<dir>/<translator_id>/<sha256 of source text>.txt`, plain UTF-8.
class CachingTranslator final : public Translator {
public:
    CachingTranslator(std::unique_ptr<Translator> inner, std::filesystem::path dir);

    const std::string& id() const noexcept override { return inner_->id(); }

    std::filesystem::path entry_path(const std::string& text) const;

private:
    std::string do_translate(const std::string& text) override;

    std::unique_ptr<Translator> inner_;
    std::filesystem::path dir_;
};

/// HTTP translators are wrapped in a CachingTranslator when `cache_dir` is
/// set; identity and stub never are.
std::unique_ptr<Translator> make_translator(const TranslatorConfig& config,
                                            const std::optional<std::filesystem::path>& cache_dir = {});

std::string translate_instruction(const TranslatorConfig& config, const std::string& text);

} // namespace bidhi
