#pragma once

#include "bidhi/backends.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

enum class TemplateId { Generate, GenerateWithTests, Testgen, Repair };

std::string_view to_string(TemplateId id) noexcept;

/// A prompt body with `{name}` placeholders; `{{` and `}}` are literal
/// braces. Only instruction, entry_point, tests, code and error are valid
/// names. Bodies are checked on construction (InvalidTemplate).
class PromptTemplate {
public:
    PromptTemplate(TemplateId id, std::string body);

    TemplateId id() const noexcept { return id_; }
    const std::string& body() const noexcept { return body_; }
    const std::set<std::string>& placeholders() const noexcept { return placeholders_; }

    /// Literal substitution; bound text is never rescanned for placeholders.
    std::string substitute(const std::map<std::string, std::string>& bindings) const;

private:
    struct Piece {
        bool placeholder = false;
        std::string text;
    };

    TemplateId id_;
    std::string body_;
    std::vector<Piece> pieces_;
    std::set<std::string> placeholders_;
};

struct PromptSet {
    PromptTemplate generate;
    PromptTemplate generate_with_tests;
    PromptTemplate testgen;
    PromptTemplate repair;
    std::optional<std::string> system_message;

    const PromptTemplate& get(TemplateId id) const noexcept;
};

/// Built-in template bodies; identical to the files shipped in templates/.
PromptSet default_prompt_set();

/// Reads `<dir>/<template_id>.txt` for every template id plus an optional
/// `<dir>/system.txt`.
PromptSet load_prompt_set(const std::filesystem::path& dir);

/// One user message, preceded by a system message when one is given.
/// Throws MissingBinding for the first unbound placeholder.
std::vector<ChatMessage> render(const PromptTemplate& tmpl,
                                const std::map<std::string, std::string>& bindings,
                                const std::optional<std::string>& system_message = {});

struct ExtractedCode {
    enum class Origin { FencedBlock, WholeResponseFallback };

    std::string code;
    Origin origin = Origin::FencedBlock;

    friend bool operator==(const ExtractedCode&, const ExtractedCode&) = default;
};

std::string_view to_string(ExtractedCode::Origin origin) noexcept;
ExtractedCode::Origin origin_from_string(std::string_view s);

/// Contents of every ``` fenced block in order (unterminated final fence
/// runs to end of text; CR before LF is dropped).
std::vector<std::string> fenced_blocks(std::string_view response);

/// First fenced block defining a function, else the first fenced block,
/// else the whole response. Throws EmptyResponse on blank input.
ExtractedCode extract_code(std::string_view response);

inline constexpr std::string_view kTestsHeader = "The following tests must pass:";

/// Header line plus one assert per line; empty input gives empty text.
std::string format_tests_block(std::span<const std::string> tests);

} // namespace bidhi
