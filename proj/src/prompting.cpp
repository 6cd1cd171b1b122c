#include "bidhi/prompting.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <regex>

namespace bidhi {

namespace {

const std::set<std::string>& known_placeholders() {
    static const std::set<std::string> names{"instruction", "entry_point", "tests", "code", "error"};
    return names;
}

constexpr const char* kDefaultGenerate =
    R"(Write a Python function named `{entry_point}` that solves the following task.

Task:
{instruction}

Return only the complete Python code in a single ```python fenced block.)";

constexpr const char* kDefaultGenerateWithTests =
    R"(Write a Python function named `{entry_point}` that solves the following task.

Task:
{instruction}

{tests}

Return only the complete Python code in a single ```python fenced block.)";

constexpr const char* kDefaultTestgen =
    R"(Write up to five Python assert statements that test a function named `{entry_point}` for the following task. Put each assert on its own line and do not implement the function.

Task:
{instruction})";

constexpr const char* kDefaultRepair = R"(The code failed when it was executed.

Code:
```python
{code}
```

Error:
```
{error}
```

Fix the code and return the complete corrected Python code in a single ```python fenced block.)";

bool is_name_char(char c) {
    return c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

void require(const PromptTemplate& t, const char* name) {
    if (!t.placeholders().contains(name))
        throw InvalidTemplate("template '" + std::string(to_string(t.id())) + "' must contain {" + name + "}");
}

} // namespace

std::string_view to_string(TemplateId id) noexcept {
    switch (id) {
    case TemplateId::Generate: return "generate";
    case TemplateId::GenerateWithTests: return "generate_with_tests";
    case TemplateId::Testgen: return "testgen";
    case TemplateId::Repair: return "repair";
    }
    return "generate";
}

PromptTemplate::PromptTemplate(TemplateId id, std::string body) : id_(id), body_(std::move(body)) {
    std::string literal;
    for (std::size_t i = 0; i < body_.size(); ++i) {
        const char c = body_[i];
        if (c == '{' && i + 1 < body_.size() && body_[i + 1] == '{') {
            literal.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
            literal.push_back('}');
            ++i;
        } else if (c == '{') {
            std::size_t j = i + 1;
            while (j < body_.size() && is_name_char(body_[j])) ++j;
            if (j < body_.size() && body_[j] == '}' && j > i + 1 &&
                is_identifier(std::string_view(body_).substr(i + 1, j - i - 1))) {
                auto name = body_.substr(i + 1, j - i - 1);
                if (!known_placeholders().contains(name))
                    throw InvalidTemplate("template '" + std::string(to_string(id_)) +
                                          "' uses unknown placeholder {" + name + "}");
                if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
                literal.clear();
                placeholders_.insert(name);
                pieces_.push_back({true, std::move(name)});
                i = j;
            } else {
                literal.push_back(c);
            }
        } else {
            literal.push_back(c);
        }
    }
    if (!literal.empty()) pieces_.push_back({false, std::move(literal)});

    switch (id_) {
    case TemplateId::Generate:
    case TemplateId::Testgen: require(*this, "instruction"); break;
    case TemplateId::GenerateWithTests:
        require(*this, "instruction");
        require(*this, "tests");
        break;
    case TemplateId::Repair:
        require(*this, "code");
        require(*this, "error");
        break;
    }
}

std::string PromptTemplate::substitute(const std::map<std::string, std::string>& bindings) const {
    std::string out;
    for (const auto& piece : pieces_) {
        if (!piece.placeholder) {
            out += piece.text;
            continue;
        }
        auto it = bindings.find(piece.text);
        if (it == bindings.end()) throw MissingBinding(piece.text);
        out += it->second;
    }
    return out;
}

const PromptTemplate& PromptSet::get(TemplateId id) const noexcept {
    switch (id) {
    case TemplateId::Generate: return generate;
    case TemplateId::GenerateWithTests: return generate_with_tests;
    case TemplateId::Testgen: return testgen;
    case TemplateId::Repair: return repair;
    }
    return generate;
}

PromptSet default_prompt_set() {
    return PromptSet{PromptTemplate(TemplateId::Generate, kDefaultGenerate),
                     PromptTemplate(TemplateId::GenerateWithTests, kDefaultGenerateWithTests),
                     PromptTemplate(TemplateId::Testgen, kDefaultTestgen),
                     PromptTemplate(TemplateId::Repair, kDefaultRepair), std::nullopt};
}

PromptSet load_prompt_set(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("templates_dir", "not a directory: " + dir.string());
    auto load = [&](TemplateId id) {
        const auto path = dir / (std::string(to_string(id)) + ".txt");
        if (!std::filesystem::exists(path))
            throw ConfigError("templates_dir", "missing template file " + path.string());
        return PromptTemplate(id, read_file(path));
    };
    PromptSet set{load(TemplateId::Generate), load(TemplateId::GenerateWithTests), load(TemplateId::Testgen),
                  load(TemplateId::Repair), std::nullopt};
    const auto system = dir / "system.txt";
    if (std::filesystem::exists(system)) set.system_message = read_file(system);
    return set;
}

std::vector<ChatMessage> render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& bindings,
                                const std::optional<std::string>& system_message) {
    std::vector<ChatMessage> out;
    if (system_message && !system_message->empty()) out.push_back({Role::System, *system_message});
    out.push_back({Role::User, tmpl.substitute(bindings)});
    return out;
}

std::string_view to_string(ExtractedCode::Origin origin) noexcept {
    return origin == ExtractedCode::Origin::FencedBlock ? "fenced_block" : "whole_response_fallback";
}

ExtractedCode::Origin origin_from_string(std::string_view s) {
    if (s == "fenced_block") return ExtractedCode::Origin::FencedBlock;
    if (s == "whole_response_fallback") return ExtractedCode::Origin::WholeResponseFallback;
    throw Error("unknown code origin '" + std::string(s) + "'");
}

std::vector<std::string> fenced_blocks(std::string_view response) {
    std::vector<std::string> blocks;
    std::optional<std::vector<std::string_view>> current;
    std::size_t fence_len = 0;

    auto close = [&] {
        std::string joined;
        for (std::size_t i = 0; i < current->size(); ++i) {
            if (i > 0) joined.push_back('\n');
            joined.append((*current)[i]);
        }
        blocks.push_back(std::move(joined));
        current.reset();
    };

    std::size_t pos = 0;
    while (pos <= response.size()) {
        const auto nl = response.find('\n', pos);
        auto line = response.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? response.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        const auto t = trim(line);
        std::size_t ticks = 0;
        while (ticks < t.size() && t[ticks] == '`') ++ticks;

        if (!current) {
            if (ticks >= 3) {
                current.emplace();
                fence_len = ticks;
            }
        } else if (ticks >= fence_len && ticks == t.size()) {
            close();
        } else {
            current->push_back(line);
        }
    }
    if (current) close();
    return blocks;
}

ExtractedCode extract_code(std::string_view response) {
    if (trim(response).empty()) throw EmptyResponse();
    static const std::regex def_re(R"((^|\n)[ \t]*(async[ \t]+)?def[ \t]+[A-Za-z_][A-Za-z0-9_]*[ \t]*\()");

    const auto blocks = fenced_blocks(response);
    for (const auto& b : blocks)
        if (std::regex_search(b, def_re)) return {b, ExtractedCode::Origin::FencedBlock};
    for (const auto& b : blocks)
        if (!trim(b).empty()) return {b, ExtractedCode::Origin::FencedBlock};
    return {std::string(response), ExtractedCode::Origin::WholeResponseFallback};
}

std::string format_tests_block(std::span<const std::string> tests) {
    if (tests.empty()) return {};
    std::string out(kTestsHeader);
    for (std::size_t i = 0; i < tests.size(); ++i) {
        if (!starts_with_assert(tests[i])) throw NonAssertEntry(i);
        out.push_back('\n');
        out.append(trim(tests[i]));
    }
    return out;
}

} // namespace bidhi
