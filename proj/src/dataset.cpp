#include "bidhi/dataset.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <unordered_map>

namespace bidhi {

namespace {

using ojson = nlohmann::ordered_json;

ojson to_ojson(const TaskRecord& t) {
    return ojson{{"task_id", t.task_id},
                 {"instruction", t.instruction},
                 {"entry_point", t.entry_point},
                 {"given_test", t.given_test},
                 {"hidden_tests", t.hidden_tests}};
}

std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end()) throw MalformedRecord(line_no, std::string("missing key '") + key + "'");
    if (!it->is_string()) throw MalformedRecord(line_no, std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

bool is_multiline(std::string_view s) {
    return trim(s).find('\n') != std::string_view::npos;
}

} // namespace

TaskRecord TaskRecord::public_view() const {
    TaskRecord view = *this;
    view.hidden_tests.clear();
    return view;
}

bool CorpusReport::clean() const noexcept {
    for (const auto& d : diagnostics)
        if (d.severity == CorpusDiagnostic::Severity::Error) return false;
    return true;
}

TaskRecord parse_task_line(const std::string& line, std::size_t line_no) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedRecord(line_no, std::string("not a valid JSON object: ") + e.what());
    }
    if (!obj.is_object()) throw MalformedRecord(line_no, "record must be a JSON object");

    TaskRecord t;
    t.task_id = require_string(obj, "task_id", line_no);
    t.instruction = require_string(obj, "instruction", line_no);
    t.entry_point = require_string(obj, "entry_point", line_no);
    t.given_test = require_string(obj, "given_test", line_no);

    auto hidden = obj.find("hidden_tests");
    if (hidden == obj.end()) throw MalformedRecord(line_no, "missing key 'hidden_tests'");
    if (!hidden->is_array()) throw MalformedRecord(line_no, "'hidden_tests' must be an array");
    for (std::size_t i = 0; i < hidden->size(); ++i) {
        const auto& h = (*hidden)[i];
        if (!h.is_string())
            throw MalformedRecord(line_no, "hidden_tests[" + std::to_string(i) + "] must be a string");
        t.hidden_tests.push_back(h.get<std::string>());
    }

    if (trim(t.task_id).empty()) throw MalformedRecord(line_no, "task_id is empty");
    if (trim(t.instruction).empty()) throw MalformedRecord(line_no, "instruction is empty");
    if (!is_identifier(t.entry_point))
        throw MalformedRecord(line_no, "entry_point '" + t.entry_point + "' is not an identifier");
    if (!starts_with_assert(t.given_test))
        throw MalformedRecord(line_no, "given_test is not an assert statement");
    if (t.given_test.find(t.entry_point) == std::string::npos)
        throw MalformedRecord(line_no, "given_test does not mention entry_point '" + t.entry_point + "'");
    for (std::size_t i = 0; i < t.hidden_tests.size(); ++i) {
        if (!starts_with_assert(t.hidden_tests[i]))
            throw MalformedRecord(line_no,
                                  "hidden_tests[" + std::to_string(i) + "] is not an assert statement");
    }
    return t;
}

CorpusReport validate_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus " + path.string());

    CorpusReport report;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        try {
            auto task = parse_task_line(line, line_no);
            if (auto [it, inserted] = seen.emplace(task.task_id, line_no); !inserted) {
                report.diagnostics.push_back({line_no, CorpusDiagnostic::Severity::Error,
                                              "duplicate task_id '" + task.task_id +
                                                  "' (first seen on line " +
                                                  std::to_string(it->second) + ")"});
                continue;
            }
            if (is_multiline(task.given_test))
                report.diagnostics.push_back(
                    {line_no, CorpusDiagnostic::Severity::Warning, "given_test spans multiple lines"});
            for (std::size_t i = 0; i < task.hidden_tests.size(); ++i) {
                if (is_multiline(task.hidden_tests[i]))
                    report.diagnostics.push_back({line_no, CorpusDiagnostic::Severity::Warning,
                                                  "hidden_tests[" + std::to_string(i) +
                                                      "] spans multiple lines"});
            }
            report.records.push_back(std::move(task));
        } catch (const MalformedRecord& e) {
            report.diagnostics.push_back({line_no, CorpusDiagnostic::Severity::Error, e.reason()});
        }
    }
    return report;
}

std::vector<TaskRecord> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus " + path.string());

    std::vector<TaskRecord> out;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto task = parse_task_line(line, line_no);
        if (!seen.emplace(task.task_id, line_no).second) throw DuplicateTaskId(line_no, task.task_id);
        out.push_back(std::move(task));
    }
    return out;
}

std::string serialize_task(const TaskRecord& task) {
    return to_ojson(task).dump();
}

void save_corpus(const std::filesystem::path& path, std::span<const TaskRecord> corpus) {
    std::string body;
    for (const auto& t : corpus) {
        body += serialize_task(t);
        body += '\n';
    }
    write_file_atomic(path, body);
}

std::string corpus_digest(std::span<const TaskRecord> corpus) {
    auto arr = ojson::array();
    for (const auto& t : corpus) arr.push_back(to_ojson(t));
    return sha256_hex(arr.dump());
}

} // namespace bidhi
