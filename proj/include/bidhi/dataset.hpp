#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bidhi {

/// One row of the task corpus. `hidden_tests` is only ever read by the
/// scorer; everything prompt-facing goes through public_view().
struct TaskRecord {
    std::string task_id;
    std::string instruction;
    std::string entry_point;
    std::string given_test;
    std::vector<std::string> hidden_tests;

    /// Copy with hidden tests removed.
    TaskRecord public_view() const;

    friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

struct CorpusDiagnostic {
    enum class Severity { Warning, Error };

    std::size_t line_no = 0;
    Severity severity = Severity::Error;
    std::string message;
};

struct CorpusReport {
    std::vector<TaskRecord> records;
    std::vector<CorpusDiagnostic> diagnostics;

    bool clean() const noexcept;
};

/// Parses and validates one corpus line. Throws MalformedRecord.
TaskRecord parse_task_line(const std::string& line, std::size_t line_no);

/// Strict loader: the first invalid line throws MalformedRecord, a repeated
/// id throws DuplicateTaskId. Blank lines are skipped.
std::vector<TaskRecord> load_corpus(const std::filesystem::path& path);

/// Lenient loader for linting: collects every diagnostic instead of
/// stopping at the first. Throws IoError only if the file is unreadable.
CorpusReport validate_corpus(const std::filesystem::path& path);

void save_corpus(const std::filesystem::path& path, std::span<const TaskRecord> corpus);

std::string serialize_task(const TaskRecord& task);

/// SHA-256 over the canonical serialization of the whole corpus.
std::string corpus_digest(std::span<const TaskRecord> corpus);

} // namespace bidhi
