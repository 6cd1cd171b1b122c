#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

enum class ExecStatus { Success, CompileError, RuntimeError, AssertFailure, Timeout };

std::string_view to_string(ExecStatus status) noexcept;
ExecStatus exec_status_from_string(std::string_view s);

struct ExecutionResult {
    ExecStatus status = ExecStatus::Success;
    std::string stdout_text;
    std::string stderr_text;
    double duration = 0.0;
    /// Set only for AssertFailure.
    std::optional<int> failing_assert_index;
};

void to_json(nlohmann::json& j, const ExecutionResult& r);
void from_json(const nlohmann::json& j, ExecutionResult& r);

struct ParseResult {
    bool ok = false;
    std::string stderr_text;
};

struct SandboxConfig {
    /// Interpreter name (searched on PATH) or path.
    std::string python = "python3";
    /// Bound on concurrently running interpreter processes; 0 picks the
    /// hardware concurrency.
    std::size_t max_processes = 0;
    /// Address-space cap per process in MiB; 0 disables it.
    std::size_t memory_limit_mb = 2048;
    /// Largest file a candidate may write, in MiB.
    std::size_t file_size_limit_mb = 64;
    /// Also try a private network namespace (best effort; the harness
    /// disables the socket module regardless).
    bool isolate_network = true;
    /// Parent directory for per-execution scratch directories.
    std::filesystem::path scratch_root;
};

/// Runs untrusted Python in a fresh interpreter process per call, inside a
/// private scratch directory that is removed afterwards. All methods are
/// safe to call concurrently.
class Sandbox {
public:
    explicit Sandbox(SandboxConfig config = {});
    ~Sandbox();

    Sandbox(const Sandbox&) = delete;
    Sandbox& operator=(const Sandbox&) = delete;

    /// Byte-compiles without running top-level code.
    ParseResult parse_only(const std::string& code);

    /// parse_only for many snippets in one interpreter process.
    std::vector<bool> parse_each(std::span<const std::string> snippets);

    /// Compiles, runs the module, then each test in order in its own copy
    /// of the module namespace. The first failing assert stops the run.
    ExecutionResult execute(const std::string& code, std::span<const std::string> tests, double timeout_seconds);

    /// Resolved interpreter path; throws SandboxUnavailable if none.
    std::filesystem::path interpreter() const;
    bool available() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace bidhi
