#include "bidhi/sandbox.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <semaphore>
#include <sstream>
#include <thread>

namespace bidhi {

namespace {

// Runs inside the interpreter as `-c`. argv: mode, then mode-specific
// paths, with the result file always last. The result file is what the
// parent trusts; exit codes are not used for classification.
constexpr const char* kHarness = R"PY(
import json, sys, traceback

def _result(obj):
    with open(sys.argv[-1], "w") as f:
        json.dump(obj, f)

def _compile(src, name):
    return compile(src, name, "exec", dont_inherit=True)

def _print_exc(exc, skip_harness_frame=True):
    tb = exc.__traceback__
    if skip_harness_frame and tb is not None:
        tb = tb.tb_next
    traceback.print_exception(type(exc), exc, tb, file=sys.stderr)

def _block_network():
    try:
        import socket
    except Exception:
        return
    def _denied(*args, **kwargs):
        raise OSError("network access is disabled in the sandbox")
    class _DeniedSocket(socket.socket):
        def __init__(self, *args, **kwargs):
            _denied()
    socket.socket = _DeniedSocket
    socket.create_connection = _denied
    socket.getaddrinfo = _denied
    socket.socketpair = _denied

mode = sys.argv[1]
if mode == "parse":
    with open(sys.argv[2], "rb") as f:
        src = f.read()
    try:
        _compile(src, "candidate.py")
    except BaseException as exc:
        sys.stderr.write("".join(traceback.format_exception_only(type(exc), exc)))
        _result({"status": "compile_error"})
    else:
        _result({"status": "ok"})
elif mode == "parse_each":
    with open(sys.argv[2], "r", encoding="utf-8") as f:
        snippets = json.load(f)
    oks = []
    for s in snippets:
        try:
            _compile(s, "<snippet>")
            oks.append(True)
        except BaseException:
            oks.append(False)
    _result({"status": "ok", "ok": oks})
elif mode == "exec":
    with open(sys.argv[2], "rb") as f:
        src = f.read()
    with open(sys.argv[3], "r", encoding="utf-8") as f:
        tests = json.load(f)
    try:
        code = _compile(src, "candidate.py")
    except BaseException as exc:
        sys.stderr.write("".join(traceback.format_exception_only(type(exc), exc)))
        _result({"status": "compile_error"})
        sys.exit(0)
    _block_network()
    ns = {"__name__": "candidate", "__builtins__": __builtins__}
    try:
        exec(code, ns)
    except BaseException as exc:
        _print_exc(exc)
        _result({"status": "runtime_error"})
        sys.exit(0)
    for i, t in enumerate(tests):
        try:
            exec(_compile(t, "<test %d>" % i), dict(ns))
        except AssertionError as exc:
            sys.stderr.write("Failed test %d: %s\n" % (i, t.strip()))
            _print_exc(exc)
            _result({"status": "assert_failure", "index": i})
            sys.exit(0)
        except BaseException as exc:
            sys.stderr.write("Error in test %d: %s\n" % (i, t.strip()))
            _print_exc(exc)
            _result({"status": "runtime_error"})
            sys.exit(0)
    _result({"status": "success"})
)PY";

constexpr std::size_t kOutputCap = 32 * 1024;

std::string read_capped(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (size <= 2 * kOutputCap) {
        std::string s(size, '\0');
        in.read(s.data(), static_cast<std::streamsize>(size));
        return s;
    }
    std::string head(kOutputCap, '\0');
    in.read(head.data(), static_cast<std::streamsize>(kOutputCap));
    std::string tail(kOutputCap, '\0');
    in.seekg(static_cast<std::streamoff>(size - kOutputCap));
    in.read(tail.data(), static_cast<std::streamsize>(kOutputCap));
    return head + "\n[... " + std::to_string(size - 2 * kOutputCap) + " bytes omitted ...]\n" + tail;
}

std::optional<std::filesystem::path> resolve_executable(const std::string& name) {
    if (name.empty()) return std::nullopt;
    if (name.find('/') != std::string::npos) {
        if (::access(name.c_str(), X_OK) == 0) return std::filesystem::path(name);
        return std::nullopt;
    }
    const char* path_env = std::getenv("PATH");
    std::string_view paths = path_env ? path_env : "/usr/local/bin:/usr/bin:/bin";
    while (!paths.empty()) {
        const auto colon = paths.find(':');
        const auto dir = paths.substr(0, colon);
        paths = colon == std::string_view::npos ? std::string_view{} : paths.substr(colon + 1);
        if (dir.empty()) continue;
        auto candidate = std::filesystem::path(dir) / name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    }
    return std::nullopt;
}

/// Scratch directory owned by one execution.
class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& root) {
        thread_local std::mt19937_64 rng{std::random_device{}()};
        std::filesystem::create_directories(root);
        for (int tries = 0; tries < 16; ++tries) {
            auto candidate = root / ("bidhi-" + std::to_string(::getpid()) + "-" + std::to_string(rng()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw IoError("cannot create scratch directory under " + root.string());
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct ProcessOutcome {
    bool timed_out = false;
    bool exec_failed = false;
    int wait_status = 0;
    double duration = 0.0;
};

struct Limits {
    std::size_t memory_mb = 0;
    std::size_t file_mb = 0;
    bool isolate_network = false;
};

/// fork/exec with stdout and stderr redirected to files, a wall-clock
/// deadline, and the whole process group killed afterwards.
ProcessOutcome run_process(const std::filesystem::path& exe, const std::vector<std::string>& args,
                           const std::filesystem::path& cwd, const std::filesystem::path& out_path,
                           const std::filesystem::path& err_path, double timeout_seconds, const Limits& limits) {
    std::vector<char*> argv;
    std::string exe_str = exe.string();
    argv.push_back(exe_str.data());
    std::vector<std::string> owned = args;
    for (auto& a : owned) argv.push_back(a.data());
    argv.push_back(nullptr);

    const int out_fd = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    const int err_fd = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    const int null_fd = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
    if (out_fd < 0 || err_fd < 0 || null_fd < 0) {
        for (int fd : {out_fd, err_fd, null_fd})
            if (fd >= 0) ::close(fd);
        throw IoError("cannot open sandbox output files in " + cwd.string());
    }
    const std::string cwd_str = cwd.string();
    char* const envp[] = {const_cast<char*>("PATH=/usr/local/bin:/usr/bin:/bin"),
                          const_cast<char*>("LANG=C.UTF-8"), const_cast<char*>("PYTHONIOENCODING=utf-8"),
                          const_cast<char*>("PYTHONDONTWRITEBYTECODE=1"), nullptr};

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(out_fd);
        ::close(err_fd);
        ::close(null_fd);
        throw IoError("fork failed");
    }
    if (pid == 0) {
        // Child: async-signal-safe calls only.
        ::setpgid(0, 0);
        if (limits.isolate_network) {
#ifdef CLONE_NEWNET
            if (::unshare(CLONE_NEWUSER | CLONE_NEWNET) != 0) (void)::unshare(CLONE_NEWNET);
#endif
        }
        if (::chdir(cwd_str.c_str()) != 0) ::_exit(126);
        ::dup2(null_fd, 0);
        ::dup2(out_fd, 1);
        ::dup2(err_fd, 2);
#ifdef SYS_close_range
        ::syscall(SYS_close_range, 3U, ~0U, 0U);
#else
        for (int fd = 3; fd < 1024; ++fd) ::close(fd);
#endif
        if (limits.memory_mb > 0) {
            const rlim_t bytes = static_cast<rlim_t>(limits.memory_mb) * 1024 * 1024;
            struct rlimit rl{bytes, bytes};
            ::setrlimit(RLIMIT_AS, &rl);
        }
        if (limits.file_mb > 0) {
            const rlim_t bytes = static_cast<rlim_t>(limits.file_mb) * 1024 * 1024;
            struct rlimit rl{bytes, bytes};
            ::setrlimit(RLIMIT_FSIZE, &rl);
        }
        struct rlimit core{0, 0};
        ::setrlimit(RLIMIT_CORE, &core);
        ::execve(argv[0], argv.data(), envp);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(out_fd);
    ::close(err_fd);
    ::close(null_fd);

    ProcessOutcome outcome;
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_seconds));
    auto nap = std::chrono::microseconds(200);
    for (;;) {
        const pid_t r = ::waitpid(pid, &outcome.wait_status, WNOHANG);
        if (r == pid) break;
        if (r < 0 && errno != EINTR) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            ::kill(-pid, SIGKILL);
            ::kill(pid, SIGKILL);
            while (::waitpid(pid, &outcome.wait_status, 0) < 0 && errno == EINTR) {
            }
            outcome.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(nap);
        nap = std::min(nap * 2, std::chrono::microseconds(5000));
    }
    ::kill(-pid, SIGKILL); // stray grandchildren
    outcome.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcome.exec_failed = !outcome.timed_out && WIFEXITED(outcome.wait_status) && WEXITSTATUS(outcome.wait_status) == 127;
    return outcome;
}

std::string describe_exit(int wait_status) {
    if (WIFEXITED(wait_status)) return "exit code " + std::to_string(WEXITSTATUS(wait_status));
    if (WIFSIGNALED(wait_status)) return "signal " + std::to_string(WTERMSIG(wait_status));
    return "unknown status";
}

} // namespace

std::string_view to_string(ExecStatus status) noexcept {
    switch (status) {
    case ExecStatus::Success: return "Success";
    case ExecStatus::CompileError: return "CompileError";
    case ExecStatus::RuntimeError: return "RuntimeError";
    case ExecStatus::AssertFailure: return "AssertFailure";
    case ExecStatus::Timeout: return "Timeout";
    }
    return "RuntimeError";
}

ExecStatus exec_status_from_string(std::string_view s) {
    if (s == "Success") return ExecStatus::Success;
    if (s == "CompileError") return ExecStatus::CompileError;
    if (s == "RuntimeError") return ExecStatus::RuntimeError;
    if (s == "AssertFailure") return ExecStatus::AssertFailure;
    if (s == "Timeout") return ExecStatus::Timeout;
    throw Error("unknown execution status '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const ExecutionResult& r) {
    j = nlohmann::json{{"status", to_string(r.status)},
                       {"stdout", r.stdout_text},
                       {"stderr", r.stderr_text},
                       {"duration", r.duration},
                       {"failing_assert_index", nullptr}};
    if (r.failing_assert_index) j["failing_assert_index"] = *r.failing_assert_index;
}

void from_json(const nlohmann::json& j, ExecutionResult& r) {
    r.status = exec_status_from_string(j.at("status").get<std::string>());
    r.stdout_text = j.value("stdout", std::string{});
    r.stderr_text = j.value("stderr", std::string{});
    r.duration = j.value("duration", 0.0);
    r.failing_assert_index.reset();
    if (auto it = j.find("failing_assert_index"); it != j.end() && !it->is_null())
        r.failing_assert_index = it->get<int>();
}

struct Sandbox::Impl {
    Impl(SandboxConfig c, std::ptrdiff_t slots) : config(std::move(c)), pool(slots) {}

    SandboxConfig config;
    std::optional<std::filesystem::path> python;
    std::counting_semaphore<> pool;

    struct Run {
        ProcessOutcome process;
        std::string stdout_text;
        std::string stderr_text;
        std::optional<nlohmann::json> result;
    };

    Run run(const std::vector<std::string>& mode_args,
            const std::vector<std::pair<std::string, std::string>>& files, double timeout) {
        if (!python || ::access(python->c_str(), X_OK) != 0)
            throw SandboxUnavailable("python interpreter '" + config.python + "' not found");

        ScratchDir scratch(config.scratch_root);
        for (const auto& [name, content] : files) {
            std::ofstream out(scratch.path() / name, std::ios::binary);
            out.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (!out) throw IoError("cannot write sandbox input " + name);
        }
        thread_local std::mt19937_64 rng{std::random_device{}()};
        const auto result_name = ".result-" + std::to_string(rng()) + ".json";

        std::vector<std::string> args{"-I", "-B", "-c", kHarness};
        args.insert(args.end(), mode_args.begin(), mode_args.end());
        args.push_back(result_name);

        Limits limits{config.memory_limit_mb, config.file_size_limit_mb, config.isolate_network};
        Run out;
        {
            pool.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{pool};
            out.process = run_process(*python, args, scratch.path(), scratch.path() / ".stdout",
                                      scratch.path() / ".stderr", timeout, limits);
        }
        if (out.process.exec_failed)
            throw SandboxUnavailable("could not execute interpreter " + python->string());
        out.stdout_text = read_capped(scratch.path() / ".stdout");
        out.stderr_text = read_capped(scratch.path() / ".stderr");
        if (!out.process.timed_out) {
            std::ifstream in(scratch.path() / result_name);
            if (in) {
                try {
                    out.result = nlohmann::json::parse(in);
                } catch (const nlohmann::json::exception&) {
                }
            }
        }
        return out;
    }
};

Sandbox::Sandbox(SandboxConfig config) {
    std::size_t slots = config.max_processes;
    if (slots == 0) slots = std::max(1u, std::thread::hardware_concurrency());
    if (config.scratch_root.empty()) config.scratch_root = std::filesystem::temp_directory_path();
    impl_ = std::make_unique<Impl>(std::move(config), static_cast<std::ptrdiff_t>(slots));
    impl_->python = resolve_executable(impl_->config.python);
}

Sandbox::~Sandbox() = default;

std::filesystem::path Sandbox::interpreter() const {
    if (!impl_->python) throw SandboxUnavailable("python interpreter '" + impl_->config.python + "' not found");
    return *impl_->python;
}

bool Sandbox::available() const noexcept {
    return impl_->python.has_value();
}

ParseResult Sandbox::parse_only(const std::string& code) {
    auto run = impl_->run({"parse", "candidate.py"}, {{"candidate.py", code}}, 30.0);
    ParseResult out;
    out.stderr_text = run.stderr_text;
    if (!run.result) {
        out.stderr_text += "sandbox: parse check produced no result (" + describe_exit(run.process.wait_status) + ")\n";
        return out;
    }
    out.ok = run.result->value("status", "") == "ok";
    return out;
}

std::vector<bool> Sandbox::parse_each(std::span<const std::string> snippets) {
    if (snippets.empty()) return {};
    const nlohmann::json arr(std::vector<std::string>(snippets.begin(), snippets.end()));
    auto run = impl_->run({"parse_each", "snippets.json"}, {{"snippets.json", arr.dump()}}, 30.0);
    std::vector<bool> out(snippets.size(), false);
    if (!run.result || !run.result->contains("ok")) return out;
    const auto& oks = (*run.result)["ok"];
    for (std::size_t i = 0; i < out.size() && i < oks.size(); ++i) out[i] = oks[i].get<bool>();
    return out;
}

ExecutionResult Sandbox::execute(const std::string& code, std::span<const std::string> tests, double timeout_seconds) {
    if (!(timeout_seconds > 0)) throw Error("execute: timeout must be positive");
    const nlohmann::json tests_json(std::vector<std::string>(tests.begin(), tests.end()));
    auto run = impl_->run({"exec", "candidate.py", "tests.json"},
                          {{"candidate.py", code}, {"tests.json", tests_json.dump()}}, timeout_seconds);

    ExecutionResult r;
    r.stdout_text = std::move(run.stdout_text);
    r.stderr_text = std::move(run.stderr_text);
    r.duration = run.process.duration;
    if (run.process.timed_out) {
        r.status = ExecStatus::Timeout;
        std::ostringstream msg;
        msg << "TimeoutError: execution exceeded the " << timeout_seconds << " s time limit\n";
        r.stderr_text += msg.str();
        return r;
    }
    if (!run.result) {
        r.status = ExecStatus::RuntimeError;
        r.stderr_text += "sandbox: program terminated without a result (" + describe_exit(run.process.wait_status) + ")\n";
        return r;
    }
    const auto status = run.result->value("status", "");
    if (status == "success") {
        r.status = ExecStatus::Success;
    } else if (status == "compile_error") {
        r.status = ExecStatus::CompileError;
    } else if (status == "assert_failure") {
        r.status = ExecStatus::AssertFailure;
        r.failing_assert_index = run.result->value("index", 0);
    } else {
        r.status = ExecStatus::RuntimeError;
    }
    return r;
}

} // namespace bidhi
