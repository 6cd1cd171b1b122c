#include "bidhi/backends.hpp"
#include "bidhi/error.hpp"

#include "support.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace bidhi;

namespace {

/// Local chat endpoint whose handler is supplied by each test.
class FakeServer {
public:
    explicit FakeServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::jthread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() { server_.stop(); }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::jthread thread_;
};

BackendConfig http_cfg(const std::string& url) {
    BackendConfig c;
    c.backend_id = "fake";
    c.endpoint = url;
    c.model_name = "fake-model";
    c.retry_backoff = 0.01;
    c.request_timeout = 5;
    return c;
}

const std::vector<ChatMessage> kPrompt{{Role::System, "sys"}, {Role::User, "write code"}};
const CallKey kKey{"T1", "VANILLA", Stage::Generation, 0};

} // namespace

TEST_CASE("request body, bearer token and response content") {
    nlohmann::json seen;
    std::string auth;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"content":"def f(): pass"})", "application/json");
    });
    ::setenv("BIDHI_API_KEY_FAKE", "s3cret", 1);
    HttpBackend b(http_cfg(server.url()));
    CHECK(b.complete(kPrompt, kKey) == "def f(): pass");
    ::unsetenv("BIDHI_API_KEY_FAKE");
    CHECK(seen["model"] == "fake-model");
    CHECK(seen["temperature"] == 0.0);
    CHECK(seen["max_tokens"] == 2048);
    REQUIRE(seen["messages"].size() == 2);
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][1]["content"] == "write code");
    CHECK(auth == "Bearer s3cret");
}

TEST_CASE("transient statuses are retried") {
    std::atomic<int> calls{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) < 2) {
            res.status = calls.load() == 1 ? 429 : 503;
            return;
        }
        res.set_content(R"({"content":"ok"})", "application/json");
    });
    HttpBackend b(http_cfg(server.url()));
    CHECK(b.complete(kPrompt, kKey) == "ok");
    CHECK(calls.load() == 3);
}

TEST_CASE("exhausted retries and client errors surface as BackendHttpError") {
    std::atomic<int> calls{0};
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        res.status = req.body.find("bad") != std::string::npos ? 400 : 500;
        res.set_content("nope", "text/plain");
    });
    HttpBackend b(http_cfg(server.url()));
    try {
        b.complete(kPrompt, kKey);
        FAIL("expected BackendHttpError");
    } catch (const BackendHttpError& e) {
        CHECK(e.status() == 500);
    }
    CHECK(calls.load() == 3);

    calls = 0;
    const std::vector<ChatMessage> bad{{Role::User, "bad"}};
    try {
        b.complete(bad, kKey);
        FAIL("expected BackendHttpError");
    } catch (const BackendHttpError& e) {
        CHECK(e.status() == 400);
    }
    CHECK(calls.load() == 1);
}

TEST_CASE("malformed success bodies are errors") {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"text":"wrong key"})", "application/json");
    });
    HttpBackend b(http_cfg(server.url()));
    CHECK_THROWS_AS(b.complete(kPrompt, kKey), BackendHttpError);
}

TEST_CASE("slow responses time out") {
    FakeServer server([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.set_content(R"({"content":"late"})", "application/json");
    });
    auto c = http_cfg(server.url());
    c.request_timeout = 0.3;
    c.max_attempts = 1;
    HttpBackend b(c);
    CHECK_THROWS_AS(b.complete(kPrompt, kKey), BackendTimeout);
}

namespace {

/// A loopback port that was free a moment ago and has nothing listening.
int closed_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

} // namespace

TEST_CASE("connection refused is reported with status 0") {
    const int port = closed_port();
    auto c = http_cfg("http://127.0.0.1:" + std::to_string(port) + "/v1/chat");
    c.max_attempts = 2;
    HttpBackend b(c);
    try {
        b.complete(kPrompt, kKey);
        FAIL("expected BackendHttpError");
    } catch (const BackendHttpError& e) {
        CHECK(e.status() == 0);
    }
}

TEST_CASE("in-flight requests never exceed the rate limit") {
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        const int now = ++in_flight;
        int expected = peak.load();
        while (now > expected && !peak.compare_exchange_weak(expected, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(80));
        --in_flight;
        res.set_content(R"({"content":"ok"})", "application/json");
    });
    auto c = http_cfg(server.url());
    c.rate_limit = 2;
    HttpBackend b(c);
    std::atomic<int> ok{0};
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 8; ++i)
            threads.emplace_back([&, i] {
                if (b.complete(kPrompt, CallKey{"T" + std::to_string(i), "VANILLA", Stage::Generation, 0}) == "ok")
                    ++ok;
            });
    }
    CHECK(ok.load() == 8);
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
}
