#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "http_common.hpp"

#include "bidhi/error.hpp"

#include <cmath>

namespace bidhi::detail {

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint", "not a URL: " + url);
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw ConfigError("endpoint", "unsupported URL scheme '" + scheme + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.base = url;
        out.path = "/";
    } else {
        out.base = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    if (out.base.size() <= scheme_end + 3) throw ConfigError("endpoint", "URL has no host: " + url);
    return out;
}

HttpOutcome post_json(const std::string& url, const std::string& body, double timeout_seconds,
                      const std::string& bearer_token) {
    const auto parsed = parse_url(url);
    httplib::Client client(parsed.base);
    const auto whole = static_cast<time_t>(std::floor(timeout_seconds));
    const auto micros = static_cast<time_t>((timeout_seconds - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, micros);
    client.set_read_timeout(whole, micros);
    client.set_write_timeout(whole, micros);
    if (!bearer_token.empty()) client.set_bearer_token_auth(bearer_token);

    auto res = client.Post(parsed.path, body, "application/json");
    HttpOutcome out;
    if (!res) {
        const auto err = res.error();
        out.detail = httplib::to_string(err);
        out.kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                       ? HttpOutcome::Kind::Timeout
                       : HttpOutcome::Kind::ConnectionFailed;
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

} // namespace bidhi::detail
