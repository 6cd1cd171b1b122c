#pragma once

#include <string>

namespace bidhi::detail {

struct ParsedUrl {
    std::string base; // scheme://host[:port]
    std::string path; // starts with '/'
};

ParsedUrl parse_url(const std::string& url);

struct HttpOutcome {
    enum class Kind { Ok, Timeout, ConnectionFailed };

    Kind kind = Kind::Ok;
    int status = 0;
    std::string body;
    std::string detail;
};

/// One POST of a JSON body; no retries.
HttpOutcome post_json(const std::string& url, const std::string& body, double timeout_seconds,
                      const std::string& bearer_token);

} // namespace bidhi::detail
