#pragma once

#include <string>

#include "visvar/backends.hpp"

namespace visvar::backends {

struct ParsedUrl {
    std::string scheme;  // http only; https needs a TLS-enabled build
    std::string host;
    int port = 80;
    std::string path = "/";
};

ParsedUrl parse_url(const std::string& url);  // throws ConfigError

// POSTs role-shaped JSON bodies to the profile endpoint. Connection errors,
// timeouts, 429 and 5xx are transient; other HTTP errors are permanent.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(const BackendProfile& profile);

    nlohmann::json call(Role role, const nlohmann::json& body) override;

private:
    ParsedUrl url_;
    std::string bearer_token_;
    std::chrono::milliseconds timeout_;
};

}  // namespace visvar::backends
