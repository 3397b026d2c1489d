#include "visvar/http_backend.hpp"

#include <httplib.h>

#include "visvar/errors.hpp"

namespace visvar::backends {

ParsedUrl parse_url(const std::string& url) {
    ParsedUrl out;
    size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint is not a URL: " + url);
    out.scheme = url.substr(0, scheme_end);
    if (out.scheme != "http")
        throw ConfigError("unsupported endpoint scheme '" + out.scheme + "' in " + url);
    size_t host_start = scheme_end + 3;
    size_t path_start = url.find('/', host_start);
    std::string hostport = url.substr(
        host_start, path_start == std::string::npos ? std::string::npos : path_start - host_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    size_t colon = hostport.rfind(':');
    if (colon != std::string::npos) {
        out.host = hostport.substr(0, colon);
        out.port = std::atoi(hostport.substr(colon + 1).c_str());
        if (out.port <= 0 || out.port > 65535) throw ConfigError("bad port in endpoint " + url);
    } else {
        out.host = hostport;
        out.port = 80;
    }
    if (out.host.empty()) throw ConfigError("endpoint has no host: " + url);
    return out;
}

HttpTransport::HttpTransport(const BackendProfile& profile)
    : url_(parse_url(profile.endpoint)),
      bearer_token_(profile.bearer_token),
      timeout_(profile.timeout) {}

nlohmann::json HttpTransport::call(Role, const nlohmann::json& body) {
    httplib::Client client(url_.host, url_.port);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!bearer_token_.empty()) headers.emplace("Authorization", "Bearer " + bearer_token_);

    auto result = client.Post(url_.path, headers, body.dump(), "application/json");
    if (!result)
        throw TransportError("connection failed: " + httplib::to_string(result.error()), true);
    if (result->status == 429 || result->status >= 500)
        throw TransportError("HTTP " + std::to_string(result->status), true);
    if (result->status != 200)
        throw TransportError("HTTP " + std::to_string(result->status) + ": " +
                                 result->body.substr(0, 200),
                             false);
    try {
        return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError("reply is not JSON: " + std::string(e.what()), false);
    }
}

}  // namespace visvar::backends
