#pragma once

#include "cxrsynth/providers.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

namespace cxrsynth {

struct RetryPolicy {
    std::uint32_t max_attempts = 4;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{5000};

    // Delay before retry number `retry` (0-based).
    std::chrono::milliseconds backoff(std::uint32_t retry) const;
};

struct ProviderEndpoint {
    ProviderRole role = ProviderRole::TextGen;
    std::string base_url; // e.g. http://127.0.0.1:8000
    double timeout_s = 120.0;
    std::size_t max_concurrent = 4;
    std::optional<std::string> auth_token;
    RetryPolicy retry;

    // Throws Error(ConfigInvalid).
    void validate() const;
};

void to_json(nlohmann::json& j, const ProviderEndpoint& e);
// Role is not part of the object; callers set it from the enclosing key.
void from_json(const nlohmann::json& j, ProviderEndpoint& e);

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Blocking HTTP POST. Throws Error(Timeout) when the deadline passes and
// Error(ProviderUnavailable) for connection failures.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                              const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// One endpoint: bounds in-flight requests with a semaphore, retries
// transport failures and retryable error bodies with exponential backoff,
// and resends the identical request body each time.
class EndpointClient {
public:
    EndpointClient(ProviderEndpoint endpoint, std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});

    // Returns the validated response body.
    nlohmann::json call(const nlohmann::json& request);

    const ProviderEndpoint& endpoint() const { return endpoint_; }

private:
    ProviderEndpoint endpoint_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleep_;
    std::unique_ptr<std::counting_semaphore<>> slots_;
};

// Builds HTTP-backed providers for the roles present in `endpoints`; roles
// without an endpoint are left null.
ProviderSet make_remote_providers(const std::map<ProviderRole, ProviderEndpoint>& endpoints,
                                  std::shared_ptr<HttpTransport> transport, Sleeper sleeper = {});

} // namespace cxrsynth
