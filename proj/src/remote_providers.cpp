#include "cxrsynth/remote_providers.hpp"

#include "cxrsynth/error.hpp"
#include "cxrsynth/protocol.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <thread>

namespace cxrsynth {

std::chrono::milliseconds RetryPolicy::backoff(std::uint32_t retry) const {
    const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry);
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(std::min(ms, static_cast<double>(max_backoff.count()))));
}

void ProviderEndpoint::validate() const {
    if (base_url.empty()) throw Error(ErrorCode::ConfigInvalid, std::string(to_string(role)) + ": base_url is empty");
    if (!(timeout_s > 0)) throw Error(ErrorCode::ConfigInvalid, std::string(to_string(role)) + ": timeout must be positive");
    if (max_concurrent < 1) {
        throw Error(ErrorCode::ConfigInvalid, std::string(to_string(role)) + ": max_concurrent must be at least 1");
    }
    if (retry.max_attempts < 1) {
        throw Error(ErrorCode::ConfigInvalid, std::string(to_string(role)) + ": retry.max_attempts must be at least 1");
    }
}

void to_json(nlohmann::json& j, const ProviderEndpoint& e) {
    j = {{"base_url", e.base_url},
         {"timeout_s", e.timeout_s},
         {"max_concurrent", e.max_concurrent},
         {"retry",
          {{"max_attempts", e.retry.max_attempts},
           {"initial_backoff_ms", e.retry.initial_backoff.count()},
           {"multiplier", e.retry.multiplier},
           {"max_backoff_ms", e.retry.max_backoff.count()}}}};
    // auth_token is never serialized.
}

void from_json(const nlohmann::json& j, ProviderEndpoint& e) {
    e.base_url = j.value("base_url", e.base_url);
    e.timeout_s = j.value("timeout_s", e.timeout_s);
    e.max_concurrent = j.value("max_concurrent", e.max_concurrent);
    if (j.contains("auth_token") && j["auth_token"].is_string()) e.auth_token = j["auth_token"].get<std::string>();
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        e.retry.max_attempts = r.value("max_attempts", e.retry.max_attempts);
        e.retry.initial_backoff = std::chrono::milliseconds(r.value("initial_backoff_ms", e.retry.initial_backoff.count()));
        e.retry.multiplier = r.value("multiplier", e.retry.multiplier);
        e.retry.max_backoff = std::chrono::milliseconds(r.value("max_backoff_ms", e.retry.max_backoff.count()));
    }
}

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) override {
        httplib::Client client(base_url);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers h(headers.begin(), headers.end());
        auto res = client.Post(path, h, body, "application/json");
        if (!res) {
            const auto err = res.error();
            const std::string what = base_url + path + ": " + httplib::to_string(err);
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                throw Error(ErrorCode::Timeout, what);
            }
            throw Error(ErrorCode::ProviderUnavailable, what);
        }
        return {res->status, res->body};
    }
};

ErrorCode code_from_wire(const std::string& code) {
    if (code == "ProviderRejectedPrompt") return ErrorCode::ProviderRejectedPrompt;
    if (code == "DimensionMismatch") return ErrorCode::DimensionMismatch;
    if (code == "Timeout") return ErrorCode::Timeout;
    return ErrorCode::ProviderUnavailable;
}

} // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

EndpointClient::EndpointClient(ProviderEndpoint endpoint, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), sleep_(std::move(sleeper)) {
    endpoint_.validate();
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    slots_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(endpoint_.max_concurrent));
}

nlohmann::json EndpointClient::call(const nlohmann::json& request) {
    const std::string path(protocol::endpoint_path(endpoint_.role));
    const std::string body = request.dump();
    std::map<std::string, std::string> headers;
    if (endpoint_.auth_token) headers["Authorization"] = "Bearer " + *endpoint_.auth_token;
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(endpoint_.timeout_s * 1000.0));

    std::optional<Error> last;
    for (std::uint32_t attempt = 0; attempt < endpoint_.retry.max_attempts; ++attempt) {
        if (attempt > 0) sleep_(endpoint_.retry.backoff(attempt - 1));
        HttpResponse res;
        try {
            slots_->acquire();
            struct Release {
                std::counting_semaphore<>* s;
                ~Release() { s->release(); }
            } release{slots_.get()};
            res = transport_->post(endpoint_.base_url, path, body, headers, timeout);
        } catch (const Error& e) {
            last = e;
            continue;
        }

        const auto parsed = nlohmann::json::parse(res.body, nullptr, false);
        if (res.status >= 200 && res.status < 300) {
            if (parsed.is_discarded()) {
                throw Error(ErrorCode::ProviderUnavailable, path + " returned a non-JSON body");
            }
            const auto problems = protocol::validate_response(endpoint_.role, parsed);
            if (!problems.empty()) {
                throw Error(ErrorCode::ProviderUnavailable, path + " response violates the v1 schema: " + problems.front());
            }
            return parsed;
        }

        bool retryable = res.status >= 500 || res.status == 429;
        ErrorCode code = ErrorCode::ProviderUnavailable;
        std::string message = "HTTP " + std::to_string(res.status);
        if (!parsed.is_discarded() && protocol::validate_error_body(parsed).empty()) {
            retryable = parsed["retryable"].get<bool>();
            code = code_from_wire(parsed["code"].get<std::string>());
            message += " " + parsed["code"].get<std::string>() + ": " + parsed["message"].get<std::string>();
        }
        if (!retryable) throw Error(code, path + ": " + message);
        last = Error(code, path + ": " + message);
    }
    throw *last;
}

namespace {

class RemoteTextGenerator final : public TextGenerator {
public:
    explicit RemoteTextGenerator(std::shared_ptr<EndpointClient> c) : client_(std::move(c)) {}
    std::string generate_text(std::string_view prompt, const TextGenParams& params) override {
        return client_->call(protocol::text_request(prompt, params))["text"].get<std::string>();
    }

private:
    std::shared_ptr<EndpointClient> client_;
};

class RemoteEntityExtractor final : public EntityExtractor {
public:
    explicit RemoteEntityExtractor(std::shared_ptr<EndpointClient> c) : client_(std::move(c)) {}
    std::vector<ExtractedEntity> extract_entities(std::string_view text) override {
        const auto res = client_->call(protocol::extract_request(text));
        std::vector<ExtractedEntity> out;
        for (const auto& e : res["entities"]) {
            out.push_back({e["text"].get<std::string>(), *parse_category(e["category"].get<std::string>())});
        }
        return out;
    }

private:
    std::shared_ptr<EndpointClient> client_;
};

class RemoteImageGenerator final : public ImageGenerator {
public:
    explicit RemoteImageGenerator(std::shared_ptr<EndpointClient> c) : client_(std::move(c)) {}
    Blob generate_image(std::string_view prompt, const ImageGenParams& params) override {
        return base64_decode(client_->call(protocol::image_request(prompt, params))["image_base64"].get<std::string>());
    }

private:
    std::shared_ptr<EndpointClient> client_;
};

class RemoteQualityJudge final : public QualityJudge {
public:
    explicit RemoteQualityJudge(std::shared_ptr<EndpointClient> c) : client_(std::move(c)) {}
    std::string quality_answer(const Blob& image, std::string_view query) override {
        return client_->call(protocol::judge_request(image, query))["answer"].get<std::string>();
    }

private:
    std::shared_ptr<EndpointClient> client_;
};

class RemoteImageEmbedder final : public ImageEmbedder {
public:
    explicit RemoteImageEmbedder(std::shared_ptr<EndpointClient> c) : client_(std::move(c)) {}
    std::vector<float> embed_image(const Blob& image) override {
        return client_->call(protocol::embed_request(image))["embedding"].get<std::vector<float>>();
    }

private:
    std::shared_ptr<EndpointClient> client_;
};

} // namespace

ProviderSet make_remote_providers(const std::map<ProviderRole, ProviderEndpoint>& endpoints,
                                  std::shared_ptr<HttpTransport> transport, Sleeper sleeper) {
    ProviderSet set;
    for (const auto& [role, ep] : endpoints) {
        ProviderEndpoint e = ep;
        e.role = role;
        auto client = std::make_shared<EndpointClient>(e, transport, sleeper);
        switch (role) {
        case ProviderRole::TextGen: set.text = std::make_shared<RemoteTextGenerator>(client); break;
        case ProviderRole::EntityExtract: set.extractor = std::make_shared<RemoteEntityExtractor>(client); break;
        case ProviderRole::ImageGen: set.image = std::make_shared<RemoteImageGenerator>(client); break;
        case ProviderRole::QualityJudge: set.judge = std::make_shared<RemoteQualityJudge>(client); break;
        case ProviderRole::ImageEmbed: set.embedder = std::make_shared<RemoteImageEmbedder>(client); break;
        }
    }
    return set;
}

} // namespace cxrsynth
