#include "cxrsynth/error.hpp"
#include "cxrsynth/image_synth.hpp"
#include "cxrsynth/mock_providers.hpp"
#include "cxrsynth/protocol.hpp"
#include "cxrsynth/remote_providers.hpp"
#include "cxrsynth/report_synth.hpp"
#include "cxrsynth/sampler.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

using namespace cxrsynth;
using namespace std::chrono_literals;
namespace proto = cxrsynth::protocol;

namespace {

class FakeTransport : public HttpTransport {
public:
    using Step = std::function<HttpResponse()>;

    HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout) override {
        Step step;
        {
            std::lock_guard lock(mu);
            bodies.push_back(body);
            paths.push_back(base_url + path);
            last_headers = headers;
            last_timeout = timeout;
            if (!steps.empty()) {
                step = steps.front();
                steps.pop_front();
            }
        }
        const int now = ++in_flight;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
        }
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
        --in_flight;
        if (step) return step();
        return {200, proto::text_response("ok").dump()};
    }

    std::mutex mu;
    std::deque<Step> steps;
    std::vector<std::string> bodies;
    std::vector<std::string> paths;
    std::map<std::string, std::string> last_headers;
    std::chrono::milliseconds last_timeout{0};
    std::chrono::milliseconds delay{0};
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
};

FakeTransport::Step status(int code, nlohmann::json body) {
    return [code, body] { return HttpResponse{code, body.dump()}; };
}

FakeTransport::Step raise(ErrorCode code) {
    return [code]() -> HttpResponse { throw Error(code, "fake transport"); };
}

ProviderEndpoint endpoint(ProviderRole role = ProviderRole::TextGen) {
    ProviderEndpoint e;
    e.role = role;
    e.base_url = "http://sidecar:8000";
    e.timeout_s = 2.5;
    e.retry.max_attempts = 4;
    e.retry.initial_backoff = 100ms;
    e.retry.multiplier = 2.0;
    e.retry.max_backoff = 300ms;
    return e;
}

struct Sleeps {
    std::vector<std::chrono::milliseconds> seen;
    Sleeper fn() {
        return [this](std::chrono::milliseconds d) { seen.push_back(d); };
    }
};

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::AllZero;
}

} // namespace

TEST(RetryPolicy, ExponentialBackoffIsCapped) {
    RetryPolicy p;
    p.initial_backoff = 100ms;
    p.multiplier = 3.0;
    p.max_backoff = 1000ms;
    EXPECT_EQ(p.backoff(0), 100ms);
    EXPECT_EQ(p.backoff(1), 300ms);
    EXPECT_EQ(p.backoff(2), 900ms);
    EXPECT_EQ(p.backoff(3), 1000ms);
}

TEST(EndpointClient, RetriesTransientFailuresWithTheSameBody) {
    auto t = std::make_shared<FakeTransport>();
    t->steps = {raise(ErrorCode::Timeout), status(503, proto::error_body("Busy", "later", true)),
                status(200, proto::text_response("done"))};
    Sleeps sleeps;
    EndpointClient c(endpoint(), t, sleeps.fn());
    const auto req = proto::text_request("prompt", {});
    EXPECT_EQ(c.call(req)["text"], "done");
    ASSERT_EQ(t->bodies.size(), 3u);
    EXPECT_EQ(t->bodies[0], t->bodies[1]);
    EXPECT_EQ(t->bodies[1], t->bodies[2]);
    EXPECT_EQ(t->bodies[0], req.dump());
    EXPECT_EQ(t->paths[0], "http://sidecar:8000/generate_text");
    EXPECT_EQ(sleeps.seen, (std::vector<std::chrono::milliseconds>{100ms, 200ms}));
    EXPECT_EQ(t->last_timeout, 2500ms);
}

TEST(EndpointClient, GivesUpAfterMaxAttempts) {
    auto t = std::make_shared<FakeTransport>();
    for (int i = 0; i < 10; ++i) t->steps.push_back(raise(ErrorCode::Timeout));
    Sleeps sleeps;
    EndpointClient c(endpoint(), t, sleeps.fn());
    EXPECT_EQ(code_of([&] { c.call(proto::text_request("p", {})); }), ErrorCode::Timeout);
    EXPECT_EQ(t->bodies.size(), 4u);
    EXPECT_EQ(sleeps.seen, (std::vector<std::chrono::milliseconds>{100ms, 200ms, 300ms}));
}

TEST(EndpointClient, NonRetryableErrorBodyFailsImmediately) {
    auto t = std::make_shared<FakeTransport>();
    t->steps = {status(422, proto::error_body("ProviderRejectedPrompt", "unsafe", false))};
    Sleeps sleeps;
    EndpointClient c(endpoint(), t, sleeps.fn());
    EXPECT_EQ(code_of([&] { c.call(proto::text_request("p", {})); }), ErrorCode::ProviderRejectedPrompt);
    EXPECT_EQ(t->bodies.size(), 1u);
    EXPECT_TRUE(sleeps.seen.empty());
}

TEST(EndpointClient, ClientErrorWithoutBodyIsNotRetried) {
    auto t = std::make_shared<FakeTransport>();
    t->steps = {[] { return HttpResponse{404, "not found"}; }};
    EndpointClient c(endpoint(), t, Sleeps{}.fn());
    EXPECT_EQ(code_of([&] { c.call(proto::text_request("p", {})); }), ErrorCode::ProviderUnavailable);
    EXPECT_EQ(t->bodies.size(), 1u);
}

TEST(EndpointClient, TooManyRequestsIsRetried) {
    auto t = std::make_shared<FakeTransport>();
    t->steps = {[] { return HttpResponse{429, ""}; }, status(200, proto::text_response("x"))};
    Sleeps sleeps;
    EndpointClient c(endpoint(), t, sleeps.fn());
    EXPECT_EQ(c.call(proto::text_request("p", {}))["text"], "x");
    EXPECT_EQ(sleeps.seen.size(), 1u);
}

TEST(EndpointClient, SchemaViolatingResponseIsAnError) {
    auto t = std::make_shared<FakeTransport>();
    t->steps = {status(200, {{"text", "missing version"}})};
    EndpointClient c(endpoint(), t, Sleeps{}.fn());
    EXPECT_EQ(code_of([&] { c.call(proto::text_request("p", {})); }), ErrorCode::ProviderUnavailable);
}

TEST(EndpointClient, SendsBearerTokenButNeverSerializesIt) {
    auto t = std::make_shared<FakeTransport>();
    auto e = endpoint();
    e.auth_token = "s3cret";
    EndpointClient c(e, t, Sleeps{}.fn());
    c.call(proto::text_request("p", {}));
    EXPECT_EQ(t->last_headers.at("Authorization"), "Bearer s3cret");
    const nlohmann::json j = e;
    EXPECT_EQ(j.dump().find("s3cret"), std::string::npos);
    EXPECT_FALSE(j.contains("auth_token"));
}

TEST(EndpointClient, BoundsConcurrentRequests) {
    auto t = std::make_shared<FakeTransport>();
    t->delay = 20ms;
    auto e = endpoint();
    e.max_concurrent = 2;
    EndpointClient c(e, t, Sleeps{}.fn());
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { c.call(proto::text_request("p", {})); });
    for (auto& th : threads) th.join();
    EXPECT_EQ(t->bodies.size(), 8u);
    EXPECT_LE(t->max_in_flight.load(), 2);
    EXPECT_EQ(t->max_in_flight.load(), 2);
}

TEST(ProviderEndpoint, Validation) {
    auto e = endpoint();
    EXPECT_NO_THROW(e.validate());
    e.max_concurrent = 0;
    EXPECT_THROW(e.validate(), Error);
    e = endpoint();
    e.base_url.clear();
    EXPECT_THROW(e.validate(), Error);
    e = endpoint();
    e.timeout_s = 0;
    EXPECT_THROW(e.validate(), Error);
}

namespace {

// A sidecar on localhost that serves the v1 protocol from the mock providers
// and rejects requests that violate the schema.
class FakeSidecar {
public:
    explicit FakeSidecar(ProviderSet backend) : backend_(std::move(backend)) {
        using httplib::Request;
        using httplib::Response;
        auto route = [this](ProviderRole role, auto handler) {
            server_.Post(std::string(proto::endpoint_path(role)), [this, role, handler](const Request& req, Response& res) {
                ++requests;
                const auto body = nlohmann::json::parse(req.body, nullptr, false);
                const auto problems = proto::validate_request(role, body);
                if (!problems.empty()) {
                    res.status = 400;
                    res.set_content(proto::error_body("BadRequest", problems.front(), false).dump(), "application/json");
                    return;
                }
                try {
                    res.set_content(handler(body).dump(), "application/json");
                } catch (const Error& e) {
                    res.status = 503;
                    res.set_content(proto::error_body(std::string(to_string(e.code())), e.what(), true).dump(),
                                    "application/json");
                }
            });
        };
        route(ProviderRole::TextGen, [this](const nlohmann::json& b) {
            TextGenParams p;
            p.temperature = b["temperature"];
            p.seed = b["seed"];
            p.max_tokens = b["max_tokens"];
            return proto::text_response(backend_.text->generate_text(b["prompt"].get<std::string>(), p));
        });
        route(ProviderRole::EntityExtract, [this](const nlohmann::json& b) {
            return proto::extract_response(backend_.extractor->extract_entities(b["text"].get<std::string>()));
        });
        route(ProviderRole::ImageGen, [this](const nlohmann::json& b) {
            ImageGenParams p;
            p.guidance_scale = b["guidance_scale"];
            p.steps = b["steps"];
            p.seed = b["seed"];
            return proto::image_response(backend_.image->generate_image(b["prompt"].get<std::string>(), p));
        });
        route(ProviderRole::QualityJudge, [this](const nlohmann::json& b) {
            return proto::judge_response(backend_.judge->quality_answer(
                base64_decode(b["image_base64"].get<std::string>()), b["query"].get<std::string>()));
        });
        route(ProviderRole::ImageEmbed, [this](const nlohmann::json& b) {
            return proto::embed_response(backend_.embedder->embed_image(base64_decode(b["image_base64"].get<std::string>())));
        });
        server_.Get(std::string(proto::kHealthPath), [](const Request&, Response& res) {
            res.set_content(nlohmann::json({{"protocol_version", proto::kVersion}, {"status", "ok"}}).dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeSidecar() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::atomic<int> requests{0};

private:
    ProviderSet backend_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::map<ProviderRole, ProviderEndpoint> endpoints_for(const std::string& url) {
    std::map<ProviderRole, ProviderEndpoint> out;
    for (ProviderRole r : kAllRoles) {
        ProviderEndpoint e;
        e.base_url = url;
        e.timeout_s = 10;
        e.retry.max_attempts = 2;
        e.retry.initial_backoff = 1ms;
        out[r] = e;
    }
    return out;
}

} // namespace

TEST(RemoteProviders, WireRoundTripMatchesInProcessProviders) {
    auto catalog = fixtures::make_catalog(4, 4);
    MockPolicy policy;
    policy.seed = 3;
    policy.embedding_dim = 16;
    policy.extra_entity_prob = 0.3;
    auto local = make_mock_providers(catalog, policy);
    FakeSidecar sidecar(make_mock_providers(catalog, policy));
    auto remote = make_remote_providers(endpoints_for(sidecar.url()), make_http_transport());

    httplib::Client health(sidecar.url());
    auto h = health.Get(std::string(proto::kHealthPath));
    ASSERT_TRUE(h);
    EXPECT_EQ(h->status, 200);
    EXPECT_EQ(nlohmann::json::parse(h->body)["protocol_version"], "v1");

    BalancedSampler sampler(*catalog, SamplerConfig{});
    FrequencyLedger ledger(15);
    Rng rng(1);
    const EntitySet set = sampler.sample(ledger, rng);
    ReportSynthConfig rc;
    const auto a = synthesize_report(set, *catalog, *local.text, *local.extractor, rc, 77);
    const auto b = synthesize_report(set, *catalog, *remote.text, *remote.extractor, rc, 77);
    EXPECT_EQ(a.findings, b.findings);
    EXPECT_EQ(a.impression, b.impression);
    EXPECT_EQ(a.findings_attempts, b.findings_attempts);

    ScreenConfig sc;
    sc.embedding_dim = 16;
    ImageGenParams ip;
    ip.seed = 5;
    const auto li = generate_curated_image(a.impression, *local.image, *local.judge, *local.embedder,
                                           EmbeddingBank(16), sc, ip, 3);
    const auto ri = generate_curated_image(b.impression, *remote.image, *remote.judge, *remote.embedder,
                                           EmbeddingBank(16), sc, ip, 3);
    EXPECT_EQ(li.blob, ri.blob);
    EXPECT_EQ(li.record.blob_ref, ri.record.blob_ref);
    EXPECT_EQ(local.embedder->embed_image(li.blob), remote.embedder->embed_image(ri.blob));
    EXPECT_GT(sidecar.requests.load(), 0);
}

TEST(RemoteProviders, ProviderFailureSurfacesAfterRetries) {
    MockPolicy policy;
    policy.failure_prob[ProviderRole::ImageGen] = 1.0;
    FakeSidecar sidecar(make_mock_providers(std::make_shared<EntityCatalog>(), policy));
    auto remote = make_remote_providers(endpoints_for(sidecar.url()), make_http_transport());
    EXPECT_EQ(code_of([&] { remote.image->generate_image("x", {}); }), ErrorCode::ProviderUnavailable);
    EXPECT_EQ(sidecar.requests.load(), 2);
}

TEST(RemoteProviders, UnreachableSidecarIsProviderUnavailable) {
    auto eps = endpoints_for("http://127.0.0.1:1");
    auto remote = make_remote_providers(eps, make_http_transport());
    const auto code = code_of([&] { remote.text->generate_text("x", {}); });
    EXPECT_TRUE(code == ErrorCode::ProviderUnavailable || code == ErrorCode::Timeout);
}

TEST(RemoteProviders, OnlyConfiguredRolesAreBuilt) {
    std::map<ProviderRole, ProviderEndpoint> eps;
    eps[ProviderRole::QualityJudge] = endpoint();
    auto set = make_remote_providers(eps, std::make_shared<FakeTransport>());
    EXPECT_TRUE(set.judge);
    EXPECT_FALSE(set.text);
    EXPECT_FALSE(set.embedder);
}
