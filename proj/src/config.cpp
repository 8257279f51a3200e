#include "cxrsynth/config.hpp"

#include "cxrsynth/error.hpp"
#include "cxrsynth/hashing.hpp"

#include <fstream>

namespace cxrsynth {

void RunConfig::validate() const {
    if (catalog_path.empty()) throw Error(ErrorCode::ConfigInvalid, "catalog path is not set");
    sampler.validate();
    screen.validate();
    image.validate();
    report.validate();
    if (image_max_retries < 1) throw Error(ErrorCode::ConfigInvalid, "image max_retries must be at least 1");
    if (max_record_attempts < 1) throw Error(ErrorCode::ConfigInvalid, "max_record_attempts must be at least 1");
    if (workers < 1) throw Error(ErrorCode::ConfigInvalid, "workers must be at least 1");
    if (checkpoint_interval < 1) throw Error(ErrorCode::ConfigInvalid, "checkpoint_interval must be at least 1");
    if (mock) {
        mock_policy.validate();
        if (mock_policy.embedding_dim != screen.embedding_dim) {
            throw Error(ErrorCode::ConfigInvalid, "mock embedding_dim differs from screen embedding_dim");
        }
    } else {
        for (ProviderRole role : kAllRoles) {
            auto it = endpoints.find(role);
            if (it == endpoints.end()) {
                throw Error(ErrorCode::ConfigInvalid, "no endpoint configured for " + std::string(to_string(role)));
            }
            it->second.validate();
        }
    }
}

void RunConfig::propagate_seed() {
    sampler.seed = seed;
    mock_policy.seed = seed;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json eps = nlohmann::json::object();
    for (const auto& [role, ep] : endpoints) eps[std::string(to_string(role))] = ep;
    return {
        {"catalog", catalog_path},
        {"seed", seed},
        {"sampler", sampler},
        {"screen", screen},
        {"image", {{"guidance_scale", image.guidance_scale}, {"steps", image.steps}}},
        {"report", report},
        {"image_max_retries", image_max_retries},
        {"max_record_attempts", max_record_attempts},
        {"mock", mock},
        {"mock_policy", mock_policy},
        {"endpoints", std::move(eps)},
        {"n_target", n_target},
        {"removal_policy", removal_policy.name()},
        {"output_dir", output_dir},
        {"workers", workers},
        {"relax_cap", relax_cap},
        {"checkpoint_interval", checkpoint_interval},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        c.catalog_path = j.value("catalog", c.catalog_path);
        c.seed = j.value("seed", c.seed);
        if (j.contains("sampler")) j.at("sampler").get_to(c.sampler);
        if (j.contains("screen")) j.at("screen").get_to(c.screen);
        if (j.contains("image")) {
            c.image.guidance_scale = j["image"].value("guidance_scale", c.image.guidance_scale);
            c.image.steps = j["image"].value("steps", c.image.steps);
        }
        if (j.contains("report")) j.at("report").get_to(c.report);
        c.image_max_retries = j.value("image_max_retries", c.image_max_retries);
        c.max_record_attempts = j.value("max_record_attempts", c.max_record_attempts);
        c.mock = j.value("mock", c.mock);
        if (j.contains("mock_policy")) j.at("mock_policy").get_to(c.mock_policy);
        if (!j.contains("mock_policy") || !j["mock_policy"].contains("embedding_dim")) {
            c.mock_policy.embedding_dim = c.screen.embedding_dim;
        }
        if (j.contains("endpoints")) {
            for (const auto& [name, value] : j.at("endpoints").items()) {
                const auto role = parse_role(name);
                if (!role) throw Error(ErrorCode::ConfigInvalid, "unknown provider role '" + name + "'");
                ProviderEndpoint ep = value.get<ProviderEndpoint>();
                ep.role = *role;
                c.endpoints[*role] = ep;
            }
        }
        c.n_target = j.value("n_target", c.n_target);
        if (j.contains("removal_policy")) c.removal_policy = RemovalPolicy::parse(j["removal_policy"].get<std::string>());
        c.output_dir = j.value("output_dir", c.output_dir);
        c.workers = j.value("workers", c.workers);
        c.relax_cap = j.value("relax_cap", c.relax_cap);
        c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
    }
    c.propagate_seed();
    return c;
}

std::string RunConfig::generation_hash(std::string_view catalog_digest, std::string_view bank_digest) const {
    nlohmann::json mock_json = mock_policy;
    mock_json.erase("call_delay_us");
    nlohmann::json j = {
        {"catalog_sha256", catalog_digest},
        {"bad_bank_sha256", bank_digest},
        {"seed", seed},
        {"sampler", sampler},
        {"delta", screen.delta},
        {"embedding_dim", screen.embedding_dim},
        {"image", {{"guidance_scale", image.guidance_scale}, {"steps", image.steps}}},
        {"report", report},
        {"image_max_retries", image_max_retries},
        {"max_record_attempts", max_record_attempts},
        {"mock", mock},
        {"mock_policy", mock ? mock_json : nlohmann::json(nullptr)},
    };
    return sha256_hex(j.dump());
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigInvalid, path.string() + " is not a JSON object");
    RunConfig c = RunConfig::from_json(j);
    // Relative catalog / bank paths are relative to the config file.
    const auto base = path.parent_path();
    auto rebase = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
    };
    rebase(c.catalog_path);
    rebase(c.screen.bad_bank);
    return c;
}

} // namespace cxrsynth
