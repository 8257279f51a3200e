#include "cxrsynth/protocol.hpp"

#include "cxrsynth/error.hpp"

namespace cxrsynth::protocol {

std::string_view endpoint_path(ProviderRole role) {
    switch (role) {
    case ProviderRole::TextGen: return "/generate_text";
    case ProviderRole::EntityExtract: return "/extract_entities";
    case ProviderRole::ImageGen: return "/generate_image";
    case ProviderRole::QualityJudge: return "/judge";
    case ProviderRole::ImageEmbed: return "/embed";
    }
    return "/";
}

namespace {

nlohmann::json envelope() { return {{"protocol_version", kVersion}}; }

} // namespace

nlohmann::json text_request(std::string_view prompt, const TextGenParams& params) {
    auto j = envelope();
    j["prompt"] = prompt;
    j["temperature"] = params.temperature;
    j["seed"] = params.seed;
    j["max_tokens"] = params.max_tokens;
    return j;
}

nlohmann::json extract_request(std::string_view text) {
    auto j = envelope();
    j["text"] = text;
    return j;
}

nlohmann::json image_request(std::string_view prompt, const ImageGenParams& params) {
    auto j = envelope();
    j["prompt"] = prompt;
    j["guidance_scale"] = params.guidance_scale;
    j["steps"] = params.steps;
    j["seed"] = params.seed;
    return j;
}

nlohmann::json judge_request(const Blob& image, std::string_view query) {
    auto j = envelope();
    j["image_base64"] = base64_encode(image);
    j["query"] = query;
    return j;
}

nlohmann::json embed_request(const Blob& image) {
    auto j = envelope();
    j["image_base64"] = base64_encode(image);
    return j;
}

nlohmann::json text_response(std::string_view text) {
    auto j = envelope();
    j["text"] = text;
    return j;
}

nlohmann::json extract_response(const std::vector<ExtractedEntity>& entities) {
    auto j = envelope();
    j["entities"] = nlohmann::json::array();
    for (const auto& e : entities) j["entities"].push_back({{"text", e.text}, {"category", to_string(e.category)}});
    return j;
}

nlohmann::json image_response(const Blob& image) {
    auto j = envelope();
    j["image_base64"] = base64_encode(image);
    return j;
}

nlohmann::json judge_response(std::string_view answer) {
    auto j = envelope();
    j["answer"] = answer;
    return j;
}

nlohmann::json embed_response(const std::vector<float>& embedding) {
    auto j = envelope();
    j["embedding"] = embedding;
    return j;
}

nlohmann::json error_body(std::string_view code, std::string_view message, bool retryable) {
    return {{"code", code}, {"message", message}, {"retryable", retryable}};
}

namespace {

enum class Kind { String, NonEmptyString, Number, PositiveNumber, UInt, PositiveUInt, Bool, Base64 };

struct Checker {
    const nlohmann::json& body;
    std::vector<std::string> problems;

    bool object() {
        if (!body.is_object()) {
            problems.push_back("body is not a JSON object");
            return false;
        }
        return true;
    }

    void version() {
        if (!body.contains("protocol_version")) {
            problems.push_back("missing protocol_version");
        } else if (body["protocol_version"] != kVersion) {
            problems.push_back("unsupported protocol_version " + body["protocol_version"].dump());
        }
    }

    void field(const char* name, Kind kind) {
        if (!body.contains(name)) {
            problems.push_back(std::string("missing field ") + name);
            return;
        }
        const auto& v = body[name];
        bool ok = false;
        switch (kind) {
        case Kind::String: ok = v.is_string(); break;
        case Kind::NonEmptyString: ok = v.is_string() && !v.get_ref<const std::string&>().empty(); break;
        case Kind::Number: ok = v.is_number(); break;
        case Kind::PositiveNumber: ok = v.is_number() && v.get<double>() > 0; break;
        case Kind::UInt: ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); break;
        case Kind::PositiveUInt: ok = (v.is_number_unsigned() || v.is_number_integer()) && v.get<std::int64_t>() >= 1; break;
        case Kind::Bool: ok = v.is_boolean(); break;
        case Kind::Base64:
            ok = v.is_string();
            if (ok) {
                try {
                    base64_decode(v.get_ref<const std::string&>());
                } catch (const Error&) {
                    ok = false;
                }
            }
            break;
        }
        if (!ok) problems.push_back(std::string("field ") + name + " has the wrong type or value");
    }
};

} // namespace

std::vector<std::string> validate_request(ProviderRole role, const nlohmann::json& body) {
    Checker c{body, {}};
    if (!c.object()) return c.problems;
    c.version();
    switch (role) {
    case ProviderRole::TextGen:
        c.field("prompt", Kind::NonEmptyString);
        c.field("temperature", Kind::Number);
        c.field("seed", Kind::UInt);
        c.field("max_tokens", Kind::PositiveUInt);
        break;
    case ProviderRole::EntityExtract:
        c.field("text", Kind::String);
        break;
    case ProviderRole::ImageGen:
        c.field("prompt", Kind::NonEmptyString);
        c.field("guidance_scale", Kind::PositiveNumber);
        c.field("steps", Kind::PositiveUInt);
        c.field("seed", Kind::UInt);
        break;
    case ProviderRole::QualityJudge:
        c.field("image_base64", Kind::Base64);
        c.field("query", Kind::NonEmptyString);
        break;
    case ProviderRole::ImageEmbed:
        c.field("image_base64", Kind::Base64);
        break;
    }
    return c.problems;
}

std::vector<std::string> validate_response(ProviderRole role, const nlohmann::json& body) {
    Checker c{body, {}};
    if (!c.object()) return c.problems;
    c.version();
    switch (role) {
    case ProviderRole::TextGen:
        c.field("text", Kind::String);
        break;
    case ProviderRole::EntityExtract:
        if (!body.contains("entities") || !body["entities"].is_array()) {
            c.problems.push_back("field entities must be an array");
            break;
        }
        for (const auto& e : body["entities"]) {
            if (!e.is_object() || !e.contains("text") || !e["text"].is_string() || !e.contains("category") ||
                !e["category"].is_string() || !parse_category(e["category"].get<std::string>())) {
                c.problems.push_back("entity entry " + e.dump() + " is not {text, category}");
            }
        }
        break;
    case ProviderRole::ImageGen:
        c.field("image_base64", Kind::Base64);
        break;
    case ProviderRole::QualityJudge:
        c.field("answer", Kind::String);
        break;
    case ProviderRole::ImageEmbed:
        if (!body.contains("embedding") || !body["embedding"].is_array() || body["embedding"].empty()) {
            c.problems.push_back("field embedding must be a non-empty array");
            break;
        }
        for (const auto& x : body["embedding"]) {
            if (!x.is_number()) {
                c.problems.push_back("embedding holds a non-numeric value");
                break;
            }
        }
        break;
    }
    return c.problems;
}

std::vector<std::string> validate_error_body(const nlohmann::json& body) {
    Checker c{body, {}};
    if (!c.object()) return c.problems;
    c.field("code", Kind::NonEmptyString);
    c.field("message", Kind::String);
    c.field("retryable", Kind::Bool);
    return c.problems;
}

} // namespace cxrsynth::protocol
