#pragma once

#include "cxrsynth/providers.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

// Wire protocol v1 between the orchestrator and a model sidecar: JSON over
// HTTP, one POST endpoint per provider role. Every request and response body
// carries "protocol_version": "v1". Failures use a non-2xx status with the
// body {"code": str, "message": str, "retryable": bool}. See docs/protocol.md.
namespace cxrsynth::protocol {

inline constexpr std::string_view kVersion = "v1";

// /generate_text, /extract_entities, /generate_image, /judge, /embed
std::string_view endpoint_path(ProviderRole role);
inline constexpr std::string_view kHealthPath = "/healthz";

nlohmann::json text_request(std::string_view prompt, const TextGenParams& params);
nlohmann::json extract_request(std::string_view text);
nlohmann::json image_request(std::string_view prompt, const ImageGenParams& params);
nlohmann::json judge_request(const Blob& image, std::string_view query);
nlohmann::json embed_request(const Blob& image);

nlohmann::json text_response(std::string_view text);
nlohmann::json extract_response(const std::vector<ExtractedEntity>& entities);
nlohmann::json image_response(const Blob& image);
nlohmann::json judge_response(std::string_view answer);
nlohmann::json embed_response(const std::vector<float>& embedding);
nlohmann::json error_body(std::string_view code, std::string_view message, bool retryable);

// Schema checks. Each returns the list of violations; empty means valid.
std::vector<std::string> validate_request(ProviderRole role, const nlohmann::json& body);
std::vector<std::string> validate_response(ProviderRole role, const nlohmann::json& body);
std::vector<std::string> validate_error_body(const nlohmann::json& body);

} // namespace cxrsynth::protocol
