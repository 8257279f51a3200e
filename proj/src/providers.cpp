#include "cxrsynth/providers.hpp"

#include "cxrsynth/error.hpp"

#include <cctype>

namespace cxrsynth {

std::string_view to_string(ProviderRole role) {
    switch (role) {
    case ProviderRole::TextGen: return "TEXT_GEN";
    case ProviderRole::EntityExtract: return "ENTITY_EXTRACT";
    case ProviderRole::ImageGen: return "IMAGE_GEN";
    case ProviderRole::QualityJudge: return "QUALITY_JUDGE";
    case ProviderRole::ImageEmbed: return "IMAGE_EMBED";
    }
    return "UNKNOWN";
}

std::optional<ProviderRole> parse_role(std::string_view name) {
    std::string upper;
    for (char c : name) upper.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    for (ProviderRole r : kAllRoles) {
        if (upper == to_string(r)) return r;
    }
    return std::nullopt;
}

void ImageGenParams::validate() const {
    if (!(guidance_scale > 0.0)) throw Error(ErrorCode::ConfigInvalid, "guidance_scale must be positive");
    if (steps < 1) throw Error(ErrorCode::ConfigInvalid, "steps must be at least 1");
}

} // namespace cxrsynth
