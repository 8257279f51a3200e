#pragma once

#include "cxrsynth/entity.hpp"
#include "cxrsynth/hashing.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cxrsynth {

// The five external model roles the pipeline drives.
enum class ProviderRole { TextGen, EntityExtract, ImageGen, QualityJudge, ImageEmbed };

inline constexpr ProviderRole kAllRoles[] = {ProviderRole::TextGen, ProviderRole::EntityExtract, ProviderRole::ImageGen,
                                             ProviderRole::QualityJudge, ProviderRole::ImageEmbed};

// TEXT_GEN, ENTITY_EXTRACT, IMAGE_GEN, QUALITY_JUDGE, IMAGE_EMBED
std::string_view to_string(ProviderRole role);
std::optional<ProviderRole> parse_role(std::string_view name);

struct TextGenParams {
    double temperature = 0.7;
    std::uint64_t seed = 0;
    std::uint32_t max_tokens = 512;
};

struct ImageGenParams {
    double guidance_scale = 4.0;
    std::uint32_t steps = 50;
    std::uint64_t seed = 0;

    // Throws Error(ConfigInvalid).
    void validate() const;
};

struct ExtractedEntity {
    std::string text;
    Category category = Category::Abnormality;

    friend bool operator==(const ExtractedEntity&, const ExtractedEntity&) = default;
};

// All providers are shared across workers and must tolerate concurrent calls.
// Failures surface as Error(ProviderUnavailable | Timeout | ...).

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string generate_text(std::string_view prompt, const TextGenParams& params) = 0;
};

class EntityExtractor {
public:
    virtual ~EntityExtractor() = default;
    virtual std::vector<ExtractedEntity> extract_entities(std::string_view text) = 0;
};

class ImageGenerator {
public:
    virtual ~ImageGenerator() = default;
    virtual Blob generate_image(std::string_view prompt, const ImageGenParams& params) = 0;
};

class QualityJudge {
public:
    virtual ~QualityJudge() = default;
    // Raw answer text; callers normalize it to YES/NO.
    virtual std::string quality_answer(const Blob& image, std::string_view query) = 0;
};

class ImageEmbedder {
public:
    virtual ~ImageEmbedder() = default;
    virtual std::vector<float> embed_image(const Blob& image) = 0;
};

struct ProviderSet {
    std::shared_ptr<TextGenerator> text;
    std::shared_ptr<EntityExtractor> extractor;
    std::shared_ptr<ImageGenerator> image;
    std::shared_ptr<QualityJudge> judge;
    std::shared_ptr<ImageEmbedder> embedder;
};

} // namespace cxrsynth
