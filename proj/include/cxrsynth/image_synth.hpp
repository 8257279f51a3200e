#pragma once

#include "cxrsynth/curation.hpp"
#include "cxrsynth/embedding.hpp"
#include "cxrsynth/providers.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace cxrsynth {

struct ImageRecord {
    std::string id;
    std::string blob_ref; // sha256 of the payload
    ImageGenParams params;
    CurationVerdict verdict;
    double max_bad_similarity = -1.0;
    std::uint32_t attempts = 0;
};

struct CuratedImage {
    ImageRecord record;
    Blob blob;
};

// The IMPRESSION text is the whole prompt. Throws
// Error(PreconditionViolation) for an empty impression before any provider
// call; the payload is returned unchanged.
Blob generate_image(std::string_view impression, ImageGenerator& gen, const ImageGenParams& params);

// Generate, then judge (all six answers must be YES), then screen against the
// bad bank. Failing either gate regenerates with the same prompt and a fresh
// seed derive_seed(params.seed, {attempt}). The embedder is never called for
// an image the judge rejected. Throws RetriesExhausted after max_retries.
CuratedImage generate_curated_image(std::string_view impression, ImageGenerator& gen, QualityJudge& judge,
                                    ImageEmbedder& embedder, const EmbeddingBank& bank, const ScreenConfig& cfg,
                                    const ImageGenParams& params, std::uint32_t max_retries);

} // namespace cxrsynth
