#include "cxrsynth/image_synth.hpp"

#include "cxrsynth/error.hpp"

#include <cstdio>

namespace cxrsynth {

Blob generate_image(std::string_view impression, ImageGenerator& gen, const ImageGenParams& params) {
    if (normalize_text(impression).empty()) {
        throw Error(ErrorCode::PreconditionViolation, "image prompt (IMPRESSION) is empty");
    }
    params.validate();
    return gen.generate_image(impression, params);
}

CuratedImage generate_curated_image(std::string_view impression, ImageGenerator& gen, QualityJudge& judge,
                                    ImageEmbedder& embedder, const EmbeddingBank& bank, const ScreenConfig& cfg,
                                    const ImageGenParams& params, std::uint32_t max_retries) {
    if (max_retries < 1) throw Error(ErrorCode::PreconditionViolation, "max_retries must be at least 1");
    const RemovalPolicy accept_all_yes = RemovalPolicy::any_no();
    std::string last_failure;
    for (std::uint32_t attempt = 0; attempt < max_retries; ++attempt) {
        ImageGenParams p = params;
        p.seed = derive_seed(params.seed, {attempt});
        Blob blob = generate_image(impression, gen, p);

        CurationVerdict verdict = judge_image(blob, judge, accept_all_yes);
        if (!verdict.passes_removal) {
            last_failure = "judge rejected the image";
            continue;
        }
        const auto embedding = embedder.embed_image(blob);
        const ScreenResult screen = similarity_screen(embedding, bank, cfg);
        if (!screen.pass) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "similarity %.6f to a bad sample", screen.max_similarity);
            last_failure = buf;
            continue;
        }
        CuratedImage out;
        out.record.blob_ref = sha256_hex(blob);
        out.record.id = out.record.blob_ref;
        out.record.params = p;
        out.record.verdict = verdict;
        out.record.max_bad_similarity = screen.max_similarity;
        out.record.attempts = attempt + 1;
        out.blob = std::move(blob);
        return out;
    }
    throw RetriesExhausted("image", max_retries, last_failure);
}

} // namespace cxrsynth
