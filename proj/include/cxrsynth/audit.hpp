#pragma once

#include "cxrsynth/curation.hpp"
#include "cxrsynth/distribution.hpp"
#include "cxrsynth/embedding.hpp"
#include "cxrsynth/providers.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cxrsynth {

// One image-text pair of a corpus manifest (JSONL, one object per line:
// {"id", "image_path", "report_path"}). Relative paths are resolved against
// the manifest's directory when read.
struct CorpusItem {
    std::string id;
    std::string image_path;
    std::string report_path;
};

// Throws Error(MalformedRecord) on a bad line, Error(StorageFailure) if the
// file cannot be read.
std::vector<CorpusItem> read_corpus_manifest(const std::filesystem::path& manifest);

using ImageSource = std::function<Blob(const CorpusItem&)>;
ImageSource file_image_source();

// Both stages always run: judge first, then similarity propagation seeded by
// the judge-removed images. Items whose provider calls fail are skipped and
// listed separately, so
//   remaining = total_in - removed_by_judge - removed_by_similarity - skipped.
struct AuditReport {
    std::size_t total_in = 0;
    std::size_t removed_by_judge = 0;
    std::size_t removed_by_similarity = 0;
    std::size_t skipped = 0;
    std::size_t remaining = 0;
    std::string policy;
    double delta = 0.5;
    std::vector<std::string> judge_removed_ids;      // manifest order
    std::vector<std::string> similarity_removed_ids; // manifest order
    std::vector<std::string> skipped_ids;
    std::vector<std::string> errors;

    // Judge removals followed by similarity removals.
    std::vector<std::string> removed_ids() const;
    bool consistent() const;
    nlohmann::json to_json() const;
};

struct AuditOptions {
    ScreenConfig screen;
    RemovalPolicy policy = RemovalPolicy::all_no();
    std::size_t workers = 1;
};

struct AuditOutcome {
    AuditReport report;
    // Embeddings of the judge-removed images, usable as the generation bad bank.
    EmbeddingBank bad_bank;
};

AuditOutcome audit_items(std::span<const CorpusItem> items, const ImageSource& images, QualityJudge& judge,
                         ImageEmbedder& embedder, const AuditOptions& options);

AuditOutcome audit_corpus(const std::filesystem::path& manifest, QualityJudge& judge, ImageEmbedder& embedder,
                          const AuditOptions& options);

// Row indices of `candidates` whose maximum cosine similarity to any row of
// `seeds` exceeds cfg.delta. Ascending.
std::vector<std::size_t> propagate_bad(const EmbeddingBank& candidates, const EmbeddingBank& seeds,
                                       const ScreenConfig& cfg);

// Every non-seed id whose maximum cosine to any seed exceeds cfg.delta,
// sorted. Throws Error(PreconditionViolation) for a seed id without an
// embedding and Error(DimensionMismatch) for mixed dimensions.
std::vector<std::string> propagate_bad(const std::map<std::string, std::vector<float>>& embeddings,
                                       std::span<const std::string> seed_bad_ids, const ScreenConfig& cfg);

// Entity-level distribution of a report corpus. Each report contributes at
// most one count per entity.
DistributionReport entity_distribution(std::span<const std::string> reports, EntityExtractor& extractor);

} // namespace cxrsynth
