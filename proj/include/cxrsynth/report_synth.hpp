#pragma once

#include "cxrsynth/catalog.hpp"
#include "cxrsynth/error.hpp"
#include "cxrsynth/providers.hpp"
#include "cxrsynth/sampler.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cxrsynth {

// Findings templates must contain one placeholder per category label:
// {ABNORMALITY} {NON-ABNORMALITY} {DISEASE} {NON-DISEASE} {ANATOMY}.
// Each expands to the category's entities joined by "; ", or "none".
extern const std::string_view kDefaultFindingsTemplate;
// Impression templates must contain {FINDINGS}, which expands to the verified
// findings text verbatim.
extern const std::string_view kDefaultImpressionTemplate;

struct ReportSynthConfig {
    std::string findings_template{kDefaultFindingsTemplate};
    std::string impression_template{kDefaultImpressionTemplate};
    std::uint32_t findings_max_retries = 10;
    std::uint32_t impression_max_retries = 10;
    double temperature = 0.7;
    std::uint32_t max_tokens = 512;

    // Throws Error(ConfigInvalid) or Error(TemplateMissingPlaceholder).
    void validate() const;
};

void to_json(nlohmann::json& j, const ReportSynthConfig& cfg);
void from_json(const nlohmann::json& j, ReportSynthConfig& cfg);

// Comparison of an extracted entity set against the sampled one, on
// normalized (text, category) pairs. Multiplicity is ignored.
struct ExtractionResult {
    std::vector<Entity> entities; // distinct, sorted by id
    std::vector<Entity> missing;  // in the set, not extracted
    std::vector<Entity> extra;    // extracted, not in the set

    bool equal() const { return missing.empty() && extra.empty(); }
    std::string describe() const;
};

class ReportRetriesExhausted : public RetriesExhausted {
public:
    ReportRetriesExhausted(std::string stage, unsigned attempts, ExtractionResult last)
        : RetriesExhausted(std::move(stage), attempts, last.describe()), last_(std::move(last)) {}

    const ExtractionResult& last() const noexcept { return last_; }

private:
    ExtractionResult last_;
};

struct SyntheticReport {
    std::string findings;
    std::string impression;
    EntitySet entity_set;
    std::uint32_t findings_attempts = 0;
    std::uint32_t impression_attempts = 0;
};

struct GeneratedSection {
    std::string text;
    std::uint32_t attempts = 0;
};

std::string build_findings_prompt(const EntitySet& set, const EntityCatalog& catalog, std::string_view tmpl);
std::string build_impression_prompt(std::string_view findings, std::string_view tmpl);

ExtractionResult compare_entities(const std::vector<ExtractedEntity>& extracted, const EntitySet& set,
                                  const EntityCatalog& catalog);

ExtractionResult verify_entity_coverage(std::string_view text, const EntitySet& set, const EntityCatalog& catalog,
                                        EntityExtractor& extractor);

// Regenerates until the extracted entities equal the set. Attempt i (from 0)
// sends provider seed derive_seed(seed, {i}); the set never changes. Throws
// ReportRetriesExhausted after cfg.findings_max_retries attempts.
GeneratedSection generate_findings(const EntitySet& set, const EntityCatalog& catalog, TextGenerator& gen,
                                   EntityExtractor& extractor, const ReportSynthConfig& cfg, std::uint64_t seed);

GeneratedSection generate_impression(std::string_view findings, const EntitySet& set, const EntityCatalog& catalog,
                                     TextGenerator& gen, EntityExtractor& extractor, const ReportSynthConfig& cfg,
                                     std::uint64_t seed);

// Findings, then impression. Seeds for the two loops are derived from `seed`.
SyntheticReport synthesize_report(const EntitySet& set, const EntityCatalog& catalog, TextGenerator& gen,
                                  EntityExtractor& extractor, const ReportSynthConfig& cfg, std::uint64_t seed);

} // namespace cxrsynth
