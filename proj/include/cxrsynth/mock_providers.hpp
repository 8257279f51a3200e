#pragma once

#include "cxrsynth/catalog.hpp"
#include "cxrsynth/providers.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cxrsynth {

// Configuration of the deterministic stand-in providers. Every mock answer is
// a pure function of its inputs and `seed`.
struct MockPolicy {
    std::uint64_t seed = 0;
    std::map<ProviderRole, double> failure_prob; // missing roles never fail
    double extra_entity_prob = 0.0;              // findings generation adds one stray entity
    double drop_entity_prob = 0.0;               // summarization drops one entity
    double bad_image_prob = 0.0;                 // judge answers NO to every query
    std::size_t embedding_dim = 768;
    // Artificial latency per call, for concurrency instrumentation.
    std::chrono::microseconds call_delay{0};

    // Throws Error(ConfigInvalid).
    void validate() const;
    double failure(ProviderRole role) const;
};

void to_json(nlohmann::json& j, const MockPolicy& p);
void from_json(const nlohmann::json& j, MockPolicy& p);

// Call counters shared by a family of mocks.
struct MockInstrumentation {
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
    std::atomic<std::uint64_t> calls[5]{};

    std::uint64_t calls_for(ProviderRole role) const { return calls[static_cast<int>(role)].load(); }
};

// Dictionary NER over a catalog: scans normalized text and, at each word
// start, takes the longest catalog string that ends on a word boundary.
// Matches do not overlap. A string present in several categories yields one
// result per category.
class CatalogMatcher {
public:
    explicit CatalogMatcher(std::shared_ptr<const EntityCatalog> catalog);

    std::vector<ExtractedEntity> match(std::string_view text) const;

private:
    std::shared_ptr<const EntityCatalog> catalog_;
};

// Builds the five mocks over one catalog. The text generator understands
// prompts containing `LABEL: a; b; c` lines (one per category label) as
// findings requests and anything else as a summarization request over the
// text following a `FINDINGS:` marker.
ProviderSet make_mock_providers(std::shared_ptr<const EntityCatalog> catalog, const MockPolicy& policy,
                                std::shared_ptr<MockInstrumentation> instrumentation = nullptr);

// Blob markers understood by the mock judge and embedder, used to plant
// fixtures: a line `MOCKJUDGE:YNYYNY` fixes the six answers, a line
// `MOCKEMBED:0.6,0.8` fixes the (normalized) embedding.
std::string mock_judge_marker(const std::array<bool, 6>& answers);
std::string mock_embed_marker(std::span<const float> vector);

} // namespace cxrsynth
