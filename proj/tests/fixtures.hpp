#pragma once

#include "cxrsynth/audit.hpp"
#include "cxrsynth/catalog.hpp"
#include "cxrsynth/config.hpp"
#include "cxrsynth/providers.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace cxrsynth::fixtures {

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// `per_category` entities in each non-anatomy category and `anatomy` anatomy
// entities, named "<label> term <i>".
std::shared_ptr<const EntityCatalog> make_catalog(std::size_t per_category, std::size_t anatomy);

// Catalog with the published per-category sizes (ABNORMALITY 55,047,
// NON-ABNORMALITY 36,365, DISEASE 23,017, NON-DISEASE 22,103, ANATOMY 40,517).
std::shared_ptr<const EntityCatalog> census_catalog();

// Writes the catalog as TSV and returns its path.
std::filesystem::path write_catalog(const EntityCatalog& catalog, const std::filesystem::path& path);

// Mock-mode run configuration over the catalog at `catalog_path`.
RunConfig mock_config(const std::filesystem::path& catalog_path, std::uint64_t n, std::uint64_t seed);

// Direct O(n^2) evaluation of sum_i sum_j |x_i - x_j| / (2 n^2 mean).
double brute_force_gini(const std::vector<std::uint64_t>& xs);

// Integer counts proportional to 1 / rank^s over n items, scaled to total
// mass `mass` (largest-remainder rounding, every item at least 1).
std::vector<std::uint64_t> zipf_counts(std::size_t n, double s, std::uint64_t mass);

std::string read_text(const std::filesystem::path& path);

// In-memory audit corpus of 4-dimensional planted embeddings, for the mock
// judge and embedder. `judge_bad` images answer NO to every query and embed
// near e1; `similar` images pass the judge but sit at cosine 0.6 from e1;
// `clean` images pass both stages, some of them at cosine exactly 0.5 or with
// a minority of NO answers. Items are shuffled by `seed`.
struct PlantedCorpus {
    std::vector<CorpusItem> items;
    std::unordered_map<std::string, Blob> blobs;
    std::vector<std::string> judge_bad_ids;
    std::vector<std::string> similar_ids;

    ImageSource source() const;
};
PlantedCorpus planted_corpus(std::size_t judge_bad, std::size_t similar, std::size_t clean, std::uint64_t seed);

// Test doubles driven by a callback.
class ScriptedTextGenerator : public TextGenerator {
public:
    using Fn = std::function<std::string(std::string_view prompt, const TextGenParams& params)>;
    explicit ScriptedTextGenerator(Fn fn) : fn_(std::move(fn)) {}
    std::string generate_text(std::string_view prompt, const TextGenParams& params) override {
        ++calls;
        seeds.push_back(params.seed);
        prompts.emplace_back(prompt);
        return fn_(prompt, params);
    }
    int calls = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> prompts;

private:
    Fn fn_;
};

class ScriptedExtractor : public EntityExtractor {
public:
    using Fn = std::function<std::vector<ExtractedEntity>(std::string_view text)>;
    explicit ScriptedExtractor(Fn fn) : fn_(std::move(fn)) {}
    std::vector<ExtractedEntity> extract_entities(std::string_view text) override {
        ++calls;
        return fn_(text);
    }
    int calls = 0;

private:
    Fn fn_;
};

} // namespace cxrsynth::fixtures
