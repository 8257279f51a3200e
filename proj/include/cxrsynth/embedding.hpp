#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cxrsynth {

inline constexpr double kUnitNormTolerance = 1e-6;

struct ScreenConfig {
    double delta = 0.5;               // cosine threshold; strictly greater fails
    std::string bad_bank;             // path to the bad-sample bank, empty for none
    std::size_t embedding_dim = 768;

    // Throws Error(ConfigInvalid).
    void validate() const;
};

void to_json(nlohmann::json& j, const ScreenConfig& cfg);
void from_json(const nlohmann::json& j, ScreenConfig& cfg);

// Row-major matrix of unit vectors with a source id per row.
//
// On disk: a binary file holding a little-endian uint64 header {dim, count}
// followed by count*dim little-endian float32 values, plus a JSON sidecar
// `<file>.ids.json` of the form {"dim": d, "count": n, "ids": [...]}.
class EmbeddingBank {
public:
    explicit EmbeddingBank(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& ids() const { return ids_; }

    // Throws Error(DimensionMismatch) or Error(PreconditionViolation) for a
    // vector that is not unit-norm.
    void add(std::string id, std::span<const float> vector);

    // Throws Error(StorageFailure) on I/O problems or a truncated file.
    void save(const std::filesystem::path& path) const;
    static EmbeddingBank load(const std::filesystem::path& path);
    static std::filesystem::path sidecar_path(const std::filesystem::path& path);

private:
    std::size_t dim_;
    std::vector<float> data_;
    std::vector<std::string> ids_;
};

// Throws Error(PreconditionViolation) unless | ||v|| - 1 | <= tolerance.
void require_unit_norm(std::span<const float> v, double tolerance = kUnitNormTolerance);

// Dot product in double precision. Throws Error(DimensionMismatch).
double cosine(std::span<const float> a, std::span<const float> b);

struct ScreenResult {
    bool pass = true;
    double max_similarity = -1.0;     // -1 for an empty bank
    std::optional<std::size_t> nearest;
};

// pass iff max_i cosine(embedding, bank_i) <= delta.
ScreenResult similarity_screen(std::span<const float> embedding, const EmbeddingBank& bank, const ScreenConfig& cfg);

} // namespace cxrsynth
