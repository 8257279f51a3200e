#include "cxrsynth/embedding.hpp"

#include "cxrsynth/error.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace cxrsynth {

static_assert(std::endian::native == std::endian::little, "bank files are written in native little-endian order");

void ScreenConfig::validate() const {
    if (!(delta > 0.0 && delta <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "delta must lie in (0, 1]");
    if (embedding_dim < 1) throw Error(ErrorCode::ConfigInvalid, "embedding_dim must be at least 1");
}

void to_json(nlohmann::json& j, const ScreenConfig& cfg) {
    j = {{"delta", cfg.delta}, {"bad_bank", cfg.bad_bank}, {"embedding_dim", cfg.embedding_dim}};
}

void from_json(const nlohmann::json& j, ScreenConfig& cfg) {
    cfg.delta = j.value("delta", cfg.delta);
    cfg.bad_bank = j.value("bad_bank", cfg.bad_bank);
    cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
}

void require_unit_norm(std::span<const float> v, double tolerance) {
    double sq = 0;
    for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
    if (std::abs(std::sqrt(sq) - 1.0) > tolerance) {
        throw Error(ErrorCode::PreconditionViolation, "embedding is not unit-norm (norm " + std::to_string(std::sqrt(sq)) + ")");
    }
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "vector dimensions differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double dot = 0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return dot;
}

void EmbeddingBank::add(std::string id, std::span<const float> vector) {
    if (vector.size() != dim_) {
        throw Error(ErrorCode::DimensionMismatch, "bank dimension is " + std::to_string(dim_) + ", vector has " +
                                                      std::to_string(vector.size()));
    }
    require_unit_norm(vector);
    data_.insert(data_.end(), vector.begin(), vector.end());
    ids_.push_back(std::move(id));
}

std::filesystem::path EmbeddingBank::sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".ids.json");
}

void EmbeddingBank::save(const std::filesystem::path& path) const {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        const std::uint64_t header[2] = {dim_, ids_.size()};
        out.write(reinterpret_cast<const char*>(header), sizeof header);
        out.write(reinterpret_cast<const char*>(data_.data()), static_cast<std::streamsize>(data_.size() * sizeof(float)));
        if (!out) throw Error(ErrorCode::StorageFailure, "cannot write bank " + path.string());
    }
    std::ofstream side(sidecar_path(path), std::ios::trunc);
    side << nlohmann::json{{"dim", dim_}, {"count", ids_.size()}, {"ids", ids_}}.dump(1) << '\n';
    if (!side) throw Error(ErrorCode::StorageFailure, "cannot write bank sidecar for " + path.string());
}

EmbeddingBank EmbeddingBank::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot open bank " + path.string());
    std::uint64_t header[2] = {0, 0};
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (!in) throw Error(ErrorCode::StorageFailure, "truncated bank header in " + path.string());
    EmbeddingBank bank(header[0]);
    bank.data_.resize(header[0] * header[1]);
    in.read(reinterpret_cast<char*>(bank.data_.data()), static_cast<std::streamsize>(bank.data_.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::StorageFailure, "truncated bank payload in " + path.string());

    const auto side_path = sidecar_path(path);
    if (std::filesystem::exists(side_path)) {
        std::ifstream side(side_path);
        const auto j = nlohmann::json::parse(side, nullptr, false);
        if (j.is_discarded() || !j.contains("ids") || j["ids"].size() != header[1]) {
            throw Error(ErrorCode::StorageFailure, "bank sidecar disagrees with " + path.string());
        }
        bank.ids_ = j["ids"].get<std::vector<std::string>>();
    } else {
        for (std::uint64_t i = 0; i < header[1]; ++i) bank.ids_.push_back("bad-" + std::to_string(i));
    }
    for (std::size_t i = 0; i < bank.size(); ++i) require_unit_norm(bank.row(i));
    return bank;
}

ScreenResult similarity_screen(std::span<const float> embedding, const EmbeddingBank& bank, const ScreenConfig& cfg) {
    if (embedding.size() != bank.dim() && !bank.empty()) {
        throw Error(ErrorCode::DimensionMismatch, "embedding dimension " + std::to_string(embedding.size()) +
                                                      " does not match bank dimension " + std::to_string(bank.dim()));
    }
    require_unit_norm(embedding);
    ScreenResult r;
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double sim = cosine(embedding, bank.row(i));
        if (!r.nearest || sim > r.max_similarity) {
            r.max_similarity = sim;
            r.nearest = i;
        }
    }
    r.pass = r.max_similarity <= cfg.delta;
    return r;
}

} // namespace cxrsynth
