#include "cxrsynth/audit.hpp"

#include "cxrsynth/error.hpp"
#include "cxrsynth/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>

namespace cxrsynth {

std::vector<CorpusItem> read_corpus_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot open corpus manifest " + manifest.string());
    const auto base = manifest.parent_path();
    auto resolve = [&](const std::string& p) {
        if (p.empty()) return p;
        const std::filesystem::path path(p);
        return path.is_absolute() ? p : (base / path).string();
    };
    std::vector<CorpusItem> items;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        const std::string where = manifest.string() + ":" + std::to_string(lineno);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j.contains("image_path")) {
            throw Error(ErrorCode::MalformedRecord, where + ": expected {id, image_path, report_path}");
        }
        CorpusItem item;
        item.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        item.image_path = resolve(j["image_path"].get<std::string>());
        item.report_path = resolve(j.value("report_path", std::string{}));
        if (!seen.insert(item.id).second) throw Error(ErrorCode::MalformedRecord, where + ": duplicate id " + item.id);
        items.push_back(std::move(item));
    }
    return items;
}

ImageSource file_image_source() {
    return [](const CorpusItem& item) -> Blob {
        std::ifstream in(item.image_path, std::ios::binary);
        if (!in) throw Error(ErrorCode::StorageFailure, "cannot read image " + item.image_path);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
}

std::vector<std::string> AuditReport::removed_ids() const {
    std::vector<std::string> out(judge_removed_ids);
    out.insert(out.end(), similarity_removed_ids.begin(), similarity_removed_ids.end());
    return out;
}

bool AuditReport::consistent() const {
    if (judge_removed_ids.size() != removed_by_judge || similarity_removed_ids.size() != removed_by_similarity ||
        skipped_ids.size() != skipped) {
        return false;
    }
    if (removed_by_judge + removed_by_similarity + skipped + remaining != total_in) return false;
    std::unordered_set<std::string> all;
    for (const auto* ids : {&judge_removed_ids, &similarity_removed_ids, &skipped_ids}) {
        for (const auto& id : *ids) {
            if (!all.insert(id).second) return false;
        }
    }
    return true;
}

nlohmann::json AuditReport::to_json() const {
    return {{"total_in", total_in},
            {"removed_by_judge", removed_by_judge},
            {"removed_by_similarity", removed_by_similarity},
            {"skipped", skipped},
            {"remaining", remaining},
            {"policy", policy},
            {"delta", delta},
            {"removed_ids", removed_ids()},
            {"skipped_ids", skipped_ids},
            {"errors", errors}};
}

std::vector<std::size_t> propagate_bad(const EmbeddingBank& candidates, const EmbeddingBank& seeds,
                                       const ScreenConfig& cfg) {
    std::vector<std::size_t> out;
    if (candidates.empty() || seeds.empty()) return out;
    if (candidates.dim() != seeds.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "candidate and seed embeddings differ in dimension");
    }
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto dim = static_cast<Eigen::Index>(candidates.dim());
    const auto to_matrix = [dim](const EmbeddingBank& bank, std::size_t begin, std::size_t end) {
        Matrix m(static_cast<Eigen::Index>(end - begin), dim);
        for (std::size_t r = begin; r < end; ++r) {
            const auto row = bank.row(r);
            for (Eigen::Index c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r - begin), c) = row[static_cast<std::size_t>(c)];
        }
        return m;
    };
    const Matrix seed_t = to_matrix(seeds, 0, seeds.size()).transpose();
    constexpr std::size_t kBlock = 1024;
    for (std::size_t begin = 0; begin < candidates.size(); begin += kBlock) {
        const std::size_t end = std::min(candidates.size(), begin + kBlock);
        const Matrix sims = to_matrix(candidates, begin, end) * seed_t;
        for (Eigen::Index r = 0; r < sims.rows(); ++r) {
            if (sims.row(r).maxCoeff() > cfg.delta) out.push_back(begin + static_cast<std::size_t>(r));
        }
    }
    return out;
}

std::vector<std::string> propagate_bad(const std::map<std::string, std::vector<float>>& embeddings,
                                       std::span<const std::string> seed_bad_ids, const ScreenConfig& cfg) {
    if (embeddings.empty()) return {};
    const std::size_t dim = embeddings.begin()->second.size();
    std::unordered_set<std::string> seed_set(seed_bad_ids.begin(), seed_bad_ids.end());
    EmbeddingBank seeds(dim);
    EmbeddingBank candidates(dim);
    // Seeds in sorted order so the result does not depend on the caller's ordering.
    std::vector<std::string> sorted_seeds(seed_set.begin(), seed_set.end());
    std::sort(sorted_seeds.begin(), sorted_seeds.end());
    for (const auto& id : sorted_seeds) {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) throw Error(ErrorCode::PreconditionViolation, "seed " + id + " has no embedding");
        seeds.add(id, it->second);
    }
    for (const auto& [id, v] : embeddings) {
        if (!seed_set.contains(id)) candidates.add(id, v);
    }
    std::vector<std::string> out;
    for (auto i : propagate_bad(candidates, seeds, cfg)) out.push_back(candidates.id(i));
    return out;
}

AuditOutcome audit_items(std::span<const CorpusItem> items, const ImageSource& images, QualityJudge& judge,
                         ImageEmbedder& embedder, const AuditOptions& options) {
    options.screen.validate();
    const std::size_t n = items.size();
    enum class Stage1 { Kept, JudgeRemoved, Skipped };
    std::vector<Stage1> stage1(n, Stage1::Kept);
    std::vector<std::optional<std::vector<float>>> embeddings(n);
    std::vector<std::string> errors(n);

    parallel_for(n, options.workers, [&](std::size_t i) {
        try {
            const Blob blob = images(items[i]);
            const CurationVerdict v = judge_image(blob, judge, options.policy);
            if (!v.passes_removal) stage1[i] = Stage1::JudgeRemoved;
            auto e = embedder.embed_image(blob);
            if (e.size() != options.screen.embedding_dim) {
                throw Error(ErrorCode::DimensionMismatch, "embedder returned dimension " + std::to_string(e.size()));
            }
            require_unit_norm(e);
            embeddings[i] = std::move(e);
        } catch (const Error& err) {
            errors[i] = items[i].id + ": " + err.what();
            // A judge-removed image stays removed even without an embedding;
            // it simply cannot seed the similarity stage.
            if (stage1[i] != Stage1::JudgeRemoved) stage1[i] = Stage1::Skipped;
        }
    });

    AuditOutcome out;
    out.bad_bank = EmbeddingBank(options.screen.embedding_dim);
    EmbeddingBank candidates(options.screen.embedding_dim);
    std::vector<std::size_t> candidate_index;
    for (std::size_t i = 0; i < n; ++i) {
        if (stage1[i] == Stage1::JudgeRemoved && embeddings[i]) out.bad_bank.add(items[i].id, *embeddings[i]);
        if (stage1[i] == Stage1::Kept) {
            candidates.add(items[i].id, *embeddings[i]);
            candidate_index.push_back(i);
        }
    }
    std::vector<bool> similar(n, false);
    for (auto r : propagate_bad(candidates, out.bad_bank, options.screen)) similar[candidate_index[r]] = true;

    AuditReport& rep = out.report;
    rep.total_in = n;
    rep.policy = options.policy.name();
    rep.delta = options.screen.delta;
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i].empty()) rep.errors.push_back(errors[i]);
        switch (stage1[i]) {
        case Stage1::JudgeRemoved: rep.judge_removed_ids.push_back(items[i].id); break;
        case Stage1::Skipped: rep.skipped_ids.push_back(items[i].id); break;
        case Stage1::Kept:
            if (similar[i]) rep.similarity_removed_ids.push_back(items[i].id);
            break;
        }
    }
    rep.removed_by_judge = rep.judge_removed_ids.size();
    rep.removed_by_similarity = rep.similarity_removed_ids.size();
    rep.skipped = rep.skipped_ids.size();
    rep.remaining = rep.total_in - rep.removed_by_judge - rep.removed_by_similarity - rep.skipped;
    return out;
}

AuditOutcome audit_corpus(const std::filesystem::path& manifest, QualityJudge& judge, ImageEmbedder& embedder,
                          const AuditOptions& options) {
    const auto items = read_corpus_manifest(manifest);
    return audit_items(items, file_image_source(), judge, embedder, options);
}

DistributionReport entity_distribution(std::span<const std::string> reports, EntityExtractor& extractor) {
    std::unordered_map<EntityId, EntityCount> counts;
    for (const auto& text : reports) {
        std::unordered_set<EntityId> in_report;
        for (const auto& x : extractor.extract_entities(text)) {
            if (normalize_text(x.text).empty()) continue;
            Entity e = make_entity(x.text, x.category);
            if (!in_report.insert(e.id).second) continue;
            auto [it, inserted] = counts.try_emplace(e.id, EntityCount{e, 0});
            ++it->second.count;
        }
    }
    std::vector<EntityCount> flat;
    flat.reserve(counts.size());
    for (auto& [id, ec] : counts) flat.push_back(std::move(ec));
    return distribution_report(flat);
}

} // namespace cxrsynth
