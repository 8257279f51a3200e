#include "cxrsynth/mock_providers.hpp"

#include "cxrsynth/curation.hpp"
#include "cxrsynth/error.hpp"
#include "cxrsynth/hashing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace cxrsynth {

void MockPolicy::validate() const {
    auto check = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::ConfigInvalid, std::string(what) + " must lie in [0, 1]");
    };
    for (const auto& [role, p] : failure_prob) check(p, "failure_prob");
    check(extra_entity_prob, "extra_entity_prob");
    check(drop_entity_prob, "drop_entity_prob");
    check(bad_image_prob, "bad_image_prob");
    if (embedding_dim < 1) throw Error(ErrorCode::ConfigInvalid, "embedding_dim must be at least 1");
}

double MockPolicy::failure(ProviderRole role) const {
    auto it = failure_prob.find(role);
    return it == failure_prob.end() ? 0.0 : it->second;
}

void to_json(nlohmann::json& j, const MockPolicy& p) {
    nlohmann::json fail = nlohmann::json::object();
    for (const auto& [role, prob] : p.failure_prob) fail[std::string(to_string(role))] = prob;
    j = {{"seed", p.seed},
         {"failure_prob", std::move(fail)},
         {"extra_entity_prob", p.extra_entity_prob},
         {"drop_entity_prob", p.drop_entity_prob},
         {"bad_image_prob", p.bad_image_prob},
         {"embedding_dim", p.embedding_dim},
         {"call_delay_us", p.call_delay.count()}};
}

void from_json(const nlohmann::json& j, MockPolicy& p) {
    p.seed = j.value("seed", p.seed);
    if (j.contains("failure_prob")) {
        for (const auto& [name, prob] : j.at("failure_prob").items()) {
            const auto role = parse_role(name);
            if (!role) throw Error(ErrorCode::ConfigInvalid, "unknown provider role '" + name + "'");
            p.failure_prob[*role] = prob.get<double>();
        }
    }
    p.extra_entity_prob = j.value("extra_entity_prob", p.extra_entity_prob);
    p.drop_entity_prob = j.value("drop_entity_prob", p.drop_entity_prob);
    p.bad_image_prob = j.value("bad_image_prob", p.bad_image_prob);
    p.embedding_dim = j.value("embedding_dim", p.embedding_dim);
    p.call_delay = std::chrono::microseconds(j.value("call_delay_us", p.call_delay.count()));
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

} // namespace

CatalogMatcher::CatalogMatcher(std::shared_ptr<const EntityCatalog> catalog) : catalog_(std::move(catalog)) {}

std::vector<ExtractedEntity> CatalogMatcher::match(std::string_view text) const {
    const std::string s = normalize_text(text);
    const std::size_t n = s.size();
    const std::size_t max_len = catalog_->max_text_length();
    std::vector<ExtractedEntity> out;
    std::size_t i = 0;
    while (i < n) {
        if (!is_word_char(s[i]) || (i > 0 && is_word_char(s[i - 1]))) {
            ++i;
            continue;
        }
        std::size_t best_end = 0;
        const std::size_t limit = std::min(n, i + max_len);
        for (std::size_t j = i + 1; j <= limit; ++j) {
            if (!is_word_char(s[j - 1]) || (j < n && is_word_char(s[j]))) continue;
            if (!catalog_->ids_with_text(std::string_view(s).substr(i, j - i)).empty()) best_end = j;
        }
        if (best_end == 0) {
            ++i;
            continue;
        }
        for (EntityId id : catalog_->ids_with_text(std::string_view(s).substr(i, best_end - i))) {
            const Entity& e = catalog_->at(id);
            out.push_back({e.text, e.category});
        }
        i = best_end;
    }
    return out;
}

std::string mock_judge_marker(const std::array<bool, 6>& answers) {
    std::string s = "MOCKJUDGE:";
    for (bool a : answers) s.push_back(a ? 'Y' : 'N');
    return s + "\n";
}

std::string mock_embed_marker(std::span<const float> vector) {
    std::ostringstream os;
    os.precision(9);
    os << "MOCKEMBED:";
    for (std::size_t i = 0; i < vector.size(); ++i) {
        if (i) os << ',';
        os << vector[i];
    }
    os << '\n';
    return os.str();
}

namespace {

enum Stream : std::uint64_t {
    kFailStream = 0x10,
    kExtraStream,
    kDropStream,
    kPickStream,
    kBadStream,
    kEmbedStream,
    kPixelStream,
};

class CallScope {
public:
    CallScope(const MockPolicy& policy, MockInstrumentation* inst, ProviderRole role) : inst_(inst) {
        if (inst_) {
            inst_->calls[static_cast<int>(role)].fetch_add(1);
            const int now = inst_->in_flight.fetch_add(1) + 1;
            int seen = inst_->max_in_flight.load();
            while (now > seen && !inst_->max_in_flight.compare_exchange_weak(seen, now)) {
            }
        }
        if (policy.call_delay.count() > 0) std::this_thread::sleep_for(policy.call_delay);
    }
    ~CallScope() {
        if (inst_) inst_->in_flight.fetch_sub(1);
    }
    CallScope(const CallScope&) = delete;
    CallScope& operator=(const CallScope&) = delete;

private:
    MockInstrumentation* inst_;
};

struct MockBase {
    MockPolicy policy;
    std::shared_ptr<MockInstrumentation> inst;

    double draw(std::uint64_t stream, std::uint64_t content, std::uint64_t request_seed) const {
        return unit_interval(derive_seed(policy.seed, {stream, content, request_seed}));
    }

    void maybe_fail(ProviderRole role, std::uint64_t content, std::uint64_t request_seed) const {
        if (draw(kFailStream + static_cast<std::uint64_t>(role) * 0x100, content, request_seed) < policy.failure(role)) {
            throw Error(ErrorCode::ProviderUnavailable, "mock " + std::string(to_string(role)) + " injected failure");
        }
    }
};

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Parses `LABEL: a; b` lines. Returns false if the prompt has none.
bool parse_entity_lines(std::string_view prompt, std::vector<std::string>& texts) {
    bool found = false;
    std::istringstream in{std::string(prompt)};
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        for (Category c : kAllCategories) {
            const std::string label = std::string(to_string(c)) + ":";
            if (t.rfind(label, 0) != 0) continue;
            found = true;
            std::string rest = t.substr(label.size());
            std::size_t pos = 0;
            while (pos <= rest.size()) {
                const auto semi = rest.find(';', pos);
                const std::string item = normalize_text(rest.substr(pos, semi == std::string::npos ? std::string::npos : semi - pos));
                if (!item.empty() && item != "none") texts.push_back(item);
                if (semi == std::string::npos) break;
                pos = semi + 1;
            }
            break;
        }
    }
    return found;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

class MockTextGenerator final : public TextGenerator, MockBase {
public:
    MockTextGenerator(std::shared_ptr<const EntityCatalog> catalog, MockBase base)
        : MockBase(std::move(base)), catalog_(catalog), matcher_(std::move(catalog)) {}

    std::string generate_text(std::string_view prompt, const TextGenParams& params) override {
        CallScope scope(policy, inst.get(), ProviderRole::TextGen);
        const std::uint64_t content = fnv1a64(prompt);
        maybe_fail(ProviderRole::TextGen, content, params.seed);

        std::vector<std::string> texts;
        if (parse_entity_lines(prompt, texts)) return findings(texts, content, params.seed);
        return summary(prompt, content, params.seed);
    }

private:
    std::string findings(std::vector<std::string> texts, std::uint64_t content, std::uint64_t seed) const {
        std::string out = "The study demonstrates " + join(texts, ", ") + ".";
        if (draw(kExtraStream, content, seed) < policy.extra_entity_prob) {
            const auto all = catalog_->entities();
            Rng rng(derive_seed(policy.seed, {kPickStream, content, seed}));
            std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
            for (int attempt = 0; attempt < 256; ++attempt) {
                const Entity& e = all[pick(rng)];
                if (std::find(texts.begin(), texts.end(), e.text) == texts.end()) {
                    out += " Also noted: " + e.text + ".";
                    break;
                }
            }
        }
        return out;
    }

    std::string summary(std::string_view prompt, std::uint64_t content, std::uint64_t seed) const {
        std::string_view source = prompt;
        if (auto pos = prompt.rfind("FINDINGS:"); pos != std::string_view::npos) source = prompt.substr(pos + 9);
        std::vector<std::string> texts;
        for (const auto& x : matcher_.match(source)) {
            if (std::find(texts.begin(), texts.end(), x.text) == texts.end()) texts.push_back(x.text);
        }
        if (!texts.empty() && draw(kDropStream, content, seed) < policy.drop_entity_prob) {
            Rng rng(derive_seed(policy.seed, {kPickStream, content, seed, 1}));
            std::uniform_int_distribution<std::size_t> pick(0, texts.size() - 1);
            texts.erase(texts.begin() + static_cast<std::ptrdiff_t>(pick(rng)));
        }
        return "Impression: " + join(texts, ", ") + ".";
    }

    std::shared_ptr<const EntityCatalog> catalog_;
    CatalogMatcher matcher_;
};

class MockEntityExtractor final : public EntityExtractor, MockBase {
public:
    MockEntityExtractor(std::shared_ptr<const EntityCatalog> catalog, MockBase base)
        : MockBase(std::move(base)), matcher_(std::move(catalog)) {}

    std::vector<ExtractedEntity> extract_entities(std::string_view text) override {
        CallScope scope(policy, inst.get(), ProviderRole::EntityExtract);
        maybe_fail(ProviderRole::EntityExtract, fnv1a64(text), 0);
        return matcher_.match(text);
    }

private:
    CatalogMatcher matcher_;
};

class MockImageGenerator final : public ImageGenerator, MockBase {
public:
    explicit MockImageGenerator(MockBase base) : MockBase(std::move(base)) {}

    Blob generate_image(std::string_view prompt, const ImageGenParams& params) override {
        CallScope scope(policy, inst.get(), ProviderRole::ImageGen);
        const std::uint64_t content = fnv1a64(prompt);
        maybe_fail(ProviderRole::ImageGen, content, params.seed);
        std::ostringstream os;
        os << "MOCKIMG/1\nprompt:" << to_hex64(content) << "\nseed:" << params.seed
           << "\nguidance:" << params.guidance_scale << "\nsteps:" << params.steps << "\n";
        Rng rng(derive_seed(policy.seed, {kPixelStream, content, params.seed}));
        for (int i = 0; i < 8; ++i) os << to_hex64(rng());
        os << "\n";
        return os.str();
    }
};

std::optional<std::string> marker_line(const Blob& blob, std::string_view prefix) {
    std::size_t pos = 0;
    while (pos < blob.size()) {
        auto end = blob.find('\n', pos);
        if (end == std::string::npos) end = blob.size();
        std::string_view line(blob.data() + pos, end - pos);
        if (line.substr(0, prefix.size()) == prefix) return std::string(line.substr(prefix.size()));
        pos = end + 1;
    }
    return std::nullopt;
}

class MockQualityJudge final : public QualityJudge, MockBase {
public:
    explicit MockQualityJudge(MockBase base) : MockBase(std::move(base)) {}

    std::string quality_answer(const Blob& image, std::string_view query) override {
        CallScope scope(policy, inst.get(), ProviderRole::QualityJudge);
        const std::uint64_t content = fnv1a64(image);
        maybe_fail(ProviderRole::QualityJudge, content, fnv1a64(query));
        if (auto planted = marker_line(image, "MOCKJUDGE:"); planted && planted->size() == 6) {
            if (auto idx = quality_query_index(query)) return (*planted)[*idx] == 'Y' ? "YES" : "NO";
        }
        const bool bad = draw(kBadStream, content, 0) < policy.bad_image_prob;
        return bad ? "NO" : "YES";
    }
};

class MockImageEmbedder final : public ImageEmbedder, MockBase {
public:
    explicit MockImageEmbedder(MockBase base) : MockBase(std::move(base)) {}

    std::vector<float> embed_image(const Blob& image) override {
        CallScope scope(policy, inst.get(), ProviderRole::ImageEmbed);
        const std::uint64_t content = fnv1a64(image);
        maybe_fail(ProviderRole::ImageEmbed, content, 0);
        std::vector<double> v;
        if (auto planted = marker_line(image, "MOCKEMBED:")) {
            std::istringstream in(*planted);
            std::string item;
            while (std::getline(in, item, ',')) v.push_back(std::strtod(item.c_str(), nullptr));
            if (v.size() != policy.embedding_dim) {
                throw Error(ErrorCode::DimensionMismatch, "planted embedding has dimension " + std::to_string(v.size()) +
                                                              ", expected " + std::to_string(policy.embedding_dim));
            }
        } else {
            Rng rng(derive_seed(policy.seed, {kEmbedStream, content}));
            std::normal_distribution<double> gauss(0.0, 1.0);
            v.resize(policy.embedding_dim);
            for (auto& x : v) x = gauss(rng);
        }
        double norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0) throw Error(ErrorCode::PreconditionViolation, "cannot normalize a zero embedding");
        std::vector<float> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
        return out;
    }
};

} // namespace

ProviderSet make_mock_providers(std::shared_ptr<const EntityCatalog> catalog, const MockPolicy& policy,
                                std::shared_ptr<MockInstrumentation> instrumentation) {
    policy.validate();
    MockBase base{policy, std::move(instrumentation)};
    ProviderSet set;
    set.text = std::make_shared<MockTextGenerator>(catalog, base);
    set.extractor = std::make_shared<MockEntityExtractor>(catalog, base);
    set.image = std::make_shared<MockImageGenerator>(base);
    set.judge = std::make_shared<MockQualityJudge>(base);
    set.embedder = std::make_shared<MockImageEmbedder>(base);
    return set;
}

} // namespace cxrsynth
