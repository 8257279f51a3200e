#include "cxrsynth/report_synth.hpp"

#include <algorithm>

namespace cxrsynth {

const std::string_view kDefaultFindingsTemplate =
    "You are an experienced radiologist. Write the FINDINGS section of a chest X-ray report.\n"
    "Mention every entity listed below and no other clinical entity. Each line gives the entity type.\n"
    "ABNORMALITY: {ABNORMALITY}\n"
    "NON-ABNORMALITY: {NON-ABNORMALITY}\n"
    "DISEASE: {DISEASE}\n"
    "NON-DISEASE: {NON-DISEASE}\n"
    "ANATOMY: {ANATOMY}\n"
    "Return only the text of the FINDINGS section.\n";

const std::string_view kDefaultImpressionTemplate =
    "Summarize the chest X-ray report section below into a concise IMPRESSION section.\n"
    "Keep every clinical entity it mentions and do not introduce any new one.\n"
    "Return only the text of the IMPRESSION section.\n"
    "FINDINGS:\n"
    "{FINDINGS}\n";

namespace {

constexpr std::string_view kFindingsPlaceholder = "{FINDINGS}";

std::string placeholder(Category c) { return "{" + std::string(to_string(c)) + "}"; }

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

void require_findings_placeholders(std::string_view tmpl) {
    for (Category c : kAllCategories) {
        if (tmpl.find(placeholder(c)) == std::string_view::npos) {
            throw Error(ErrorCode::TemplateMissingPlaceholder, "findings template lacks " + placeholder(c));
        }
    }
}

void require_impression_placeholder(std::string_view tmpl) {
    if (tmpl.find(kFindingsPlaceholder) == std::string_view::npos) {
        throw Error(ErrorCode::TemplateMissingPlaceholder, "impression template lacks {FINDINGS}");
    }
}

std::vector<Entity> resolve(const EntitySet& set, const EntityCatalog& catalog) {
    std::vector<Entity> out;
    for (auto id : set.members()) out.push_back(catalog.at(id));
    std::sort(out.begin(), out.end(), [](const Entity& a, const Entity& b) { return a.id < b.id; });
    return out;
}

std::string list_names(const std::vector<Entity>& entities) {
    std::string out;
    for (const auto& e : entities) {
        if (!out.empty()) out += "; ";
        out += e.text;
    }
    return out;
}

} // namespace

void ReportSynthConfig::validate() const {
    if (findings_max_retries < 1 || impression_max_retries < 1) {
        throw Error(ErrorCode::ConfigInvalid, "max_retries must be at least 1");
    }
    require_findings_placeholders(findings_template);
    require_impression_placeholder(impression_template);
}

void to_json(nlohmann::json& j, const ReportSynthConfig& cfg) {
    j = {{"findings_template", cfg.findings_template},
         {"impression_template", cfg.impression_template},
         {"findings_max_retries", cfg.findings_max_retries},
         {"impression_max_retries", cfg.impression_max_retries},
         {"temperature", cfg.temperature},
         {"max_tokens", cfg.max_tokens}};
}

void from_json(const nlohmann::json& j, ReportSynthConfig& cfg) {
    cfg.findings_template = j.value("findings_template", cfg.findings_template);
    cfg.impression_template = j.value("impression_template", cfg.impression_template);
    cfg.findings_max_retries = j.value("findings_max_retries", cfg.findings_max_retries);
    cfg.impression_max_retries = j.value("impression_max_retries", cfg.impression_max_retries);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
}

std::string ExtractionResult::describe() const {
    std::string s;
    if (!missing.empty()) s += "missing [" + list_names(missing) + "]";
    if (!extra.empty()) s += std::string(s.empty() ? "" : " ") + "extra [" + list_names(extra) + "]";
    return s.empty() ? "sets equal" : s;
}

std::string build_findings_prompt(const EntitySet& set, const EntityCatalog& catalog, std::string_view tmpl) {
    require_findings_placeholders(tmpl);
    std::string out(tmpl);
    for (Category c : kAllCategories) {
        std::string names;
        for (auto id : set.members()) {
            const Entity& e = catalog.at(id);
            if (e.category != c) continue;
            if (!names.empty()) names += "; ";
            names += e.text;
        }
        replace_all(out, placeholder(c), names.empty() ? "none" : names);
    }
    return out;
}

std::string build_impression_prompt(std::string_view findings, std::string_view tmpl) {
    require_impression_placeholder(tmpl);
    std::string out(tmpl);
    const auto pos = out.find(kFindingsPlaceholder);
    out.replace(pos, kFindingsPlaceholder.size(), findings);
    return out;
}

ExtractionResult compare_entities(const std::vector<ExtractedEntity>& extracted, const EntitySet& set,
                                  const EntityCatalog& catalog) {
    ExtractionResult r;
    for (const auto& x : extracted) {
        if (normalize_text(x.text).empty()) continue;
        r.entities.push_back(make_entity(x.text, x.category));
    }
    auto by_id = [](const Entity& a, const Entity& b) { return a.id < b.id; };
    std::sort(r.entities.begin(), r.entities.end(), by_id);
    r.entities.erase(std::unique(r.entities.begin(), r.entities.end(),
                                 [](const Entity& a, const Entity& b) { return a.id == b.id; }),
                     r.entities.end());

    const auto expected = resolve(set, catalog);
    std::set_difference(expected.begin(), expected.end(), r.entities.begin(), r.entities.end(),
                        std::back_inserter(r.missing), by_id);
    std::set_difference(r.entities.begin(), r.entities.end(), expected.begin(), expected.end(),
                        std::back_inserter(r.extra), by_id);
    return r;
}

ExtractionResult verify_entity_coverage(std::string_view text, const EntitySet& set, const EntityCatalog& catalog,
                                        EntityExtractor& extractor) {
    return compare_entities(extractor.extract_entities(text), set, catalog);
}

namespace {

template <typename MakePrompt>
GeneratedSection regenerate_until_equal(const char* stage, MakePrompt&& make_prompt, const EntitySet& set,
                                        const EntityCatalog& catalog, TextGenerator& gen, EntityExtractor& extractor,
                                        const ReportSynthConfig& cfg, std::uint32_t max_retries, std::uint64_t seed) {
    if (max_retries < 1) throw Error(ErrorCode::PreconditionViolation, "max_retries must be at least 1");
    const std::string prompt = make_prompt();
    ExtractionResult last;
    for (std::uint32_t attempt = 0; attempt < max_retries; ++attempt) {
        TextGenParams params{cfg.temperature, derive_seed(seed, {attempt}), cfg.max_tokens};
        std::string text = gen.generate_text(prompt, params);
        last = verify_entity_coverage(text, set, catalog, extractor);
        if (last.equal()) return {std::move(text), attempt + 1};
    }
    throw ReportRetriesExhausted(stage, max_retries, std::move(last));
}

} // namespace

GeneratedSection generate_findings(const EntitySet& set, const EntityCatalog& catalog, TextGenerator& gen,
                                   EntityExtractor& extractor, const ReportSynthConfig& cfg, std::uint64_t seed) {
    return regenerate_until_equal(
        "findings", [&] { return build_findings_prompt(set, catalog, cfg.findings_template); }, set, catalog, gen,
        extractor, cfg, cfg.findings_max_retries, seed);
}

GeneratedSection generate_impression(std::string_view findings, const EntitySet& set, const EntityCatalog& catalog,
                                     TextGenerator& gen, EntityExtractor& extractor, const ReportSynthConfig& cfg,
                                     std::uint64_t seed) {
    return regenerate_until_equal(
        "impression", [&] { return build_impression_prompt(findings, cfg.impression_template); }, set, catalog, gen,
        extractor, cfg, cfg.impression_max_retries, seed);
}

SyntheticReport synthesize_report(const EntitySet& set, const EntityCatalog& catalog, TextGenerator& gen,
                                  EntityExtractor& extractor, const ReportSynthConfig& cfg, std::uint64_t seed) {
    SyntheticReport report;
    report.entity_set = set;
    auto findings = generate_findings(set, catalog, gen, extractor, cfg, derive_seed(seed, {1}));
    auto impression = generate_impression(findings.text, set, catalog, gen, extractor, cfg, derive_seed(seed, {2}));
    report.findings = std::move(findings.text);
    report.findings_attempts = findings.attempts;
    report.impression = std::move(impression.text);
    report.impression_attempts = impression.attempts;
    return report;
}

} // namespace cxrsynth
