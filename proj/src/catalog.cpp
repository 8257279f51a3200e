#include "cxrsynth/catalog.hpp"

#include "cxrsynth/error.hpp"

#include <fstream>
#include <sstream>

namespace cxrsynth {

bool EntityCatalog::add(Entity entity) {
    if (auto it = index_.find(entity.id); it != index_.end()) {
        const Entity& existing = entities_[it->second];
        if (existing.text != entity.text || existing.category != entity.category) {
            throw Error(ErrorCode::MalformedRecord,
                        "entity id collision between '" + existing.text + "' and '" + entity.text + "'");
        }
        return false;
    }
    index_.emplace(entity.id, entities_.size());
    per_category_[static_cast<std::size_t>(entity.category)].push_back(entity.id);
    by_text_[entity.text].push_back(entity.id);
    max_text_length_ = std::max(max_text_length_, entity.text.size());
    entities_.push_back(std::move(entity));
    return true;
}

const Entity* EntityCatalog::find(EntityId id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entities_[it->second];
}

const Entity& EntityCatalog::at(EntityId id) const {
    if (const Entity* e = find(id)) return *e;
    throw Error(ErrorCode::PreconditionViolation, "entity " + to_string(id) + " is not in the catalog");
}

std::span<const EntityId> EntityCatalog::ids_with_text(std::string_view text) const {
    auto it = by_text_.find(std::string(text));
    if (it == by_text_.end()) return {};
    return it->second;
}

CatalogLoad parse_catalog(std::istream& in, const std::string& source_name) {
    CatalogLoad out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (normalize_text(line).empty()) continue;

        const auto tab = line.rfind('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::MalformedRecord,
                        source_name + ":" + std::to_string(lineno) + ": expected 'text<TAB>category'");
        }
        const auto category = parse_category(std::string_view(line).substr(tab + 1));
        if (!category) {
            throw Error(ErrorCode::MalformedRecord, source_name + ":" + std::to_string(lineno) +
                                                        ": unknown category '" + line.substr(tab + 1) + "'");
        }
        const std::string_view raw = std::string_view(line).substr(0, tab);
        if (normalize_text(raw).empty()) {
            throw Error(ErrorCode::MalformedRecord, source_name + ":" + std::to_string(lineno) + ": empty entity text");
        }
        ++out.records;
        if (!out.catalog.add(make_entity(raw, *category))) ++out.duplicates;
    }
    if (out.catalog.empty()) {
        throw Error(ErrorCode::EmptyCatalog, source_name + " contains no entities");
    }
    return out;
}

CatalogLoad load_catalog(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) {
        throw Error(ErrorCode::ConfigInvalid, "cannot open entity file " + source.string());
    }
    return parse_catalog(in, source.string());
}

void write_catalog_tsv(const EntityCatalog& catalog, std::ostream& out) {
    for (const Entity& e : catalog.entities()) {
        out << e.text << '\t' << to_string(e.category) << '\n';
    }
}

std::string catalog_tsv(const EntityCatalog& catalog) {
    std::ostringstream os;
    write_catalog_tsv(catalog, os);
    return os.str();
}

nlohmann::json catalog_to_json(const EntityCatalog& catalog) {
    nlohmann::json entities = nlohmann::json::array();
    for (const Entity& e : catalog.entities()) {
        entities.push_back({{"id", to_string(e.id)}, {"text", e.text}, {"category", to_string(e.category)}});
    }
    return {{"entities", std::move(entities)}, {"category_counts", to_json(category_counts(catalog))}};
}

CategoryCounts category_counts(const EntityCatalog& catalog) {
    CategoryCounts counts;
    for (Category c : kAllCategories) counts[c] = catalog.ids_in(c).size();
    return counts;
}

nlohmann::json to_json(const CategoryCounts& counts) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [c, n] : counts) j[std::string(to_string(c))] = n;
    return j;
}

} // namespace cxrsynth
