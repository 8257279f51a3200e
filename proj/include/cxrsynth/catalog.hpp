#pragma once

#include "cxrsynth/entity.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cxrsynth {

// The entity universe. Immutable once loaded; concurrent reads need no locking.
class EntityCatalog {
public:
    // Returns false (and leaves the catalog unchanged) if the (text, category)
    // pair is already present.
    bool add(Entity entity);

    std::size_t size() const { return entities_.size(); }
    bool empty() const { return entities_.empty(); }

    // In insertion (file) order.
    std::span<const Entity> entities() const { return entities_; }

    const Entity* find(EntityId id) const;
    const Entity& at(EntityId id) const;
    bool contains(EntityId id) const { return find(id) != nullptr; }

    std::span<const EntityId> ids_in(Category c) const {
        return per_category_[static_cast<std::size_t>(c)];
    }

    // All entities whose normalized text equals `text` (one per category it
    // appears in).
    std::span<const EntityId> ids_with_text(std::string_view text) const;
    std::size_t max_text_length() const { return max_text_length_; }

private:
    std::vector<Entity> entities_;
    std::unordered_map<EntityId, std::size_t> index_;
    std::array<std::vector<EntityId>, kAllCategories.size()> per_category_;
    std::unordered_map<std::string, std::vector<EntityId>> by_text_;
    std::size_t max_text_length_ = 0;
};

struct CatalogLoad {
    EntityCatalog catalog;
    std::size_t records = 0;
    std::size_t duplicates = 0;
};

// Reads `text <TAB> category` lines. Blank lines are skipped. Throws
// Error(MalformedRecord) on a line without a tab or with an unknown category,
// Error(EmptyCatalog) if nothing was loaded.
CatalogLoad load_catalog(const std::filesystem::path& source);
CatalogLoad parse_catalog(std::istream& in, const std::string& source_name = "<stream>");

// Inverse of parse_catalog: one `text\tCATEGORY` line per entity, catalog order.
void write_catalog_tsv(const EntityCatalog& catalog, std::ostream& out);
std::string catalog_tsv(const EntityCatalog& catalog);

nlohmann::json catalog_to_json(const EntityCatalog& catalog);

using CategoryCounts = std::map<Category, std::size_t>;

// Every category is present in the result, possibly with 0.
CategoryCounts category_counts(const EntityCatalog& catalog);

nlohmann::json to_json(const CategoryCounts& counts);

} // namespace cxrsynth
