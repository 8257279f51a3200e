#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace cxrsynth {

enum class Category : std::uint8_t {
    Abnormality,
    NonAbnormality,
    Disease,
    NonDisease,
    Anatomy,
};

inline constexpr std::array<Category, 5> kAllCategories = {
    Category::Abnormality, Category::NonAbnormality, Category::Disease,
    Category::NonDisease,  Category::Anatomy,
};

// Canonical labels: ABNORMALITY, NON-ABNORMALITY, DISEASE, NON-DISEASE, ANATOMY.
std::string_view to_string(Category c);

// Case-insensitive; '_' and ' ' are accepted in place of '-'.
std::optional<Category> parse_category(std::string_view label);

inline constexpr bool is_anatomy(Category c) { return c == Category::Anatomy; }

struct EntityId {
    std::uint64_t value = 0;

    friend constexpr auto operator<=>(EntityId, EntityId) = default;
};

std::string to_string(EntityId id);

// Lowercase (ASCII) and collapse every whitespace run to one space, trimming
// both ends. No stemming.
std::string normalize_text(std::string_view raw);

struct Entity {
    std::string text;
    Category category = Category::Abnormality;
    EntityId id;

    friend bool operator==(const Entity&, const Entity&) = default;
};

// Stable 64-bit identity of a normalized (text, category) pair.
EntityId entity_id(std::string_view normalized_text, Category category);

// Normalizes `raw`; throws Error(MalformedRecord) if the result is empty.
Entity make_entity(std::string_view raw, Category category);

} // namespace cxrsynth

template <>
struct std::hash<cxrsynth::EntityId> {
    std::size_t operator()(cxrsynth::EntityId id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
