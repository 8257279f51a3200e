#include "cxrsynth/entity.hpp"

#include "cxrsynth/error.hpp"
#include "cxrsynth/hashing.hpp"

#include <cctype>

namespace cxrsynth {

std::string_view to_string(Category c) {
    switch (c) {
    case Category::Abnormality: return "ABNORMALITY";
    case Category::NonAbnormality: return "NON-ABNORMALITY";
    case Category::Disease: return "DISEASE";
    case Category::NonDisease: return "NON-DISEASE";
    case Category::Anatomy: return "ANATOMY";
    }
    return "UNKNOWN";
}

std::optional<Category> parse_category(std::string_view label) {
    std::string canon;
    canon.reserve(label.size());
    std::size_t b = 0;
    std::size_t e = label.size();
    while (b < e && std::isspace(static_cast<unsigned char>(label[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(label[e - 1]))) --e;
    for (std::size_t i = b; i < e; ++i) {
        const char c = label[i];
        canon.push_back((c == '_' || c == ' ') ? '-' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    for (Category c : kAllCategories) {
        if (canon == to_string(c)) return c;
    }
    return std::nullopt;
}

std::string to_string(EntityId id) { return to_hex64(id.value); }

std::string normalize_text(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

EntityId entity_id(std::string_view normalized_text, Category category) {
    std::uint64_t h = fnv1a64(normalized_text);
    h = fnv1a64("\t", h);
    h = fnv1a64(to_string(category), h);
    return EntityId{h};
}

Entity make_entity(std::string_view raw, Category category) {
    Entity e;
    e.text = normalize_text(raw);
    if (e.text.empty()) {
        throw Error(ErrorCode::MalformedRecord, "entity text is empty after normalization");
    }
    e.category = category;
    e.id = entity_id(e.text, category);
    return e;
}

} // namespace cxrsynth
