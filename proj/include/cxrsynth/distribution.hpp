#pragma once

#include "cxrsynth/catalog.hpp"
#include "cxrsynth/entity.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace cxrsynth {

using CountMap = std::unordered_map<EntityId, std::uint64_t>;

// Mean absolute pairwise difference Gini:
//   G = sum_i sum_j |x_i - x_j| / (2 n^2 mu)
// evaluated in O(n log n) on the sorted counts. Zeros take part. Throws
// Error(AllZero) when the mean is zero (including n == 0).
double gini(std::span<const std::uint64_t> counts);

// Share of total mass held by the k largest counts. k larger than n gives 1.
// Throws Error(AllZero) when the total is zero.
double top_k_share(std::span<const std::uint64_t> counts, std::size_t k);

struct EntityCount {
    Entity entity;
    std::uint64_t count = 0;
};

struct CategoryDistribution {
    // Descending by count, ties by id, zero counts included.
    std::vector<EntityCount> histogram;
    std::uint64_t total = 0;
    // Number of entities with a nonzero count.
    std::size_t unique_count = 0;
    // Unset when total == 0.
    std::optional<double> gini;

    double top_k_share(std::size_t k) const;
    std::vector<std::uint64_t> counts() const;
};

struct DistributionReport {
    std::map<Category, CategoryDistribution> per_category;
    CategoryDistribution overall;

    nlohmann::json to_json(std::span<const std::size_t> top_ks = kDefaultTopKs,
                           bool include_histogram = true) const;

    static constexpr std::size_t kDefaultTopKs[] = {1, 10, 100, 1000};
};

// Categories come from the entities themselves. Throws Error(AllZero) if the
// total mass is zero.
DistributionReport distribution_report(std::span<const EntityCount> counts);

// Every catalog entity takes part; entities absent from `counts` count as 0.
// Throws Error(PreconditionViolation) for ids outside the catalog.
DistributionReport distribution_report(const EntityCatalog& catalog, const CountMap& counts);

} // namespace cxrsynth
