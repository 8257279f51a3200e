#pragma once

#include "cxrsynth/catalog.hpp"
#include "cxrsynth/distribution.hpp"
#include "cxrsynth/entity.hpp"
#include "cxrsynth/error.hpp"
#include "cxrsynth/hashing.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cxrsynth {

struct SamplerConfig {
    std::uint32_t k = 9;        // entities per set from the four non-anatomy categories
    std::uint32_t m = 3;        // entities per set from ANATOMY
    std::uint32_t tau_max = 15; // per-entity cap on accepted records
    double entity_ratio = 1.0;  // fraction of each category eligible for sampling
    std::uint64_t seed = 0;

    // Throws Error(ConfigInvalid).
    void validate() const;

    friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

void to_json(nlohmann::json& j, const SamplerConfig& cfg);
void from_json(const nlohmann::json& j, SamplerConfig& cfg);

// The two halves of an entity set: S1 draws from the union of ABNORMALITY,
// NON-ABNORMALITY, DISEASE and NON-DISEASE; S2 draws from ANATOMY.
enum class SlotGroup { NonAnatomy, Anatomy };

std::string_view to_string(SlotGroup g);

inline SlotGroup group_of(Category c) { return is_anatomy(c) ? SlotGroup::Anatomy : SlotGroup::NonAnatomy; }

class CapacityExhausted : public Error {
public:
    CapacityExhausted(SlotGroup group, std::size_t needed);
    SlotGroup group() const noexcept { return group_; }

private:
    SlotGroup group_;
};

class CapViolation : public Error {
public:
    explicit CapViolation(std::vector<EntityId> offending);
    const std::vector<EntityId>& offending() const noexcept { return offending_; }

private:
    std::vector<EntityId> offending_;
};

struct EntitySet {
    std::vector<EntityId> s1;
    std::vector<EntityId> s2;

    std::size_t size() const { return s1.size() + s2.size(); }
    // s1 followed by s2.
    std::vector<EntityId> members() const;
    bool contains(EntityId id) const;

    friend bool operator==(const EntitySet&, const EntitySet&) = default;
};

// Accepted-use count per entity. Not internally synchronized: the pipeline
// serializes commits and lets samplers read under a shared lock.
class FrequencyLedger {
public:
    explicit FrequencyLedger(std::uint32_t tau_max);

    std::uint32_t tau_max() const { return tau_max_; }
    std::uint64_t count(EntityId id) const;
    bool is_capped(EntityId id) const { return count(id) >= tau_max_; }
    std::uint64_t total_committed() const { return total_committed_; }
    const CountMap& counts() const { return counts_; }

    // All-or-nothing: increments every member by one, or throws CapViolation
    // naming every member already at the cap and changes nothing.
    void commit(const EntitySet& set);

    // Only raising is allowed.
    void relax_cap(std::uint32_t new_tau_max);

    // Throws Error(CorruptCheckpoint) if any count exceeds tau_max.
    static FrequencyLedger from_counts(std::uint32_t tau_max, CountMap counts);

    friend bool operator==(const FrequencyLedger&, const FrequencyLedger&) = default;

private:
    std::uint32_t tau_max_;
    CountMap counts_;
    std::uint64_t total_committed_ = 0;
};

nlohmann::json ledger_counts_json(const FrequencyLedger& ledger);

struct GroupCapacity {
    SlotGroup group = SlotGroup::NonAnatomy;
    std::uint32_t per_record = 0;
    std::size_t eligible_count = 0;
    std::uint64_t demand = 0;
    std::uint64_t capacity = 0;
    std::int64_t slack = 0;
    bool feasible = true;
};

struct CapacityReport {
    std::uint64_t n_target = 0;
    std::vector<GroupCapacity> groups;

    bool feasible() const;
    const GroupCapacity& group(SlotGroup g) const;
    nlohmann::json to_json() const;
};

// Draws entity sets under the frequency cap. Holds the eligible pools (the
// entity_ratio subset of each category); cheap to share across threads.
class BalancedSampler {
public:
    BalancedSampler(const EntityCatalog& catalog, SamplerConfig cfg);

    const SamplerConfig& config() const { return cfg_; }
    std::span<const EntityId> pool(SlotGroup g) const;

    // Uniform without replacement over pool members whose count is below the
    // cap. A draw that hits a capped (or already chosen) entity is redrawn;
    // the rest of the set is kept. Does not modify the ledger.
    EntitySet sample(const FrequencyLedger& ledger, Rng& rng) const;

    // Replaces only `offending` members of `set` with fresh eligible draws.
    EntitySet resample_members(const EntitySet& set, std::span<const EntityId> offending,
                               const FrequencyLedger& ledger, Rng& rng) const;

    CapacityReport capacity(const FrequencyLedger& ledger, std::uint64_t n_target) const;

private:
    EntityId draw(SlotGroup g, const FrequencyLedger& ledger, const std::vector<EntityId>& taken, Rng& rng) const;

    SamplerConfig cfg_;
    std::vector<EntityId> non_anatomy_;
    std::vector<EntityId> anatomy_;
};

EntitySet sample_entity_set(const EntityCatalog& catalog, const FrequencyLedger& ledger, const SamplerConfig& cfg,
                            Rng& rng);

void commit(FrequencyLedger& ledger, const EntitySet& set);

CapacityReport capacity_report(const EntityCatalog& catalog, const FrequencyLedger& ledger, const SamplerConfig& cfg,
                               std::uint64_t n_target);

} // namespace cxrsynth
