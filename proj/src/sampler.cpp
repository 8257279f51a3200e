#include "cxrsynth/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cxrsynth {

namespace {

constexpr std::uint64_t kSubsetStream = 0x5355425345540001ULL;
// Rejection draws per slot before falling back to an explicit scan of the
// eligible pool. The scan is also what detects exhaustion.
constexpr int kMaxRejections = 64;

} // namespace

void SamplerConfig::validate() const {
    if (k + m < 1) throw Error(ErrorCode::ConfigInvalid, "k + m must be at least 1");
    if (tau_max < 1) throw Error(ErrorCode::ConfigInvalid, "tau_max must be at least 1");
    if (!(entity_ratio > 0.0 && entity_ratio <= 1.0)) {
        throw Error(ErrorCode::ConfigInvalid, "entity_ratio must lie in (0, 1]");
    }
}

void to_json(nlohmann::json& j, const SamplerConfig& cfg) {
    j = {{"k", cfg.k}, {"m", cfg.m}, {"tau_max", cfg.tau_max}, {"entity_ratio", cfg.entity_ratio}, {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, SamplerConfig& cfg) {
    cfg.k = j.value("k", cfg.k);
    cfg.m = j.value("m", cfg.m);
    cfg.tau_max = j.value("tau_max", cfg.tau_max);
    cfg.entity_ratio = j.value("entity_ratio", cfg.entity_ratio);
    cfg.seed = j.value("seed", cfg.seed);
}

std::string_view to_string(SlotGroup g) {
    return g == SlotGroup::Anatomy ? "ANATOMY" : "NON-ANATOMY";
}

CapacityExhausted::CapacityExhausted(SlotGroup group, std::size_t needed)
    : Error(ErrorCode::CapacityExhausted, "fewer than " + std::to_string(needed) + " " + std::string(to_string(group)) +
                                              " entities remain below the frequency cap"),
      group_(group) {}

namespace {

std::string describe(const std::vector<EntityId>& ids) {
    std::string s;
    for (auto id : ids) {
        if (!s.empty()) s += ", ";
        s += to_string(id);
    }
    return s;
}

} // namespace

CapViolation::CapViolation(std::vector<EntityId> offending)
    : Error(ErrorCode::CapViolation, "entities already at the cap: " + describe(offending)),
      offending_(std::move(offending)) {}

std::vector<EntityId> EntitySet::members() const {
    std::vector<EntityId> all(s1);
    all.insert(all.end(), s2.begin(), s2.end());
    return all;
}

bool EntitySet::contains(EntityId id) const {
    return std::find(s1.begin(), s1.end(), id) != s1.end() || std::find(s2.begin(), s2.end(), id) != s2.end();
}

FrequencyLedger::FrequencyLedger(std::uint32_t tau_max) : tau_max_(tau_max) {
    if (tau_max < 1) throw Error(ErrorCode::ConfigInvalid, "tau_max must be at least 1");
}

std::uint64_t FrequencyLedger::count(EntityId id) const {
    auto it = counts_.find(id);
    return it == counts_.end() ? 0 : it->second;
}

void FrequencyLedger::commit(const EntitySet& set) {
    std::vector<EntityId> offending;
    const auto members = set.members();
    for (auto id : members) {
        if (is_capped(id)) offending.push_back(id);
    }
    std::vector<EntityId> sorted(members);
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error(ErrorCode::PreconditionViolation, "entity set contains a duplicate member");
    }
    if (!offending.empty()) throw CapViolation(std::move(offending));
    for (auto id : members) ++counts_[id];
    total_committed_ += members.size();
}

void FrequencyLedger::relax_cap(std::uint32_t new_tau_max) {
    if (new_tau_max < tau_max_) throw Error(ErrorCode::ConfigInvalid, "the frequency cap can only be raised");
    tau_max_ = new_tau_max;
}

FrequencyLedger FrequencyLedger::from_counts(std::uint32_t tau_max, CountMap counts) {
    FrequencyLedger ledger(tau_max);
    for (auto it = counts.begin(); it != counts.end();) {
        if (it->second > tau_max) {
            throw Error(ErrorCode::CorruptCheckpoint, "entity " + to_string(it->first) + " count exceeds the cap");
        }
        ledger.total_committed_ += it->second;
        it = it->second == 0 ? counts.erase(it) : std::next(it);
    }
    ledger.counts_ = std::move(counts);
    return ledger;
}

nlohmann::json ledger_counts_json(const FrequencyLedger& ledger) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, n] : ledger.counts()) j[to_string(id)] = n;
    return j;
}

bool CapacityReport::feasible() const {
    return std::all_of(groups.begin(), groups.end(), [](const GroupCapacity& g) { return g.feasible; });
}

const GroupCapacity& CapacityReport::group(SlotGroup g) const {
    for (const auto& gc : groups) {
        if (gc.group == g) return gc;
    }
    throw Error(ErrorCode::PreconditionViolation, "capacity report lacks group " + std::string(to_string(g)));
}

nlohmann::json CapacityReport::to_json() const {
    nlohmann::json groups_json = nlohmann::json::object();
    for (const auto& g : groups) {
        groups_json[std::string(to_string(g.group))] = {
            {"per_record", g.per_record}, {"eligible_count", g.eligible_count},
            {"demand", g.demand},         {"capacity", g.capacity},
            {"slack", g.slack},           {"feasible", g.feasible},
        };
    }
    return {{"n_target", n_target}, {"feasible", feasible()}, {"groups", std::move(groups_json)}};
}

BalancedSampler::BalancedSampler(const EntityCatalog& catalog, SamplerConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    for (Category c : kAllCategories) {
        const auto ids = catalog.ids_in(c);
        std::vector<std::size_t> order(ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        if (cfg_.entity_ratio < 1.0) {
            Rng rng(derive_seed(cfg_.seed, {kSubsetStream, static_cast<std::uint64_t>(c)}));
            std::shuffle(order.begin(), order.end(), rng);
            const auto keep = static_cast<std::size_t>(std::llround(cfg_.entity_ratio * static_cast<double>(ids.size())));
            order.resize(std::min(keep, order.size()));
            std::sort(order.begin(), order.end());
        }
        auto& pool = is_anatomy(c) ? anatomy_ : non_anatomy_;
        for (auto i : order) pool.push_back(ids[i]);
    }
}

std::span<const EntityId> BalancedSampler::pool(SlotGroup g) const {
    return g == SlotGroup::Anatomy ? anatomy_ : non_anatomy_;
}

EntityId BalancedSampler::draw(SlotGroup g, const FrequencyLedger& ledger, const std::vector<EntityId>& taken,
                               Rng& rng) const {
    const auto candidates = pool(g);
    auto usable = [&](EntityId id) {
        return !ledger.is_capped(id) && std::find(taken.begin(), taken.end(), id) == taken.end();
    };
    if (!candidates.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
            const EntityId id = candidates[pick(rng)];
            if (usable(id)) return id;
        }
    }
    std::vector<EntityId> eligible;
    for (auto id : candidates) {
        if (usable(id)) eligible.push_back(id);
    }
    if (eligible.empty()) {
        throw CapacityExhausted(g, (g == SlotGroup::Anatomy ? cfg_.m : cfg_.k));
    }
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    return eligible[pick(rng)];
}

EntitySet BalancedSampler::sample(const FrequencyLedger& ledger, Rng& rng) const {
    EntitySet set;
    std::vector<EntityId> taken;
    taken.reserve(cfg_.k + cfg_.m);
    for (std::uint32_t i = 0; i < cfg_.k; ++i) {
        taken.push_back(draw(SlotGroup::NonAnatomy, ledger, taken, rng));
        set.s1.push_back(taken.back());
    }
    for (std::uint32_t i = 0; i < cfg_.m; ++i) {
        taken.push_back(draw(SlotGroup::Anatomy, ledger, taken, rng));
        set.s2.push_back(taken.back());
    }
    return set;
}

EntitySet BalancedSampler::resample_members(const EntitySet& set, std::span<const EntityId> offending,
                                            const FrequencyLedger& ledger, Rng& rng) const {
    EntitySet out = set;
    std::vector<EntityId> taken = set.members();
    auto replace = [&](std::vector<EntityId>& half, SlotGroup g) {
        for (auto& id : half) {
            if (std::find(offending.begin(), offending.end(), id) == offending.end()) continue;
            id = draw(g, ledger, taken, rng);
            taken.push_back(id);
        }
    };
    replace(out.s1, SlotGroup::NonAnatomy);
    replace(out.s2, SlotGroup::Anatomy);
    return out;
}

CapacityReport BalancedSampler::capacity(const FrequencyLedger& ledger, std::uint64_t n_target) const {
    CapacityReport report;
    report.n_target = n_target;
    for (SlotGroup g : {SlotGroup::NonAnatomy, SlotGroup::Anatomy}) {
        GroupCapacity gc;
        gc.group = g;
        gc.per_record = g == SlotGroup::Anatomy ? cfg_.m : cfg_.k;
        gc.eligible_count = pool(g).size();
        for (auto id : pool(g)) {
            const auto used = ledger.count(id);
            if (used < ledger.tau_max()) gc.capacity += ledger.tau_max() - used;
        }
        gc.demand = n_target * gc.per_record;
        gc.slack = static_cast<std::int64_t>(gc.capacity) - static_cast<std::int64_t>(gc.demand);
        gc.feasible = gc.demand <= gc.capacity && (gc.demand == 0 || gc.eligible_count >= gc.per_record);
        report.groups.push_back(gc);
    }
    return report;
}

EntitySet sample_entity_set(const EntityCatalog& catalog, const FrequencyLedger& ledger, const SamplerConfig& cfg,
                            Rng& rng) {
    return BalancedSampler(catalog, cfg).sample(ledger, rng);
}

void commit(FrequencyLedger& ledger, const EntitySet& set) { ledger.commit(set); }

CapacityReport capacity_report(const EntityCatalog& catalog, const FrequencyLedger& ledger, const SamplerConfig& cfg,
                               std::uint64_t n_target) {
    return BalancedSampler(catalog, cfg).capacity(ledger, n_target);
}

} // namespace cxrsynth
