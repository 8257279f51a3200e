#include "cxrsynth/distribution.hpp"

#include "cxrsynth/error.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace cxrsynth {

double gini(std::span<const std::uint64_t> counts) {
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    const long double n = static_cast<long double>(sorted.size());
    long double total = 0;
    for (auto x : sorted) total += static_cast<long double>(x);
    if (total == 0) throw Error(ErrorCode::AllZero, "Gini undefined for zero total mass");

    // With x ascending, sum_ij |x_i - x_j| = 2 * sum_i (2i - n + 1) x_i.
    long double weighted = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        weighted += (2.0L * static_cast<long double>(i) - n + 1.0L) * static_cast<long double>(sorted[i]);
    }
    const long double mean = total / n;
    return static_cast<double>(2.0L * weighted / (2.0L * n * n * mean));
}

double top_k_share(std::span<const std::uint64_t> counts, std::size_t k) {
    std::vector<std::uint64_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto total = std::accumulate(sorted.begin(), sorted.end(), std::uint64_t{0});
    if (total == 0) throw Error(ErrorCode::AllZero, "top-k share undefined for zero total mass");
    const auto head = std::min(k, sorted.size());
    const auto top = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(head), std::uint64_t{0});
    return static_cast<double>(top) / static_cast<double>(total);
}

double CategoryDistribution::top_k_share(std::size_t k) const {
    return cxrsynth::top_k_share(counts(), k);
}

std::vector<std::uint64_t> CategoryDistribution::counts() const {
    std::vector<std::uint64_t> out;
    out.reserve(histogram.size());
    for (const auto& ec : histogram) out.push_back(ec.count);
    return out;
}

namespace {

CategoryDistribution summarize(std::vector<EntityCount> entries) {
    std::sort(entries.begin(), entries.end(), [](const EntityCount& a, const EntityCount& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.entity.id < b.entity.id;
    });
    CategoryDistribution d;
    for (const auto& ec : entries) {
        d.total += ec.count;
        if (ec.count > 0) ++d.unique_count;
    }
    d.histogram = std::move(entries);
    if (d.total > 0) d.gini = gini(d.counts());
    return d;
}

nlohmann::json category_json(const CategoryDistribution& d, std::span<const std::size_t> top_ks, bool include_histogram) {
    nlohmann::json j;
    j["entities"] = d.histogram.size();
    j["total"] = d.total;
    j["unique_count"] = d.unique_count;
    j["gini"] = d.gini ? nlohmann::json(*d.gini) : nlohmann::json(nullptr);
    nlohmann::json shares = nlohmann::json::object();
    for (std::size_t k : top_ks) {
        shares[std::to_string(k)] = d.total > 0 ? nlohmann::json(d.top_k_share(k)) : nlohmann::json(nullptr);
    }
    j["top_k_share"] = std::move(shares);
    if (include_histogram) {
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& ec : d.histogram) hist[to_string(ec.entity.id)] = ec.count;
        j["histogram"] = std::move(hist);
    }
    return j;
}

} // namespace

nlohmann::json DistributionReport::to_json(std::span<const std::size_t> top_ks, bool include_histogram) const {
    nlohmann::json j;
    j["overall"] = category_json(overall, top_ks, false);
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [c, d] : per_category) cats[std::string(to_string(c))] = category_json(d, top_ks, include_histogram);
    j["per_category"] = std::move(cats);
    return j;
}

DistributionReport distribution_report(std::span<const EntityCount> counts) {
    std::map<Category, std::vector<EntityCount>> split;
    for (Category c : kAllCategories) split[c];
    std::vector<EntityCount> all(counts.begin(), counts.end());
    for (const auto& ec : counts) split[ec.entity.category].push_back(ec);

    DistributionReport report;
    report.overall = summarize(std::move(all));
    if (report.overall.total == 0) {
        throw Error(ErrorCode::AllZero, "distribution has zero total mass");
    }
    for (auto& [c, entries] : split) report.per_category[c] = summarize(std::move(entries));
    return report;
}

DistributionReport distribution_report(const EntityCatalog& catalog, const CountMap& counts) {
    for (const auto& [id, n] : counts) {
        if (!catalog.contains(id)) {
            throw Error(ErrorCode::PreconditionViolation, "count for entity " + to_string(id) + " outside the catalog");
        }
    }
    std::vector<EntityCount> entries;
    entries.reserve(catalog.size());
    for (const Entity& e : catalog.entities()) {
        auto it = counts.find(e.id);
        entries.push_back({e, it == counts.end() ? 0 : it->second});
    }
    return distribution_report(entries);
}

} // namespace cxrsynth
