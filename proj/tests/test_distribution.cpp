#include "cxrsynth/distribution.hpp"
#include "cxrsynth/error.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cxrsynth;

TEST(Gini, UniformCountsGiveZero) {
    const std::vector<std::uint64_t> xs{5, 5, 5, 5};
    EXPECT_DOUBLE_EQ(gini(xs), 0.0);
}

TEST(Gini, HandEvaluatedPairwiseExample) {
    // 60 / (2 * 16 * 2.5)
    const std::vector<std::uint64_t> xs{0, 0, 0, 10};
    EXPECT_DOUBLE_EQ(gini(xs), 0.75);
    EXPECT_DOUBLE_EQ(fixtures::brute_force_gini(xs), 0.75);
}

TEST(Gini, AllZeroIsAnError) {
    const std::vector<std::uint64_t> zeros{0, 0, 0};
    EXPECT_THROW(gini(zeros), Error);
    EXPECT_THROW(gini(std::span<const std::uint64_t>{}), Error);
    EXPECT_THROW(top_k_share(zeros, 1), Error);
}

TEST(Gini, MatchesTheBruteForceOracleOnRandomCounts) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<std::size_t> len(1, 60);
        std::uniform_int_distribution<std::uint64_t> val(0, 40);
        std::vector<std::uint64_t> xs(len(rng));
        for (auto& x : xs) x = val(rng);
        if (std::all_of(xs.begin(), xs.end(), [](auto x) { return x == 0; })) xs[0] = 1;
        EXPECT_NEAR(gini(xs), fixtures::brute_force_gini(xs), 1e-12);
        const double g = gini(xs);
        EXPECT_GE(g, 0.0);
        EXPECT_LE(g, 1.0);
    }
}

TEST(Gini, IsScaleInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::uint64_t> val(1, 100);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::uint64_t> xs(25);
        for (auto& x : xs) x = val(rng);
        for (std::uint64_t c : {2u, 7u, 1000u}) {
            std::vector<std::uint64_t> scaled = xs;
            for (auto& x : scaled) x *= c;
            EXPECT_NEAR(gini(scaled), gini(xs), 1e-12);
        }
    }
}

TEST(Gini, ZeroExactlyWhenAllCountsAreEqual) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint64_t> val(0, 3);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::uint64_t> xs(6);
        for (auto& x : xs) x = val(rng);
        if (std::all_of(xs.begin(), xs.end(), [](auto x) { return x == 0; })) continue;
        const bool all_equal = std::all_of(xs.begin(), xs.end(), [&](auto x) { return x == xs[0]; });
        EXPECT_EQ(gini(xs) == 0.0, all_equal);
    }
}

TEST(TopKShare, AllMassInOneEntity) {
    const std::vector<std::uint64_t> xs{0, 0, 0, 10};
    EXPECT_DOUBLE_EQ(top_k_share(xs, 1), 1.0);
}

TEST(TopKShare, IsNonDecreasingInK) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::uint64_t> val(0, 50);
    std::vector<std::uint64_t> xs(40);
    for (auto& x : xs) x = val(rng);
    xs[0] = 1;
    double prev = 0;
    for (std::size_t k = 0; k <= 45; ++k) {
        const double s = top_k_share(xs, k);
        EXPECT_GE(s, prev);
        prev = s;
    }
    EXPECT_DOUBLE_EQ(prev, 1.0);
}

TEST(DistributionReport, CatalogEntitiesWithoutCountsContributeZeros) {
    const auto catalog = fixtures::make_catalog(2, 2);
    CountMap counts;
    const auto abn = catalog->ids_in(Category::Abnormality);
    counts[abn[0]] = 10;
    const auto report = distribution_report(*catalog, counts);
    const auto& d = report.per_category.at(Category::Abnormality);
    EXPECT_EQ(d.histogram.size(), 2u);
    EXPECT_EQ(d.unique_count, 1u);
    EXPECT_EQ(d.total, 10u);
    ASSERT_TRUE(d.gini.has_value());
    EXPECT_DOUBLE_EQ(*d.gini, 0.5);
    EXPECT_FALSE(report.per_category.at(Category::Anatomy).gini.has_value());
    EXPECT_EQ(report.overall.histogram.size(), catalog->size());
    EXPECT_NEAR(*report.overall.gini, fixtures::brute_force_gini(report.overall.counts()), 1e-12);
}

TEST(DistributionReport, RejectsIdsOutsideTheCatalog) {
    const auto catalog = fixtures::make_catalog(1, 1);
    CountMap counts{{EntityId{42}, 1}};
    EXPECT_THROW(distribution_report(*catalog, counts), Error);
}

TEST(DistributionReport, AllZeroTotalIsAnError) {
    const auto catalog = fixtures::make_catalog(1, 1);
    try {
        distribution_report(*catalog, CountMap{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AllZero);
    }
}

TEST(DistributionReport, JsonIsStable) {
    const auto catalog = fixtures::make_catalog(3, 3);
    CountMap counts;
    for (const auto& e : catalog->entities()) counts[e.id] = e.text.size();
    const auto a = distribution_report(*catalog, counts).to_json().dump();
    const auto b = distribution_report(*catalog, counts).to_json().dump();
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("\"top_k_share\""), std::string::npos);
}

TEST(ZipfFixture, IsLongTailed) {
    const auto xs = fixtures::zipf_counts(1000, 1.1, 24000);
    std::uint64_t total = 0;
    for (auto x : xs) total += x;
    EXPECT_EQ(total, 24000u);
    EXPECT_GT(gini(xs), 0.6);
}
