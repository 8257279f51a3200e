#include "cxrsynth/curation.hpp"
#include "cxrsynth/error.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace cxrsynth;

namespace {

class FixedJudge : public QualityJudge {
public:
    explicit FixedJudge(std::vector<std::string> answers) : answers_(std::move(answers)) {}
    std::string quality_answer(const Blob&, std::string_view query) override {
        queries.emplace_back(query);
        return answers_[queries.size() - 1];
    }
    std::vector<std::string> queries;

private:
    std::vector<std::string> answers_;
};

std::array<bool, 6> answers(const std::string& yn) {
    std::array<bool, 6> a{};
    for (std::size_t i = 0; i < 6; ++i) a[i] = yn[i] == 'Y';
    return a;
}

} // namespace

TEST(QualityQueries, AreTheSixPublishedQuestions) {
    ASSERT_EQ(kQualityQueries.size(), 6u);
    for (const auto& q : kQualityQueries) {
        EXPECT_EQ(q.rfind("Please ", 0), 0u) << q;
        EXPECT_NE(q.find("'YES'"), std::string_view::npos);
        EXPECT_NE(q.find("'NO'"), std::string_view::npos);
    }
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(quality_query_index(kQualityQueries[i]), i);
    EXPECT_FALSE(quality_query_index("something else").has_value());
}

TEST(ParseYesNo, AcceptsCommonSpellings) {
    EXPECT_EQ(parse_yes_no("YES"), true);
    EXPECT_EQ(parse_yes_no("yes."), true);
    EXPECT_EQ(parse_yes_no(" 'No' "), false);
    EXPECT_EQ(parse_yes_no("NO, the image is fine"), false);
    EXPECT_FALSE(parse_yes_no("maybe").has_value());
    EXPECT_FALSE(parse_yes_no("").has_value());
    EXPECT_FALSE(parse_yes_no("YESNO").has_value());
}

TEST(RemovalPolicy, AllNoRemovesOnlyWhenEveryAnswerIsNo) {
    const auto p = RemovalPolicy::all_no();
    EXPECT_TRUE(p.removes(answers("NNNNNN")));
    EXPECT_FALSE(p.removes(answers("NNNNNY")));
    EXPECT_FALSE(p.removes(answers("YYYYYY")));
}

TEST(RemovalPolicy, AnyNoAndQuorum) {
    EXPECT_TRUE(RemovalPolicy::any_no().removes(answers("YYYNYY")));
    EXPECT_FALSE(RemovalPolicy::any_no().removes(answers("YYYYYY")));
    const auto q = RemovalPolicy::quorum(3);
    EXPECT_TRUE(q.removes(answers("NNNYYY")));
    EXPECT_FALSE(q.removes(answers("NNYYYY")));
    EXPECT_THROW(RemovalPolicy::quorum(0), Error);
    EXPECT_THROW(RemovalPolicy::quorum(7), Error);
}

TEST(RemovalPolicy, ParsesNames) {
    EXPECT_EQ(RemovalPolicy::parse("ALL_NO"), RemovalPolicy::all_no());
    EXPECT_EQ(RemovalPolicy::parse("any_no"), RemovalPolicy::any_no());
    EXPECT_EQ(RemovalPolicy::parse("QUORUM:4"), RemovalPolicy::quorum(4));
    EXPECT_EQ(RemovalPolicy::parse(RemovalPolicy::quorum(2).name()), RemovalPolicy::quorum(2));
    EXPECT_THROW(RemovalPolicy::parse("MOST_NO"), Error);
}

TEST(RemovalPolicy, EveryAnswerPatternAgainstACountingOracle) {
    for (int mask = 0; mask < 64; ++mask) {
        std::array<bool, 6> a{};
        int nos = 0;
        for (int i = 0; i < 6; ++i) {
            a[i] = (mask >> i) & 1;
            nos += a[i] ? 0 : 1;
        }
        EXPECT_EQ(RemovalPolicy::all_no().removes(a), nos == 6);
        EXPECT_EQ(RemovalPolicy::any_no().removes(a), nos >= 1);
        for (std::size_t q = 1; q <= 6; ++q) EXPECT_EQ(RemovalPolicy::quorum(q).removes(a), nos >= static_cast<int>(q));
    }
}

TEST(JudgeImage, AsksTheSixQueriesInOrder) {
    FixedJudge judge({"YES", "yes", "No", "YES", "YES", "YES"});
    const auto v = judge_image("img", judge, RemovalPolicy::all_no());
    ASSERT_EQ(judge.queries.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(judge.queries[i], kQualityQueries[i]);
    EXPECT_EQ(v.answers, answers("YYNYYY"));
    EXPECT_TRUE(v.passes_removal);
    EXPECT_FALSE(v.all_yes());
}

TEST(JudgeImage, AllNoIsRemoved) {
    FixedJudge judge({"NO", "NO", "NO", "NO", "NO", "NO"});
    EXPECT_FALSE(judge_image("img", judge, RemovalPolicy::all_no()).passes_removal);
}

TEST(JudgeImage, UnparsableAnswerIsAnError) {
    FixedJudge judge({"YES", "perhaps", "YES", "YES", "YES", "YES"});
    try {
        judge_image("img", judge, RemovalPolicy::all_no());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonBooleanAnswer);
    }
}
