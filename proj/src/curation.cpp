#include "cxrsynth/curation.hpp"

#include "cxrsynth/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace cxrsynth {

const std::array<std::string_view, kNumQualityQueries> kQualityQueries = {
    "Please check if the given image is a chest X-ray scan. If it is a chest X-ray, return 'YES'. "
    "Otherwise, return 'NO'.",
    "Please verify if the given image is a human chest X-ray scan. If it is a chest X-ray, return 'YES'. "
    "Otherwise, return 'NO'.",
    "Please check if the given image is a frontal chest X-ray view. If it is a frontal view, return 'YES'. "
    "If it is a lateral view or any other view, return 'NO'.",
    "Please analyze the provided chest X-ray (CXR) image and respond with 'NO' if the image quality is poor, "
    "such as being blurry, containing artifacts, or having poor contrast. Respond with 'YES' if the image "
    "quality is acceptable.",
    "Please analyze the following chest X-ray image. Respond with 'YES' if the image is clear, correctly "
    "oriented, and free of artifacts or imperfections that could affect its diagnostic quality. Respond with "
    "'NO' if the image is blurry, incorrectly oriented, contains artifacts, or has imperfections that make it "
    "unsuitable for further analysis.",
    "Please check if the given image is a high-fidelity human chest X-ray scan. If it is a high-fidelity chest "
    "X-ray, return 'YES'. Otherwise, return 'NO'.",
};

std::optional<std::size_t> quality_query_index(std::string_view query) {
    for (std::size_t i = 0; i < kQualityQueries.size(); ++i) {
        if (kQualityQueries[i] == query) return i;
    }
    return std::nullopt;
}

std::optional<bool> parse_yes_no(std::string_view answer) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    auto is_alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
    std::size_t b = 0;
    while (b < answer.size() && is_space(answer[b])) ++b;
    std::size_t e = b;
    while (e < answer.size() && !is_space(answer[e])) ++e;
    // Strip quotes and punctuation around the token: "'Yes'." -> "Yes".
    while (b < e && !is_alpha(answer[b])) ++b;
    while (e > b && !is_alpha(answer[e - 1])) --e;
    std::string token;
    for (std::size_t i = b; i < e; ++i) token.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(answer[i]))));
    if (token == "YES") return true;
    if (token == "NO") return false;
    return std::nullopt;
}

RemovalPolicy RemovalPolicy::quorum(std::size_t q) {
    if (q < 1 || q > kNumQualityQueries) {
        throw Error(ErrorCode::ConfigInvalid, "removal quorum must lie in [1, 6]");
    }
    return RemovalPolicy(q);
}

RemovalPolicy RemovalPolicy::parse(std::string_view text) {
    std::string upper;
    for (char c : text) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    std::replace(upper.begin(), upper.end(), '-', '_');
    if (upper == "ALL_NO") return all_no();
    if (upper == "ANY_NO") return any_no();
    if (upper.rfind("QUORUM:", 0) == 0) {
        std::size_t q = 0;
        const char* first = upper.data() + 7;
        const char* last = upper.data() + upper.size();
        auto [ptr, ec] = std::from_chars(first, last, q);
        if (ec == std::errc{} && ptr == last) return quorum(q);
    }
    throw Error(ErrorCode::ConfigInvalid, "unknown removal policy '" + std::string(text) + "'");
}

bool RemovalPolicy::removes(const std::array<bool, kNumQualityQueries>& answers) const {
    const auto no_count = static_cast<std::size_t>(std::count(answers.begin(), answers.end(), false));
    return no_count >= min_no_;
}

std::string RemovalPolicy::name() const {
    if (min_no_ == kNumQualityQueries) return "ALL_NO";
    if (min_no_ == 1) return "ANY_NO";
    return "QUORUM:" + std::to_string(min_no_);
}

bool CurationVerdict::all_yes() const {
    return std::all_of(answers.begin(), answers.end(), [](bool a) { return a; });
}

CurationVerdict judge_image(const Blob& image, QualityJudge& judge, const RemovalPolicy& policy) {
    CurationVerdict v;
    for (std::size_t i = 0; i < kQualityQueries.size(); ++i) {
        const std::string raw = judge.quality_answer(image, kQualityQueries[i]);
        const auto yes = parse_yes_no(raw);
        if (!yes) {
            throw Error(ErrorCode::NonBooleanAnswer, "judge answered '" + raw + "' to query " + std::to_string(i + 1));
        }
        v.answers[i] = *yes;
    }
    v.passes_removal = !policy.removes(v.answers);
    return v;
}

} // namespace cxrsynth
