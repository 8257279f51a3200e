#pragma once

#include "cxrsynth/hashing.hpp"
#include "cxrsynth/providers.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace cxrsynth {

inline constexpr std::size_t kNumQualityQueries = 6;

// Quality queries posed to the multimodal judge, one call per query, in this
// order: non-CXR, non-human, wrong view, poor quality, artifacts, fidelity.
// YES means the image is fine on that axis.
extern const std::array<std::string_view, kNumQualityQueries> kQualityQueries;

// Index of `query` in kQualityQueries, if it is one of them.
std::optional<std::size_t> quality_query_index(std::string_view query);

// Case-insensitive match of the leading token (surrounding punctuation and
// quotes stripped) against YES / NO. Returns nullopt for anything else.
std::optional<bool> parse_yes_no(std::string_view answer);

// Decides removal from the six answers. An image is removed when at least
// `min_no` answers are NO: ALL_NO is 6, ANY_NO is 1, QUORUM:q is q.
class RemovalPolicy {
public:
    static RemovalPolicy all_no() { return RemovalPolicy(kNumQualityQueries); }
    static RemovalPolicy any_no() { return RemovalPolicy(1); }
    // Throws Error(ConfigInvalid) unless 1 <= q <= 6.
    static RemovalPolicy quorum(std::size_t q);
    // ALL_NO | ANY_NO | QUORUM:<q>, case-insensitive. Throws Error(ConfigInvalid).
    static RemovalPolicy parse(std::string_view text);

    bool removes(const std::array<bool, kNumQualityQueries>& answers) const;
    std::size_t min_no() const { return min_no_; }
    std::string name() const;

    friend bool operator==(const RemovalPolicy&, const RemovalPolicy&) = default;

private:
    explicit RemovalPolicy(std::size_t min_no) : min_no_(min_no) {}
    std::size_t min_no_;
};

struct CurationVerdict {
    std::array<bool, kNumQualityQueries> answers{}; // YES = true
    bool passes_removal = true;                     // false: removed under the policy

    bool all_yes() const;
};

// Six independent judge calls in fixed order. Throws Error(NonBooleanAnswer)
// if any answer is neither YES nor NO after normalization.
CurationVerdict judge_image(const Blob& image, QualityJudge& judge, const RemovalPolicy& policy);

} // namespace cxrsynth
