#pragma once

#include "cxrsynth/catalog.hpp"
#include "cxrsynth/config.hpp"
#include "cxrsynth/embedding.hpp"
#include "cxrsynth/providers.hpp"
#include "cxrsynth/sampler.hpp"
#include "cxrsynth/store.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace cxrsynth {

// Points at which a fault hook is invoked. A hook that throws simulates a
// crash at that point.
inline constexpr std::string_view kFaultAfterVerify = "after_verify"; // report and image accepted, nothing persisted
inline constexpr std::string_view kFaultAfterAppend = "after_append"; // manifest line durable, ledger checkpoint stale

using FaultHook = std::function<void(std::string_view point, std::uint64_t slot)>;
using ProgressFn = std::function<void(std::uint64_t accepted, std::uint64_t target)>;

struct GenerateOptions {
    FaultHook fault;
    ProgressFn progress;
};

struct GenerateSummary {
    std::string config_hash;
    std::uint64_t accepted = 0;          // records in the manifest after the run
    std::uint64_t accepted_this_run = 0;
    std::uint64_t abandoned_reports = 0; // over the whole manifest
    std::uint64_t abandoned_images = 0;
    std::uint64_t rolled_forward = 0;    // manifest records recovered past a stale checkpoint
    bool resumed = false;
    std::uint32_t tau_max = 0;           // effective cap, raised when relax_cap applied
};

// Thrown by the pre-flight when the remaining target cannot fit under the
// cap. Maps to the capacity exit code.
class CapacityPreflightFailed : public Error {
public:
    explicit CapacityPreflightFailed(CapacityReport report);
    const CapacityReport& report() const noexcept { return report_; }

private:
    CapacityReport report_;
};

// Smallest cap under which every group of `report` is feasible.
std::uint32_t minimal_feasible_tau(const BalancedSampler& sampler, const FrequencyLedger& ledger,
                                   std::uint64_t n_target);

// Orchestrates sampling, report synthesis, image curation, commit and
// persistence. Each record slot s draws its entity set with seed
// derive_seed(seed, {sample stream, s, draw}), so single-worker runs are
// byte-reproducible and a resumed run continues exactly where it stopped.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::shared_ptr<const EntityCatalog> catalog, ProviderSet providers,
             EmbeddingBank bad_bank, std::string catalog_digest, std::string bank_digest);

    const RunConfig& config() const { return cfg_; }
    const std::string& config_hash() const { return config_hash_; }
    const BalancedSampler& sampler() const { return sampler_; }

    // Capacity for the records still missing from `out_dir`, against its
    // current ledger state.
    CapacityReport preflight(const std::filesystem::path& out_dir) const;

    // Creates or resumes the run in `out_dir` and fills it to n_target.
    // Throws CapacityPreflightFailed, RetriesExhausted (a slot exhausted
    // max_record_attempts), ConfigMismatch, CorruptCheckpoint, provider and
    // storage errors.
    GenerateSummary run(const std::filesystem::path& out_dir, const GenerateOptions& opts = {});

private:
    RunConfig cfg_;
    std::shared_ptr<const EntityCatalog> catalog_;
    ProviderSet providers_;
    EmbeddingBank bad_bank_;
    std::string config_hash_;
    BalancedSampler sampler_;
};

// Digest of a bad-bank file (binary and sidecar), or "" when unset.
std::string bank_digest(const std::string& path);

// Loads the catalog, the bad bank and the providers named by `cfg` (mock or
// remote) and builds a pipeline.
std::unique_ptr<Pipeline> make_pipeline(const RunConfig& cfg);

} // namespace cxrsynth
