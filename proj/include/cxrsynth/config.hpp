#pragma once

#include "cxrsynth/curation.hpp"
#include "cxrsynth/embedding.hpp"
#include "cxrsynth/mock_providers.hpp"
#include "cxrsynth/providers.hpp"
#include "cxrsynth/remote_providers.hpp"
#include "cxrsynth/report_synth.hpp"
#include "cxrsynth/sampler.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace cxrsynth {

// Everything a generate / audit / stats run needs. Defaults carry the
// published settings: k=9, m=3, tau_max=15, delta=0.5, guidance 4, 50 steps,
// ALL_NO audit removal.
struct RunConfig {
    std::string catalog_path;
    std::uint64_t seed = 0;
    SamplerConfig sampler;
    ScreenConfig screen;
    ImageGenParams image;
    ReportSynthConfig report;
    std::uint32_t image_max_retries = 10;
    // Fresh entity sets drawn for one record slot before giving up.
    std::uint32_t max_record_attempts = 20;
    bool mock = false;
    MockPolicy mock_policy;
    std::map<ProviderRole, ProviderEndpoint> endpoints;
    std::uint64_t n_target = 200000;
    RemovalPolicy removal_policy = RemovalPolicy::all_no();
    std::string output_dir = "out";
    std::size_t workers = 1;
    bool relax_cap = false;
    std::uint64_t checkpoint_interval = 100;

    // Throws Error(ConfigInvalid) (or TemplateMissingPlaceholder). Remote
    // mode requires an endpoint for every role.
    void validate() const;

    // Copies `seed` into the sampler and mock policy.
    void propagate_seed();

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    // Digest of the settings that determine generated output. n_target,
    // workers, output_dir, checkpoint cadence and endpoint transport details
    // are excluded so a run can be resumed with a larger target or different
    // parallelism.
    std::string generation_hash(std::string_view catalog_digest, std::string_view bank_digest) const;
};

// Reads a JSON config file. Throws Error(ConfigInvalid).
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace cxrsynth
