#include "cxrsynth/pipeline.hpp"

#include "cxrsynth/error.hpp"
#include "cxrsynth/hashing.hpp"
#include "cxrsynth/image_synth.hpp"
#include "cxrsynth/mock_providers.hpp"
#include "cxrsynth/parallel.hpp"
#include "cxrsynth/remote_providers.hpp"
#include "cxrsynth/report_synth.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <shared_mutex>

namespace cxrsynth {

namespace fs = std::filesystem;

namespace {

enum Stream : std::uint64_t { kSampleStream = 0x5a, kReportStream, kImageStream };

std::string describe(const CapacityReport& report) {
    std::string out;
    for (const auto& g : report.groups) {
        if (g.feasible) continue;
        out += std::string(out.empty() ? "" : "; ") + std::string(to_string(g.group)) + " demand " +
               std::to_string(g.demand) + " > capacity " + std::to_string(g.capacity);
    }
    return out;
}

} // namespace

CapacityPreflightFailed::CapacityPreflightFailed(CapacityReport report)
    : Error(ErrorCode::CapacityExhausted, "capacity pre-flight failed: " + describe(report)),
      report_(std::move(report)) {}

std::uint32_t minimal_feasible_tau(const BalancedSampler& sampler, const FrequencyLedger& ledger,
                                   std::uint64_t n_target) {
    std::uint64_t tau = ledger.tau_max();
    for (SlotGroup g : {SlotGroup::NonAnatomy, SlotGroup::Anatomy}) {
        const auto pool = sampler.pool(g);
        const std::uint64_t per = g == SlotGroup::Anatomy ? sampler.config().m : sampler.config().k;
        if (pool.empty() || per == 0) continue;
        std::uint64_t used = 0;
        for (EntityId id : pool) used += ledger.count(id);
        const std::uint64_t need = used + per * n_target;
        tau = std::max<std::uint64_t>(tau, (need + pool.size() - 1) / pool.size());
    }
    return static_cast<std::uint32_t>(tau);
}

Pipeline::Pipeline(RunConfig cfg, std::shared_ptr<const EntityCatalog> catalog, ProviderSet providers,
                   EmbeddingBank bad_bank, std::string catalog_digest, std::string bank_digest)
    : cfg_(std::move(cfg)),
      catalog_(std::move(catalog)),
      providers_(std::move(providers)),
      bad_bank_(std::move(bad_bank)),
      config_hash_(cfg_.generation_hash(catalog_digest, bank_digest)),
      sampler_(*catalog_, cfg_.sampler) {
    if (!providers_.text || !providers_.extractor || !providers_.image || !providers_.judge || !providers_.embedder) {
        throw Error(ErrorCode::ConfigInvalid, "pipeline needs all five provider roles");
    }
    if (!bad_bank_.empty() && bad_bank_.dim() != cfg_.screen.embedding_dim) {
        throw Error(ErrorCode::ConfigInvalid, "bad bank dimension " + std::to_string(bad_bank_.dim()) +
                                                  " differs from embedding_dim " +
                                                  std::to_string(cfg_.screen.embedding_dim));
    }
}

CapacityReport Pipeline::preflight(const fs::path& out_dir) const {
    const RunStore store(out_dir);
    if (!fs::exists(store.manifest_path())) return sampler_.capacity(FrequencyLedger(cfg_.sampler.tau_max), cfg_.n_target);
    const ResumeState st = resume(store.manifest_path(), store.ledger_path(), config_hash_, cfg_.sampler.tau_max);
    const std::uint64_t done = st.completed_slots.size();
    return sampler_.capacity(st.ledger, cfg_.n_target > done ? cfg_.n_target - done : 0);
}

GenerateSummary Pipeline::run(const fs::path& out_dir, const GenerateOptions& opts) {
    RunStore store(out_dir);
    GenerateSummary summary;
    summary.config_hash = config_hash_;

    std::optional<ResumeState> state;
    if (fs::exists(store.manifest_path())) {
        state.emplace(resume(store.manifest_path(), store.ledger_path(), config_hash_, cfg_.sampler.tau_max));
        summary.resumed = true;
        summary.rolled_forward = state->rolled_forward;
    } else {
        state.emplace(ResumeState{
            RunManifest::create(store.manifest_path(), "run-" + config_hash_.substr(0, 16), config_hash_),
            FrequencyLedger(cfg_.sampler.tau_max),
            {},
            0});
    }
    RunManifest& manifest = state->manifest;
    FrequencyLedger& ledger = state->ledger;

    write_file_atomic(out_dir / "run.json", nlohmann::json({{"run_id", manifest.run_id()},
                                                            {"config_hash", config_hash_},
                                                            {"config", cfg_.to_json()}})
                                                    .dump(2) +
                                                "\n");

    std::vector<std::uint64_t> pending;
    for (std::uint64_t s = 0; s < cfg_.n_target; ++s) {
        if (!state->completed_slots.contains(s)) pending.push_back(s);
    }

    std::uint64_t committed_records = manifest.records().size();
    auto checkpoint = [&] {
        save_ledger_checkpoint(store.ledger_path(),
                               {config_hash_, ledger.tau_max(), committed_records, ledger.counts()});
    };

    const CapacityReport pre = sampler_.capacity(ledger, pending.size());
    if (!pre.feasible()) {
        if (!cfg_.relax_cap) {
            checkpoint();
            throw CapacityPreflightFailed(pre);
        }
        ledger.relax_cap(minimal_feasible_tau(sampler_, ledger, pending.size()));
    }
    checkpoint();

    std::shared_mutex ledger_mu;
    std::uint64_t since_checkpoint = 0;
    std::atomic<bool> crashed{false};
    auto fault = [&](std::string_view point, std::uint64_t slot) {
        if (!opts.fault) return;
        try {
            opts.fault(point, slot);
        } catch (...) {
            crashed = true;
            throw;
        }
    };

    auto process_slot = [&](std::uint64_t slot) {
        const std::string record_id = record_id_for_slot(slot);
        std::uint32_t abandoned_reports = 0;
        std::uint32_t abandoned_images = 0;
        for (std::uint32_t draw = 0; draw < cfg_.max_record_attempts; ++draw) {
            Rng rng(derive_seed(cfg_.seed, {kSampleStream, slot, draw}));
            EntitySet set;
            {
                std::shared_lock lock(ledger_mu);
                set = sampler_.sample(ledger, rng);
            }
            for (std::uint64_t restart = 0;; ++restart) {
                SyntheticReport report;
                try {
                    report = synthesize_report(set, *catalog_, *providers_.text, *providers_.extractor, cfg_.report,
                                               derive_seed(cfg_.seed, {kReportStream, slot, draw, restart}));
                } catch (const RetriesExhausted&) {
                    ++abandoned_reports;
                    break;
                }
                ImageGenParams params = cfg_.image;
                params.seed = derive_seed(cfg_.seed, {kImageStream, slot, draw, restart});
                CuratedImage image;
                try {
                    image = generate_curated_image(report.impression, *providers_.image, *providers_.judge,
                                                   *providers_.embedder, bad_bank_, cfg_.screen, params,
                                                   cfg_.image_max_retries);
                } catch (const RetriesExhausted&) {
                    ++abandoned_images;
                    break;
                }
                fault(kFaultAfterVerify, slot);

                const std::string image_hash = store.blobs().put(image.blob);
                const auto [findings_path, impression_path] =
                    store.write_report(record_id, report.findings, report.impression);

                std::unique_lock lock(ledger_mu);
                std::vector<EntityId> offending;
                for (EntityId id : set.members()) {
                    if (ledger.is_capped(id)) offending.push_back(id);
                }
                if (!offending.empty()) {
                    // Interleaved commits capped some members: swap only those
                    // and regenerate the record for the new set.
                    set = sampler_.resample_members(set, offending, ledger, rng);
                    continue;
                }
                RecordEntry entry;
                entry.record_id = record_id;
                entry.slot = slot;
                entry.s1 = set.s1;
                entry.s2 = set.s2;
                entry.findings_path = findings_path;
                entry.impression_path = impression_path;
                entry.image_hash = image_hash;
                entry.findings_attempts = report.findings_attempts;
                entry.impression_attempts = report.impression_attempts;
                entry.image_attempts = image.record.attempts;
                entry.verdict = image.record.verdict.answers;
                entry.max_bad_similarity = image.record.max_bad_similarity;
                entry.image_seed = image.record.params.seed;
                entry.guidance_scale = image.record.params.guidance_scale;
                entry.steps = image.record.params.steps;
                entry.abandoned_reports = abandoned_reports;
                entry.abandoned_images = abandoned_images;
                manifest.append_record(std::move(entry));
                fault(kFaultAfterAppend, slot);
                ledger.commit(set);
                ++committed_records;
                ++summary.accepted_this_run;
                if (++since_checkpoint >= cfg_.checkpoint_interval) {
                    checkpoint();
                    since_checkpoint = 0;
                }
                if (opts.progress) opts.progress(manifest.records().size(), cfg_.n_target);
                return;
            }
        }
        throw RetriesExhausted("record " + record_id, cfg_.max_record_attempts,
                               std::to_string(abandoned_reports) + " report and " + std::to_string(abandoned_images) +
                                   " image failures");
    };

    try {
        parallel_for(pending.size(), cfg_.workers, [&](std::size_t i) { process_slot(pending[i]); });
    } catch (...) {
        if (!crashed) {
            try {
                checkpoint();
            } catch (const Error&) {
            }
        }
        throw;
    }
    checkpoint();

    const auto counters = manifest.counters();
    summary.accepted = counters.accepted;
    summary.abandoned_reports = counters.abandoned_reports;
    summary.abandoned_images = counters.abandoned_images;
    summary.tau_max = ledger.tau_max();
    return summary;
}

std::string bank_digest(const std::string& path) {
    if (path.empty()) return "";
    return sha256_hex(read_file(path) + read_file(EmbeddingBank::sidecar_path(path)));
}

std::unique_ptr<Pipeline> make_pipeline(const RunConfig& cfg) {
    cfg.validate();
    auto load = load_catalog(cfg.catalog_path);
    auto catalog = std::make_shared<const EntityCatalog>(std::move(load.catalog));
    EmbeddingBank bank(cfg.screen.embedding_dim);
    if (!cfg.screen.bad_bank.empty()) bank = EmbeddingBank::load(cfg.screen.bad_bank);
    ProviderSet providers = cfg.mock ? make_mock_providers(catalog, cfg.mock_policy)
                                     : make_remote_providers(cfg.endpoints, make_http_transport());
    return std::make_unique<Pipeline>(cfg, catalog, std::move(providers), std::move(bank),
                                      sha256_hex(catalog_tsv(*catalog)), bank_digest(cfg.screen.bad_bank));
}

} // namespace cxrsynth
