#include "cxrsynth/cli.hpp"

#include "cxrsynth/audit.hpp"
#include "cxrsynth/config.hpp"
#include "cxrsynth/error.hpp"
#include "cxrsynth/mock_providers.hpp"
#include "cxrsynth/pipeline.hpp"
#include "cxrsynth/remote_providers.hpp"
#include "cxrsynth/store.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <optional>

namespace cxrsynth {

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string catalog;
    bool mock = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> n;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    bool relax_cap = false;
    std::optional<std::uint32_t> k;
    std::optional<std::uint32_t> m;
    std::optional<std::uint32_t> tau_max;
    std::optional<double> entity_ratio;
    std::optional<double> delta;
    std::optional<std::string> bad_bank;
    std::optional<std::string> policy;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON run configuration");
    cmd->add_option("--catalog", o.catalog, "entity catalog TSV (text<TAB>CATEGORY)");
    cmd->add_flag("--mock", o.mock, "use deterministic mock providers for every role");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--workers", o.workers, "parallel record pipelines");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--delta", o.delta, "cosine similarity threshold");
    cmd->add_option("--bad-bank", o.bad_bank, "bad-sample embedding bank");
}

void add_sampling(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--n", o.n, "number of records");
    cmd->add_flag("--relax-cap", o.relax_cap, "raise tau_max to the smallest feasible value instead of halting");
    cmd->add_option("--k", o.k, "non-anatomy entities per record");
    cmd->add_option("--m", o.m, "anatomy entities per record");
    cmd->add_option("--tau-max", o.tau_max, "per-entity frequency cap");
    cmd->add_option("--entity-ratio", o.entity_ratio, "fraction of each category eligible for sampling");
}

RunConfig build_config(const Overrides& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (!o.catalog.empty()) cfg.catalog_path = o.catalog;
    if (o.mock) cfg.mock = true;
    if (o.seed) cfg.seed = *o.seed;
    if (o.n) cfg.n_target = *o.n;
    if (o.workers) cfg.workers = *o.workers;
    if (o.out) cfg.output_dir = *o.out;
    if (o.relax_cap) cfg.relax_cap = true;
    if (o.k) cfg.sampler.k = *o.k;
    if (o.m) cfg.sampler.m = *o.m;
    if (o.tau_max) cfg.sampler.tau_max = *o.tau_max;
    if (o.entity_ratio) cfg.sampler.entity_ratio = *o.entity_ratio;
    if (o.delta) cfg.screen.delta = *o.delta;
    if (o.bad_bank) cfg.screen.bad_bank = *o.bad_bank;
    if (o.policy) cfg.removal_policy = RemovalPolicy::parse(*o.policy);
    cfg.propagate_seed();
    if (!cfg.catalog_path.empty()) cfg.catalog_path = fs::absolute(cfg.catalog_path).string();
    if (!cfg.screen.bad_bank.empty()) cfg.screen.bad_bank = fs::absolute(cfg.screen.bad_bank).string();
    return cfg;
}

// Configuration a run directory was generated with.
RunConfig run_dir_config(const fs::path& dir) {
    const fs::path run_json = dir / "run.json";
    if (!fs::exists(run_json)) throw Error(ErrorCode::ConfigInvalid, run_json.string() + " does not exist");
    const auto j = nlohmann::json::parse(read_file(run_json), nullptr, false);
    if (j.is_discarded() || !j.contains("config")) {
        throw Error(ErrorCode::ConfigInvalid, run_json.string() + " is not a run description");
    }
    return RunConfig::from_json(j["config"]);
}

int cmd_generate(const Overrides& o, std::ostream& out, std::ostream& err) {
    RunConfig cfg = build_config(o);
    auto pipeline = make_pipeline(cfg);
    const fs::path dir = cfg.output_dir;
    try {
        GenerateOptions opts;
        const std::uint64_t step = std::max<std::uint64_t>(1, cfg.n_target / 20);
        opts.progress = [&](std::uint64_t done, std::uint64_t target) {
            if (done % step == 0 || done == target) err << "generate: " << done << "/" << target << "\n";
        };
        const GenerateSummary s = pipeline->run(dir, opts);
        if (s.tau_max != cfg.sampler.tau_max) {
            err << "generate: tau_max relaxed from " << cfg.sampler.tau_max << " to " << s.tau_max << "\n";
        }
        out << nlohmann::json({{"output_dir", dir.string()},
                               {"config_hash", s.config_hash},
                               {"accepted", s.accepted},
                               {"accepted_this_run", s.accepted_this_run},
                               {"abandoned_reports", s.abandoned_reports},
                               {"abandoned_images", s.abandoned_images},
                               {"resumed", s.resumed},
                               {"rolled_forward", s.rolled_forward},
                               {"tau_max", s.tau_max}})
                   .dump(2)
            << "\n";
    } catch (const CapacityPreflightFailed& e) {
        out << e.report().to_json().dump(2) << "\n";
        throw;
    }
    return 0;
}

int cmd_capacity(const Overrides& o, std::ostream& out) {
    RunConfig cfg = build_config(o);
    if (cfg.catalog_path.empty()) throw Error(ErrorCode::ConfigInvalid, "catalog path is not set");
    cfg.sampler.validate();
    const auto load = load_catalog(cfg.catalog_path);
    const BalancedSampler sampler(load.catalog, cfg.sampler);
    FrequencyLedger ledger(cfg.sampler.tau_max);
    std::uint64_t remaining = cfg.n_target;
    const fs::path dir = cfg.output_dir;
    if (o.out && fs::exists(dir / "manifest.jsonl")) {
        const auto manifest = RunManifest::open(dir / "manifest.jsonl");
        ledger = FrequencyLedger::from_counts(std::max<std::uint32_t>(cfg.sampler.tau_max, ledger.tau_max()),
                                              recount(manifest.records()));
        remaining = remaining > manifest.records().size() ? remaining - manifest.records().size() : 0;
    }
    const CapacityReport report = sampler.capacity(ledger, remaining);
    out << report.to_json().dump(2) << "\n";
    return report.feasible() ? 0 : 3;
}

int cmd_stats(const Overrides& o, const std::string& run_dir, std::ostream& out) {
    const fs::path dir = run_dir.empty() ? fs::path(o.out.value_or("out")) : fs::path(run_dir);
    RunConfig cfg = run_dir_config(dir);
    if (!o.catalog.empty()) cfg.catalog_path = o.catalog;
    const auto load = load_catalog(cfg.catalog_path);
    const auto manifest = RunManifest::open(dir / "manifest.jsonl");
    const CountMap counts = recount(manifest.records());

    std::uint64_t max_count = 0;
    for (const auto& [id, n] : counts) max_count = std::max(max_count, n);
    std::uint32_t tau = cfg.sampler.tau_max;
    if (fs::exists(dir / "ledger.json")) tau = std::max(tau, load_ledger_checkpoint(dir / "ledger.json").tau_max);
    const FrequencyLedger ledger =
        FrequencyLedger::from_counts(static_cast<std::uint32_t>(std::max<std::uint64_t>(tau, max_count)), counts);
    const BalancedSampler sampler(load.catalog, cfg.sampler);
    const std::uint64_t done = manifest.records().size();

    nlohmann::json j = {{"records", done},
                        {"max_entity_count", max_count},
                        {"tau_max", tau},
                        {"cap_respected", max_count <= tau},
                        {"capacity", sampler.capacity(ledger, cfg.n_target > done ? cfg.n_target - done : 0).to_json()}};
    if (done > 0) j["distribution"] = distribution_report(load.catalog, counts).to_json(DistributionReport::kDefaultTopKs, false);
    out << j.dump(2) << "\n";
    return 0;
}

int cmd_export(const Overrides& o, const std::string& run_dir, const std::string& dest, std::ostream& out) {
    const fs::path dir = run_dir.empty() ? fs::path(o.out.value_or("out")) : fs::path(run_dir);
    std::optional<EntityCatalog> catalog;
    const RunConfig cfg = run_dir_config(dir);
    if (fs::exists(cfg.catalog_path)) catalog = load_catalog(cfg.catalog_path).catalog;
    const ExportSummary s = export_corpus(dir, dest, catalog ? &*catalog : nullptr);
    out << nlohmann::json({{"records", s.records}, {"manifest", s.manifest.string()}}).dump(2) << "\n";
    return 0;
}

int cmd_audit(const Overrides& o, const std::string& manifest, std::ostream& out, std::ostream& err) {
    RunConfig cfg = build_config(o);
    cfg.screen.validate();
    ProviderSet providers;
    if (cfg.mock) {
        MockPolicy policy = cfg.mock_policy;
        policy.embedding_dim = cfg.screen.embedding_dim;
        policy.validate();
        providers = make_mock_providers(std::make_shared<const EntityCatalog>(), policy);
    } else {
        std::map<ProviderRole, ProviderEndpoint> eps;
        for (ProviderRole r : {ProviderRole::QualityJudge, ProviderRole::ImageEmbed}) {
            if (!cfg.endpoints.contains(r)) {
                throw Error(ErrorCode::ConfigInvalid, "no endpoint configured for " + std::string(to_string(r)));
            }
            eps[r] = cfg.endpoints.at(r);
        }
        providers = make_remote_providers(eps, make_http_transport());
    }
    AuditOptions options{cfg.screen, cfg.removal_policy, cfg.workers};
    const AuditOutcome outcome = audit_corpus(manifest, *providers.judge, *providers.embedder, options);
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    write_file_atomic(dir / "audit_report.json", outcome.report.to_json().dump(2) + "\n");
    std::string ids;
    for (const auto& id : outcome.report.removed_ids()) ids += id + "\n";
    write_file_atomic(dir / "removed_ids.txt", ids);
    outcome.bad_bank.save(dir / "bad_bank.bin");
    if (!outcome.report.skipped_ids.empty()) {
        err << "audit: " << outcome.report.skipped_ids.size() << " items skipped after provider errors\n";
    }
    const auto& r = outcome.report;
    out << nlohmann::json({{"total_in", r.total_in},
                           {"removed_by_judge", r.removed_by_judge},
                           {"removed_by_similarity", r.removed_by_similarity},
                           {"skipped", r.skipped},
                           {"remaining", r.remaining},
                           {"output_dir", dir.string()}})
               .dump(2)
        << "\n";
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Balanced synthetic chest X-ray corpus generation and dataset auditing"};
    app.require_subcommand(1);
    Overrides o;
    std::string run_dir;
    std::string dest;
    std::string manifest;

    auto* gen = app.add_subcommand("generate", "generate a balanced synthetic corpus (resumes an existing run)");
    add_common(gen, o);
    add_sampling(gen, o);

    auto* cap = app.add_subcommand("capacity", "report whether n records fit under the frequency cap");
    add_common(cap, o);
    add_sampling(cap, o);

    auto* stats = app.add_subcommand("stats", "entity distribution and capacity of a generated run");
    stats->add_option("run_dir", run_dir, "run directory");
    stats->add_option("--out", o.out, "run directory");
    stats->add_option("--catalog", o.catalog, "override the catalog path recorded in run.json");

    auto* exp = app.add_subcommand("export", "write the corpus layout {metadata.json, reports/, images/, manifest.jsonl}");
    exp->add_option("run_dir", run_dir, "run directory")->required();
    exp->add_option("--dest", dest, "destination directory")->required();

    auto* audit = app.add_subcommand("audit", "judge and similarity-screen an image-text corpus");
    audit->add_option("--manifest", manifest, "corpus manifest JSONL {id, image_path, report_path}")->required();
    add_common(audit, o);
    audit->add_option("--policy", o.policy, "removal policy: ALL_NO, ANY_NO or QUORUM:q");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) return cmd_generate(o, out, err);
        if (*cap) return cmd_capacity(o, out);
        if (*stats) return cmd_stats(o, run_dir, out);
        if (*exp) return cmd_export(o, run_dir, dest, out);
        if (*audit) return cmd_audit(o, manifest, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception& e) {
        err << "error: ConfigInvalid: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: StorageFailure: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace cxrsynth
