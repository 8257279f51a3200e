#pragma once

#include "cxrsynth/catalog.hpp"
#include "cxrsynth/curation.hpp"
#include "cxrsynth/hashing.hpp"
#include "cxrsynth/sampler.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace cxrsynth {

// Run directory layout:
//
//   manifest.jsonl        header line, then one line per accepted record
//   ledger.json           frequency ledger checkpoint
//   reports/<id>.findings.txt, reports/<id>.impression.txt
//   blobs/ab/cd/<sha256>  image payloads, content addressed
//
// Manifest lines are JSON objects. The header is
//   {"type":"header","format":"cxrsynth-manifest/1","run_id":..,"config_hash":..}
// and each record line is {"type":"record", ...RecordEntry fields}.
inline constexpr std::string_view kManifestFormat = "cxrsynth-manifest/1";

struct RecordEntry {
    std::string record_id;
    std::uint64_t slot = 0;
    std::uint64_t sequence = 0; // append order within the manifest
    std::vector<EntityId> s1;
    std::vector<EntityId> s2;
    std::string findings_path;   // relative to the run directory
    std::string impression_path; // relative to the run directory
    std::string image_hash;
    std::uint32_t findings_attempts = 0;
    std::uint32_t impression_attempts = 0;
    std::uint32_t image_attempts = 0;
    std::array<bool, kNumQualityQueries> verdict{};
    double max_bad_similarity = -1.0;
    std::uint64_t image_seed = 0;
    double guidance_scale = 0.0;
    std::uint32_t steps = 0;
    std::uint32_t abandoned_reports = 0; // entity sets dropped for this slot after report retries ran out
    std::uint32_t abandoned_images = 0;  // entity sets dropped for this slot after image retries ran out

    EntitySet entity_set() const { return {s1, s2}; }
    friend bool operator==(const RecordEntry&, const RecordEntry&) = default;
};

void to_json(nlohmann::json& j, const RecordEntry& r);
void from_json(const nlohmann::json& j, RecordEntry& r);

std::string record_id_for_slot(std::uint64_t slot);

struct ManifestCounters {
    std::uint64_t accepted = 0;
    std::uint64_t abandoned_reports = 0;
    std::uint64_t abandoned_images = 0;
};

// Append-only JSONL manifest. Each append is written with O_APPEND and
// fsync'd before returning. Not internally synchronized: one writer.
class RunManifest {
public:
    // Creates a new manifest with its header line. Throws Error(StorageFailure)
    // if the file already exists or cannot be written.
    static RunManifest create(const std::filesystem::path& path, std::string run_id, std::string config_hash);

    // Loads an existing manifest. A torn final line (no trailing newline or
    // unparsable) is truncated away. Throws Error(StorageFailure) for a
    // missing file or header and Error(CorruptCheckpoint) for a malformed
    // interior line or duplicate record id.
    static RunManifest open(const std::filesystem::path& path);

    const std::filesystem::path& path() const { return path_; }
    const std::string& run_id() const { return run_id_; }
    const std::string& config_hash() const { return config_hash_; }
    const std::vector<RecordEntry>& records() const { return records_; }
    ManifestCounters counters() const;
    bool contains(const std::string& record_id) const { return ids_.contains(record_id); }

    // Throws Error(DuplicateRecordId) (manifest unchanged) or
    // Error(StorageFailure). The entry's sequence is assigned here.
    const RecordEntry& append_record(RecordEntry record);

private:
    RunManifest() = default;
    std::filesystem::path path_;
    std::string run_id_;
    std::string config_hash_;
    std::vector<RecordEntry> records_;
    std::unordered_set<std::string> ids_;
};

// Content-addressed blob storage under blobs/ab/cd/<sha256>. Writes go to a
// temporary file and are renamed into place, so concurrent puts of the same
// payload are safe.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path root) : root_(std::move(root)) {}
    std::filesystem::path path_for(const std::string& hash) const;
    // Returns the sha256 hex digest. Throws Error(StorageFailure).
    std::string put(const Blob& blob) const;
    // Throws Error(StorageFailure) if absent or if the content does not hash
    // to `hash`.
    Blob get(const std::string& hash) const;
    bool contains(const std::string& hash) const;

private:
    std::filesystem::path root_;
};

struct LedgerCheckpoint {
    std::string config_hash;
    std::uint32_t tau_max = 0;
    std::uint64_t records = 0; // manifest records folded into `counts`
    CountMap counts;
};

// Atomic write via temporary file, fsync and rename. Throws
// Error(StorageFailure).
void save_ledger_checkpoint(const std::filesystem::path& path, const LedgerCheckpoint& cp);
// Throws Error(StorageFailure) if unreadable, Error(CorruptCheckpoint) if
// malformed.
LedgerCheckpoint load_ledger_checkpoint(const std::filesystem::path& path);

// Writes `content` to `path` atomically. Throws Error(StorageFailure).
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct ResumeState {
    RunManifest manifest;
    FrequencyLedger ledger;
    std::set<std::uint64_t> completed_slots;
    std::uint64_t rolled_forward = 0; // manifest records not yet in the checkpoint
};

// Reconciles a manifest with its ledger checkpoint. Both must carry
// `config_hash` (else Error(ConfigMismatch)). The checkpoint must equal a
// recount of the first `records` manifest entries (else
// Error(CorruptCheckpoint)); later entries are rolled forward. A missing
// checkpoint is accepted only for a manifest with no records.
ResumeState resume(const std::filesystem::path& manifest_path, const std::filesystem::path& ledger_path,
                   const std::string& config_hash, std::uint32_t tau_max);

// Recount of entity occurrences over manifest records, one per record.
CountMap recount(const std::vector<RecordEntry>& records);

// Single owner of a run directory.
class RunStore {
public:
    explicit RunStore(std::filesystem::path dir);
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path manifest_path() const { return dir_ / "manifest.jsonl"; }
    std::filesystem::path ledger_path() const { return dir_ / "ledger.json"; }
    std::filesystem::path reports_dir() const { return dir_ / "reports"; }
    const BlobStore& blobs() const { return blobs_; }

    // Writes both report sections; returns the paths relative to dir().
    std::pair<std::string, std::string> write_report(const std::string& record_id, std::string_view findings,
                                                     std::string_view impression) const;

private:
    std::filesystem::path dir_;
    BlobStore blobs_;
};

struct ExportSummary {
    std::uint64_t records = 0;
    std::filesystem::path manifest;
};

// Writes dest/{metadata.json, reports/<id>.txt, images/<id>.img,
// manifest.jsonl}, ordered by record_id. The exported manifest lines are
// {"id","image_path","report_path","image_hash","entities"} with paths
// relative to dest, so the result is directly auditable. Throws
// Error(StorageFailure).
ExportSummary export_corpus(const std::filesystem::path& run_dir, const std::filesystem::path& dest,
                            const EntityCatalog* catalog = nullptr);

} // namespace cxrsynth
