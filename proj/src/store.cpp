#include "cxrsynth/store.hpp"

#include "cxrsynth/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace cxrsynth {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void storage_error(const std::string& what) {
    throw Error(ErrorCode::StorageFailure, what + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::string& what) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            storage_error(what);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

fs::path temp_sibling(const fs::path& path) {
    static std::atomic<std::uint64_t> counter{0};
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    return path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(tid) + "." +
           std::to_string(counter.fetch_add(1));
}

std::vector<std::string> ids_to_hex(const std::vector<EntityId>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (EntityId id : ids) out.push_back(to_hex64(id.value));
    return out;
}

std::vector<EntityId> ids_from_hex(const nlohmann::json& j) {
    std::vector<EntityId> out;
    for (const auto& s : j) out.push_back(EntityId{from_hex64(s.get<std::string>())});
    return out;
}

nlohmann::json header_json(const std::string& run_id, const std::string& config_hash) {
    return {{"type", "header"}, {"format", kManifestFormat}, {"run_id", run_id}, {"config_hash", config_hash}};
}

} // namespace

void to_json(nlohmann::json& j, const RecordEntry& r) {
    j = {
        {"type", "record"},
        {"record_id", r.record_id},
        {"slot", r.slot},
        {"sequence", r.sequence},
        {"s1", ids_to_hex(r.s1)},
        {"s2", ids_to_hex(r.s2)},
        {"findings_path", r.findings_path},
        {"impression_path", r.impression_path},
        {"image_hash", r.image_hash},
        {"findings_attempts", r.findings_attempts},
        {"impression_attempts", r.impression_attempts},
        {"image_attempts", r.image_attempts},
        {"verdict", r.verdict},
        {"max_bad_similarity", r.max_bad_similarity},
        {"image_seed", r.image_seed},
        {"guidance_scale", r.guidance_scale},
        {"steps", r.steps},
        {"abandoned_reports", r.abandoned_reports},
        {"abandoned_images", r.abandoned_images},
    };
}

void from_json(const nlohmann::json& j, RecordEntry& r) {
    j.at("record_id").get_to(r.record_id);
    j.at("slot").get_to(r.slot);
    j.at("sequence").get_to(r.sequence);
    r.s1 = ids_from_hex(j.at("s1"));
    r.s2 = ids_from_hex(j.at("s2"));
    j.at("findings_path").get_to(r.findings_path);
    j.at("impression_path").get_to(r.impression_path);
    j.at("image_hash").get_to(r.image_hash);
    j.at("findings_attempts").get_to(r.findings_attempts);
    j.at("impression_attempts").get_to(r.impression_attempts);
    j.at("image_attempts").get_to(r.image_attempts);
    j.at("verdict").get_to(r.verdict);
    j.at("max_bad_similarity").get_to(r.max_bad_similarity);
    j.at("image_seed").get_to(r.image_seed);
    j.at("guidance_scale").get_to(r.guidance_scale);
    j.at("steps").get_to(r.steps);
    j.at("abandoned_reports").get_to(r.abandoned_reports);
    j.at("abandoned_images").get_to(r.abandoned_images);
}

std::string record_id_for_slot(std::uint64_t slot) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rec-%08llu", static_cast<unsigned long long>(slot));
    return buf;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = temp_sibling(path);
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) storage_error("cannot create " + tmp.string());
    try {
        write_all(fd, content, tmp.string());
        if (::fsync(fd) != 0) storage_error("fsync " + tmp.string());
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        ::unlink(tmp.c_str());
        storage_error("cannot rename into " + path.string());
    }
    fsync_dir(path.parent_path());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- RunManifest ----

RunManifest RunManifest::create(const fs::path& path, std::string run_id, std::string config_hash) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) storage_error("cannot create manifest " + path.string());
    const std::string line = header_json(run_id, config_hash).dump() + "\n";
    try {
        write_all(fd, line, path.string());
        if (::fsync(fd) != 0) storage_error("fsync " + path.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    fsync_dir(path.parent_path());
    RunManifest m;
    m.path_ = path;
    m.run_id_ = std::move(run_id);
    m.config_hash_ = std::move(config_hash);
    return m;
}

RunManifest RunManifest::open(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::StorageFailure, "manifest " + path.string() + " does not exist");
    std::string content = read_file(path);

    // A crash mid-append leaves a final line without its newline.
    const auto last_nl = content.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != content.size()) {
        if (::truncate(path.c_str(), static_cast<off_t>(keep)) != 0) storage_error("cannot truncate " + path.string());
        content.resize(keep);
    }

    RunManifest m;
    m.path_ = path;
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::CorruptCheckpoint, path.string() + ":" + std::to_string(line_no) + ": not JSON");
        }
        const std::string type = j.value("type", "");
        if (line_no == 1) {
            if (type != "header" || j.value("format", "") != kManifestFormat) {
                throw Error(ErrorCode::StorageFailure, path.string() + " has no manifest header");
            }
            m.run_id_ = j.value("run_id", "");
            m.config_hash_ = j.value("config_hash", "");
            continue;
        }
        if (type != "record") {
            throw Error(ErrorCode::CorruptCheckpoint, path.string() + ":" + std::to_string(line_no) + ": not a record");
        }
        RecordEntry r;
        try {
            r = j.get<RecordEntry>();
        } catch (const std::exception& e) {
            throw Error(ErrorCode::CorruptCheckpoint,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!m.ids_.insert(r.record_id).second) {
            throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": duplicate record id " + r.record_id);
        }
        m.records_.push_back(std::move(r));
    }
    if (line_no == 0) throw Error(ErrorCode::StorageFailure, path.string() + " has no manifest header");
    return m;
}

ManifestCounters RunManifest::counters() const {
    ManifestCounters c;
    c.accepted = records_.size();
    for (const auto& r : records_) {
        c.abandoned_reports += r.abandoned_reports;
        c.abandoned_images += r.abandoned_images;
    }
    return c;
}

const RecordEntry& RunManifest::append_record(RecordEntry record) {
    if (ids_.contains(record.record_id)) {
        throw Error(ErrorCode::DuplicateRecordId, "record " + record.record_id + " is already in the manifest");
    }
    record.sequence = records_.size();
    const std::string line = nlohmann::json(record).dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (fd < 0) storage_error("cannot open manifest " + path_.string());
    try {
        write_all(fd, line, path_.string());
        if (::fsync(fd) != 0) storage_error("fsync " + path_.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    ids_.insert(record.record_id);
    records_.push_back(std::move(record));
    return records_.back();
}

// ---- BlobStore ----

fs::path BlobStore::path_for(const std::string& hash) const {
    if (hash.size() < 4) throw Error(ErrorCode::PreconditionViolation, "blob hash '" + hash + "' is too short");
    return root_ / hash.substr(0, 2) / hash.substr(2, 2) / hash;
}

std::string BlobStore::put(const Blob& blob) const {
    const std::string hash = sha256_hex(blob);
    const fs::path p = path_for(hash);
    if (!fs::exists(p)) write_file_atomic(p, blob);
    return hash;
}

Blob BlobStore::get(const std::string& hash) const {
    const fs::path p = path_for(hash);
    Blob blob = read_file(p);
    if (sha256_hex(blob) != hash) throw Error(ErrorCode::StorageFailure, "blob " + p.string() + " fails its hash");
    return blob;
}

bool BlobStore::contains(const std::string& hash) const { return fs::exists(path_for(hash)); }

// ---- ledger checkpoint ----

void save_ledger_checkpoint(const fs::path& path, const LedgerCheckpoint& cp) {
    std::vector<std::pair<EntityId, std::uint64_t>> sorted;
    std::uint64_t total = 0;
    for (const auto& [id, n] : cp.counts) {
        if (n == 0) continue;
        sorted.emplace_back(id, n);
        total += n;
    }
    std::sort(sorted.begin(), sorted.end());
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [id, n] : sorted) counts[to_hex64(id.value)] = n;
    const nlohmann::json j = {{"config_hash", cp.config_hash},
                              {"tau_max", cp.tau_max},
                              {"records", cp.records},
                              {"total_committed", total},
                              {"counts", std::move(counts)}};
    write_file_atomic(path, j.dump() + "\n");
}

LedgerCheckpoint load_ledger_checkpoint(const fs::path& path) {
    const std::string content = read_file(path);
    const auto j = nlohmann::json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::CorruptCheckpoint, path.string() + " is not JSON");
    LedgerCheckpoint cp;
    try {
        j.at("config_hash").get_to(cp.config_hash);
        j.at("tau_max").get_to(cp.tau_max);
        j.at("records").get_to(cp.records);
        std::uint64_t total = 0;
        for (const auto& [hex, n] : j.at("counts").items()) {
            const auto v = n.get<std::uint64_t>();
            cp.counts[EntityId{from_hex64(hex)}] = v;
            total += v;
        }
        if (j.value("total_committed", total) != total) {
            throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": total_committed disagrees with counts");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::CorruptCheckpoint) throw;
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
    }
    return cp;
}

// ---- resume ----

CountMap recount(const std::vector<RecordEntry>& records) {
    CountMap counts;
    for (const auto& r : records) {
        for (EntityId id : r.s1) ++counts[id];
        for (EntityId id : r.s2) ++counts[id];
    }
    return counts;
}

ResumeState resume(const fs::path& manifest_path, const fs::path& ledger_path, const std::string& config_hash,
                   std::uint32_t tau_max) {
    RunManifest manifest = RunManifest::open(manifest_path);
    if (manifest.config_hash() != config_hash) {
        throw Error(ErrorCode::ConfigMismatch, manifest_path.string() + " was written under config " +
                                                   manifest.config_hash() + ", current config is " + config_hash);
    }
    const auto& records = manifest.records();

    LedgerCheckpoint cp;
    if (fs::exists(ledger_path)) {
        cp = load_ledger_checkpoint(ledger_path);
        if (cp.config_hash != config_hash) {
            throw Error(ErrorCode::ConfigMismatch, ledger_path.string() + " was written under config " +
                                                       cp.config_hash + ", current config is " + config_hash);
        }
    } else if (!records.empty()) {
        throw Error(ErrorCode::CorruptCheckpoint,
                    ledger_path.string() + " is missing but the manifest holds " + std::to_string(records.size()) +
                        " records");
    } else {
        cp.config_hash = config_hash;
        cp.tau_max = tau_max;
    }
    if (cp.tau_max < tau_max) cp.tau_max = tau_max;
    if (cp.records > records.size()) {
        throw Error(ErrorCode::CorruptCheckpoint, ledger_path.string() + " covers " + std::to_string(cp.records) +
                                                      " records but the manifest holds " +
                                                      std::to_string(records.size()));
    }

    const std::vector<RecordEntry> covered(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(cp.records));
    CountMap expected = recount(covered);
    if (expected != cp.counts) {
        std::size_t diffs = 0;
        for (const auto& [id, n] : expected) diffs += cp.counts.contains(id) && cp.counts.at(id) == n ? 0 : 1;
        for (const auto& [id, n] : cp.counts) diffs += expected.contains(id) ? 0 : 1;
        throw Error(ErrorCode::CorruptCheckpoint, ledger_path.string() + " disagrees with a recount of the manifest in " +
                                                      std::to_string(diffs) + " entities");
    }

    FrequencyLedger ledger = FrequencyLedger::from_counts(cp.tau_max, std::move(cp.counts));
    std::uint64_t rolled = 0;
    for (std::size_t i = cp.records; i < records.size(); ++i) {
        try {
            ledger.commit(records[i].entity_set());
        } catch (const CapViolation& e) {
            throw Error(ErrorCode::CorruptCheckpoint, "manifest record " + records[i].record_id +
                                                          " exceeds the cap: " + e.what());
        }
        ++rolled;
    }

    ResumeState state{std::move(manifest), std::move(ledger), {}, rolled};
    for (const auto& r : state.manifest.records()) state.completed_slots.insert(r.slot);
    return state;
}

// ---- RunStore ----

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)), blobs_(dir_ / "blobs") {
    std::error_code ec;
    fs::create_directories(dir_ / "reports", ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + (dir_ / "reports").string() + ": " + ec.message());
}

std::pair<std::string, std::string> RunStore::write_report(const std::string& record_id, std::string_view findings,
                                                           std::string_view impression) const {
    const std::string f = "reports/" + record_id + ".findings.txt";
    const std::string i = "reports/" + record_id + ".impression.txt";
    write_file_atomic(dir_ / f, findings);
    write_file_atomic(dir_ / i, impression);
    return {f, i};
}

// ---- export ----

ExportSummary export_corpus(const fs::path& run_dir, const fs::path& dest, const EntityCatalog* catalog) {
    const RunManifest manifest = RunManifest::open(run_dir / "manifest.jsonl");
    const BlobStore blobs(run_dir / "blobs");

    std::vector<const RecordEntry*> order;
    for (const auto& r : manifest.records()) order.push_back(&r);
    std::sort(order.begin(), order.end(),
              [](const RecordEntry* a, const RecordEntry* b) { return a->record_id < b->record_id; });

    std::error_code ec;
    fs::create_directories(dest / "reports", ec);
    fs::create_directories(dest / "images", ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dest.string() + ": " + ec.message());

    std::string lines;
    for (const RecordEntry* r : order) {
        const std::string findings = read_file(run_dir / r->findings_path);
        const std::string impression = read_file(run_dir / r->impression_path);
        const std::string report_rel = "reports/" + r->record_id + ".txt";
        const std::string image_rel = "images/" + r->record_id + ".img";
        write_file_atomic(dest / report_rel, "FINDINGS:\n" + findings + "\n\nIMPRESSION:\n" + impression + "\n");
        write_file_atomic(dest / image_rel, blobs.get(r->image_hash));

        nlohmann::json line = {{"id", r->record_id},
                               {"image_path", image_rel},
                               {"report_path", report_rel},
                               {"image_hash", r->image_hash}};
        nlohmann::json ents = nlohmann::json::array();
        for (EntityId id : r->entity_set().members()) {
            nlohmann::json e = {{"id", to_hex64(id.value)}};
            if (catalog) {
                if (const Entity* ent = catalog->find(id)) {
                    e["text"] = ent->text;
                    e["category"] = to_string(ent->category);
                }
            }
            ents.push_back(std::move(e));
        }
        line["entities"] = std::move(ents);
        lines += line.dump() + "\n";
    }
    write_file_atomic(dest / "manifest.jsonl", lines);

    const auto counters = manifest.counters();
    const nlohmann::json meta = {{"format", "cxrsynth-corpus/1"},
                                 {"run_id", manifest.run_id()},
                                 {"config_hash", manifest.config_hash()},
                                 {"records", counters.accepted},
                                 {"abandoned_reports", counters.abandoned_reports},
                                 {"abandoned_images", counters.abandoned_images}};
    write_file_atomic(dest / "metadata.json", meta.dump(2) + "\n");
    return {counters.accepted, dest / "manifest.jsonl"};
}

} // namespace cxrsynth
