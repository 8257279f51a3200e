#include "cxrsynth/cli.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace cxrsynth;
namespace fs = std::filesystem;

namespace {

struct Result {
    int rc = 0;
    std::string out;
    std::string err;

    nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cxrsynth");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {rc, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    fixtures::TempDir dir;

    std::string catalog(std::size_t per_category, std::size_t anatomy) {
        const auto path = dir / ("catalog_" + std::to_string(per_category) + "_" + std::to_string(anatomy) + ".tsv");
        fixtures::write_catalog(*fixtures::make_catalog(per_category, anatomy), path);
        return path.string();
    }
};

} // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
    EXPECT_EQ(cli({}).rc, 2);
    EXPECT_EQ(cli({"generate", "--bogus"}).rc, 2);
    EXPECT_EQ(cli({"frobnicate"}).rc, 2);
    EXPECT_EQ(cli({"generate", "--mock", "--out", (dir / "x").string()}).rc, 2);
    EXPECT_EQ(cli({"capacity", "--catalog", catalog(3, 3), "--tau-max", "0"}).rc, 2);
    EXPECT_EQ(cli({"help"}).rc, 2);
    EXPECT_EQ(cli({"--help"}).rc, 0);
}

TEST_F(CliTest, CapacityReportsTheShortfall) {
    const auto r = cli({"capacity", "--catalog", catalog(25, 10), "--n", "51"});
    EXPECT_EQ(r.rc, 3);
    const auto j = r.json();
    EXPECT_EQ(j["feasible"], false);
    const auto& g = j["groups"]["ANATOMY"];
    EXPECT_EQ(g["capacity"], 150);
    EXPECT_EQ(g["demand"], 153);
    EXPECT_EQ(g["slack"], -3);
    EXPECT_EQ(g["feasible"], false);
    EXPECT_EQ(j["groups"]["NON-ANATOMY"]["feasible"], true);
    EXPECT_EQ(cli({"capacity", "--catalog", catalog(25, 10), "--n", "50"}).rc, 0);
}

TEST_F(CliTest, GenerateRefusesAnInfeasibleTarget) {
    const auto out = dir / "run";
    const auto r = cli({"generate", "--mock", "--catalog", catalog(25, 10), "--n", "51", "--out", out.string()});
    EXPECT_EQ(r.rc, 3);
    EXPECT_EQ(r.json()["feasible"], false);
    EXPECT_NE(r.err.find("error: CapacityExhausted"), std::string::npos);
}

TEST_F(CliTest, RelaxCapProceedsWithAWarning) {
    const auto out = dir / "run";
    const auto r = cli({"generate", "--mock", "--catalog", catalog(25, 10), "--n", "51", "--relax-cap", "--out",
                        out.string()});
    EXPECT_EQ(r.rc, 0) << r.err;
    EXPECT_EQ(r.json()["tau_max"], 16);
    EXPECT_NE(r.err.find("relaxed from 15 to 16"), std::string::npos);
}

TEST_F(CliTest, GenerateStatsExportAudit) {
    const auto run = dir / "run";
    const auto cat = catalog(350, 420);
    const auto g = cli({"generate", "--mock", "--catalog", cat, "--n", "2000", "--seed", "3", "--workers", "2", "--out",
                        run.string()});
    ASSERT_EQ(g.rc, 0) << g.err;
    EXPECT_EQ(g.json()["accepted"], 2000);

    const auto s = cli({"stats", run.string()});
    ASSERT_EQ(s.rc, 0) << s.err;
    const auto stats = s.json();
    EXPECT_EQ(stats["records"], 2000);
    EXPECT_LE(stats["max_entity_count"].get<int>(), 15);
    EXPECT_EQ(stats["cap_respected"], true);
    EXPECT_LT(stats["distribution"]["overall"]["gini"].get<double>(), 0.15);

    const auto e = cli({"export", run.string(), "--dest", (dir / "corpus").string()});
    ASSERT_EQ(e.rc, 0) << e.err;
    EXPECT_EQ(e.json()["records"], 2000);

    const auto a = cli({"audit", "--mock", "--manifest", (dir / "corpus" / "manifest.jsonl").string(), "--out",
                        (dir / "audit").string()});
    ASSERT_EQ(a.rc, 0) << a.err;
    EXPECT_EQ(a.json()["remaining"], 2000);
    EXPECT_TRUE(fs::exists(dir / "audit" / "audit_report.json"));
    EXPECT_TRUE(fs::exists(dir / "audit" / "removed_ids.txt"));
    EXPECT_TRUE(fs::exists(dir / "audit" / "bad_bank.bin"));
}

TEST_F(CliTest, AuditBankFeedsGeneration) {
    const auto corpus = fixtures::planted_corpus(3, 4, 13, 1);
    fs::create_directories(dir / "corpus");
    {
        std::ofstream m(dir / "corpus" / "manifest.jsonl");
        for (const auto& item : corpus.items) {
            std::ofstream(dir / "corpus" / item.image_path, std::ios::binary) << corpus.blobs.at(item.id);
            m << nlohmann::json({{"id", item.id}, {"image_path", item.image_path}}).dump() << "\n";
        }
    }
    const std::string cfg_path = (dir / "audit.json").string();
    std::ofstream(cfg_path) << R"({"mock": true, "screen": {"embedding_dim": 4}})";
    const auto a = cli({"audit", "--config", cfg_path, "--manifest", (dir / "corpus" / "manifest.jsonl").string(),
                        "--out", (dir / "audit").string()});
    ASSERT_EQ(a.rc, 0) << a.err;
    EXPECT_EQ(a.json()["removed_by_judge"], 3);
    EXPECT_EQ(a.json()["removed_by_similarity"], 4);
    EXPECT_EQ(a.json()["remaining"], 13);
    const auto removed = fixtures::read_text(dir / "audit" / "removed_ids.txt");
    EXPECT_EQ(std::count(removed.begin(), removed.end(), '\n'), 7);

    const auto g = cli({"generate", "--config", cfg_path, "--catalog", catalog(10, 10), "--n", "10", "--bad-bank",
                        (dir / "audit" / "bad_bank.bin").string(), "--out", (dir / "run").string()});
    EXPECT_EQ(g.rc, 0) << g.err;
}

TEST_F(CliTest, StorageAndConfigErrorsMapToExitCodes) {
    EXPECT_EQ(cli({"audit", "--mock", "--manifest", (dir / "none.jsonl").string(), "--out", (dir / "a").string()}).rc, 6);
    EXPECT_EQ(cli({"stats", (dir / "missing").string()}).rc, 2);
    EXPECT_EQ(cli({"generate", "--mock", "--catalog", (dir / "none.tsv").string(), "--n", "1"}).rc, 2);
    EXPECT_EQ(cli({"audit", "--mock", "--manifest", "x", "--policy", "SOME_NO"}).rc, 2);
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_EQ(cli({"generate", "--config", (dir / "bad.json").string()}).rc, 2);
}

TEST_F(CliTest, ResumeWithChangedSettingsIsAConfigError) {
    const auto cat = catalog(20, 20);
    const auto run = (dir / "run").string();
    ASSERT_EQ(cli({"generate", "--mock", "--catalog", cat, "--n", "10", "--out", run}).rc, 0);
    const auto r = cli({"generate", "--mock", "--catalog", cat, "--n", "10", "--k", "8", "--out", run});
    EXPECT_EQ(r.rc, 2);
    EXPECT_NE(r.err.find("ConfigMismatch"), std::string::npos);
}

TEST_F(CliTest, ConfigFileResolvesRelativeCatalogPath) {
    fs::create_directories(dir / "sub");
    fixtures::write_catalog(*fixtures::make_catalog(10, 10), dir / "sub" / "catalog.tsv");
    std::ofstream(dir / "sub" / "run.json") << R"({"catalog": "catalog.tsv", "mock": true, "n_target": 5, "seed": 2})";
    const auto r = cli({"generate", "--config", (dir / "sub" / "run.json").string(), "--out", (dir / "run").string()});
    EXPECT_EQ(r.rc, 0) << r.err;
    EXPECT_EQ(r.json()["accepted"], 5);
}
