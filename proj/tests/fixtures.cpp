#include "fixtures.hpp"

#include "cxrsynth/mock_providers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace cxrsynth::fixtures {

namespace fs = std::filesystem;

TempDir::TempDir() {
    std::random_device rd;
    const auto base = fs::temp_directory_path();
    for (;;) {
        path_ = base / ("cxrsynth-test-" + std::to_string(rd()) + std::to_string(rd()));
        if (fs::create_directory(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::shared_ptr<const EntityCatalog> make_catalog(std::size_t per_category, std::size_t anatomy) {
    auto catalog = std::make_shared<EntityCatalog>();
    for (Category c : kAllCategories) {
        const std::size_t n = is_anatomy(c) ? anatomy : per_category;
        for (std::size_t i = 0; i < n; ++i) {
            catalog->add(make_entity(std::string(to_string(c)) + " term " + std::to_string(i), c));
        }
    }
    return catalog;
}

std::shared_ptr<const EntityCatalog> census_catalog() {
    auto catalog = std::make_shared<EntityCatalog>();
    const std::pair<Category, std::size_t> census[] = {
        {Category::Abnormality, 55047}, {Category::NonAbnormality, 36365}, {Category::Disease, 23017},
        {Category::NonDisease, 22103},  {Category::Anatomy, 40517},
    };
    for (const auto& [c, n] : census) {
        for (std::size_t i = 0; i < n; ++i) catalog->add(make_entity("e" + std::to_string(i), c));
    }
    return catalog;
}

fs::path write_catalog(const EntityCatalog& catalog, const fs::path& path) {
    std::ofstream out(path);
    write_catalog_tsv(catalog, out);
    return path;
}

RunConfig mock_config(const fs::path& catalog_path, std::uint64_t n, std::uint64_t seed) {
    RunConfig cfg;
    cfg.catalog_path = catalog_path.string();
    cfg.mock = true;
    cfg.n_target = n;
    cfg.seed = seed;
    cfg.screen.embedding_dim = 16;
    cfg.mock_policy.embedding_dim = 16;
    cfg.propagate_seed();
    return cfg;
}

double brute_force_gini(const std::vector<std::uint64_t>& xs) {
    const double n = static_cast<double>(xs.size());
    double sum = 0;
    for (auto x : xs) sum += static_cast<double>(x);
    const double mean = sum / n;
    double acc = 0;
    for (auto a : xs) {
        for (auto b : xs) acc += std::abs(static_cast<double>(a) - static_cast<double>(b));
    }
    return acc / (2.0 * n * n * mean);
}

std::vector<std::uint64_t> zipf_counts(std::size_t n, double s, std::uint64_t mass) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const std::uint64_t free_mass = mass - n;
    std::vector<std::uint64_t> out(n, 1);
    std::vector<std::pair<double, std::size_t>> rem;
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = static_cast<double>(free_mass) * w[i] / total;
        const auto whole = static_cast<std::uint64_t>(std::floor(exact));
        out[i] += whole;
        assigned += whole;
        rem.emplace_back(exact - static_cast<double>(whole), i);
    }
    std::sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t i = 0; assigned < free_mass; ++i, ++assigned) ++out[rem[i].second];
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ImageSource PlantedCorpus::source() const {
    return [this](const CorpusItem& item) { return blobs.at(item.id); };
}

PlantedCorpus planted_corpus(std::size_t judge_bad, std::size_t similar, std::size_t clean, std::uint64_t seed) {
    using Answers = std::array<bool, 6>;
    const Answers all_yes{true, true, true, true, true, true};
    const Answers all_no{};
    const Answers mixed{false, true, false, true, true, true};
    const std::vector<std::vector<float>> clean_vectors{
        {0.0f, 1.0f, 0.0f, 0.0f}, {0.0f, 0.0f, 0.6f, 0.8f}, {0.5f, 0.5f, 0.5f, 0.5f}, {-0.6f, 0.0f, 0.8f, 0.0f}};

    struct Planted {
        Answers answers;
        std::vector<float> embedding;
        int kind;
    };
    std::vector<Planted> plan;
    plan.reserve(judge_bad + similar + clean);
    for (std::size_t i = 0; i < judge_bad; ++i) plan.push_back({all_no, {1.0f, 0.0f, 0.0f, 0.0f}, 0});
    for (std::size_t i = 0; i < similar; ++i) plan.push_back({all_yes, {0.6f, 0.8f, 0.0f, 0.0f}, 1});
    for (std::size_t i = 0; i < clean; ++i) plan.push_back({i % 5 == 4 ? mixed : all_yes, clean_vectors[i % 4], 2});
    std::mt19937_64 rng(seed);
    std::shuffle(plan.begin(), plan.end(), rng);

    PlantedCorpus out;
    out.items.reserve(plan.size());
    out.blobs.reserve(plan.size());
    char id[32];
    for (std::size_t i = 0; i < plan.size(); ++i) {
        std::snprintf(id, sizeof id, "img-%07zu", i);
        out.items.push_back({id, std::string(id) + ".img", std::string(id) + ".txt"});
        out.blobs.emplace(id, mock_judge_marker(plan[i].answers) + mock_embed_marker(plan[i].embedding));
        if (plan[i].kind == 0) out.judge_bad_ids.emplace_back(id);
        if (plan[i].kind == 1) out.similar_ids.emplace_back(id);
    }
    return out;
}

} // namespace cxrsynth::fixtures
