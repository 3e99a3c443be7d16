#include "fnd/experiment.hpp"

#include "fnd/error.hpp"
#include "fnd/io.hpp"
#include "fnd/tfidf.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <set>

namespace fnd {
namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::E1: return "E1";
    case ExperimentKind::E2: return "E2";
    case ExperimentKind::E3: return "E3";
    case ExperimentKind::E4: return "E4";
    case ExperimentKind::HEATMAP: return "HEATMAP";
    }
    return "?";
}

std::string_view to_string(Integration i) {
    switch (i) {
    case Integration::SIS_SA: return "SIS_SA";
    case Integration::ERS_MINFO: return "ERS_MINFO";
    case Integration::ERS_ANOVA: return "ERS_ANOVA";
    case Integration::ERS_PCA: return "ERS_PCA";
    }
    return "?";
}

std::string_view column_label(Integration i) {
    switch (i) {
    case Integration::SIS_SA: return "sa";
    case Integration::ERS_MINFO: return "minfo";
    case Integration::ERS_ANOVA: return "anova";
    case Integration::ERS_PCA: return "pca";
    }
    return "?";
}

StageError::StageError(std::string stage, std::string artifact, const std::string& what)
    : Error(fmt::format("stage {} failed ({}): {}", stage, artifact, what)),
      stage_(std::move(stage)),
      artifact_(std::move(artifact)) {}

namespace {

constexpr std::array kAllIntegrations{Integration::SIS_SA, Integration::ERS_MINFO,
                                      Integration::ERS_ANOVA, Integration::ERS_PCA};

std::optional<ExperimentKind> parse_kind(std::string_view s) {
    for (auto k : {ExperimentKind::E1, ExperimentKind::E2, ExperimentKind::E3, ExperimentKind::E4,
                   ExperimentKind::HEATMAP}) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

std::optional<Integration> parse_integration(std::string_view s) {
    for (auto i : kAllIntegrations) {
        if (s == to_string(i) || s == column_label(i)) return i;
    }
    return std::nullopt;
}

ReducerKind reducer_for(Integration i) {
    switch (i) {
    case Integration::ERS_MINFO: return ReducerKind::MINFO;
    case Integration::ERS_ANOVA: return ReducerKind::ANOVA;
    case Integration::ERS_PCA: return ReducerKind::PCA;
    case Integration::SIS_SA: break;
    }
    return ReducerKind::SA_PASSTHROUGH;
}

json lda_to_json(const LdaConfig& c) {
    return {{"topics", c.topics},
            {"chunk_size", c.chunk_size},
            {"passes", c.passes},
            {"max_iterations", c.max_iterations},
            {"gamma_threshold", c.gamma_threshold},
            {"min_df", c.min_df},
            {"max_df_fraction", c.max_df_fraction},
            {"decay", c.decay},
            {"offset", c.offset},
            {"alpha", c.alpha},
            {"eta", c.eta}};
}

LdaConfig lda_from_json(const json& j) {
    LdaConfig c;
    c.topics = j.value("topics", c.topics);
    c.chunk_size = j.value("chunk_size", c.chunk_size);
    c.passes = j.value("passes", c.passes);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.gamma_threshold = j.value("gamma_threshold", c.gamma_threshold);
    c.min_df = j.value("min_df", c.min_df);
    c.max_df_fraction = j.value("max_df_fraction", c.max_df_fraction);
    c.decay = j.value("decay", c.decay);
    c.offset = j.value("offset", c.offset);
    c.alpha = j.value("alpha", c.alpha);
    c.eta = j.value("eta", c.eta);
    if (c.topics < 1) throw ConfigError("lda.topics must be positive");
    if (c.chunk_size < 1) throw ConfigError("lda.chunk_size must be positive");
    if (c.passes < 1) throw ConfigError("lda.passes must be positive");
    if (c.max_iterations < 1) throw ConfigError("lda.max_iterations must be positive");
    if (!(c.max_df_fraction > 0.0 && c.max_df_fraction <= 1.0))
        throw ConfigError("lda.max_df_fraction must be in (0, 1]");
    if (!(c.decay > 0.5 - 1e-12 && c.decay <= 1.0)) throw ConfigError("lda.decay must be in [0.5, 1]");
    return c;
}

const std::set<std::string> kKnownKeys{"experiment", "datasets",   "attribute", "extractors",
                                       "integration", "seed",      "target_dim", "paths",
                                       "mlp",        "lda",        "tfidf",     "e3_sa_mode"};
const std::set<std::string> kKnownPathKeys{"workspace", "esp_fake_csv", "kaggle_csv", "embeddings",
                                           "output"};

struct Parsed {
    std::optional<ExperimentConfig> config;
    std::vector<std::string> problems;
};

template <typename T, typename F>
std::vector<T> parse_list(const json& j, const char* key, F parse, std::vector<std::string>& problems) {
    std::vector<T> out;
    if (!j.contains(key)) return out;
    const auto& arr = j.at(key);
    if (!arr.is_array()) {
        problems.push_back(fmt::format("{}: expected an array of strings", key));
        return out;
    }
    for (const auto& item : arr) {
        if (!item.is_string()) {
            problems.push_back(fmt::format("{}: expected an array of strings", key));
            continue;
        }
        const auto s = item.get<std::string>();
        if (auto v = parse(s)) {
            if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
        } else {
            problems.push_back(fmt::format("{}: unknown value \"{}\"", key, s));
        }
    }
    return out;
}

fs::path resolve(const fs::path& root, const fs::path& p) {
    if (p.empty()) return {};
    return (p.is_absolute() ? p : root / p).lexically_normal();
}

Parsed parse_impl(const json& j, const fs::path& base_dir) {
    Parsed out;
    auto& problems = out.problems;
    if (!j.is_object()) {
        problems.emplace_back("configuration must be a JSON object");
        return out;
    }
    for (const auto& [key, _] : j.items()) {
        if (!kKnownKeys.contains(key)) problems.push_back(fmt::format("unknown key \"{}\"", key));
    }

    ExperimentConfig c;
    if (!j.contains("experiment") || !j.at("experiment").is_string()) {
        problems.emplace_back("experiment: required, one of E1, E2, E3, E4, HEATMAP");
    } else if (auto k = parse_kind(j.at("experiment").get<std::string>())) {
        c.experiment = *k;
    } else {
        problems.push_back(fmt::format("experiment: unknown value \"{}\"", j.at("experiment").get<std::string>()));
    }

    c.datasets = parse_list<CorpusName>(j, "datasets", parse_corpus_name, problems);
    if (c.experiment == ExperimentKind::HEATMAP) {
        if (c.datasets.empty()) c.datasets.assign(kAllCorpora.begin(), kAllCorpora.end());
    } else if (c.datasets.empty()) {
        problems.emplace_back("datasets: at least one of esp_fake, kaggle, mixed is required");
    }

    if (j.contains("attribute")) {
        const auto& a = j.at("attribute");
        if (auto v = a.is_string() ? parse_attribute(a.get<std::string>()) : std::nullopt) {
            c.attribute = *v;
        } else {
            problems.emplace_back("attribute: expected \"text\" or \"title\"");
        }
    }

    c.extractors = parse_list<ExtractorId>(j, "extractors", parse_extractor, problems);
    if (c.extractors.empty()) problems.emplace_back("extractors: at least one extractor is required");

    c.integration = parse_list<Integration>(j, "integration", parse_integration, problems);
    if (c.integration.empty() && !j.contains("integration"))
        c.integration.assign(kAllIntegrations.begin(), kAllIntegrations.end());
    const bool uses_integration =
        c.experiment != ExperimentKind::E1 && c.experiment != ExperimentKind::HEATMAP;
    if (uses_integration && c.integration.empty())
        problems.emplace_back("integration: at least one method is required");
    if (!uses_integration) c.integration.clear();
    std::sort(c.integration.begin(), c.integration.end());

    if (j.contains("seed")) {
        const auto& s = j.at("seed");
        if (s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
            c.seed = s.get<std::uint64_t>();
        } else {
            problems.emplace_back("seed: expected a non-negative integer");
        }
    }
    if (j.contains("target_dim")) {
        const auto& t = j.at("target_dim");
        if (t.is_number_integer() && t.get<long long>() > 0) {
            c.target_dim = t.get<int>();
        } else {
            problems.emplace_back("target_dim: expected a positive integer");
        }
    }
    if (j.contains("e3_sa_mode")) {
        const auto& m = j.at("e3_sa_mode");
        if (m == "pool") {
            c.e3_sa_mode = SaMode::POOL;
        } else if (m == "concat") {
            c.e3_sa_mode = SaMode::CONCAT;
        } else {
            problems.emplace_back("e3_sa_mode: expected \"pool\" or \"concat\"");
        }
    }

    try {
        if (j.contains("mlp")) {
            c.mlp = MlpConfig::from_json(j.at("mlp"));
            if (c.mlp.max_epochs < 1 || c.mlp.batch_size < 1 || c.mlp.patience < 1 ||
                !(c.mlp.learning_rate > 0) || !(c.mlp.val_fraction > 0 && c.mlp.val_fraction < 1))
                problems.emplace_back("mlp: epochs, batch_size, patience and learning_rate must be positive; "
                                      "val_fraction in (0, 1)");
            for (int h : c.mlp.hidden)
                if (h < 1) problems.emplace_back("mlp.hidden: layer widths must be positive");
        }
    } catch (const std::exception& e) {
        problems.push_back(fmt::format("mlp: {}", e.what()));
    }
    try {
        if (j.contains("lda")) c.lda = lda_from_json(j.at("lda"));
    } catch (const std::exception& e) {
        problems.push_back(fmt::format("lda: {}", e.what()));
    }
    try {
        if (j.contains("tfidf")) {
            c.tfidf_features = j.at("tfidf").value("max_features", c.tfidf_features);
            if (c.tfidf_features == 0) problems.emplace_back("tfidf.max_features must be positive");
        }
    } catch (const std::exception& e) {
        problems.push_back(fmt::format("tfidf: {}", e.what()));
    }

    json paths = j.value("paths", json::object());
    if (!paths.is_object()) {
        problems.emplace_back("paths: expected an object");
        paths = json::object();
    }
    for (const auto& [key, value] : paths.items()) {
        if (!kKnownPathKeys.contains(key)) problems.push_back(fmt::format("paths: unknown key \"{}\"", key));
        else if (!value.is_string()) problems.push_back(fmt::format("paths.{}: expected a string", key));
    }
    auto path_of = [&](const char* key) -> fs::path {
        const auto it = paths.find(key);
        return it != paths.end() && it->is_string() ? fs::path(it->get<std::string>()) : fs::path{};
    };
    c.paths.workspace = resolve(fs::absolute(base_dir), path_of("workspace"));
    if (c.paths.workspace.empty()) c.paths.workspace = fs::absolute(base_dir).lexically_normal();
    c.paths.esp_fake_csv = resolve(c.paths.workspace, path_of("esp_fake_csv"));
    c.paths.kaggle_csv = resolve(c.paths.workspace, path_of("kaggle_csv"));
    c.paths.embeddings = resolve(c.paths.workspace, path_of("embeddings"));
    c.paths.output = resolve(c.paths.workspace, path_of("output"));
    if (c.paths.output.empty()) c.paths.output = (c.paths.workspace / "runs").lexically_normal();

    if (!c.datasets.empty() && c.experiment != ExperimentKind::HEATMAP) {
        for (auto x : c.extractors) {
            const bool any = std::any_of(c.datasets.begin(), c.datasets.end(),
                                         [&](CorpusName d) { return extractor_available(x, d); });
            if (!any) {
                std::string names;
                for (auto d : c.datasets) names += (names.empty() ? "" : ", ") + std::string(to_string(d));
                problems.push_back(fmt::format("extractor unavailable for corpus: {} on {}", to_string(x), names));
            }
        }
    }

    if (problems.empty()) out.config = std::move(c);
    return out;
}

std::string rt_name(int r, int t) { return fmt::format("r{}_t{}", r, t); }

struct InputSpec {
    ExtractorId extractor;
    CorpusName source;
};

struct CellSpec {
    std::size_t row = 0;
    std::size_t col = 0;
    CorpusName eval = CorpusName::ESP_FAKE;
    Integration method = Integration::SIS_SA;
    std::vector<InputSpec> inputs;
};

struct TableSpec {
    std::string title;
    std::string slug;
    std::vector<CorpusName> rows;
    std::vector<std::string> columns;
    std::vector<CellSpec> cells;
};

std::vector<InputSpec> sources_for(ExtractorId x) {
    std::vector<InputSpec> out;
    for (auto s : kAllCorpora)
        if (extractor_available(x, s)) out.push_back({x, s});
    return out;
}

std::vector<TableSpec> plan_tables(const ExperimentConfig& c) {
    const std::string attr(to_string(c.attribute));
    std::vector<TableSpec> tables;
    auto base = [&](std::string title, std::string slug) {
        TableSpec t;
        t.title = std::move(title);
        t.slug = std::move(slug);
        t.rows = c.datasets;
        return t;
    };
    switch (c.experiment) {
    case ExperimentKind::E1: {
        auto t = base(fmt::format("E1 single extractor, balanced accuracy ({})", attr), "e1_" + attr);
        for (auto x : c.extractors) t.columns.emplace_back(to_string(x));
        for (std::size_t r = 0; r < c.datasets.size(); ++r)
            for (std::size_t k = 0; k < c.extractors.size(); ++k)
                if (extractor_available(c.extractors[k], c.datasets[r]))
                    t.cells.push_back({r, k, c.datasets[r], Integration::SIS_SA, {{c.extractors[k], c.datasets[r]}}});
        tables.push_back(std::move(t));
        break;
    }
    case ExperimentKind::E2:
    case ExperimentKind::E4: {
        const bool e4 = c.experiment == ExperimentKind::E4;
        auto t = e4 ? base(fmt::format("E4 all extractors x all sources ({})", attr), "e4_" + attr)
                    : base(fmt::format("E2 integrated extractors ({})", attr), "e2_" + attr);
        for (auto m : c.integration) t.columns.emplace_back(column_label(m));
        for (std::size_t r = 0; r < c.datasets.size(); ++r) {
            const auto d = c.datasets[r];
            std::vector<InputSpec> inputs;
            for (auto x : c.extractors) {
                if (!extractor_available(x, d)) continue;
                if (e4) {
                    for (const auto& in : sources_for(x)) inputs.push_back(in);
                } else {
                    inputs.push_back({x, d});
                }
            }
            if (inputs.empty()) continue;
            for (std::size_t k = 0; k < c.integration.size(); ++k)
                t.cells.push_back({r, k, d, c.integration[k], inputs});
        }
        tables.push_back(std::move(t));
        break;
    }
    case ExperimentKind::E3: {
        for (auto m : c.integration) {
            auto t = base(fmt::format("E3 {} over training sources ({})", column_label(m), attr),
                          fmt::format("e3_{}_{}", column_label(m), attr));
            for (auto x : c.extractors) t.columns.emplace_back(to_string(x));
            for (std::size_t r = 0; r < c.datasets.size(); ++r)
                for (std::size_t k = 0; k < c.extractors.size(); ++k)
                    if (extractor_available(c.extractors[k], c.datasets[r]))
                        t.cells.push_back({r, k, c.datasets[r], m, sources_for(c.extractors[k])});
            tables.push_back(std::move(t));
        }
        break;
    }
    case ExperimentKind::HEATMAP: break;
    }
    return tables;
}

// (extractor, source, eval) combinations and the (repetition, train fold)
// pairs each needs.
struct FeatureNeed {
    ExtractorId extractor;
    CorpusName source;
    CorpusName eval;
    friend auto operator<=>(const FeatureNeed&, const FeatureNeed&) = default;
};

std::vector<std::pair<int, int>> needed_rounds(const ExperimentConfig& c) {
    if (c.experiment == ExperimentKind::HEATMAP) return {{0, 0}};
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < kRepetitions; ++r)
        for (int t = 0; t < kFolds; ++t) out.emplace_back(r, t);
    return out;
}

std::set<FeatureNeed> feature_needs(const ExperimentConfig& c) {
    std::set<FeatureNeed> needs;
    if (c.experiment == ExperimentKind::HEATMAP) {
        for (auto x : c.extractors)
            for (const auto& in : sources_for(x))
                for (auto d : c.datasets) needs.insert({x, in.source, d});
        return needs;
    }
    for (const auto& table : plan_tables(c))
        for (const auto& cell : table.cells)
            for (const auto& in : cell.inputs) needs.insert({in.extractor, in.source, cell.eval});
    return needs;
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, json_text(j)); }

json read_json(const fs::path& path) {
    try {
        return json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::vector<Document> select(const Corpus& c, const std::vector<std::size_t>& idx) {
    std::vector<Document> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(c.documents[i]);
    return out;
}

template <typename F>
auto in_stage(const std::string& stage, const std::string& artifact, F&& f) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, artifact, e.what());
    }
}

class Pipeline {
public:
    Pipeline(const ExperimentConfig& c, fs::path run_dir) : cfg_(c), run_(std::move(run_dir)) {}

    RunResult execute();

private:
    void prepare_inputs();
    void extract_features();
    void extract_job(ExtractorId x, CorpusName s, int r, int t, const std::vector<CorpusName>& evals);
    FeatureMatrix load_features(ExtractorId x, CorpusName s, CorpusName d, int r, int t, int k) const;
    fs::path feature_path(ExtractorId x, CorpusName s, CorpusName d, int r, int t, int k) const;
    void run_task(const TableSpec& table, const CellSpec& cell, int r, int t);
    fs::path task_score_path(const TableSpec& table, const CellSpec& cell, int r, int t) const;
    fs::path sheet_path(const TableSpec& table, const CellSpec& cell) const;
    RunResult heatmap();

    const ExperimentConfig& cfg_;
    fs::path run_;
    CorpusSet corpora_;
    std::map<CorpusName, FoldPlan> plans_;
};

fs::path Pipeline::feature_path(ExtractorId x, CorpusName s, CorpusName d, int r, int t, int k) const {
    const fs::path root = is_transformer(x) ? cfg_.paths.embeddings : run_ / "features";
    return embedding_path(root, x, cfg_.attribute, s, d, r, t, k);
}

void Pipeline::prepare_inputs() {
    const auto needed = required_corpora(cfg_);
    corpora_ = in_stage("ingest", "corpora", [&] { return load_corpora(cfg_, needed); });

    json inputs = json::object();
    if (corpora_.esp_fake) inputs["esp_fake_csv"] = io::hex64(io::fnv1a64(io::read_file(cfg_.paths.esp_fake_csv)));
    if (corpora_.kaggle) inputs["kaggle_csv"] = io::hex64(io::fnv1a64(io::read_file(cfg_.paths.kaggle_csv)));
    const auto inputs_path = run_ / "inputs.json";
    in_stage("ingest", inputs_path.string(), [&] {
        if (fs::exists(inputs_path)) {
            if (read_json(inputs_path) != inputs)
                throw ValidationError("input files changed since this run directory was created");
        } else {
            write_json(inputs_path, inputs);
        }
        write_json(run_ / "ingest_report.json", corpora_.ingest_report);
        return 0;
    });

    for (auto name : needed) {
        const auto path = run_ / "plans" / fmt::format("foldplan_{}.json", to_string(name));
        in_stage("split", path.string(), [&] {
            const auto& corpus = corpora_.get(name);
            auto plan = make_fold_plan(corpus, cfg_.seed);
            if (fs::exists(path)) {
                if (fold_plan_from_json(read_json(path), corpus) != plan)
                    throw ValidationError("persisted fold plan differs from the recomputed one");
            } else {
                write_json(path, to_json(plan, corpus));
            }
            plans_.emplace(name, std::move(plan));
            return 0;
        });
    }
}

void Pipeline::extract_job(ExtractorId x, CorpusName s, int r, int t, const std::vector<CorpusName>& evals) {
    bool done = true;
    for (auto d : evals)
        for (int k = 0; k < kFolds; ++k) done = done && fs::exists(feature_path(x, s, d, r, t, k));
    if (done) return;

    const auto train_docs = select(corpora_.get(s), plans_.at(s).fold(r, t));
    const auto model_path = run_ / "extractors" / std::string(to_string(x)) /
                            std::string(to_string(cfg_.attribute)) / std::string(to_string(s)) /
                            (rt_name(r, t) + ".json");
    std::function<FeatureMatrix(std::span<const Document>)> transform;
    in_stage("extract", model_path.string(), [&] {
        if (x == ExtractorId::TFIDF) {
            auto model = std::make_shared<TfidfModel>(fit_tfidf(train_docs, cfg_.attribute, cfg_.tfidf_features));
            write_json(model_path, model->to_json());
            transform = [this, model](std::span<const Document> docs) {
                return transform_tfidf(*model, docs, cfg_.attribute);
            };
        } else {
            LdaConfig lc = cfg_.lda;
            lc.seed = io::derive_seed(cfg_.seed, {io::fnv1a64("lda"), static_cast<std::uint64_t>(s),
                                                  static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(t)});
            auto model = std::make_shared<LdaModel>(fit_lda(train_docs, cfg_.attribute, lc));
            write_json(model_path, model->to_json());
            transform = [this, model, lc](std::span<const Document> docs) {
                return transform_lda(*model, docs, cfg_.attribute, lc);
            };
        }
        return 0;
    });

    for (auto d : evals) {
        const auto& corpus = corpora_.get(d);
        for (int k = 0; k < kFolds; ++k) {
            const auto path = feature_path(x, s, d, r, t, k);
            in_stage("extract", path.string(), [&] {
                const auto& idx = plans_.at(d).fold(r, k);
                auto m = transform(select(corpus, idx));
                m.meta.extractor = std::string(to_string(x));
                m.meta.train_corpus = std::string(to_string(s));
                m.meta.eval_corpus = std::string(to_string(d));
                m.meta.attribute = std::string(to_string(cfg_.attribute));
                m.meta.repetition = r;
                m.meta.fold = k;
                m.meta.extra["train_fold"] = t;
                m.meta.extra["row_ids"] = id_checksum(corpus, idx);
                save_matrix(m, path);
                return 0;
            });
        }
    }
}

void Pipeline::extract_features() {
    std::map<std::tuple<ExtractorId, CorpusName, int, int>, std::vector<CorpusName>> jobs;
    for (const auto& need : feature_needs(cfg_)) {
        if (is_transformer(need.extractor)) continue;
        for (auto [r, t] : needed_rounds(cfg_)) jobs[{need.extractor, need.source, r, t}].push_back(need.eval);
    }
    std::vector<std::pair<std::tuple<ExtractorId, CorpusName, int, int>, std::vector<CorpusName>>> list(
        jobs.begin(), jobs.end());
    spdlog::info("extract: {} classical extractor fits", list.size());
    io::parallel_for(list.size(), io::worker_count(), [&](std::size_t i) {
        const auto& [key, evals] = list[i];
        const auto& [x, s, r, t] = key;
        extract_job(x, s, r, t, evals);
    });
}

FeatureMatrix Pipeline::load_features(ExtractorId x, CorpusName s, CorpusName d, int r, int t, int k) const {
    const auto path = feature_path(x, s, d, r, t, k);
    return in_stage("load", path.string(), [&] {
        const auto& idx = plans_.at(d).fold(r, k);
        EmbeddingSlot slot;
        slot.extractor = std::string(to_string(x));
        slot.train_corpus = std::string(to_string(s));
        slot.eval_corpus = std::string(to_string(d));
        slot.attribute = std::string(to_string(cfg_.attribute));
        slot.repetition = r;
        slot.fold = k;
        slot.rows = static_cast<Eigen::Index>(idx.size());
        auto m = load_embeddings(path, slot);
        const auto& extra = m.meta.extra;
        if (extra.contains("train_fold") && extra.at("train_fold") != t)
            throw LoadError(fmt::format("provenance mismatch on train_fold: expected {}, found {}", t,
                                        extra.at("train_fold").dump()));
        if (extra.contains("row_ids") && extra.at("row_ids") != id_checksum(corpora_.get(d), idx))
            throw LoadError("row-order mismatch: row_ids checksum differs from the fold plan");
        return m;
    });
}

fs::path Pipeline::sheet_path(const TableSpec& table, const CellSpec& cell) const {
    return run_ / "scores" / table.slug /
           fmt::format("{}__{}.json", to_string(cell.eval), table.columns[cell.col]);
}

fs::path Pipeline::task_score_path(const TableSpec& table, const CellSpec& cell, int r, int t) const {
    return run_ / "scores" / table.slug / fmt::format("{}__{}", to_string(cell.eval), table.columns[cell.col]) /
           (rt_name(r, t) + ".json");
}

void Pipeline::run_task(const TableSpec& table, const CellSpec& cell, int r, int t) {
    const auto score_path = task_score_path(table, cell, r, t);
    if (fs::exists(score_path)) return;
    const auto d = cell.eval;
    const auto& corpus = corpora_.get(d);
    const auto& train_idx = plans_.at(d).fold(r, t);
    const auto& test_idx = plans_.at(d).fold(r, 1 - t);

    std::vector<FeatureMatrix> train_feats;
    std::vector<FeatureMatrix> test_feats;
    for (const auto& in : cell.inputs) {
        train_feats.push_back(load_features(in.extractor, in.source, d, r, t, t));
        test_feats.push_back(load_features(in.extractor, in.source, d, r, t, 1 - t));
    }
    std::vector<int> y_train;
    for (auto i : train_idx) y_train.push_back(static_cast<int>(corpus.documents[i].label));

    const auto model_dir = run_ / "models" / table.slug /
                           fmt::format("{}__{}", to_string(d), table.columns[cell.col]) / rt_name(r, t);

    MlpConfig mc = cfg_.mlp;
    mc.seed = io::derive_seed(cfg_.seed, {io::fnv1a64(table.slug), static_cast<std::uint64_t>(cell.row),
                                          static_cast<std::uint64_t>(cell.col), static_cast<std::uint64_t>(r),
                                          static_cast<std::uint64_t>(t)});

    std::vector<MemberInput> inputs;
    for (std::size_t i = 0; i < cell.inputs.size(); ++i)
        inputs.push_back({cell.inputs[i].extractor, cell.inputs[i].source, &train_feats[i]});

    EnsemblePool pool = in_stage("train", model_dir.string(), [&] {
        if (cell.method == Integration::SIS_SA &&
            !(cfg_.experiment == ExperimentKind::E3 && cfg_.e3_sa_mode == SaMode::CONCAT))
            return build_sis(inputs, d, y_train, mc);
        const auto kind = reducer_for(cell.method);
        return build_ers(inputs, d, y_train, kind, cfg_.target_dim, mc);
    });

    in_stage("train", model_dir.string(), [&] {
        std::vector<std::string> model_files;
        std::optional<std::string> reducer_file;
        for (std::size_t i = 0; i < pool.members.size(); ++i) {
            const auto name = fmt::format("member{}.mlp", i);
            save_mlp(*pool.members[i].model, model_dir / name);
            model_files.push_back(name);
            if (pool.members[i].reducer) {
                reducer_file = fmt::format("member{}_reducer.json", i);
                write_json(model_dir / *reducer_file, pool.members[i].reducer->to_json());
            }
        }
        write_json(model_dir / "pool.json", pool_manifest(pool, model_files, reducer_file));
        return 0;
    });

    const double score = in_stage("evaluate", score_path.string(), [&] {
        std::vector<const FeatureMatrix*> eval_ptrs;
        for (const auto& m : test_feats) eval_ptrs.push_back(&m);
        const auto decisions = predict(pool, eval_ptrs);
        if (decisions.size() != test_idx.size()) throw ValidationError("prediction count mismatch");
        std::vector<int> y_true;
        std::vector<int> lang;
        std::vector<int> pred;
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            const auto& doc = corpus.documents[test_idx[i]];
            y_true.push_back(static_cast<int>(doc.label));
            lang.push_back(static_cast<int>(doc.language));
            const auto& dec = decisions[i];
            if (d == CorpusName::MIXED) {
                pred.push_back(extended_index(dec.language.value_or(doc.language), dec.label));
            } else {
                pred.push_back(static_cast<int>(scored_label(dec)));
            }
        }
        return d == CorpusName::MIXED ? mixed_balanced_accuracy(y_true, lang, pred)
                                      : balanced_accuracy(y_true, pred, kNumClasses);
    });
    write_json(score_path, json{{"score", score}});
}

std::vector<std::string> footer_lines(const ExperimentConfig& c) {
    std::vector<std::string> out;
    out.push_back("metric: balanced accuracy; mixed corpus scored over (language, class) strata");
    out.push_back("extended support order: ENG-LEGIT, ENG-FAKE, SPA-LEGIT, SPA-FAKE");
    out.push_back(fmt::format("protocol: 5x2 cross-validation, combined F test at alpha = {}", kSignificanceLevel));
    if (c.experiment != ExperimentKind::E1) out.push_back(fmt::format("reduction target_dim: {}", c.target_dim));
    if (c.experiment == ExperimentKind::E3)
        out.push_back(fmt::format("sa mode: {}", c.e3_sa_mode == SaMode::POOL ? "pool" : "concat"));
    out.push_back(fmt::format("config hash: {}", c.hash()));
    return out;
}

RunResult render(const ExperimentConfig& c, const fs::path& run_dir, const std::vector<TableSpec>& specs) {
    RunResult result;
    result.run_dir = run_dir;
    for (const auto& spec : specs) {
        ReportTable table;
        table.title = spec.title;
        for (auto d : spec.rows) table.rows.emplace_back(to_string(d));
        table.columns = spec.columns;
        for (const auto& cell : spec.cells) {
            const auto path = run_dir / "scores" / spec.slug /
                              fmt::format("{}__{}.json", to_string(cell.eval), spec.columns[cell.col]);
            auto sheet = in_stage("report", path.string(), [&] {
                if (!fs::exists(path)) throw LoadError("missing score sheet");
                return ScoreSheet::from_json(read_json(path));
            });
            table.cells.emplace(std::pair{cell.row, cell.col}, std::move(sheet));
        }
        result.tables.push_back(std::move(table));
    }
    result.report = render_report(result.tables, footer_lines(c));
    in_stage("report", run_dir.string(), [&] {
        io::write_file_atomic(run_dir / "report.txt", result.report.text);
        io::write_file_atomic(run_dir / "report.csv", result.report.csv);
        write_json(run_dir / "significance.json", result.report.significance);
        return 0;
    });
    return result;
}

RunResult Pipeline::heatmap() {
    json cells = json::array();
    for (const auto& need : feature_needs(cfg_)) {
        std::vector<FeatureMatrix> parts;
        for (int k = 0; k < kFolds; ++k) parts.push_back(load_features(need.extractor, need.source, need.eval, 0, 0, k));
        const auto n0 = static_cast<double>(parts[0].rows());
        const auto n1 = static_cast<double>(parts[1].rows());
        const Eigen::VectorXd avg =
            (average_feature_vector(parts[0]) * n0 + average_feature_vector(parts[1]) * n1) / (n0 + n1);
        cells.push_back({{"extractor", to_string(need.extractor)},
                         {"train_corpus", to_string(need.source)},
                         {"eval_corpus", to_string(need.eval)},
                         {"values", std::vector<double>(avg.data(), avg.data() + avg.size())}});
    }
    write_json(run_ / "heatmap" / "averages.json", json{{"repetition", 0}, {"train_fold", 0}, {"cells", cells}});
    RunResult result;
    result.run_dir = run_;
    const auto files = emit_heatmaps(run_);
    std::string text = fmt::format("heatmap grids (repetition 0, training fold 0), {} cells\n", files.size());
    for (const auto& f : files) text += f.filename().string() + "\n";
    result.report.text = text;
    io::write_file_atomic(run_ / "report.txt", text);
    return result;
}

RunResult Pipeline::execute() {
    fs::create_directories(run_);
    write_json(run_ / "config.json", cfg_.canonical());
    prepare_inputs();
    extract_features();

    if (cfg_.experiment == ExperimentKind::HEATMAP) return heatmap();

    const auto tables = plan_tables(cfg_);
    struct Task {
        const TableSpec* table;
        const CellSpec* cell;
        int r;
        int t;
    };
    std::vector<Task> tasks;
    std::size_t cached = 0;
    for (const auto& table : tables)
        for (const auto& cell : table.cells) {
            if (fs::exists(sheet_path(table, cell))) {
                ++cached;
                continue;
            }
            for (int r = 0; r < kRepetitions; ++r)
                for (int t = 0; t < kFolds; ++t) tasks.push_back({&table, &cell, r, t});
        }
    spdlog::info("train: {} tasks, {} cells replayed", tasks.size(), cached);
    io::parallel_for(tasks.size(), io::worker_count(),
                     [&](std::size_t i) { run_task(*tasks[i].table, *tasks[i].cell, tasks[i].r, tasks[i].t); });

    for (const auto& table : tables)
        for (const auto& cell : table.cells) {
            const auto path = sheet_path(table, cell);
            if (fs::exists(path)) continue;
            in_stage("evaluate", path.string(), [&] {
                ScoreSheet sheet;
                sheet.method = table.columns[cell.col];
                for (int r = 0; r < kRepetitions; ++r)
                    for (int t = 0; t < kFolds; ++t)
                        sheet.scores[r][t] = read_json(task_score_path(table, cell, r, t)).at("score").get<double>();
                write_json(path, sheet.to_json());
                return 0;
            });
        }

    auto result = render(cfg_, run_, tables);
    result.replayed = tasks.empty();
    return result;
}

} // namespace

nlohmann::json ExperimentConfig::canonical() const {
    json j;
    j["experiment"] = to_string(experiment);
    j["datasets"] = json::array();
    for (auto d : datasets) j["datasets"].push_back(to_string(d));
    j["attribute"] = to_string(attribute);
    j["extractors"] = json::array();
    for (auto x : extractors) j["extractors"].push_back(to_string(x));
    j["integration"] = json::array();
    for (auto i : integration) j["integration"].push_back(to_string(i));
    j["seed"] = seed;
    j["target_dim"] = target_dim;
    j["paths"] = {{"workspace", paths.workspace.string()},
                  {"esp_fake_csv", paths.esp_fake_csv.string()},
                  {"kaggle_csv", paths.kaggle_csv.string()},
                  {"embeddings", paths.embeddings.string()},
                  {"output", paths.output.string()}};
    j["mlp"] = mlp.to_json();
    j["lda"] = lda_to_json(lda);
    j["tfidf"] = {{"max_features", tfidf_features}};
    j["e3_sa_mode"] = e3_sa_mode == SaMode::POOL ? "pool" : "concat";
    return j;
}

std::string ExperimentConfig::hash() const {
    auto j = canonical();
    auto rel = [&](const fs::path& p) { return p.empty() ? std::string{} : p.lexically_relative(paths.workspace).generic_string(); };
    j["paths"] = {{"esp_fake_csv", rel(paths.esp_fake_csv)},
                  {"kaggle_csv", rel(paths.kaggle_csv)},
                  {"embeddings", rel(paths.embeddings)}};
    return io::hex64(io::fnv1a64(j.dump()));
}

fs::path ExperimentConfig::run_dir() const { return paths.output / ("run-" + hash()); }

std::vector<CorpusName> required_corpora(const ExperimentConfig& c) {
    std::set<CorpusName> s;
    for (const auto& need : feature_needs(c)) {
        s.insert(need.eval);
        s.insert(need.source);
    }
    if (s.contains(CorpusName::MIXED)) {
        s.insert(CorpusName::ESP_FAKE);
        s.insert(CorpusName::KAGGLE);
    }
    return {s.begin(), s.end()};
}

std::vector<std::string> validate(const json& config, const fs::path& base_dir) {
    auto parsed = parse_impl(config, base_dir);
    if (!parsed.config) return parsed.problems;
    const auto& c = *parsed.config;
    auto& problems = parsed.problems;
    const auto corpora = required_corpora(c);
    auto need_file = [&](CorpusName name, const fs::path& p, const char* key) {
        if (std::find(corpora.begin(), corpora.end(), name) == corpora.end()) return;
        if (p.empty()) {
            problems.push_back(fmt::format("paths.{}: required for corpus {}", key, to_string(name)));
        } else if (!fs::is_regular_file(p)) {
            problems.push_back(fmt::format("missing file: {}", p.string()));
        }
    };
    need_file(CorpusName::ESP_FAKE, c.paths.esp_fake_csv, "esp_fake_csv");
    need_file(CorpusName::KAGGLE, c.paths.kaggle_csv, "kaggle_csv");

    bool transformers = false;
    std::size_t missing = 0;
    for (const auto& need : feature_needs(c)) {
        if (!is_transformer(need.extractor)) continue;
        transformers = true;
        if (c.paths.embeddings.empty()) continue;
        for (auto [r, t] : needed_rounds(c))
            for (int k = 0; k < kFolds; ++k) {
                const auto p = embedding_path(c.paths.embeddings, need.extractor, c.attribute, need.source,
                                              need.eval, r, t, k);
                if (fs::is_regular_file(p)) continue;
                if (++missing <= 10) problems.push_back(fmt::format("missing file: {}", p.string()));
            }
    }
    if (missing > 10) problems.push_back(fmt::format("... {} embedding files missing in total", missing));
    if (transformers && c.paths.embeddings.empty())
        problems.emplace_back("paths.embeddings: required for transformer extractors");
    return problems;
}

ExperimentConfig parse_config(const json& config, const fs::path& base_dir) {
    auto parsed = parse_impl(config, base_dir);
    if (!parsed.config) {
        std::string msg = "invalid configuration:";
        for (const auto& p : parsed.problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return *parsed.config;
}

ExperimentConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return parse_config(j, fs::absolute(path).parent_path());
}

const Corpus& CorpusSet::get(CorpusName name) const {
    const std::optional<Corpus>* slot = name == CorpusName::ESP_FAKE ? &esp_fake
                                        : name == CorpusName::KAGGLE ? &kaggle
                                                                     : &mixed;
    if (!slot->has_value()) throw ConfigError(fmt::format("corpus {} was not loaded", to_string(name)));
    return **slot;
}

CorpusSet load_corpora(const ExperimentConfig& config, const std::vector<CorpusName>& needed) {
    CorpusSet set;
    auto wanted = [&](CorpusName n) { return std::find(needed.begin(), needed.end(), n) != needed.end(); };
    auto report_json = [](const IngestReport& r) {
        return json{{"rows_read", r.rows_read}, {"kept", r.kept}, {"dropped_rows", r.dropped_rows}};
    };
    if (wanted(CorpusName::ESP_FAKE) || wanted(CorpusName::MIXED)) {
        auto in = ingest(config.paths.esp_fake_csv, CsvSource::ESP_FAKE_CSV);
        set.ingest_report["esp_fake"] = report_json(in.report);
        set.esp_fake = normalize(std::move(in.corpus));
    }
    if (wanted(CorpusName::KAGGLE) || wanted(CorpusName::MIXED)) {
        auto in = ingest(config.paths.kaggle_csv, CsvSource::KAGGLE_CSV);
        set.ingest_report["kaggle"] = report_json(in.report);
        set.kaggle = normalize(std::move(in.corpus));
    }
    if (wanted(CorpusName::MIXED)) {
        set.mixed = mix(*set.esp_fake, *set.kaggle);
        set.ingest_report["mixed"] = {{"documents", set.mixed->size()},
                                      {"language_imbalance_ratio", language_imbalance_ratio(*set.mixed)}};
    }
    return set;
}

Label scored_label(const Decision& d) {
    if (d.support.scope != SupportScope::EXTENDED) return d.label;
    const auto m = marginalize(d.support);
    return m.values[1] > m.values[0] ? Label::FAKE : Label::LEGIT;
}

fs::path embedding_path(const fs::path& root, ExtractorId extractor, Attribute attribute, CorpusName train,
                        CorpusName eval, int repetition, int train_fold, int fold) {
    return root / std::string(to_string(extractor)) / std::string(to_string(attribute)) /
           fmt::format("{}__{}", to_string(train), to_string(eval)) /
           fmt::format("r{}_t{}_k{}.fmx", repetition, train_fold, fold);
}

RunResult run(const ExperimentConfig& config) {
    const auto problems = validate(config.canonical(), config.paths.workspace);
    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    Pipeline pipeline(config, config.run_dir());
    return pipeline.execute();
}

RunResult report_run(const fs::path& run_dir) {
    const auto config_path = run_dir / "config.json";
    const auto cfg = in_stage("report", config_path.string(), [&] { return parse_config(read_json(config_path), run_dir); });
    if (cfg.experiment == ExperimentKind::HEATMAP) {
        RunResult r;
        r.run_dir = run_dir;
        r.report.text = io::read_file(run_dir / "report.txt");
        return r;
    }
    return render(cfg, run_dir, plan_tables(cfg));
}

std::vector<fs::path> emit_heatmaps(const fs::path& run_dir) {
    const auto src = run_dir / "heatmap" / "averages.json";
    return in_stage("heatmap", src.string(), [&] {
        if (!fs::exists(src)) throw LoadError("no heatmap averages; run a HEATMAP experiment first");
        const auto j = read_json(src);
        std::vector<fs::path> out;
        for (const auto& cell : j.at("cells")) {
            const auto path = run_dir / "heatmap" /
                              fmt::format("heatmap_{}_{}_{}.csv", cell.at("extractor").get<std::string>(),
                                          cell.at("train_corpus").get<std::string>(),
                                          cell.at("eval_corpus").get<std::string>());
            std::string text;
            const auto values = cell.at("values").get<std::vector<double>>();
            for (std::size_t i = 0; i < values.size(); ++i) text += fmt::format("{}{:.9g}", i ? "," : "", values[i]);
            text += "\n";
            io::write_file_atomic(path, text);
            out.push_back(path);
        }
        return out;
    });
}

fs::path write_embedding_manifest(const ExperimentConfig& config) {
    const auto needed = required_corpora(config);
    const auto corpora = in_stage("ingest", "corpora", [&] { return load_corpora(config, needed); });
    const auto dir = config.paths.output / "plans";
    std::map<CorpusName, FoldPlan> plans;
    for (auto name : needed) {
        plans.emplace(name, make_fold_plan(corpora.get(name), config.seed));
        write_json(dir / fmt::format("foldplan_{}.json", to_string(name)), to_json(plans.at(name), corpora.get(name)));
    }
    json entries = json::array();
    for (const auto& need : feature_needs(config)) {
        if (!is_transformer(need.extractor)) continue;
        const auto& corpus = corpora.get(need.eval);
        for (auto [r, t] : needed_rounds(config))
            for (int k = 0; k < kFolds; ++k) {
                const auto& idx = plans.at(need.eval).fold(r, k);
                const auto rel = embedding_path({}, need.extractor, config.attribute, need.source, need.eval, r, t, k);
                entries.push_back({{"path", rel.generic_string()},
                                   {"extractor", to_string(need.extractor)},
                                   {"train_corpus", to_string(need.source)},
                                   {"eval_corpus", to_string(need.eval)},
                                   {"attribute", to_string(config.attribute)},
                                   {"repetition", r},
                                   {"train_fold", t},
                                   {"fold", k},
                                   {"rows", idx.size()},
                                   {"row_ids", id_checksum(corpus, idx)},
                                   {"fine_tune_plan", fmt::format("foldplan_{}.json", to_string(need.source))},
                                   {"eval_plan", fmt::format("foldplan_{}.json", to_string(need.eval))}});
            }
    }
    const auto path = dir / "embedding_manifest.json";
    write_json(path, json{{"format", "FMX1"}, {"seed", config.seed}, {"entries", entries}});
    return path;
}

} // namespace fnd
