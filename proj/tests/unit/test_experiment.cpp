#include "fnd/error.hpp"
#include "fnd/experiment.hpp"
#include "fnd/io.hpp"
#include "fnd/synthetic.hpp"

#include <doctest.h>

#include <algorithm>

using namespace fnd;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path workspace(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "fnd_unit_experiment" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    synthetic::CorpusSpec spec;
    spec.esp_fake_docs = 60;
    spec.kaggle_docs = 80;
    spec.signal = 0.3;
    synthetic::write_dataset(dir / "data", spec);
    return dir;
}

json small_config(const std::string& experiment) {
    return {{"experiment", experiment},
            {"datasets", {"esp_fake"}},
            {"extractors", {"tfidf"}},
            {"seed", 5},
            {"target_dim", 20},
            {"paths",
             {{"esp_fake_csv", "data/esp_fake.csv"},
              {"kaggle_csv", "data/kaggle.csv"},
              {"embeddings", "emb"},
              {"output", "runs"}}},
            {"mlp", {{"hidden", {8}}, {"max_epochs", 15}, {"learning_rate", 0.01}}},
            {"lda", {{"topics", 4}, {"passes", 2}, {"min_df", 3}}},
            {"tfidf", {{"max_features", 30}}}};
}

bool has_problem(const std::vector<std::string>& problems, const std::string& needle) {
    return std::any_of(problems.begin(), problems.end(),
                       [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

} // namespace

TEST_CASE("validate reports enum, availability and file problems") {
    const auto ws = workspace("validate");
    CHECK(validate(small_config("E1"), ws).empty());

    auto beto = small_config("E1");
    beto["datasets"] = {"kaggle"};
    beto["extractors"] = {"beto"};
    CHECK(has_problem(validate(beto, ws), "extractor unavailable for corpus"));

    auto body = small_config("E1");
    body["attribute"] = "body";
    CHECK(has_problem(validate(body, ws), "attribute"));

    auto bad = small_config("E7");
    bad["colour"] = 1;
    const auto p = validate(bad, ws);
    CHECK(has_problem(p, "experiment"));
    CHECK(has_problem(p, "unknown key \"colour\""));

    auto missing = small_config("E1");
    missing["paths"]["esp_fake_csv"] = "nope.csv";
    CHECK(has_problem(validate(missing, ws), "missing file"));

    auto emb = small_config("E1");
    emb["extractors"] = {"bert_mult"};
    CHECK(has_problem(validate(emb, ws), "missing file"));

    CHECK(has_problem(validate(json::array(), ws), "object"));
    CHECK_THROWS_AS(parse_config(bad, ws), ConfigError);
}

TEST_CASE("config hash identifies equivalent configurations") {
    const auto ws = workspace("hash");
    auto a = small_config("E1");
    auto b = a;
    b["attribute"] = "text";
    b["integration"] = {"SIS_SA"};
    CHECK(parse_config(a, ws).hash() == parse_config(b, ws).hash());
    b["seed"] = 6;
    CHECK(parse_config(a, ws).hash() != parse_config(b, ws).hash());
    const auto c = parse_config(a, ws);
    CHECK(c.run_dir().parent_path() == (ws / "runs").lexically_normal());
    CHECK(c.mlp.hidden == std::vector<int>{8});
    CHECK(c.lda.topics == 4);
}

TEST_CASE("embedding path convention") {
    const auto p = embedding_path("/e", ExtractorId::BERT_SPA, Attribute::TITLE, CorpusName::MIXED,
                                  CorpusName::ESP_FAKE, 3, 1, 0);
    CHECK(p.generic_string() == "/e/beto/title/mixed__esp_fake/r3_t1_k0.fmx");
}

TEST_CASE("E1 run persists artifacts and replays identically") {
    const auto ws = workspace("e1");
    auto j = small_config("E1");
    j["datasets"] = {"esp_fake", "mixed"};
    j["extractors"] = {"tfidf", "lda"};
    const auto cfg = parse_config(j, ws);
    const auto first = run(cfg);
    CHECK_FALSE(first.replayed);
    REQUIRE(first.tables.size() == 1);
    const auto& t = first.tables[0];
    CHECK(t.cells.size() == 4);
    for (const auto& [_, sheet] : t.cells)
        for (const auto& rep : sheet.scores)
            for (double v : rep) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
    const auto dir = first.run_dir;
    for (const char* f : {"config.json", "inputs.json", "ingest_report.json", "report.txt", "report.csv",
                          "significance.json", "plans/foldplan_esp_fake.json", "plans/foldplan_mixed.json"})
        CHECK(fs::exists(dir / f));
    CHECK(fs::exists(dir / "features/tfidf/text/esp_fake__esp_fake/r4_t1_k0.fmx"));
    CHECK(fs::exists(dir / "models/e1_text/mixed__lda/r0_t0/pool.json"));
    CHECK(fs::exists(dir / "scores/e1_text/esp_fake__tfidf.json"));

    const auto text = io::read_file(dir / "report.txt");
    const auto again = run(cfg);
    CHECK(again.replayed);
    CHECK(io::read_file(dir / "report.txt") == text);
    CHECK(report_run(dir).report.text == text);
}

TEST_CASE("two fresh runs produce byte-identical reports") {
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
        const auto ws = workspace("fresh" + std::to_string(i));
        auto j = small_config("E2");
        j["extractors"] = {"tfidf", "lda"};
        j["paths"]["workspace"] = ws.string();
        j["paths"]["output"] = "runs";
        const auto cfg = parse_config(j, "/");
        const auto r = run(cfg);
        reports[i] = io::read_file(r.run_dir / "report.txt") + io::read_file(r.run_dir / "report.csv") +
                     io::read_file(r.run_dir / "significance.json");
    }
    CHECK(reports[0] == reports[1]);
}

TEST_CASE("E3 and E4 run over synthetic embeddings") {
    const auto ws = workspace("deep");
    auto j = small_config("E3");
    j["datasets"] = {"kaggle", "mixed"};
    j["extractors"] = {"tfidf", "bert_mult", "bert_eng"};
    j["integration"] = {"sa", "pca"};
    const auto cfg = parse_config(j, ws);
    synthetic::EmbeddingSpec es;
    es.width = 24;
    CHECK(synthetic::write_embeddings(cfg, es) > 0);
    CHECK(validate(j, ws).empty());
    const auto r = run(cfg);
    REQUIRE(r.tables.size() == 2);
    CHECK(r.tables[0].columns == std::vector<std::string>{"tfidf", "bert_mult", "bert_eng"});
    CHECK(r.tables[0].cells.size() == 6);
    const auto pool = json::parse(io::read_file(r.run_dir / "models/e3_sa_text/kaggle__bert_eng/r0_t0/pool.json"));
    CHECK(pool.at("members").size() == 2);

    auto concat = j;
    concat["e3_sa_mode"] = "concat";
    const auto rc = run(parse_config(concat, ws));
    const auto single = json::parse(io::read_file(rc.run_dir / "models/e3_sa_text/kaggle__tfidf/r0_t0/pool.json"));
    CHECK(single.at("members").size() == 1);

    auto e4 = j;
    e4["experiment"] = "E4";
    const auto r4 = run(parse_config(e4, ws));
    CHECK(r4.tables[0].columns == std::vector<std::string>{"sa", "pca"});
    const auto p4 = json::parse(io::read_file(r4.run_dir / "models/e4_text/mixed__sa/r2_t1/pool.json"));
    CHECK(p4.at("members").size() == 3 + 3 + 2);
    CHECK_FALSE(p4.at("homogeneous").get<bool>());
}

TEST_CASE("heatmap grid") {
    const auto ws = workspace("heatmap");
    auto j = small_config("HEATMAP");
    j.erase("datasets");
    j["extractors"] = {"lda"};
    const auto r = run(parse_config(j, ws));
    const auto files = emit_heatmaps(r.run_dir);
    CHECK(files.size() == 9);
    CHECK(fs::exists(r.run_dir / "heatmap/heatmap_lda_kaggle_esp_fake.csv"));
    const auto line = io::read_file(r.run_dir / "heatmap/heatmap_lda_mixed_mixed.csv");
    double sum = 0.0;
    std::size_t pos = 0;
    while (pos < line.size()) {
        std::size_t used = 0;
        sum += std::stod(line.substr(pos), &used);
        pos += used + 1;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("stage failures name the stage and artifact") {
    const auto ws = workspace("failures");
    io::write_file_atomic(ws / "data/tiny.csv", "Id,Headline,Text,Category\n1,a,b,Fake\n");
    auto tiny = small_config("E1");
    tiny["paths"]["esp_fake_csv"] = "data/tiny.csv";
    try {
        run(parse_config(tiny, ws));
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "split");
        CHECK(std::string(e.what()).find("stratum with < 2 documents") != std::string::npos);
    }

    auto deep = small_config("E1");
    deep["extractors"] = {"bert_mult"};
    const auto cfg = parse_config(deep, ws);
    synthetic::EmbeddingSpec es;
    es.width = 8;
    synthetic::write_embeddings(cfg, es);
    const auto victim = embedding_path(cfg.paths.embeddings, ExtractorId::BERT_MULT, Attribute::TEXT,
                                       CorpusName::ESP_FAKE, CorpusName::ESP_FAKE, 1, 0, 1);
    auto m = load_matrix(victim);
    m.meta.fold = 0;
    save_matrix(m, victim);
    try {
        run(cfg);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "load");
        CHECK(e.artifact() == victim.string());
        CHECK(std::string(e.what()).find("provenance mismatch") != std::string::npos);
    }
    CHECK(fs::exists(cfg.run_dir() / "plans/foldplan_esp_fake.json"));
}

TEST_CASE("manifest lists every embedding slot with its fold identity") {
    const auto ws = workspace("manifest");
    auto j = small_config("E2");
    j["datasets"] = {"esp_fake", "kaggle"};
    j["extractors"] = {"bert_mult", "beto"};
    const auto cfg = parse_config(j, ws);
    const auto path = write_embedding_manifest(cfg);
    const auto m = json::parse(io::read_file(path));
    // bert_mult on both corpora, beto only on esp_fake; 10 (r, t) pairs x 2 folds each.
    CHECK(m.at("entries").size() == 3 * 20);
    for (const auto& e : m.at("entries")) {
        CHECK(e.at("rows").get<int>() > 0);
        CHECK(e.at("row_ids").is_string());
    }
}

TEST_CASE("scored label marginalizes extended supports") {
    Decision d;
    d.label = Label::LEGIT;
    d.language = Language::ENG;
    d.support.scope = SupportScope::EXTENDED;
    d.support.values = {0.3, 0.2, 0.05, 0.45};
    CHECK(scored_label(d) == Label::FAKE);
    d.support.scope = SupportScope::BASE;
    d.support.values = {0.6, 0.4};
    CHECK(scored_label(d) == Label::LEGIT);
}
