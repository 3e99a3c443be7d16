#include "fnd/error.hpp"
#include "fnd/experiment.hpp"
#include "fnd/io.hpp"
#include "fnd/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kStageFailed = 3;

int cmd_validate(const fs::path& config_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(fnd::io::read_file(config_path));
    } catch (const std::exception& e) {
        std::cerr << config_path.string() << ": " << e.what() << "\n";
        return kInvalid;
    }
    const auto problems = fnd::validate(j, fs::absolute(config_path).parent_path());
    for (const auto& p : problems) std::cout << "problem: " << p << "\n";
    if (problems.empty()) std::cout << "ok\n";
    return problems.empty() ? kOk : kInvalid;
}

int cmd_run(const fs::path& config_path) {
    const auto config = fnd::load_config(config_path);
    const auto result = fnd::run(config);
    std::cout << result.report.text;
    std::cout << "run directory: " << result.run_dir.string() << (result.replayed ? " (replayed)" : "") << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilingual fake-news detection experiments"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run an experiment configuration");
    run->add_option("config", config_path, "Configuration JSON")->required();

    auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
    validate->add_option("config", config_path, "Configuration JSON")->required();

    std::string run_dir;
    auto* report = app.add_subcommand("report", "Re-render the report of a run directory");
    report->add_option("run-dir", run_dir, "Run directory")->required();

    auto* heatmap = app.add_subcommand("heatmap", "Write heatmap CSVs of a HEATMAP run");
    heatmap->add_option("run-dir", run_dir, "Run directory")->required();

    auto* manifest = app.add_subcommand("manifest", "Write fold plans and the expected embedding files");
    manifest->add_option("config", config_path, "Configuration JSON")->required();

    std::string synth_out;
    fnd::synthetic::CorpusSpec corpus_spec;
    fnd::synthetic::EmbeddingSpec embedding_spec;
    std::string embed_config;
    auto* synth = app.add_subcommand("synth", "Write synthetic corpora (and embeddings for a configuration)");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--seed", corpus_spec.seed, "Generator seed");
    synth->add_option("--esp-docs", corpus_spec.esp_fake_docs, "Spanish corpus size");
    synth->add_option("--kaggle-docs", corpus_spec.kaggle_docs, "English corpus size");
    synth->add_option("--signal", corpus_spec.signal, "Class word probability");
    synth->add_option("--embeddings-for", embed_config,
                      "Also write embedding fixtures for the transformer slots of this configuration");
    synth->add_option("--width", embedding_spec.width, "Embedding width");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("fnd"));
    spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

    try {
        if (*validate) return cmd_validate(config_path);
        if (*run) return cmd_run(config_path);
        if (*report) {
            std::cout << fnd::report_run(run_dir).report.text;
            return kOk;
        }
        if (*heatmap) {
            for (const auto& p : fnd::emit_heatmaps(run_dir)) std::cout << p.string() << "\n";
            return kOk;
        }
        if (*manifest) {
            std::cout << fnd::write_embedding_manifest(fnd::load_config(config_path)).string() << "\n";
            return kOk;
        }
        if (*synth) {
            const auto paths = fnd::synthetic::write_dataset(synth_out, corpus_spec);
            std::cout << paths.esp_fake_csv.string() << "\n" << paths.kaggle_csv.string() << "\n";
            if (!embed_config.empty()) {
                embedding_spec.seed = corpus_spec.seed;
                const auto n = fnd::synthetic::write_embeddings(fnd::load_config(embed_config), embedding_spec);
                std::cout << n << " embedding files\n";
            }
            return kOk;
        }
    } catch (const fnd::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kInvalid;
    } catch (const fnd::StageError& e) {
        std::cerr << e.what() << "\n";
        return kStageFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kStageFailed;
    }
    return kOk;
}
