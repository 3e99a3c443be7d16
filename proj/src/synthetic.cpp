#include "fnd/synthetic.hpp"

#include "fnd/csv.hpp"
#include "fnd/error.hpp"
#include "fnd/io.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace fnd::synthetic {
namespace {

constexpr std::size_t kVocabulary = 400;
constexpr std::size_t kClassWords = 30;

constexpr std::array<const char*, 12> kEngSyllables{"ka", "lo", "mi", "ter", "son", "bar",
                                                    "dex", "ful", "ing", "pro", "win", "ship"};
constexpr std::array<const char*, 12> kSpaSyllables{"ción", "ña", "que", "llo", "rá", "mos",
                                                    "ero", "cha", "gua", "ía", "tar", "pé"};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

class Lexicon {
public:
    explicit Lexicon(Language lang) {
        const auto& syl = lang == Language::ENG ? kEngSyllables : kSpaSyllables;
        for (std::size_t i = 0; i < kVocabulary; ++i) {
            std::string w;
            std::size_t v = i + syl.size();
            while (v > 0) {
                w += syl[v % syl.size()];
                v /= syl.size();
            }
            words_.push_back(w);
        }
        double total = 0.0;
        for (std::size_t i = 0; i < kVocabulary; ++i) {
            total += 1.0 / (static_cast<double>(i) + 5.0);
            cumulative_.push_back(total);
        }
        for (auto& c : cumulative_) c /= total;
    }

    const std::string& background(std::mt19937_64& rng) const {
        const double u = uniform01(rng);
        const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
        return words_[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), kVocabulary - 1)];
    }

    // Class words sit in the mid-frequency band so they survive document-frequency filters.
    const std::string& class_word(Label label, std::mt19937_64& rng) const {
        const std::size_t offset = label == Label::FAKE ? 20 : 20 + kClassWords;
        return words_[offset + io::uniform_index(rng, kClassWords)];
    }

private:
    std::vector<std::string> words_;
    std::vector<double> cumulative_;
};

struct Row {
    std::string id;
    std::string title;
    std::string text;
    Label label;
};

std::string sentence(const Lexicon& lex, Label label, int tokens, double signal, std::mt19937_64& rng) {
    std::string out;
    for (int i = 0; i < tokens; ++i) {
        const auto& w = uniform01(rng) < signal ? lex.class_word(label, rng) : lex.background(rng);
        if (i > 0) out += (i % 11 == 0) ? ". " : " ";
        if (i == 0 || i % 11 == 0) {
            // Capitalize the ASCII lead so lowercasing is exercised.
            std::string cap = w;
            if (!cap.empty() && cap[0] >= 'a' && cap[0] <= 'z') cap[0] = static_cast<char>(cap[0] - 32);
            out += cap;
        } else {
            out += w;
        }
    }
    return out + ".";
}

std::vector<Row> make_rows(const CorpusSpec& spec, Language lang, std::size_t n, const char* prefix) {
    const Lexicon lex(lang);
    std::mt19937_64 rng(io::derive_seed(spec.seed, {static_cast<std::uint64_t>(lang)}));
    const auto n_fake = static_cast<std::size_t>(std::llround(spec.fake_fraction * static_cast<double>(n)));
    std::vector<Row> rows;
    for (std::size_t i = 0; i < n; ++i) {
        Row r;
        r.id = fmt::format("{}{}", prefix, i);
        r.label = i < n_fake ? Label::FAKE : Label::LEGIT;
        const int span = std::max(spec.max_text_tokens - spec.min_text_tokens, 0);
        const int len = spec.min_text_tokens + static_cast<int>(io::uniform_index(rng, static_cast<std::uint64_t>(span) + 1));
        r.title = sentence(lex, r.label, 6 + static_cast<int>(io::uniform_index(rng, 5)), spec.signal * 1.5, rng);
        r.title.pop_back();
        r.text = sentence(lex, r.label, len, spec.signal, rng);
        rows.push_back(std::move(r));
    }
    io::shuffle(rows, rng);
    for (std::size_t i = 0; i < spec.empty_text_rows && i < rows.size(); ++i) rows[i * 7 % rows.size()].text.clear();
    return rows;
}

} // namespace

std::string esp_fake_csv(const CorpusSpec& spec) {
    std::string out = "Id,Headline,Text,Category\n";
    for (const auto& r : make_rows(spec, Language::SPA, spec.esp_fake_docs, "esp-")) {
        out += fmt::format("{},{},{},{}\n", r.id, csv::quote_field(r.title), csv::quote_field(r.text),
                           r.label == Label::FAKE ? "Fake" : "True");
    }
    return out;
}

std::string kaggle_csv(const CorpusSpec& spec) {
    std::string out = "id,title,text,label\n";
    for (const auto& r : make_rows(spec, Language::ENG, spec.kaggle_docs, "")) {
        out += fmt::format("{},{},{},{}\n", r.id, csv::quote_field(r.title), csv::quote_field(r.text),
                           r.label == Label::FAKE ? 1 : 0);
    }
    return out;
}

DatasetPaths write_dataset(const std::filesystem::path& dir, const CorpusSpec& spec) {
    DatasetPaths p{dir / "esp_fake.csv", dir / "kaggle.csv"};
    io::write_file_atomic(p.esp_fake_csv, esp_fake_csv(spec));
    io::write_file_atomic(p.kaggle_csv, kaggle_csv(spec));
    return p;
}

std::size_t write_embeddings(const ExperimentConfig& config, const EmbeddingSpec& spec) {
    if (config.paths.embeddings.empty()) throw ConfigError("paths.embeddings is not set");
    if (spec.width < 1) throw ConfigError("embedding width must be positive");
    const auto manifest_path = write_embedding_manifest(config);
    const auto manifest = nlohmann::json::parse(io::read_file(manifest_path));
    const auto corpora = load_corpora(config, required_corpora(config));
    std::map<CorpusName, FoldPlan> plans;

    std::size_t written = 0;
    for (const auto& e : manifest.at("entries")) {
        const auto x = *parse_extractor(e.at("extractor").get<std::string>());
        const auto s = *parse_corpus_name(e.at("train_corpus").get<std::string>());
        const auto d = *parse_corpus_name(e.at("eval_corpus").get<std::string>());
        const int r = e.at("repetition");
        const int t = e.at("train_fold");
        const int k = e.at("fold");
        const auto& corpus = corpora.get(d);
        if (!plans.contains(d)) plans.emplace(d, make_fold_plan(corpus, config.seed));
        const auto& idx = plans.at(d).fold(r, k);

        const auto model_seed = io::derive_seed(spec.seed, {static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(s),
                                                            static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(t)});
        std::mt19937_64 dir_rng(model_seed);
        Eigen::VectorXd class_dir(spec.width);
        Eigen::VectorXd lang_dir(spec.width);
        for (int c = 0; c < spec.width; ++c) class_dir[c] = gaussian(dir_rng);
        for (int c = 0; c < spec.width; ++c) lang_dir[c] = gaussian(dir_rng);
        class_dir.normalize();
        lang_dir.normalize();
        const auto cov = extractor_coverage(x, s);

        FeatureMatrix m;
        m.values.resize(static_cast<Eigen::Index>(idx.size()), spec.width);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto& doc = corpus.documents[idx[i]];
            const auto id = doc.id.substr(doc.id.find(':') == std::string::npos ? 0 : doc.id.find(':') + 1);
            std::mt19937_64 rng(io::derive_seed(model_seed, {io::fnv1a64(id)}));
            const bool covered = cov.is_multi() || cov.language == doc.language;
            const double sign = doc.label == Label::FAKE ? 1.0 : -1.0;
            const double strength = spec.signal * std::sqrt(static_cast<double>(spec.width)) * (covered ? 1.0 : 0.2);
            for (int c = 0; c < spec.width; ++c) {
                const double v = gaussian(rng) + sign * strength * class_dir[c] +
                                 (doc.language == Language::SPA ? 2.0 : -2.0) * lang_dir[c];
                m.values(static_cast<Eigen::Index>(i), c) = static_cast<float>(v);
            }
        }
        m.meta.extractor = std::string(to_string(x));
        m.meta.train_corpus = std::string(to_string(s));
        m.meta.eval_corpus = std::string(to_string(d));
        m.meta.attribute = std::string(to_string(config.attribute));
        m.meta.repetition = r;
        m.meta.fold = k;
        m.meta.extra["train_fold"] = t;
        m.meta.extra["row_ids"] = e.at("row_ids");
        save_matrix(m, config.paths.embeddings / e.at("path").get<std::string>());
        ++written;
    }
    return written;
}

} // namespace fnd::synthetic
