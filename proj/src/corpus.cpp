#include "fnd/corpus.hpp"

#include "fnd/csv.hpp"
#include "fnd/error.hpp"
#include "fnd/io.hpp"
#include "fnd/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <random>
#include <unordered_set>

namespace fnd {

std::size_t Corpus::count(Label l) const {
    return static_cast<std::size_t>(std::count_if(documents.begin(), documents.end(),
                                                  [l](const Document& d) { return d.label == l; }));
}

std::size_t Corpus::count(Language l) const {
    return static_cast<std::size_t>(std::count_if(
        documents.begin(), documents.end(), [l](const Document& d) { return d.language == l; }));
}

std::vector<int> Corpus::labels() const {
    std::vector<int> y;
    y.reserve(documents.size());
    for (const auto& d : documents) y.push_back(static_cast<int>(d.label));
    return y;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
    return out;
}

struct Layout {
    const char* id;
    const char* title;
    const char* text;
    const char* label;
    CorpusName name;
    Language language;
};

constexpr Layout kEspLayout{"Id", "Headline", "Text", "Category", CorpusName::ESP_FAKE,
                            Language::SPA};
constexpr Layout kKaggleLayout{"id", "title", "text", "label", CorpusName::KAGGLE, Language::ENG};

Label parse_label(std::string_view raw, CsvSource source, std::size_t row) {
    const auto token = lower_ascii(trim(raw));
    if (source == CsvSource::ESP_FAKE_CSV) {
        if (token == "fake") return Label::FAKE;
        if (token == "true") return Label::LEGIT;
    } else {
        if (token == "1") return Label::FAKE;
        if (token == "0") return Label::LEGIT;
    }
    throw ValidationError("row " + std::to_string(row) + ": unknown label token '" +
                          std::string(raw) + "'");
}

} // namespace

Ingested ingest_csv_text(std::string_view content, CsvSource source) {
    const Layout& layout = source == CsvSource::ESP_FAKE_CSV ? kEspLayout : kKaggleLayout;
    const auto table = csv::parse(content);

    auto require = [&](const char* name) {
        const int c = table.column(name);
        if (c < 0) throw ValidationError(std::string("missing column '") + name + "'");
        return static_cast<std::size_t>(c);
    };
    const auto title_col = require(layout.title);
    const auto text_col = require(layout.text);
    const auto label_col = require(layout.label);
    int id_col = table.column(layout.id);
    if (id_col < 0 && source == CsvSource::ESP_FAKE_CSV) id_col = table.column("ID");

    Ingested result;
    result.corpus.name = layout.name;
    result.report.rows_read = table.rows.size();
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t row_no = r + 1;
        const Label label = parse_label(row[label_col], source, row_no);
        if (trim(row[text_col]).empty()) {
            result.report.dropped_rows.push_back(row_no);
            continue;
        }
        Document doc;
        doc.id = id_col >= 0 ? std::string(trim(row[static_cast<std::size_t>(id_col)]))
                             : std::to_string(row_no);
        if (doc.id.empty()) doc.id = std::to_string(row_no);
        if (!seen.insert(doc.id).second)
            throw ValidationError("row " + std::to_string(row_no) + ": duplicate id '" + doc.id +
                                  "'");
        doc.language = layout.language;
        doc.title = row[title_col];
        doc.text = row[text_col];
        doc.label = label;
        result.corpus.documents.push_back(std::move(doc));
    }
    result.report.kept = result.corpus.size();
    if (result.corpus.documents.empty()) throw ValidationError("empty corpus");
    if (!result.report.dropped_rows.empty())
        spdlog::warn("{}: dropped {} rows with missing text", to_string(layout.name),
                     result.report.dropped_rows.size());
    return result;
}

Ingested ingest(const std::filesystem::path& path, CsvSource source) {
    if (!std::filesystem::exists(path)) throw IoError("corpus file not found: " + path.string());
    try {
        return ingest_csv_text(io::read_file(path), source);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

Corpus mix(const Corpus& a, const Corpus& b) {
    Corpus out;
    out.name = CorpusName::MIXED;
    out.documents.reserve(a.size() + b.size());
    std::unordered_set<std::string> seen;
    for (const Corpus* src : {&a, &b}) {
        const std::string prefix = std::string(to_string(src->name)) + ":";
        for (const auto& d : src->documents) {
            Document copy = d;
            copy.id = prefix + d.id;
            if (!seen.insert(copy.id).second)
                throw ValidationError("duplicate prefixed id '" + copy.id + "'");
            out.documents.push_back(std::move(copy));
        }
    }
    return out;
}

double language_imbalance_ratio(const Corpus& c) {
    const auto eng = static_cast<double>(c.count(Language::ENG));
    const auto spa = static_cast<double>(c.count(Language::SPA));
    const double lo = std::min(eng, spa);
    const double hi = std::max(eng, spa);
    if (lo == 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

Document normalize(Document doc) {
    doc.title = text::to_lower(doc.title);
    doc.text = text::to_lower(doc.text);
    return doc;
}

Corpus normalize(Corpus corpus) {
    for (auto& d : corpus.documents) d = normalize(std::move(d));
    return corpus;
}

FoldPlan make_fold_plan(const Corpus& corpus, std::uint64_t seed) {
    // stratum key -> indices in corpus order
    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& d = corpus.documents[i];
        strata[extended_index(d.language, d.label)].push_back(i);
    }
    if (strata.empty()) throw ValidationError("stratum with < 2 documents (empty corpus)");
    for (const auto& [key, members] : strata) {
        if (members.size() < 2)
            throw ValidationError("stratum with < 2 documents: " +
                                  std::string(to_string(static_cast<Language>(key / kNumClasses))) +
                                  "/" +
                                  std::string(to_string(static_cast<Label>(key % kNumClasses))));
    }

    FoldPlan plan;
    plan.corpus = corpus.name;
    plan.seed = seed;
    for (int r = 0; r < kRepetitions; ++r) {
        auto& folds = plan.repetitions[static_cast<std::size_t>(r)];
        for (const auto& [key, members] : strata) {
            std::mt19937_64 rng(io::derive_seed(seed + static_cast<std::uint64_t>(r),
                                                {static_cast<std::uint64_t>(key)}));
            auto shuffled = members;
            io::shuffle(shuffled, rng);
            std::size_t first = shuffled.size() / 2;
            if (shuffled.size() % 2 == 1 && (rng() & 1U)) ++first;
            folds[0].insert(folds[0].end(), shuffled.begin(),
                            shuffled.begin() + static_cast<std::ptrdiff_t>(first));
            folds[1].insert(folds[1].end(), shuffled.begin() + static_cast<std::ptrdiff_t>(first),
                            shuffled.end());
        }
        for (auto& f : folds) std::sort(f.begin(), f.end());
    }
    return plan;
}

nlohmann::json to_json(const FoldPlan& plan, const Corpus& corpus) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& folds : plan.repetitions) {
        nlohmann::json pair = nlohmann::json::array();
        for (const auto& f : folds) {
            nlohmann::json ids = nlohmann::json::array();
            for (auto i : f) ids.push_back(corpus.documents.at(i).id);
            pair.push_back(std::move(ids));
        }
        reps.push_back(std::move(pair));
    }
    return {{"corpus", to_string(plan.corpus)}, {"seed", plan.seed}, {"repetitions", reps}};
}

FoldPlan fold_plan_from_json(const nlohmann::json& j, const Corpus& corpus) {
    FoldPlan plan;
    try {
        const auto name = parse_corpus_name(j.at("corpus").get<std::string>());
        if (!name || *name != corpus.name)
            throw ValidationError("fold plan corpus does not match '" +
                                  std::string(to_string(corpus.name)) + "'");
        plan.corpus = *name;
        plan.seed = j.at("seed").get<std::uint64_t>();
        const auto& reps = j.at("repetitions");
        if (!reps.is_array() || reps.size() != kRepetitions)
            throw ValidationError("fold plan must have 5 repetitions");
        std::unordered_map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus.documents[i].id, i);
        for (std::size_t r = 0; r < kRepetitions; ++r) {
            if (reps[r].size() != kFolds) throw ValidationError("repetition must have 2 folds");
            for (std::size_t f = 0; f < kFolds; ++f) {
                for (const auto& id : reps[r][f]) {
                    const auto it = index.find(id.get<std::string>());
                    if (it == index.end())
                        throw ValidationError("fold plan references unknown id '" +
                                              id.get<std::string>() + "'");
                    plan.repetitions[r][f].push_back(it->second);
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("fold plan JSON: ") + e.what());
    }
    return plan;
}

std::string id_checksum(const Corpus& corpus, std::span<const std::size_t> indices) {
    std::string joined;
    for (auto i : indices) {
        joined += corpus.documents.at(i).id;
        joined.push_back('\n');
    }
    return io::hex64(io::fnv1a64(joined));
}

} // namespace fnd
