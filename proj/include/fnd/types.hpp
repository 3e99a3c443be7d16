#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace fnd {

enum class Language : std::uint8_t { ENG = 0, SPA = 1 };
enum class Label : std::uint8_t { LEGIT = 0, FAKE = 1 };
enum class CorpusName : std::uint8_t { ESP_FAKE, KAGGLE, MIXED };
enum class Attribute : std::uint8_t { TEXT, TITLE };
enum class ExtractorId : std::uint8_t { TFIDF, LDA, BERT_MULT, BERT_ENG, BERT_SPA };

inline constexpr int kNumClasses = 2;
inline constexpr int kNumLanguages = 2;
inline constexpr int kExtendedWidth = kNumClasses * kNumLanguages;

inline constexpr std::array<CorpusName, 3> kAllCorpora{CorpusName::KAGGLE, CorpusName::ESP_FAKE,
                                                        CorpusName::MIXED};
inline constexpr std::array<ExtractorId, 5> kAllExtractors{
    ExtractorId::TFIDF, ExtractorId::LDA, ExtractorId::BERT_MULT, ExtractorId::BERT_ENG,
    ExtractorId::BERT_SPA};

std::string_view to_string(Language l);
std::string_view to_string(Label l);
std::string_view to_string(CorpusName c);
std::string_view to_string(Attribute a);
std::string_view to_string(ExtractorId e);

std::optional<Language> parse_language(std::string_view s);
std::optional<CorpusName> parse_corpus_name(std::string_view s);
std::optional<Attribute> parse_attribute(std::string_view s);
std::optional<ExtractorId> parse_extractor(std::string_view s);

// Which languages a model or corpus speaks. MULTI covers every language.
struct Coverage {
    enum class Kind : std::uint8_t { MONO, MULTI };
    Kind kind = Kind::MULTI;
    Language language = Language::ENG; // meaningful only for MONO

    static constexpr Coverage mono(Language l) { return {Kind::MONO, l}; }
    static constexpr Coverage multi() { return {Kind::MULTI, Language::ENG}; }

    bool is_multi() const { return kind == Kind::MULTI; }
    friend bool operator==(const Coverage& a, const Coverage& b) {
        return a.kind == b.kind && (a.kind == Kind::MULTI || a.language == b.language);
    }
};

std::string to_string(Coverage c);

Coverage corpus_coverage(CorpusName c);

// Coverage of a model built on `extractor` fitted on `training_corpus`.
// Classical extractors inherit the training corpus language; transformer
// embeddings inherit the checkpoint's.
Coverage extractor_coverage(ExtractorId extractor, CorpusName training_corpus);

// BERT_ENG has no Spanish-only corpus; BETO has no English-only corpus.
bool extractor_available(ExtractorId extractor, CorpusName corpus);

bool is_transformer(ExtractorId e);

// Index into the extended support vector: [ENG-LEGIT, ENG-FAKE, SPA-LEGIT, SPA-FAKE].
constexpr int extended_index(Language l, Label c) {
    return static_cast<int>(l) * kNumClasses + static_cast<int>(c);
}

} // namespace fnd
