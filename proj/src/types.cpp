#include "fnd/types.hpp"

namespace fnd {

std::string_view to_string(Language l) { return l == Language::ENG ? "ENG" : "SPA"; }

std::string_view to_string(Label l) { return l == Label::LEGIT ? "LEGIT" : "FAKE"; }

std::string_view to_string(CorpusName c) {
    switch (c) {
    case CorpusName::ESP_FAKE: return "esp_fake";
    case CorpusName::KAGGLE: return "kaggle";
    case CorpusName::MIXED: return "mixed";
    }
    return "?";
}

std::string_view to_string(Attribute a) { return a == Attribute::TEXT ? "text" : "title"; }

std::string_view to_string(ExtractorId e) {
    switch (e) {
    case ExtractorId::TFIDF: return "tfidf";
    case ExtractorId::LDA: return "lda";
    case ExtractorId::BERT_MULT: return "bert_mult";
    case ExtractorId::BERT_ENG: return "bert_eng";
    case ExtractorId::BERT_SPA: return "beto";
    }
    return "?";
}

std::optional<Language> parse_language(std::string_view s) {
    if (s == "ENG") return Language::ENG;
    if (s == "SPA") return Language::SPA;
    return std::nullopt;
}

std::optional<CorpusName> parse_corpus_name(std::string_view s) {
    for (auto c : kAllCorpora)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Attribute> parse_attribute(std::string_view s) {
    if (s == "text") return Attribute::TEXT;
    if (s == "title") return Attribute::TITLE;
    return std::nullopt;
}

std::optional<ExtractorId> parse_extractor(std::string_view s) {
    for (auto e : kAllExtractors)
        if (to_string(e) == s) return e;
    return std::nullopt;
}

std::string to_string(Coverage c) {
    if (c.is_multi()) return "MULTI";
    return "MONO(" + std::string(to_string(c.language)) + ")";
}

Coverage corpus_coverage(CorpusName c) {
    switch (c) {
    case CorpusName::ESP_FAKE: return Coverage::mono(Language::SPA);
    case CorpusName::KAGGLE: return Coverage::mono(Language::ENG);
    case CorpusName::MIXED: return Coverage::multi();
    }
    return Coverage::multi();
}

Coverage extractor_coverage(ExtractorId extractor, CorpusName training_corpus) {
    switch (extractor) {
    case ExtractorId::BERT_MULT: return Coverage::multi();
    case ExtractorId::BERT_ENG: return Coverage::mono(Language::ENG);
    case ExtractorId::BERT_SPA: return Coverage::mono(Language::SPA);
    default: return corpus_coverage(training_corpus);
    }
}

bool extractor_available(ExtractorId extractor, CorpusName corpus) {
    if (extractor == ExtractorId::BERT_ENG && corpus == CorpusName::ESP_FAKE) return false;
    if (extractor == ExtractorId::BERT_SPA && corpus == CorpusName::KAGGLE) return false;
    return true;
}

bool is_transformer(ExtractorId e) {
    return e == ExtractorId::BERT_MULT || e == ExtractorId::BERT_ENG || e == ExtractorId::BERT_SPA;
}

} // namespace fnd
