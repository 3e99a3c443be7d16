#include "fnd/ensemble.hpp"
#include "fnd/error.hpp"

#include <doctest.h>

#include <random>

using namespace fnd;

namespace {

SupportVector base(double legit, double fake, Coverage cov = Coverage::multi()) {
    SupportVector s;
    s.values = {legit, fake};
    s.scope = SupportScope::BASE;
    s.source.coverage = cov;
    return s;
}

bool same(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-12) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > tol) return false;
    return true;
}

FeatureMatrix features(int rows, int cols, const std::vector<int>& y, double shift, std::uint64_t seed,
                       const std::string& extractor) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    FeatureMatrix m;
    m.values.resize(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m.values(r, c) = g(rng) + (c == 0 ? static_cast<float>(shift * y[r]) : 0.0f);
    m.meta = {extractor, "kaggle", "kaggle", "text", 0, 0, nlohmann::json::object()};
    return m;
}

MlpConfig tiny() {
    MlpConfig c;
    c.hidden = {8};
    c.max_epochs = 60;
    c.learning_rate = 1e-2;
    c.batch_size = 8;
    c.seed = 1;
    return c;
}

} // namespace

TEST_CASE("internal accumulation is the mean") {
    const std::vector<SupportVector> one{base(0.8, 0.2)};
    CHECK(same(accumulate_internal(one).values, {0.8, 0.2}));
    const std::vector<SupportVector> two{base(1, 0), base(0, 1)};
    CHECK(same(accumulate_internal(two).values, {0.5, 0.5}));
    const std::vector<SupportVector> three{base(0.9, 0.1), base(0.6, 0.4), base(0.3, 0.7)};
    CHECK(same(accumulate_internal(three).values, {(0.9 + 0.6 + 0.3) / 3, (0.1 + 0.4 + 0.7) / 3}));
    CHECK_THROWS_AS(accumulate_internal(std::vector<SupportVector>{}), ValidationError);
}

TEST_CASE("extension rules") {
    CHECK(same(extend_support(base(0.9, 0.1, Coverage::mono(Language::SPA))).values, {0, 0, 0.9, 0.1}));
    CHECK(same(extend_support(base(0.7, 0.3, Coverage::multi())).values, {0.35, 0.15, 0.35, 0.15}));
    CHECK(same(extend_support(base(0.5, 0.5, Coverage::mono(Language::ENG))).values, {0.5, 0.5, 0, 0}));
    CHECK(extend_support(base(0.5, 0.5)).scope == SupportScope::EXTENDED);
    auto bad = base(0.5, 0.5, Coverage::mono(static_cast<Language>(7)));
    CHECK_THROWS_AS(extend_support(bad), ValidationError);
}

TEST_CASE("support properties over random vectors") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double p = u(rng);
        const auto b = base(p, 1.0 - p, i % 3 == 0 ? Coverage::multi() : Coverage::mono(static_cast<Language>(i % 2)));
        const auto e = extend_support(b);
        CHECK(is_valid_support(e));
        CHECK(std::abs(e.sum() - 1.0) <= 1e-6);
        if (b.source.coverage.is_multi()) {
            CHECK(marginalize(e).values == b.values);
        } else {
            const int foreign = b.source.coverage.language == Language::ENG ? 2 : 0;
            CHECK(e.values[foreign] == 0.0);
            CHECK(e.values[foreign + 1] == 0.0);
        }
    }
}

TEST_CASE("external accumulation decodes language and class") {
    EnsemblePool pool;
    pool.members.resize(2);
    const std::vector<SupportVector> supports{extend_support(base(0.6, 0.4, Coverage::mono(Language::ENG))),
                                              extend_support(base(0.7, 0.3, Coverage::mono(Language::SPA)))};
    const auto d = accumulate_external(pool, supports);
    CHECK(same(d.support.values, {0.3, 0.2, 0.35, 0.15}));
    CHECK(d.language == Language::SPA);
    CHECK(d.label == Label::LEGIT);

    const std::vector<SupportVector> single{extend_support(base(0.9, 0.1, Coverage::mono(Language::SPA)))};
    pool.members.resize(1);
    const auto s = accumulate_external(pool, single);
    CHECK(s.language == Language::SPA);
    CHECK(s.label == Label::LEGIT);

    const std::vector<SupportVector> tie{extend_support(base(0.5, 0.5, Coverage::multi()))};
    const auto t = accumulate_external(pool, tie);
    CHECK(t.language == Language::ENG);
    CHECK(t.label == Label::LEGIT);

    EnsemblePool empty;
    CHECK_THROWS_AS(accumulate_external(empty, std::vector<SupportVector>{}), ValidationError);
}

TEST_CASE("homogeneous pools decide like internal accumulation") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto cov : {Coverage::mono(Language::ENG), Coverage::mono(Language::SPA), Coverage::multi()}) {
        EnsemblePool pool;
        for (int m = 0; m < 3; ++m) {
            PoolMember member;
            member.coverage = cov;
            pool.members.push_back(member);
        }
        CHECK(pool.homogeneous());
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<SupportVector> s;
            std::vector<SupportVector> ext;
            for (int m = 0; m < 3; ++m) {
                const double p = u(rng);
                s.push_back(base(p, 1 - p, cov));
                ext.push_back(extend_support(s.back()));
            }
            const auto internal = accumulate_internal(s);
            const auto external = accumulate_external(pool, ext);
            const Label expect = internal.values[1] > internal.values[0] ? Label::FAKE : Label::LEGIT;
            CHECK(decide(pool, s).label == expect);
            CHECK(external.label == expect);
        }
    }
}

TEST_CASE("heterogeneous pools decide in the extended space") {
    EnsemblePool pool;
    PoolMember eng, spa;
    eng.coverage = Coverage::mono(Language::ENG);
    spa.coverage = Coverage::mono(Language::SPA);
    pool.members = {eng, spa};
    CHECK_FALSE(pool.homogeneous());
    const std::vector<SupportVector> s{base(0.6, 0.4, eng.coverage), base(0.7, 0.3, spa.coverage)};
    const auto d = decide(pool, s);
    REQUIRE(d.language.has_value());
    CHECK(*d.language == Language::SPA);
    CHECK(d.support.scope == SupportScope::EXTENDED);
}

TEST_CASE("SIS builds one member per input with coverage tags") {
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) y[i] = i % 2;
    const auto a = features(60, 5, y, 3.0, 1, "tfidf");
    const auto b = features(60, 7, y, 3.0, 2, "bert_mult");
    const auto c = features(60, 4, y, 3.0, 3, "tfidf");
    const std::vector<MemberInput> inputs{{ExtractorId::TFIDF, CorpusName::KAGGLE, &a},
                                          {ExtractorId::BERT_MULT, CorpusName::KAGGLE, &b},
                                          {ExtractorId::TFIDF, CorpusName::MIXED, &c}};
    const auto pool = build_sis(inputs, CorpusName::KAGGLE, y, tiny());
    REQUIRE(pool.members.size() == 3);
    CHECK(pool.policy == Policy::SIS);
    CHECK(pool.members[0].coverage == Coverage::mono(Language::ENG));
    CHECK(pool.members[1].coverage == Coverage::multi());
    CHECK(pool.members[2].coverage == Coverage::multi());

    const std::vector<const FeatureMatrix*> eval{&a, &b, &c};
    const auto decisions = predict(pool, eval);
    REQUIRE(decisions.size() == 60);
    int correct = 0;
    for (std::size_t i = 0; i < 60; ++i) {
        CHECK(is_valid_support(decisions[i].support));
        correct += static_cast<int>(decisions[i].label) == y[i];
    }
    CHECK(correct > 50);

    const auto manifest = pool_manifest(pool, {"m0", "m1", "m2"}, std::nullopt);
    CHECK(manifest.at("members").size() == 3);
}

TEST_CASE("single-member pool predicts its member's argmax") {
    std::vector<int> y(40);
    for (int i = 0; i < 40; ++i) y[i] = i % 2;
    const auto a = features(40, 3, y, 1.0, 4, "tfidf");
    const std::vector<MemberInput> inputs{{ExtractorId::TFIDF, CorpusName::KAGGLE, &a}};
    const auto pool = build_sis(inputs, CorpusName::KAGGLE, y, tiny());
    const auto supports = predict_support(*pool.members[0].model, a.values.cast<double>());
    const std::vector<const FeatureMatrix*> eval{&a};
    const auto d = predict(pool, eval);
    for (int i = 0; i < 40; ++i)
        CHECK(d[static_cast<std::size_t>(i)].label == (supports(i, 1) > supports(i, 0) ? Label::FAKE : Label::LEGIT));
}

TEST_CASE("availability violations are configuration errors") {
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) y[i] = i % 2;
    const auto a = features(20, 3, y, 1.0, 5, "beto");
    const std::vector<MemberInput> inputs{{ExtractorId::BERT_SPA, CorpusName::KAGGLE, &a}};
    CHECK_THROWS_WITH_AS(build_sis(inputs, CorpusName::KAGGLE, y, tiny()), doctest::Contains("unavailable"), ConfigError);
    const std::vector<MemberInput> eng{{ExtractorId::BERT_ENG, CorpusName::KAGGLE, &a}};
    CHECK_THROWS_AS(build_sis(eng, CorpusName::ESP_FAKE, y, tiny()), ConfigError);
}

TEST_CASE("ERS concatenates, reduces and trains one member") {
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) y[i] = i % 2;
    const auto a = features(60, 100, y, 3.0, 6, "tfidf");
    const auto b = features(60, 100, y, 0.0, 7, "lda");
    const auto c = features(60, 768, y, 0.0, 8, "bert_mult");
    const std::vector<MemberInput> inputs{{ExtractorId::TFIDF, CorpusName::KAGGLE, &a},
                                          {ExtractorId::LDA, CorpusName::KAGGLE, &b},
                                          {ExtractorId::BERT_MULT, CorpusName::KAGGLE, &c}};
    const auto pool = build_ers(inputs, CorpusName::KAGGLE, y, ReducerKind::ANOVA, 100, tiny());
    REQUIRE(pool.members.size() == 1);
    CHECK(pool.policy == Policy::ERS);
    CHECK(pool.members[0].model->input_width() == 100);
    CHECK(pool.members[0].coverage == Coverage::mono(Language::ENG));

    const auto pass = build_ers(inputs, CorpusName::KAGGLE, y, ReducerKind::SA_PASSTHROUGH, 100, tiny());
    CHECK(pass.members[0].model->input_width() == 968);

    auto shifted = b;
    shifted.meta.fold = 1;
    const std::vector<MemberInput> mismatched{{ExtractorId::TFIDF, CorpusName::KAGGLE, &a},
                                              {ExtractorId::LDA, CorpusName::KAGGLE, &shifted}};
    CHECK_THROWS_AS(build_ers(mismatched, CorpusName::KAGGLE, y, ReducerKind::PCA, 10, tiny()), ValidationError);
}
