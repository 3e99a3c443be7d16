#include "fnd/feature_matrix.hpp"

#include "fnd/error.hpp"
#include "fnd/io.hpp"

namespace fnd {

namespace {
constexpr std::string_view kFmxMagic = "FMX1";
constexpr std::string_view kLblMagic = "LBL1";
constexpr std::uint32_t kFmxVersion = 1;
const char* const kCoreKeys[] = {"extractor", "train_corpus", "eval_corpus",
                                 "attribute", "repetition",   "fold"};
} // namespace

nlohmann::json Provenance::to_json() const {
    nlohmann::json j = extra.is_object() ? extra : nlohmann::json::object();
    j["extractor"] = extractor;
    j["train_corpus"] = train_corpus;
    j["eval_corpus"] = eval_corpus;
    j["attribute"] = attribute;
    j["repetition"] = repetition;
    j["fold"] = fold;
    return j;
}

Provenance Provenance::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw LoadError("metadata is not a JSON object");
    Provenance p;
    try {
        p.extractor = j.at("extractor").get<std::string>();
        p.train_corpus = j.at("train_corpus").get<std::string>();
        p.eval_corpus = j.at("eval_corpus").get<std::string>();
        p.attribute = j.at("attribute").get<std::string>();
        p.repetition = j.at("repetition").get<int>();
        p.fold = j.at("fold").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("metadata: ") + e.what());
    }
    p.extra = j;
    for (const char* k : kCoreKeys) p.extra.erase(k);
    return p;
}

std::string encode_fmx1(const FeatureMatrix& m) {
    const std::string meta = m.meta.to_json().dump();
    std::string out;
    out.reserve(20 + meta.size() + static_cast<std::size_t>(m.values.size()) * 4);
    out.append(kFmxMagic);
    io::put_u32(out, kFmxVersion);
    io::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    io::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    io::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.append(meta);
    const float* data = m.values.data();
    for (Eigen::Index i = 0; i < m.values.size(); ++i) io::put_f32(out, data[i]);
    return out;
}

FeatureMatrix decode_fmx1(std::string_view bytes) {
    io::ByteReader in(bytes);
    if (in.remaining() < 4 || in.bytes(4) != kFmxMagic) throw LoadError("bad magic (expected FMX1)");
    const auto version = in.u32();
    if (version != kFmxVersion) throw LoadError("unsupported FMX1 version " + std::to_string(version));
    const auto rows = in.u32();
    const auto cols = in.u32();
    const auto meta_len = in.u32();
    const auto meta_text = in.bytes(meta_len);
    FeatureMatrix m;
    try {
        m.meta = Provenance::from_json(nlohmann::json::parse(meta_text));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("metadata JSON: ") + e.what());
    }
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    if (in.remaining() < count * 4) throw LoadError("unexpected EOF");
    if (in.remaining() > count * 4)
        throw LoadError("dimension mismatch: " + std::to_string(in.remaining() - count * 4) +
                        " trailing bytes after " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " payload");
    m.values.resize(rows, cols);
    float* data = m.values.data();
    for (std::uint64_t i = 0; i < count; ++i) data[i] = in.f32();
    if (!m.values.allFinite()) throw LoadError("non-finite value in matrix");
    return m;
}

void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
    if (!m.all_finite())
        throw ValidationError("refusing to save matrix with non-finite values: " + path.string());
    try {
        io::write_file_atomic(path, encode_fmx1(m));
    } catch (const IoError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    try {
        return decode_fmx1(bytes);
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

FeatureMatrix load_embeddings(const std::filesystem::path& path, const EmbeddingSlot& expected) {
    FeatureMatrix m = load_matrix(path);
    auto mismatch = [&](const std::string& field, const std::string& want, const std::string& got) {
        throw LoadError(path.string() + ": provenance mismatch on " + field + " (expected " + want +
                        ", file has " + got + ")");
    };
    const auto& p = m.meta;
    if (expected.extractor && *expected.extractor != p.extractor)
        mismatch("extractor", *expected.extractor, p.extractor);
    if (expected.train_corpus && *expected.train_corpus != p.train_corpus)
        mismatch("train_corpus", *expected.train_corpus, p.train_corpus);
    if (expected.eval_corpus && *expected.eval_corpus != p.eval_corpus)
        mismatch("eval_corpus", *expected.eval_corpus, p.eval_corpus);
    if (expected.attribute && *expected.attribute != p.attribute)
        mismatch("attribute", *expected.attribute, p.attribute);
    if (expected.repetition && *expected.repetition != p.repetition)
        mismatch("repetition", std::to_string(*expected.repetition), std::to_string(p.repetition));
    if (expected.fold && *expected.fold != p.fold)
        mismatch("fold", std::to_string(*expected.fold), std::to_string(p.fold));
    if (expected.rows && *expected.rows != m.rows())
        throw LoadError(path.string() + ": dimension mismatch (expected " +
                        std::to_string(*expected.rows) + " rows, file has " +
                        std::to_string(m.rows()) + ")");
    return m;
}

void save_labels(const std::vector<LabelRow>& rows, const std::filesystem::path& path) {
    std::string out;
    out.append(kLblMagic);
    io::put_u32(out, static_cast<std::uint32_t>(rows.size()));
    for (const auto& r : rows) {
        out.push_back(static_cast<char>(r.label));
        out.push_back(static_cast<char>(r.language));
    }
    io::write_file_atomic(path, out);
}

std::vector<LabelRow> load_labels(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    io::ByteReader in(bytes);
    try {
        if (in.remaining() < 4 || in.bytes(4) != kLblMagic) throw LoadError("bad magic (expected LBL1)");
        const auto n = in.u32();
        std::vector<LabelRow> rows;
        rows.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto c = in.u8();
            const auto l = in.u8();
            if (c > 1 || l > 1) throw LoadError("invalid class/language byte at row " + std::to_string(i));
            rows.push_back({static_cast<Label>(c), static_cast<Language>(l)});
        }
        if (in.remaining() != 0) throw LoadError("trailing bytes after label rows");
        return rows;
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

FeatureMatrix hconcat(const std::vector<const FeatureMatrix*>& parts) {
    if (parts.empty()) throw ValidationError("hconcat of zero matrices");
    const auto rows = parts.front()->rows();
    Eigen::Index cols = 0;
    nlohmann::json sources = nlohmann::json::array();
    for (const auto* p : parts) {
        if (p->rows() != rows || p->meta.eval_corpus != parts.front()->meta.eval_corpus ||
            p->meta.repetition != parts.front()->meta.repetition ||
            p->meta.fold != parts.front()->meta.fold)
            throw ValidationError("row-order mismatch across extractor matrices (" +
                                  p->meta.extractor + " vs " + parts.front()->meta.extractor + ")");
        const auto a = p->meta.extra.find("row_ids");
        const auto b = parts.front()->meta.extra.find("row_ids");
        if (a != p->meta.extra.end() && b != parts.front()->meta.extra.end() && *a != *b)
            throw ValidationError("row-order mismatch across extractor matrices (row_ids differ)");
        cols += p->cols();
        sources.push_back(p->meta.extractor + "@" + p->meta.train_corpus);
    }
    FeatureMatrix out;
    out.values.resize(rows, cols);
    Eigen::Index c = 0;
    for (const auto* p : parts) {
        out.values.middleCols(c, p->cols()) = p->values;
        c += p->cols();
    }
    out.meta = parts.front()->meta;
    out.meta.extractor = "concat";
    out.meta.extra["sources"] = sources;
    return out;
}

} // namespace fnd
