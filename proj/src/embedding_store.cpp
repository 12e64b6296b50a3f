#include "sepsearch/embedding_store.hpp"

#include "binary_io.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <tuple>

namespace sepsearch {

namespace {

constexpr std::string_view kMagic = "SEPE";
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 4 + 4;

} // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> ids, Matrix data)
    : ids_(std::move(ids)), data_(std::move(data)) {
    if (data_.cols() == 0) throw Error(ErrorCode::BadShape, "embedding dim must be positive");
    if (data_.rows() != ids_.size()) {
        throw Error(ErrorCode::BadShape, "id count " + std::to_string(ids_.size()) + " != row count " +
                                             std::to_string(data_.rows()));
    }
    for (std::size_t i = 0; i < data_.values().size(); ++i) {
        if (!std::isfinite(data_.values()[i])) {
            throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(i / dim()) + " col " +
                                                       std::to_string(i % dim()));
        }
    }
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second) throw Error(ErrorCode::DuplicateId, ids_[i]);
    }
}

std::optional<std::size_t> EmbeddingMatrix::index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::span<const double> EmbeddingMatrix::lookup(std::string_view id) const {
    auto idx = index_of(id);
    if (!idx) throw Error(ErrorCode::UnknownId, std::string(id));
    return row(*idx);
}

EmbeddingMatrix EmbeddingMatrix::l2_normalized() const {
    Matrix out = data_;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        const double norm = std::sqrt(dot(r, r));
        if (norm == 0.0) continue;
        for (double& v : r) v /= norm;
    }
    return EmbeddingMatrix(ids_, std::move(out));
}

EmbeddingMatrix round_to_storage_precision(const EmbeddingMatrix& m) {
    Matrix out = m.data();
    for (double& v : out.values()) v = static_cast<float>(v);
    return EmbeddingMatrix(m.ids(), std::move(out));
}

std::vector<double> lookup(const EmbeddingMatrix& m, std::string_view id) {
    auto r = m.lookup(id);
    return {r.begin(), r.end()};
}

std::string encode_embeddings(const EmbeddingMatrix& m) {
    detail::ByteWriter w;
    w.bytes(kMagic);
    w.put<std::uint32_t>(kEmbeddingFormatVersion);
    w.put<std::uint64_t>(m.count());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.dim()));
    w.put<std::uint32_t>(0);
    for (double v : m.data().values()) w.put<float>(static_cast<float>(v));
    for (const auto& id : m.ids()) {
        if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw Error(ErrorCode::IoFailure, "id longer than 65535 bytes");
        }
        w.put<std::uint16_t>(static_cast<std::uint16_t>(id.size()));
        w.bytes(id);
    }
    return std::move(w.buffer());
}

EmbeddingMatrix decode_embeddings(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic) throw Error(ErrorCode::BadMagic, "expected SEPE");
    detail::ByteReader r(bytes, ErrorCode::CorruptHeader);
    r.bytes(4);
    if (const auto version = r.get<std::uint32_t>(); version != kEmbeddingFormatVersion) {
        throw Error(ErrorCode::CorruptHeader, "unsupported version " + std::to_string(version));
    }
    const auto count = r.get<std::uint64_t>();
    const auto dim = r.get<std::uint32_t>();
    if (r.get<std::uint32_t>() != 0) throw Error(ErrorCode::CorruptHeader, "reserved field must be zero");
    if (dim == 0) throw Error(ErrorCode::CorruptHeader, "dim must be positive");

    // Each row needs dim floats plus at least a 2-byte id length.
    const std::size_t available = bytes.size() - kHeaderBytes;
    if (count > available / (std::uint64_t{dim} * 4 + 2)) {
        throw Error(ErrorCode::CorruptHeader, "count/dim inconsistent with payload size");
    }

    Matrix data(count, dim);
    auto& values = data.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = r.get<float>();
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(i / dim) + " col " + std::to_string(i % dim));
        }
        values[i] = v;
    }
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint16_t>();
        ids.emplace_back(r.bytes(len));
    }
    if (r.remaining() != 0) throw Error(ErrorCode::CorruptHeader, "trailing bytes after id table");
    return EmbeddingMatrix(std::move(ids), std::move(data));
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
    return decode_embeddings(read_file(path));
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
    write_file_atomic(path, encode_embeddings(m));
}

// ---------------------------------------------------------------------------
// Qrels

Qrels::Qrels(std::vector<QrelEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const QrelEntry& a, const QrelEntry& b) {
        return std::tie(a.query_id, a.item_id) < std::tie(b.query_id, b.item_id);
    });
    for (const auto& e : entries_) {
        if (!by_query_[e.query_id].emplace(e.item_id, e.grade).second) {
            throw Error(ErrorCode::DuplicatePair, e.query_id + "\t" + e.item_id);
        }
    }
}

std::uint32_t Qrels::grade(std::string_view query_id, std::string_view item_id) const {
    auto q = by_query_.find(query_id);
    if (q == by_query_.end()) return 0;
    auto it = q->second.find(item_id);
    return it == q->second.end() ? 0 : it->second;
}

bool Qrels::has_query(std::string_view query_id) const { return by_query_.find(query_id) != by_query_.end(); }

std::size_t Qrels::relevant_count(std::string_view query_id) const {
    std::size_t n = 0;
    for (const auto& [item, g] : judgments(query_id)) n += g >= 1 ? 1 : 0;
    return n;
}

const std::map<std::string, std::uint32_t, std::less<>>& Qrels::judgments(std::string_view query_id) const {
    static const std::map<std::string, std::uint32_t, std::less<>> kEmpty;
    auto q = by_query_.find(query_id);
    return q == by_query_.end() ? kEmpty : q->second;
}

std::vector<std::string> Qrels::query_ids() const {
    std::vector<std::string> out;
    out.reserve(by_query_.size());
    for (const auto& [q, _] : by_query_) out.push_back(q);
    return out;
}

Qrels parse_qrels(std::string_view text) {
    std::vector<QrelEntry> entries;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
        }
        const auto query = line.substr(0, t1);
        const auto item = line.substr(t1 + 1, t2 - t1 - 1);
        const auto grade_text = line.substr(t2 + 1);
        std::uint32_t grade = 0;
        auto [end, ec] = std::from_chars(grade_text.data(), grade_text.data() + grade_text.size(), grade);
        if (query.empty() || item.empty() || ec != std::errc{} || end != grade_text.data() + grade_text.size()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad entry");
        }
        entries.push_back({std::string(query), std::string(item), grade});
    }
    return Qrels(std::move(entries));
}

Qrels load_qrels(const std::filesystem::path& path) { return parse_qrels(read_file(path)); }

std::string format_qrels(const Qrels& qrels) {
    std::string out;
    for (const auto& e : qrels.entries()) {
        out += e.query_id;
        out += '\t';
        out += e.item_id;
        out += '\t';
        out += std::to_string(e.grade);
        out += '\n';
    }
    return out;
}

void save_qrels(const Qrels& qrels, const std::filesystem::path& path) {
    write_file_atomic(path, format_qrels(qrels));
}

// ---------------------------------------------------------------------------
// Dataset

Dataset make_dataset(EmbeddingMatrix queries, EmbeddingMatrix items, Qrels qrels) {
    for (const auto& e : qrels.entries()) {
        if (!queries.index_of(e.query_id)) throw Error(ErrorCode::ReferentialMismatch, "unknown query " + e.query_id);
        if (!items.index_of(e.item_id)) throw Error(ErrorCode::ReferentialMismatch, "unknown item " + e.item_id);
    }
    return Dataset{std::move(queries), std::move(items), std::move(qrels)};
}

Dataset load_dataset(const std::filesystem::path& dir) {
    return make_dataset(load_embeddings(dir / "queries.emb"), load_embeddings(dir / "items.emb"),
                        load_qrels(dir / "qrels.tsv"));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    save_embeddings(ds.queries, dir / "queries.emb");
    save_embeddings(ds.items, dir / "items.emb");
    save_qrels(ds.qrels, dir / "qrels.tsv");
}

} // namespace sepsearch
