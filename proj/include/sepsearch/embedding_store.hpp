#pragma once

#include "sepsearch/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sepsearch {

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

/// Id-indexed collection of dense vectors. Row i belongs to ids()[i].
///
/// Values live in memory as doubles. The on-disk format stores float32, so a
/// matrix survives save/load bit-exactly when its values are float32
/// representable (true for anything loaded from disk or generated here).
class EmbeddingMatrix {
  public:
    EmbeddingMatrix() = default;

    /// Validates shape, uniqueness of ids and finiteness of values.
    EmbeddingMatrix(std::vector<std::string> ids, Matrix data);

    std::size_t count() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return data_.cols(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const Matrix& data() const noexcept { return data_; }

    std::span<const double> row(std::size_t i) const { return data_.row(i); }
    std::optional<std::size_t> index_of(std::string_view id) const;

    /// Row for `id`; throws UnknownId.
    std::span<const double> lookup(std::string_view id) const;

    /// Copy with every nonzero row scaled to unit Euclidean norm.
    EmbeddingMatrix l2_normalized() const;

    bool operator==(const EmbeddingMatrix& other) const {
        return ids_ == other.ids_ && data_ == other.data_;
    }

  private:
    std::vector<std::string> ids_;
    Matrix data_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Copy with every value rounded to float32, the on-disk precision.
EmbeddingMatrix round_to_storage_precision(const EmbeddingMatrix& m);

/// Free-function form of EmbeddingMatrix::lookup.
std::vector<double> lookup(const EmbeddingMatrix& m, std::string_view id);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);

EmbeddingMatrix decode_embeddings(std::string_view bytes);
std::string encode_embeddings(const EmbeddingMatrix& m);

struct QrelEntry {
    std::string query_id;
    std::string item_id;
    std::uint32_t grade = 0;

    bool operator==(const QrelEntry&) const = default;
};

/// Graded relevance judgments. Grade >= 1 is relevant; 0 is judged non-relevant.
class Qrels {
  public:
    Qrels() = default;
    /// Throws DuplicatePair if a (query, item) pair repeats.
    explicit Qrels(std::vector<QrelEntry> entries);

    /// Entries sorted by (query_id, item_id).
    const std::vector<QrelEntry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    /// 0 for unjudged pairs.
    std::uint32_t grade(std::string_view query_id, std::string_view item_id) const;
    bool has_query(std::string_view query_id) const;
    std::size_t relevant_count(std::string_view query_id) const;
    /// Judgments for one query keyed by item id; empty when the query is unknown.
    const std::map<std::string, std::uint32_t, std::less<>>& judgments(std::string_view query_id) const;
    std::vector<std::string> query_ids() const;

  private:
    std::vector<QrelEntry> entries_;
    std::map<std::string, std::map<std::string, std::uint32_t, std::less<>>, std::less<>> by_query_;
};

Qrels parse_qrels(std::string_view text);
Qrels load_qrels(const std::filesystem::path& path);
std::string format_qrels(const Qrels& qrels);
void save_qrels(const Qrels& qrels, const std::filesystem::path& path);

/// Queries, items and the judgments linking them. Query and item
/// dimensionality may differ; a search head bridges them.
struct Dataset {
    EmbeddingMatrix queries;
    EmbeddingMatrix items;
    Qrels qrels;
};

/// Assembles a dataset, throwing ReferentialMismatch when qrels mention ids
/// absent from the matrices.
Dataset make_dataset(EmbeddingMatrix queries, EmbeddingMatrix items, Qrels qrels);

/// Directory layout: queries.emb, items.emb, qrels.tsv.
Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

} // namespace sepsearch
