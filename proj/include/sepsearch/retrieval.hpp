#pragma once

#include "sepsearch/embedding_store.hpp"
#include "sepsearch/search_head.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sepsearch {

struct RankedEntry {
    std::string item_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

/// One query's ranking: descending score, ties by ascending item id.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;

    bool operator==(const RankedList&) const = default;
};

/// Inner product of a transformed query and an item vector. Throws DimMismatch.
double score(std::span<const double> query, std::span<const double> item);

/// Logistic link 1 / (1 + e^-s).
double relevance_prob(double s);

/// The k best items by inner product under the RankedList order; all items
/// when k exceeds the count. Throws DimMismatch or BadParams (k == 0).
RankedList top_k_exact(std::span<const double> query, const EmbeddingMatrix& items, std::size_t k,
                       std::string query_id = {});

/// Precomposes the head into the query embeddings. Scoring the result with
/// no head reproduces scoring the originals through the head.
EmbeddingMatrix fold_head(const SearchHead& head, const EmbeddingMatrix& queries);

/// Applies the head to every query and runs exact top-k. Queries are split
/// across `threads` workers; output order follows the query matrix.
std::vector<RankedList> search_exact(const SearchHead& head, const EmbeddingMatrix& queries,
                                     const EmbeddingMatrix& items, std::size_t k, std::size_t threads = 1);

/// TREC run lines: `qid Q0 item rank score tag`, score with 6 decimals.
std::string format_run(const std::vector<RankedList>& runs, std::string_view tag);
void save_run(const std::vector<RankedList>& runs, std::string_view tag, const std::filesystem::path& path);
/// Groups lines by query in first-appearance order; entries sorted by rank.
std::vector<RankedList> parse_run(std::string_view text);
std::vector<RankedList> load_run(const std::filesystem::path& path);

namespace detail {
/// Total order used by every ranking: higher score first, then smaller id.
inline bool ranks_before(double score_a, std::string_view id_a, double score_b, std::string_view id_b) {
    if (score_a != score_b) return score_a > score_b;
    return id_a < id_b;
}
} // namespace detail

} // namespace sepsearch
