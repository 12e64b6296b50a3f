#pragma once

#include "sepsearch/retrieval.hpp"

#include <span>

namespace sepsearch::detail {

/// Scores `rows` of `items` against `query` and keeps the best k.
RankedList rank_rows(std::span<const double> query, const EmbeddingMatrix& items, std::span<const std::size_t> rows,
                     std::size_t k, std::string query_id);

} // namespace sepsearch::detail
