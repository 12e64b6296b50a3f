#pragma once

#include "sepsearch/embedding_store.hpp"
#include "sepsearch/retrieval.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sepsearch {

inline constexpr std::uint32_t kIndexFormatVersion = 1;

struct IvfParams {
    std::size_t clusters = 1;
    std::size_t kmeans_iters = 10;
    std::uint64_t seed = 0;
};

/// Inverted-file partition of an item matrix. Centroids hold float32
/// representable values so a persisted index reloads exactly.
struct IvfIndex {
    Matrix centroids;                               ///< C x dim
    std::vector<std::vector<std::uint64_t>> lists; ///< item rows per centroid, ascending
    IvfParams params;

    std::size_t clusters() const noexcept { return centroids.rows(); }
    std::size_t dim() const noexcept { return centroids.cols(); }
    bool operator==(const IvfIndex& other) const {
        return centroids == other.centroids && lists == other.lists;
    }
};

/// Seeded k-means (Euclidean) with a fixed iteration count, followed by a
/// final nearest-centroid assignment. Throws BadParams unless 1 <= C <= count.
IvfIndex build_ivf(const EmbeddingMatrix& items, std::size_t clusters, std::size_t kmeans_iters, std::uint64_t seed);

/// Scans the nprobe buckets whose centroids have the highest inner product
/// with the query. nprobe == C gives exactly top_k_exact.
RankedList search_ivf(const IvfIndex& index, const EmbeddingMatrix& items, std::span<const double> query,
                      std::size_t k, std::size_t nprobe, std::string query_id = {});

/// Throws BadParams when the index does not partition the rows of `items`.
void check_index_matches(const IvfIndex& index, const EmbeddingMatrix& items);

std::string encode_index(const IvfIndex& index);
IvfIndex decode_index(std::string_view bytes);
void save_index(const IvfIndex& index, const std::filesystem::path& path);
IvfIndex load_index(const std::filesystem::path& path);

} // namespace sepsearch
