#include "sepsearch/ivf_index.hpp"

#include "binary_io.hpp"
#include "ranking.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/io.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace sepsearch {

namespace {

constexpr std::string_view kMagic = "SEPI";

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> v) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(centroids.row(c), v);
        if (d < best_dist) {
            best_dist = d;
            best = c;
        }
    }
    return best;
}

std::vector<std::size_t> assign(const Matrix& centroids, const EmbeddingMatrix& items) {
    std::vector<std::size_t> out(items.count());
    for (std::size_t i = 0; i < items.count(); ++i) out[i] = nearest_centroid(centroids, items.row(i));
    return out;
}

} // namespace

IvfIndex build_ivf(const EmbeddingMatrix& items, std::size_t clusters, std::size_t kmeans_iters,
                   std::uint64_t seed) {
    if (clusters == 0 || clusters > items.count()) {
        throw Error(ErrorCode::BadParams, "need 1 <= C <= item count (C=" + std::to_string(clusters) +
                                              ", count=" + std::to_string(items.count()) + ")");
    }
    const std::size_t dim = items.dim();

    std::vector<std::size_t> order(items.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    Matrix centroids(clusters, dim);
    for (std::size_t c = 0; c < clusters; ++c) {
        auto src = items.row(order[c]);
        auto dst = centroids.row(c);
        for (std::size_t j = 0; j < dim; ++j) dst[j] = static_cast<float>(src[j]);
    }

    for (std::size_t iter = 0; iter < kmeans_iters; ++iter) {
        const auto labels = assign(centroids, items);
        Matrix sums(clusters, dim);
        std::vector<std::size_t> sizes(clusters, 0);
        for (std::size_t i = 0; i < items.count(); ++i) {
            auto dst = sums.row(labels[i]);
            auto src = items.row(i);
            for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
            ++sizes[labels[i]];
        }
        for (std::size_t c = 0; c < clusters; ++c) {
            if (sizes[c] == 0) continue; // empty cluster keeps its previous centroid
            auto dst = centroids.row(c);
            auto src = sums.row(c);
            for (std::size_t j = 0; j < dim; ++j) {
                dst[j] = static_cast<float>(src[j] / static_cast<double>(sizes[c]));
            }
        }
    }

    IvfIndex index{std::move(centroids), std::vector<std::vector<std::uint64_t>>(clusters),
                   IvfParams{clusters, kmeans_iters, seed}};
    const auto labels = assign(index.centroids, items);
    for (std::size_t i = 0; i < items.count(); ++i) index.lists[labels[i]].push_back(i);
    return index;
}

void check_index_matches(const IvfIndex& index, const EmbeddingMatrix& items) {
    if (index.dim() != items.dim()) throw Error(ErrorCode::BadParams, "index dim differs from items");
    std::vector<bool> seen(items.count(), false);
    std::size_t total = 0;
    for (const auto& list : index.lists) {
        for (auto row : list) {
            if (row >= items.count() || seen[row]) throw Error(ErrorCode::BadParams, "index does not partition items");
            seen[row] = true;
            ++total;
        }
    }
    if (total != items.count()) throw Error(ErrorCode::BadParams, "index does not cover every item");
}

RankedList search_ivf(const IvfIndex& index, const EmbeddingMatrix& items, std::span<const double> query,
                      std::size_t k, std::size_t nprobe, std::string query_id) {
    if (nprobe == 0 || nprobe > index.clusters()) {
        throw Error(ErrorCode::BadParams, "need 1 <= nprobe <= C (nprobe=" + std::to_string(nprobe) + ")");
    }
    if (k == 0) throw Error(ErrorCode::BadParams, "k must be positive");
    if (query.size() != items.dim() || index.dim() != items.dim()) {
        throw Error(ErrorCode::DimMismatch, "query, index and items must share a dim");
    }

    std::vector<std::pair<double, std::size_t>> probes;
    probes.reserve(index.clusters());
    for (std::size_t c = 0; c < index.clusters(); ++c) probes.emplace_back(dot(query, index.centroids.row(c)), c);
    std::partial_sort(probes.begin(), probes.begin() + static_cast<std::ptrdiff_t>(nprobe), probes.end(),
                      [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });

    std::vector<std::size_t> rows;
    for (std::size_t p = 0; p < nprobe; ++p) {
        const auto& list = index.lists[probes[p].second];
        rows.insert(rows.end(), list.begin(), list.end());
    }
    return detail::rank_rows(query, items, rows, k, std::move(query_id));
}

std::string encode_index(const IvfIndex& index) {
    detail::ByteWriter w;
    w.bytes(kMagic);
    w.put<std::uint32_t>(kIndexFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(index.clusters()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(index.dim()));
    for (double v : index.centroids.values()) w.put<float>(static_cast<float>(v));
    std::uint64_t offset = 0;
    w.put<std::uint64_t>(offset);
    for (const auto& list : index.lists) {
        offset += list.size();
        w.put<std::uint64_t>(offset);
    }
    for (const auto& list : index.lists) {
        for (auto row : list) w.put<std::uint64_t>(row);
    }
    return std::move(w.buffer());
}

IvfIndex decode_index(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic) throw Error(ErrorCode::BadMagic, "expected SEPI");
    detail::ByteReader r(bytes, ErrorCode::CorruptHeader);
    r.bytes(4);
    if (const auto version = r.get<std::uint32_t>(); version != kIndexFormatVersion) {
        throw Error(ErrorCode::CorruptHeader, "unsupported index version " + std::to_string(version));
    }
    const auto clusters = r.get<std::uint32_t>();
    const auto dim = r.get<std::uint32_t>();
    if (clusters == 0 || dim == 0) throw Error(ErrorCode::CorruptHeader, "empty index");
    if (std::uint64_t{clusters} * dim * 4 > r.remaining()) throw Error(ErrorCode::CorruptHeader, "truncated centroids");

    IvfIndex index{Matrix(clusters, dim), std::vector<std::vector<std::uint64_t>>(clusters), IvfParams{clusters, 0, 0}};
    for (double& v : index.centroids.values()) v = r.get<float>();
    std::vector<std::uint64_t> offsets(std::size_t{clusters} + 1);
    for (auto& o : offsets) o = r.get<std::uint64_t>();
    if (offsets.front() != 0) throw Error(ErrorCode::CorruptHeader, "first bucket offset must be zero");
    for (std::size_t c = 0; c < clusters; ++c) {
        if (offsets[c + 1] < offsets[c]) throw Error(ErrorCode::CorruptHeader, "bucket offsets decrease");
    }
    if (offsets.back() > r.remaining() / 8) throw Error(ErrorCode::CorruptHeader, "truncated bucket members");
    for (std::size_t c = 0; c < clusters; ++c) {
        auto& list = index.lists[c];
        list.resize(offsets[c + 1] - offsets[c]);
        for (auto& row : list) row = r.get<std::uint64_t>();
    }
    if (r.remaining() != 0) throw Error(ErrorCode::CorruptHeader, "trailing bytes in index");
    return index;
}

void save_index(const IvfIndex& index, const std::filesystem::path& path) {
    write_file_atomic(path, encode_index(index));
}

IvfIndex load_index(const std::filesystem::path& path) { return decode_index(read_file(path)); }

} // namespace sepsearch
