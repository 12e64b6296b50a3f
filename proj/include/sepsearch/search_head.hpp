#pragma once

#include "sepsearch/embedding_store.hpp"
#include "sepsearch/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sepsearch {

inline constexpr std::uint32_t kHeadFormatVersion = 1;
inline constexpr std::size_t kMaxHeadLayers = 3;

enum class HeadKind : std::uint8_t { Identity = 0, Linear = 1, Mlp = 2 };
enum class Activation : std::uint8_t { None = 0, Tanh = 1, Relu = 2 };

std::string_view to_string(HeadKind kind);
std::string_view to_string(Activation act);
HeadKind parse_head_kind(std::string_view text);
Activation parse_activation(std::string_view text);

/// One affine map followed by an elementwise activation.
struct Layer {
    Matrix weight; ///< out x in
    std::optional<std::vector<double>> bias;
    Activation activation = Activation::None;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }
    bool operator==(const Layer&) const = default;
};

/// The searching operation applied to a query embedding before it is scored
/// against item embeddings. Identity carries no parameters and no fixed
/// dimensionality.
class SearchHead {
  public:
    static SearchHead identity();
    static SearchHead linear(Matrix weight, std::optional<std::vector<double>> bias = std::nullopt);
    /// Validates layer chaining, depth, final activation and finiteness.
    static SearchHead mlp(std::vector<Layer> layers);

    HeadKind kind() const noexcept { return kind_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    /// nullopt for Identity, which accepts any dimensionality.
    std::optional<std::size_t> in_dim() const;
    std::optional<std::size_t> out_dim() const;

    std::size_t parameter_count() const;
    /// Layer by layer: weights row-major, then bias when present.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);

    /// Throws DimMismatch unless this head maps query_dim to item_dim.
    void check_bridges(std::size_t query_dim, std::size_t item_dim) const;

    bool operator==(const SearchHead&) const = default;

  private:
    SearchHead(HeadKind kind, std::vector<Layer> layers);

    HeadKind kind_ = HeadKind::Identity;
    std::vector<Layer> layers_;
};

struct HeadOptions {
    Activation hidden_activation = Activation::Tanh;
    bool linear_bias = false;
};

/// Deterministic for a fixed seed. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// biases zero. Linear heads carry a bias only when options.linear_bias is set;
/// Mlp layers always do.
SearchHead init_head(HeadKind kind, std::size_t in_dim, std::size_t out_dim,
                     const std::vector<std::size_t>& hidden_dims, std::uint64_t seed,
                     const HeadOptions& options = {});

/// Bias-free linear head with all-zero weights: every query maps to the zero vector.
SearchHead make_zero_head(std::size_t in_dim, std::size_t out_dim);

std::vector<double> apply(const SearchHead& head, std::span<const double> query);
Matrix apply_rows(const SearchHead& head, const Matrix& queries);
EmbeddingMatrix apply_batch(const SearchHead& head, const EmbeddingMatrix& queries);

struct HeadGradient {
    std::vector<Matrix> weights;
    std::vector<std::optional<std::vector<double>>> biases;

    bool empty() const noexcept { return weights.empty(); }
    /// Same ordering as SearchHead::parameters().
    std::vector<double> flatten() const;
};

struct LossAndGradient {
    double loss = 0.0;
    HeadGradient grad;
};

/// In-batch InfoNCE over scores <head(queries_i), positives_j> and its exact
/// gradient with respect to every head parameter. Row i of `positives` is the
/// positive for row i of `queries`; the other rows act as negatives.
LossAndGradient gradients(const SearchHead& head, const Matrix& queries, const Matrix& positives,
                          double temperature);

std::string encode_head(const SearchHead& head);
SearchHead decode_head(std::string_view bytes);
void save_head(const SearchHead& head, const std::filesystem::path& path);
SearchHead load_head(const std::filesystem::path& path);

} // namespace sepsearch
