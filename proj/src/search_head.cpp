#include "sepsearch/search_head.hpp"

#include "binary_io.hpp"
#include "sepsearch/error.hpp"
#include "sepsearch/io.hpp"
#include "sepsearch/loss.hpp"

#include <cmath>
#include <random>

namespace sepsearch {

namespace {

constexpr std::string_view kMagic = "SEPH";

double activate(Activation act, double z) {
    switch (act) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::None: break;
    }
    return z;
}

// Derivative expressed through the pre-activation z and the output y.
double activation_slope(Activation act, double z, double y) {
    switch (act) {
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::None: break;
    }
    return 1.0;
}

void check_finite(const Layer& layer) {
    for (double w : layer.weight.values()) {
        if (!std::isfinite(w)) throw Error(ErrorCode::NonFinite, "non-finite head weight");
    }
    if (layer.bias) {
        for (double b : *layer.bias) {
            if (!std::isfinite(b)) throw Error(ErrorCode::NonFinite, "non-finite head bias");
        }
    }
}

// Applies one layer to every row; keeps the pre-activation when `pre` is given.
Matrix forward_layer(const Layer& layer, const Matrix& x, Matrix* pre) {
    Matrix z = multiply_transposed(x, layer.weight);
    if (layer.bias) {
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto r = z.row(i);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] += (*layer.bias)[j];
        }
    }
    Matrix y = z;
    if (layer.activation != Activation::None) {
        for (double& v : y.values()) v = activate(layer.activation, v);
    }
    if (pre) *pre = std::move(z);
    return y;
}

} // namespace

std::string_view to_string(HeadKind kind) {
    switch (kind) {
    case HeadKind::Identity: return "identity";
    case HeadKind::Linear: return "linear";
    case HeadKind::Mlp: return "mlp";
    }
    return "?";
}

std::string_view to_string(Activation act) {
    switch (act) {
    case Activation::None: return "none";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    }
    return "?";
}

HeadKind parse_head_kind(std::string_view text) {
    if (text == "identity") return HeadKind::Identity;
    if (text == "linear") return HeadKind::Linear;
    if (text == "mlp") return HeadKind::Mlp;
    throw Error(ErrorCode::ParseError, "unknown head kind '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
    if (text == "none") return Activation::None;
    if (text == "tanh") return Activation::Tanh;
    if (text == "relu") return Activation::Relu;
    throw Error(ErrorCode::ParseError, "unknown activation '" + std::string(text) + "'");
}

SearchHead::SearchHead(HeadKind kind, std::vector<Layer> layers) : kind_(kind), layers_(std::move(layers)) {}

SearchHead SearchHead::identity() { return SearchHead(HeadKind::Identity, {}); }

SearchHead SearchHead::linear(Matrix weight, std::optional<std::vector<double>> bias) {
    if (weight.rows() == 0 || weight.cols() == 0) throw Error(ErrorCode::BadShape, "linear weight must be non-empty");
    if (bias && bias->size() != weight.rows()) throw Error(ErrorCode::BadShape, "bias length != output dim");
    Layer layer{std::move(weight), std::move(bias), Activation::None};
    check_finite(layer);
    std::vector<Layer> layers;
    layers.push_back(std::move(layer));
    return SearchHead(HeadKind::Linear, std::move(layers));
}

SearchHead SearchHead::mlp(std::vector<Layer> layers) {
    if (layers.empty() || layers.size() > kMaxHeadLayers) {
        throw Error(ErrorCode::BadShape, "mlp needs 1 to 3 layers");
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& layer = layers[k];
        if (layer.in_dim() == 0 || layer.out_dim() == 0) throw Error(ErrorCode::BadShape, "empty layer");
        if (k > 0 && layer.in_dim() != layers[k - 1].out_dim()) {
            throw Error(ErrorCode::BadShape, "layer " + std::to_string(k) + " input does not chain");
        }
        if (layer.bias && layer.bias->size() != layer.out_dim()) {
            throw Error(ErrorCode::BadShape, "bias length != output dim");
        }
        check_finite(layer);
    }
    if (layers.back().activation != Activation::None) {
        throw Error(ErrorCode::BadShape, "final layer activation must be none");
    }
    return SearchHead(HeadKind::Mlp, std::move(layers));
}

std::optional<std::size_t> SearchHead::in_dim() const {
    if (layers_.empty()) return std::nullopt;
    return layers_.front().in_dim();
}

std::optional<std::size_t> SearchHead::out_dim() const {
    if (layers_.empty()) return std::nullopt;
    return layers_.back().out_dim();
}

std::size_t SearchHead::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weight.values().size() + (layer.bias ? layer.bias->size() : 0);
    return n;
}

std::vector<double> SearchHead::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& layer : layers_) {
        out.insert(out.end(), layer.weight.values().begin(), layer.weight.values().end());
        if (layer.bias) out.insert(out.end(), layer.bias->begin(), layer.bias->end());
    }
    return out;
}

void SearchHead::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw Error(ErrorCode::ShapeMismatch, "parameter count mismatch");
    std::size_t pos = 0;
    for (auto& layer : layers_) {
        for (double& w : layer.weight.values()) w = values[pos++];
        if (layer.bias) {
            for (double& b : *layer.bias) b = values[pos++];
        }
    }
}

void SearchHead::check_bridges(std::size_t query_dim, std::size_t item_dim) const {
    if (kind_ == HeadKind::Identity) {
        if (query_dim != item_dim) {
            throw Error(ErrorCode::DimMismatch, "identity head needs equal query and item dims (" +
                                                    std::to_string(query_dim) + " vs " + std::to_string(item_dim) + ")");
        }
        return;
    }
    if (*in_dim() != query_dim || *out_dim() != item_dim) {
        throw Error(ErrorCode::DimMismatch, "head maps " + std::to_string(*in_dim()) + "->" +
                                                std::to_string(*out_dim()) + ", data needs " +
                                                std::to_string(query_dim) + "->" + std::to_string(item_dim));
    }
}

SearchHead init_head(HeadKind kind, std::size_t in_dim, std::size_t out_dim,
                     const std::vector<std::size_t>& hidden_dims, std::uint64_t seed, const HeadOptions& options) {
    if (in_dim == 0 || out_dim == 0) throw Error(ErrorCode::BadShape, "dims must be positive");
    for (auto h : hidden_dims) {
        if (h == 0) throw Error(ErrorCode::BadShape, "hidden dims must be positive");
    }
    if (kind == HeadKind::Identity) {
        if (in_dim != out_dim || !hidden_dims.empty()) {
            throw Error(ErrorCode::BadShape, "identity requires in_dim == out_dim and no hidden layers");
        }
        return SearchHead::identity();
    }

    std::mt19937_64 rng(seed);
    auto draw_layer = [&](std::size_t fan_in, std::size_t fan_out, bool with_bias, Activation act) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Layer layer{Matrix(fan_out, fan_in), std::nullopt, act};
        for (double& w : layer.weight.values()) w = dist(rng);
        if (with_bias) layer.bias = std::vector<double>(fan_out, 0.0);
        return layer;
    };

    if (kind == HeadKind::Linear) {
        if (!hidden_dims.empty()) throw Error(ErrorCode::BadShape, "linear head takes no hidden layers");
        Layer layer = draw_layer(in_dim, out_dim, options.linear_bias, Activation::None);
        return SearchHead::linear(std::move(layer.weight), std::move(layer.bias));
    }

    if (hidden_dims.empty() || hidden_dims.size() + 1 > kMaxHeadLayers) {
        throw Error(ErrorCode::BadShape, "mlp needs 1 or 2 hidden layers");
    }
    if (options.hidden_activation == Activation::None) {
        throw Error(ErrorCode::BadShape, "mlp hidden activation must be tanh or relu");
    }
    std::vector<Layer> layers;
    std::size_t prev = in_dim;
    for (auto h : hidden_dims) {
        layers.push_back(draw_layer(prev, h, true, options.hidden_activation));
        prev = h;
    }
    layers.push_back(draw_layer(prev, out_dim, true, Activation::None));
    return SearchHead::mlp(std::move(layers));
}

SearchHead make_zero_head(std::size_t in_dim, std::size_t out_dim) {
    if (in_dim == 0 || out_dim == 0) throw Error(ErrorCode::BadShape, "dims must be positive");
    return SearchHead::linear(Matrix(out_dim, in_dim, 0.0));
}

std::vector<double> apply(const SearchHead& head, std::span<const double> query) {
    if (head.kind() == HeadKind::Identity) return {query.begin(), query.end()};
    if (query.size() != *head.in_dim()) {
        throw Error(ErrorCode::DimMismatch, "query has dim " + std::to_string(query.size()) + ", head expects " +
                                                std::to_string(*head.in_dim()));
    }
    Matrix x(1, query.size());
    std::copy(query.begin(), query.end(), x.values().begin());
    for (const auto& layer : head.layers()) x = forward_layer(layer, x, nullptr);
    return std::move(x.values());
}

Matrix apply_rows(const SearchHead& head, const Matrix& queries) {
    if (head.kind() == HeadKind::Identity) return queries;
    if (queries.cols() != *head.in_dim()) {
        throw Error(ErrorCode::DimMismatch, "queries have dim " + std::to_string(queries.cols()) +
                                                ", head expects " + std::to_string(*head.in_dim()));
    }
    Matrix x = queries;
    for (const auto& layer : head.layers()) x = forward_layer(layer, x, nullptr);
    return x;
}

EmbeddingMatrix apply_batch(const SearchHead& head, const EmbeddingMatrix& queries) {
    return EmbeddingMatrix(queries.ids(), apply_rows(head, queries.data()));
}

std::vector<double> HeadGradient::flatten() const {
    std::vector<double> out;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        out.insert(out.end(), weights[k].values().begin(), weights[k].values().end());
        if (biases[k]) out.insert(out.end(), biases[k]->begin(), biases[k]->end());
    }
    return out;
}

LossAndGradient gradients(const SearchHead& head, const Matrix& queries, const Matrix& positives,
                          double temperature) {
    if (queries.rows() != positives.rows()) throw Error(ErrorCode::DimMismatch, "batch sizes differ");
    if (queries.rows() == 0) throw Error(ErrorCode::DimMismatch, "empty batch");
    head.check_bridges(queries.cols(), positives.cols());

    // Forward pass, keeping each layer's input and pre-activation.
    const auto& layers = head.layers();
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre(layers.size());
    inputs.reserve(layers.size() + 1);
    inputs.push_back(queries);
    for (std::size_t k = 0; k < layers.size(); ++k) inputs.push_back(forward_layer(layers[k], inputs.back(), &pre[k]));

    const Matrix scores = multiply_transposed(inputs.back(), positives);
    InfoNceResult nce = info_nce_loss_with_gradient(scores, temperature);

    LossAndGradient out;
    out.loss = nce.loss;
    if (layers.empty()) return out;

    out.grad.weights.resize(layers.size());
    out.grad.biases.resize(layers.size());
    // dLoss/d(head output) = dS * P
    Matrix upstream = multiply(nce.d_scores, positives);
    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& layer = layers[k];
        if (layer.activation != Activation::None) {
            const Matrix& y = inputs[k + 1];
            for (std::size_t i = 0; i < upstream.values().size(); ++i) {
                upstream.values()[i] *= activation_slope(layer.activation, pre[k].values()[i], y.values()[i]);
            }
        }
        out.grad.weights[k] = transposed_multiply(upstream, inputs[k]);
        if (layer.bias) {
            std::vector<double> db(layer.out_dim(), 0.0);
            for (std::size_t i = 0; i < upstream.rows(); ++i) {
                auto r = upstream.row(i);
                for (std::size_t j = 0; j < r.size(); ++j) db[j] += r[j];
            }
            out.grad.biases[k] = std::move(db);
        }
        if (k > 0) upstream = multiply(upstream, layer.weight);
    }
    for (double g : out.grad.flatten()) {
        if (!std::isfinite(g)) throw Error(ErrorCode::NonFinite, "non-finite gradient");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string encode_head(const SearchHead& head) {
    detail::ByteWriter w;
    w.bytes(kMagic);
    w.put<std::uint32_t>(kHeadFormatVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(head.kind()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(head.layers().size()));
    for (const auto& layer : head.layers()) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.in_dim()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.out_dim()));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(layer.activation));
        for (double v : layer.weight.values()) w.put<double>(v);
        w.put<std::uint8_t>(layer.bias ? 1 : 0);
        if (layer.bias) {
            for (double v : *layer.bias) w.put<double>(v);
        }
    }
    return std::move(w.buffer());
}

SearchHead decode_head(std::string_view bytes) {
    if (bytes.size() < 4 || bytes.substr(0, 4) != kMagic) throw Error(ErrorCode::BadMagic, "expected SEPH");
    detail::ByteReader r(bytes, ErrorCode::ShapeMismatch);
    r.bytes(4);
    if (const auto version = r.get<std::uint32_t>(); version != kHeadFormatVersion) {
        throw Error(ErrorCode::ShapeMismatch, "unsupported head version " + std::to_string(version));
    }
    const auto kind_tag = r.get<std::uint8_t>();
    const auto layer_count = r.get<std::uint8_t>();
    if (kind_tag > static_cast<std::uint8_t>(HeadKind::Mlp)) throw Error(ErrorCode::ShapeMismatch, "bad kind tag");
    const auto kind = static_cast<HeadKind>(kind_tag);

    std::vector<Layer> layers;
    for (std::uint8_t k = 0; k < layer_count; ++k) {
        const auto in = r.get<std::uint32_t>();
        const auto out = r.get<std::uint32_t>();
        const auto act = r.get<std::uint8_t>();
        if (act > static_cast<std::uint8_t>(Activation::Relu)) throw Error(ErrorCode::ShapeMismatch, "bad activation");
        if (in == 0 || out == 0) throw Error(ErrorCode::ShapeMismatch, "zero layer dim");
        if (std::uint64_t{in} * out * 8 > r.remaining()) throw Error(ErrorCode::ShapeMismatch, "truncated weights");
        Layer layer{Matrix(out, in), std::nullopt, static_cast<Activation>(act)};
        for (double& v : layer.weight.values()) v = r.get<double>();
        if (r.get<std::uint8_t>() != 0) {
            layer.bias = std::vector<double>(out);
            for (double& v : *layer.bias) v = r.get<double>();
        }
        layers.push_back(std::move(layer));
    }
    if (r.remaining() != 0) throw Error(ErrorCode::ShapeMismatch, "trailing bytes in head checkpoint");

    try {
        switch (kind) {
        case HeadKind::Identity:
            if (!layers.empty()) throw Error(ErrorCode::ShapeMismatch, "identity head with layers");
            return SearchHead::identity();
        case HeadKind::Linear:
            if (layers.size() != 1 || layers[0].activation != Activation::None) {
                throw Error(ErrorCode::ShapeMismatch, "linear head must be one layer without activation");
            }
            return SearchHead::linear(std::move(layers[0].weight), std::move(layers[0].bias));
        case HeadKind::Mlp:
            return SearchHead::mlp(std::move(layers));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BadShape) throw Error(ErrorCode::ShapeMismatch, e.what());
        throw;
    }
    throw Error(ErrorCode::ShapeMismatch, "unreachable head kind");
}

void save_head(const SearchHead& head, const std::filesystem::path& path) {
    write_file_atomic(path, encode_head(head));
}

SearchHead load_head(const std::filesystem::path& path) { return decode_head(read_file(path)); }

} // namespace sepsearch
