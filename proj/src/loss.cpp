#include "sepsearch/loss.hpp"

#include "sepsearch/error.hpp"

#include <algorithm>
#include <cmath>

namespace sepsearch {

namespace {

void check_input(const Matrix& scores, double temperature) {
    if (scores.rows() == 0 || scores.rows() != scores.cols()) {
        throw Error(ErrorCode::DimMismatch, "score matrix must be square and non-empty");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorCode::BadParams, "temperature must be positive");
    }
    for (double s : scores.values()) {
        if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "non-finite score");
    }
}

// Loss contribution of one row; fills `probs` with the row softmax when given.
double row_loss(std::span<const double> row, std::size_t positive, double temperature, std::span<double> probs) {
    double max_logit = row[0] / temperature;
    for (double s : row) max_logit = std::max(max_logit, s / temperature);
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
        const double e = std::exp(row[j] / temperature - max_logit);
        if (!probs.empty()) probs[j] = e;
        sum += e;
    }
    if (!probs.empty()) {
        for (double& p : probs) p /= sum;
    }
    return std::log(sum) + (max_logit - row[positive] / temperature);
}

} // namespace

double info_nce_loss(const Matrix& scores, double temperature) {
    check_input(scores, temperature);
    double total = 0.0;
    for (std::size_t i = 0; i < scores.rows(); ++i) total += row_loss(scores.row(i), i, temperature, {});
    const double loss = total / static_cast<double>(scores.rows());
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFinite, "loss is not finite");
    return loss;
}

InfoNceResult info_nce_loss_with_gradient(const Matrix& scores, double temperature) {
    check_input(scores, temperature);
    const std::size_t n = scores.rows();
    InfoNceResult out{0.0, Matrix(n, n)};
    const double scale = 1.0 / (temperature * static_cast<double>(n));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto grad_row = out.d_scores.row(i);
        total += row_loss(scores.row(i), i, temperature, grad_row);
        grad_row[i] -= 1.0;
        for (double& g : grad_row) g *= scale;
    }
    out.loss = total / static_cast<double>(n);
    if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFinite, "loss is not finite");
    return out;
}

} // namespace sepsearch
