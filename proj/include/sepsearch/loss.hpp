#pragma once

#include "sepsearch/matrix.hpp"

namespace sepsearch {

/// In-batch InfoNCE: mean over rows i of -log softmax_j(s_ij / tau)[i].
/// Diagonal entries are the positive pairs. Row maxima are subtracted before
/// exponentiation. Throws NonFinite on non-finite input or result.
double info_nce_loss(const Matrix& scores, double temperature);

struct InfoNceResult {
    double loss = 0.0;
    Matrix d_scores; ///< dLoss/dscores, same shape as the score matrix
};

InfoNceResult info_nce_loss_with_gradient(const Matrix& scores, double temperature);

} // namespace sepsearch
