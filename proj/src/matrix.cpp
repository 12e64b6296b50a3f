#include "sepsearch/matrix.hpp"

namespace sepsearch {

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(ai, b.row(j));
    }
    return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto oi = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < oi.size(); ++j) oi[j] += aik * bk[j];
        }
    }
    return out;
}

Matrix transposed_multiply(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols(), b.cols());
    for (std::size_t n = 0; n < a.rows(); ++n) {
        auto an = a.row(n);
        auto bn = b.row(n);
        for (std::size_t p = 0; p < an.size(); ++p) {
            const double v = an[p];
            if (v == 0.0) continue;
            auto op = out.row(p);
            for (std::size_t q = 0; q < bn.size(); ++q) op[q] += v * bn[q];
        }
    }
    return out;
}

} // namespace sepsearch
