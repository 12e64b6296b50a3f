#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sepsearch {

/// Dense row-major matrix of doubles used for in-memory arithmetic.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Inner product accumulated left to right in double precision.
inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

/// out = a * b^T, with a: n x d and b: m x d.
Matrix multiply_transposed(const Matrix& a, const Matrix& b);

/// out = a * b, with a: n x d and b: d x m.
Matrix multiply(const Matrix& a, const Matrix& b);

/// out = a^T * b, with a: n x p and b: n x q.
Matrix transposed_multiply(const Matrix& a, const Matrix& b);

} // namespace sepsearch
