#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace otstab {

using Complex = std::complex<double>;

/// Small dense complex matrix, row-major.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static CMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    CMatrix transpose() const;
    CMatrix adjoint() const;

    friend CMatrix operator*(const CMatrix& a, const CMatrix& b);
    friend CMatrix operator+(const CMatrix& a, const CMatrix& b);
    friend CMatrix operator-(const CMatrix& a, const CMatrix& b);

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<Complex> data_;
};

/// LU factorization with partial pivoting; throws ill-conditioned on an exact zero pivot.
class LuFactor {
public:
    explicit LuFactor(CMatrix a);
    std::vector<Complex> solve(std::span<const Complex> rhs) const;
    CMatrix inverse() const;

private:
    CMatrix lu_;
    std::vector<std::size_t> perm_;
};

/// Singular values in descending order (one-sided Jacobi on the columns).
std::vector<double> singular_values(const CMatrix& a);

/// beta(A) = min_{|y|=1} |Ay|.
double smallest_singular_value(const CMatrix& a);

/// Spectral norm |A|_2.
double norm2(const CMatrix& a);

double frobenius_norm(const CMatrix& a);

/// Diagonal-dominance lower bound min|a_jj| - (sum_{j!=l} |a_lj|^2)^{1/2}; may be negative.
double beta_lower_bound(const CMatrix& a);

}  // namespace otstab
