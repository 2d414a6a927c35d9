#include "core/dense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace otstab {

CMatrix CMatrix::identity(std::size_t n)
{
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::transpose() const
{
    CMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

CMatrix CMatrix::adjoint() const
{
    CMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = std::conj((*this)(r, c));
    return t;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b)
{
    require(a.cols_ == b.rows_, ErrorCode::shape_mismatch, "matrix product shape mismatch");
    CMatrix p(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const Complex aik = a(i, k);
            for (std::size_t j = 0; j < b.cols_; ++j) p(i, j) += aik * b(k, j);
        }
    return p;
}

CMatrix operator+(const CMatrix& a, const CMatrix& b)
{
    require(a.rows_ == b.rows_ && a.cols_ == b.cols_, ErrorCode::shape_mismatch, "matrix sum shape mismatch");
    CMatrix s = a;
    for (std::size_t i = 0; i < s.data_.size(); ++i) s.data_[i] += b.data_[i];
    return s;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b)
{
    require(a.rows_ == b.rows_ && a.cols_ == b.cols_, ErrorCode::shape_mismatch, "matrix difference shape mismatch");
    CMatrix s = a;
    for (std::size_t i = 0; i < s.data_.size(); ++i) s.data_[i] -= b.data_[i];
    return s;
}

LuFactor::LuFactor(CMatrix a) : lu_(std::move(a)), perm_(lu_.rows())
{
    const std::size_t n = lu_.rows();
    require(n == lu_.cols(), ErrorCode::shape_mismatch, "LU needs a square matrix");
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(lu_(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu_(i, k)) > best) {
                best = std::abs(lu_(i, k));
                piv = i;
            }
        if (best == 0.0) fail(ErrorCode::ill_conditioned, "singular matrix in LU factorization");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
            std::swap(perm_[k], perm_[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const Complex f = lu_(i, k) / lu_(k, k);
            lu_(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
        }
    }
}

std::vector<Complex> LuFactor::solve(std::span<const Complex> rhs) const
{
    const std::size_t n = lu_.rows();
    require(rhs.size() == n, ErrorCode::shape_mismatch, "LU solve rhs size mismatch");
    std::vector<Complex> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
        x[i] /= lu_(i, i);
    }
    return x;
}

CMatrix LuFactor::inverse() const
{
    const std::size_t n = lu_.rows();
    CMatrix inv(n, n);
    std::vector<Complex> e(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::fill(e.begin(), e.end(), Complex{});
        e[c] = 1.0;
        const auto col = solve(e);
        for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
    }
    return inv;
}

std::vector<double> singular_values(const CMatrix& a)
{
    // Hestenes one-sided Jacobi: rotate column pairs until mutually orthogonal.
    // Each rotation is the Jacobi rotation that annihilates an off-diagonal
    // entry of A^*A, applied without forming A^*A.
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<std::vector<Complex>> cols(n, std::vector<Complex>(m));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) cols[j][i] = a(i, j);

    const double eps = std::numeric_limits<double>::epsilon();
    for (int sweep = 0; sweep < 80; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0;
                Complex apq{};
                for (std::size_t i = 0; i < m; ++i) {
                    app += std::norm(cols[p][i]);
                    aqq += std::norm(cols[q][i]);
                    apq += std::conj(cols[p][i]) * cols[q][i];
                }
                const double g = std::abs(apq);
                if (g == 0.0 || g <= eps * std::sqrt(app * aqq)) continue;
                rotated = true;
                const Complex phase = apq / g;
                const double zeta = (aqq - app) / (2.0 * g);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const Complex xp = cols[p][i];
                    const Complex xq = cols[q][i] * std::conj(phase);
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = (s * xp + c * xq) * phase;
                }
            }
        if (!rotated) break;
    }
    std::vector<double> sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += std::norm(cols[j][i]);
        sv[j] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

double smallest_singular_value(const CMatrix& a)
{
    require(a.rows() == a.cols(), ErrorCode::shape_mismatch, "smallest_singular_value needs a square matrix");
    if (a.rows() == 0) return 0.0;
    return singular_values(a).back();
}

double norm2(const CMatrix& a)
{
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    return singular_values(a).front();
}

double frobenius_norm(const CMatrix& a)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::norm(a(i, j));
    return std::sqrt(s);
}

double beta_lower_bound(const CMatrix& a)
{
    require(a.rows() == a.cols(), ErrorCode::shape_mismatch, "beta_lower_bound needs a square matrix");
    const std::size_t n = a.rows();
    double min_diag = std::numeric_limits<double>::infinity();
    double off = 0.0;
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t j = 0; j < n; ++j) {
            if (l == j) min_diag = std::min(min_diag, std::abs(a(l, j)));
            else off += std::norm(a(l, j));
        }
    if (n == 0) return 0.0;
    return min_diag - std::sqrt(off);
}

}  // namespace otstab
