#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace otstab {

/// LDL^T factorization of a symmetric (not necessarily Hermitian) banded
/// matrix without pivoting. Intended for diagonally dominant stencils,
/// including the complex-shifted ones of the time-harmonic modes.
template <class T>
class BandedLdlt {
public:
    BandedLdlt() = default;

    /// `entry(i, j)` returns A(i,j) for i - bandwidth <= j <= i.
    template <class Fn>
    BandedLdlt(std::size_t n, std::size_t bandwidth, Fn&& entry) : n_(n), bw_(bandwidth), band_(n * (bandwidth + 1))
    {
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t j0 = i > bw_ ? i - bw_ : 0;
            for (std::size_t j = j0; j <= i; ++j) at(i, j) = entry(i, j);
        }
        factor();
    }

    std::size_t size() const noexcept { return n_; }

    template <class U>
    void solve_in_place(std::span<U> x) const
    {
        require(x.size() == n_, ErrorCode::shape_mismatch, "banded solve size mismatch");
        for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t j0 = i > bw_ ? i - bw_ : 0;
            U s = x[i];
            for (std::size_t j = j0; j < i; ++j) s -= at(i, j) * x[j];
            x[i] = s;
        }
        for (std::size_t i = 0; i < n_; ++i) x[i] /= at(i, i);
        for (std::size_t i = n_; i-- > 0;) {
            const std::size_t j1 = std::min(n_ - 1, i + bw_);
            U s = x[i];
            for (std::size_t j = i + 1; j <= j1; ++j) s -= at(j, i) * x[j];
            x[i] = s;
        }
    }

private:
    T& at(std::size_t i, std::size_t j) { return band_[i * (bw_ + 1) + (j + bw_ - i)]; }
    const T& at(std::size_t i, std::size_t j) const { return band_[i * (bw_ + 1) + (j + bw_ - i)]; }

    void factor()
    {
        // Column-oriented: L(i,j) stored below the diagonal, D on the diagonal.
        std::vector<T> work(bw_ + 1);
        for (std::size_t j = 0; j < n_; ++j) {
            const std::size_t k0 = j > bw_ ? j - bw_ : 0;
            // w_k = L(j,k) D(k)
            T d = at(j, j);
            for (std::size_t k = k0; k < j; ++k) {
                work[k - k0] = at(j, k) * at(k, k);
                d -= at(j, k) * work[k - k0];
            }
            if (d == T{}) fail(ErrorCode::ill_conditioned, "zero pivot in banded LDL^T");
            at(j, j) = d;
            const std::size_t i1 = std::min(n_ - 1, j + bw_);
            for (std::size_t i = j + 1; i <= i1; ++i) {
                const std::size_t ki = i > bw_ ? i - bw_ : 0;
                T s = at(i, j);
                for (std::size_t k = std::max(k0, ki); k < j; ++k) s -= at(i, k) * work[k - k0];
                at(i, j) = s / d;
            }
        }
    }

    std::size_t n_ = 0, bw_ = 0;
    std::vector<T> band_;
};

}  // namespace otstab
