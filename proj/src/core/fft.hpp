#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace otstab {

/// Unnormalized 2-D complex DFT over an n0 x n1 row-major array.
/// Plans are built under a global lock; execution is reentrant.
class Fft2D {
public:
    Fft2D(std::size_t n0, std::size_t n1);
    ~Fft2D();
    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    void forward(std::span<std::complex<double>> data) const;
    void inverse(std::span<std::complex<double>> data) const;  // includes the 1/(n0 n1) factor

private:
    std::size_t n0_, n1_;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

}  // namespace otstab
