#include "core/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "core/error.hpp"

namespace otstab {

namespace {
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}
}  // namespace

Fft2D::Fft2D(std::size_t n0, std::size_t n1) : n0_(n0), n1_(n1)
{
    std::vector<std::complex<double>> scratch(n0 * n1);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    std::lock_guard lock(planner_mutex());
    // ESTIMATE keeps plan selection independent of timing, hence reproducible.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_plan_ = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), p, p, FFTW_FORWARD, flags);
    inverse_plan_ = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), p, p, FFTW_BACKWARD, flags);
    require(forward_plan_ && inverse_plan_, ErrorCode::internal, "FFTW planning failed");
}

Fft2D::~Fft2D()
{
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void Fft2D::forward(std::span<std::complex<double>> data) const
{
    require(data.size() == n0_ * n1_, ErrorCode::shape_mismatch, "FFT size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), p, p);
}

void Fft2D::inverse(std::span<std::complex<double>> data) const
{
    require(data.size() == n0_ * n1_, ErrorCode::shape_mismatch, "FFT size mismatch");
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), p, p);
    const double scale = 1.0 / static_cast<double>(n0_ * n1_);
    for (auto& z : data) z *= scale;
}

}  // namespace otstab
