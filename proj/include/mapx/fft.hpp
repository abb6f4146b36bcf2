#pragma once

// Minimal RAII wrapper over FFTW for unnormalized 2-D complex transforms.
// Plan creation is serialized (FFTW's planner is not thread-safe); execution
// on distinct buffers is safe to run concurrently.

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <span>
#include <stdexcept>

namespace mapx {

enum class FftDirection : int { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// In-place 2-D DFT of a rows x cols row-major buffer:
/// out[a,b] = sum_{i,k} in[i,k] exp(sign * 2 pi j (a i / rows + b k / cols)),
/// sign = -1 for forward, +1 for backward. No normalization.
inline void fft2_inplace(std::span<std::complex<double>> data, int rows, int cols, FftDirection dir) {
    if (rows <= 0 || cols <= 0 || data.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("fft2_inplace: buffer size does not match shape");
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_2d(rows, cols, buf, buf, static_cast<int>(dir), FFTW_ESTIMATE);
    }
    if (!plan) throw std::runtime_error("fftw_plan_dft_2d failed");
    fftw_execute(plan);
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace mapx
