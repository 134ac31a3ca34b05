#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace qlab::fft {

using cplx = std::complex<double>;

enum class Direction { forward, backward };

// Unnormalized in-place transforms (FFTW sign convention: forward uses e^{-i}).
// Planning is serialized internally; execution is reentrant.
void transform_1d(std::span<cplx> data, Direction dir);
void transform_2d(std::span<cplx> data, std::size_t n, Direction dir);

/// Signed frequency index for DFT slot `idx` of an `n`-point transform.
inline long signed_index(std::size_t idx, std::size_t n) {
    return idx < n / 2 ? static_cast<long>(idx) : static_cast<long>(idx) - static_cast<long>(n);
}

}  // namespace qlab::fft
