#pragma once

#include "centaurus/tensor.hpp"

namespace centaurus {

/// In-place complex DFT of length n (any n >= 1; radix-2 when n is a power of
/// two, Bluestein otherwise). Unnormalized forward; `inverse` flips the
/// twiddle sign and applies no scaling.
void fft_inplace(std::complex<double>* data, std::size_t n, bool inverse);

/// Forward real FFT: zero-pads `x` along `time_axis` to `padded_len` and
/// returns the floor(padded_len/2)+1 nonnegative-frequency modes along that
/// axis. Unnormalized (library convention; the inverse carries the 1/P).
Tensor rfft(const Tensor& x, std::size_t time_axis, std::int64_t padded_len);

/// Inverse of rfft: expects floor(P/2)+1 modes along `freq_axis` for an even
/// padded length P, scales by 1/P and truncates to the first `out_len`
/// samples. Output is real.
Tensor irfft(const Tensor& X, std::size_t freq_axis, std::int64_t out_len);

/// T x T matrix with entries exp(-2*pi*i*tau*f/T); the slow-path oracle the
/// FFT routines are tested against.
Tensor dft_matrix(std::int64_t t);

}  // namespace centaurus
