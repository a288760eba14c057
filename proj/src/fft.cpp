#include "centaurus/fft.hpp"

#include <cmath>
#include <numbers>

namespace centaurus {

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_radix2(std::complex<double>* a, std::size_t n, bool inverse) {
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Arbitrary-length DFT as a convolution with a chirp, done with two
// power-of-two FFTs.
void fft_bluestein(std::complex<double>* a, std::size_t n, bool inverse) {
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<std::complex<double>> chirp(n), fa(m), fb(m);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = (inverse ? 1.0 : -1.0) * kPi * static_cast<double>(k2) /
                       static_cast<double>(n);
    chirp[k] = {std::cos(ang), std::sin(ang)};
  }
  for (std::size_t k = 0; k < n; ++k) fa[k] = a[k] * chirp[k];
  fb[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k)
    fb[k] = fb[m - k] = std::conj(chirp[k]);
  fft_radix2(fa.data(), m, false);
  fft_radix2(fb.data(), m, false);
  for (std::size_t k = 0; k < m; ++k) fa[k] *= fb[k];
  fft_radix2(fa.data(), m, true);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = fa[k] * inv_m * chirp[k];
}

}  // namespace

void fft_inplace(std::complex<double>* data, std::size_t n, bool inverse) {
  if (n <= 1) return;
  if (is_pow2(n)) fft_radix2(data, n, inverse);
  else fft_bluestein(data, n, inverse);
}

namespace {

// Moves `axis` to the last position; returns the permutation used.
std::vector<int> axis_to_last(std::size_t ndim, std::size_t axis) {
  std::vector<int> order;
  for (std::size_t d = 0; d < ndim; ++d)
    if (d != axis) order.push_back(static_cast<int>(d));
  order.push_back(static_cast<int>(axis));
  return order;
}

std::vector<int> inverse_perm(const std::vector<int>& p) {
  std::vector<int> inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[p[i]] = static_cast<int>(i);
  return inv;
}

}  // namespace

Tensor rfft(const Tensor& x, std::size_t time_axis, std::int64_t padded_len) {
  if (is_complex(x.dtype())) throw std::invalid_argument("rfft: input must be real");
  if (time_axis >= x.ndim()) throw std::invalid_argument("rfft: bad axis");
  const std::int64_t len = x.extent(time_axis);
  if (padded_len < len)
    throw std::invalid_argument("rfft: padded_len shorter than signal");

  const auto order = axis_to_last(x.ndim(), time_axis);
  Tensor moved = permuted(x, order);

  const std::int64_t modes = padded_len / 2 + 1;
  std::vector<std::int64_t> out_ext = moved.extents();
  out_ext.back() = modes;
  const Dtype out_dtype =
      (x.dtype() == Dtype::Real32) ? Dtype::Complex64 : Dtype::Complex128;
  Tensor out(out_ext, out_dtype);

  const std::size_t lanes = moved.numel() / std::max<std::size_t>(1, len);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(padded_len));
  for (std::size_t lane = 0; lane < (len > 0 ? lanes : 0); ++lane) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (std::int64_t t = 0; t < len; ++t)
      buf[static_cast<std::size_t>(t)] =
          moved.get_as_complex(lane * len + static_cast<std::size_t>(t));
    fft_inplace(buf.data(), static_cast<std::size_t>(padded_len), false);
    for (std::int64_t f = 0; f < modes; ++f)
      out.set_from_complex(lane * modes + static_cast<std::size_t>(f),
                           buf[static_cast<std::size_t>(f)]);
  }

  const auto inv = inverse_perm(order);
  return permuted(out, inv);
}

Tensor irfft(const Tensor& X, std::size_t freq_axis, std::int64_t out_len) {
  if (!is_complex(X.dtype()))
    throw std::invalid_argument("irfft: input must be complex");
  if (freq_axis >= X.ndim()) throw std::invalid_argument("irfft: bad axis");
  const std::int64_t modes = X.extent(freq_axis);
  if (modes < 1) throw std::invalid_argument("irfft: inconsistent mode count");
  const std::int64_t padded = 2 * (modes - 1);
  if (padded == 0)
    throw std::invalid_argument("irfft: inconsistent mode count (needs >= 2 modes)");
  if (out_len > padded)
    throw std::invalid_argument("irfft: out_len exceeds padded length");

  const auto order = axis_to_last(X.ndim(), freq_axis);
  Tensor moved = permuted(X, order);

  std::vector<std::int64_t> out_ext = moved.extents();
  out_ext.back() = out_len;
  const Dtype out_dtype =
      (X.dtype() == Dtype::Complex64) ? Dtype::Real32 : Dtype::Real64;
  Tensor out(out_ext, out_dtype);

  const std::size_t lanes = moved.numel() / static_cast<std::size_t>(modes);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(padded));
  const double inv_p = 1.0 / static_cast<double>(padded);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    for (std::int64_t f = 0; f < modes; ++f)
      buf[static_cast<std::size_t>(f)] =
          moved.get_as_complex(lane * modes + static_cast<std::size_t>(f));
    for (std::int64_t f = 1; f < modes - 1; ++f)
      buf[static_cast<std::size_t>(padded - f)] =
          std::conj(buf[static_cast<std::size_t>(f)]);
    fft_inplace(buf.data(), static_cast<std::size_t>(padded), true);
    for (std::int64_t t = 0; t < out_len; ++t)
      out.set_from_complex(
          lane * static_cast<std::size_t>(out_len) + static_cast<std::size_t>(t),
          {buf[static_cast<std::size_t>(t)].real() * inv_p, 0.0});
  }

  const auto inv = inverse_perm(order);
  return permuted(out, inv);
}

Tensor dft_matrix(std::int64_t t) {
  if (t < 1) throw std::invalid_argument("dft_matrix: T must be >= 1");
  Tensor out({t, t}, Dtype::Complex128);
  auto d = out.at_complex128();
  for (std::int64_t row = 0; row < t; ++row)
    for (std::int64_t col = 0; col < t; ++col) {
      const double ang =
          -2.0 * kPi * static_cast<double>((row * col) % t) / static_cast<double>(t);
      d[static_cast<std::size_t>(row * t + col)] = {std::cos(ang), std::sin(ang)};
    }
  return out;
}

}  // namespace centaurus
