#pragma once

#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace centaurus {

enum class Dtype { Real32, Real64, Complex64, Complex128 };

inline bool is_complex(Dtype d) {
  return d == Dtype::Complex64 || d == Dtype::Complex128;
}

inline std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::Real32: return sizeof(float);
    case Dtype::Real64: return sizeof(double);
    case Dtype::Complex64: return sizeof(std::complex<float>);
    case Dtype::Complex128: return sizeof(std::complex<double>);
  }
  return 0;
}

inline const char* dtype_name(Dtype d) {
  switch (d) {
    case Dtype::Real32: return "real32";
    case Dtype::Real64: return "real64";
    case Dtype::Complex64: return "complex64";
    case Dtype::Complex128: return "complex128";
  }
  return "?";
}

/// Dtype of the product of two scalars (complex wins, wider precision wins).
inline Dtype promote(Dtype a, Dtype b) {
  bool cplx = is_complex(a) || is_complex(b);
  bool wide = (a == Dtype::Real64 || a == Dtype::Complex128 ||
               b == Dtype::Real64 || b == Dtype::Complex128);
  if (cplx) return wide ? Dtype::Complex128 : Dtype::Complex64;
  return wide ? Dtype::Real64 : Dtype::Real32;
}

/// Multiply-add accumulator. `scalar_multiply_adds` counts MAC units; `flops`
/// weights them by operand dtypes (real*real = 2, real*complex = 4,
/// complex*complex = 8; one complex multiply alone is 6).
struct FlopCounter {
  std::uint64_t scalar_multiply_adds = 0;
  std::uint64_t flops = 0;

  void add_macs(std::uint64_t macs, Dtype a, Dtype b) {
    scalar_multiply_adds += macs;
    flops += macs * mac_flops(a, b);
  }
  void add_flops(std::uint64_t f) { flops += f; }

  static std::uint64_t mac_flops(Dtype a, Dtype b) {
    int c = (is_complex(a) ? 1 : 0) + (is_complex(b) ? 1 : 0);
    switch (c) {
      case 0: return 2;
      case 1: return 4;
      default: return 8;
    }
  }
};

/// Dense row-major tensor over one of four scalar types. Copies are cheap
/// enough at the scales this library targets; there are no strided views.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::int64_t> extents, Dtype dtype)
      : extents_(std::move(extents)), dtype_(dtype) {
    for (auto e : extents_)
      if (e < 0) throw std::invalid_argument("tensor: negative extent");
    buf_.assign(numel() * dtype_size(dtype), std::byte{0});
  }

  static Tensor scalar(double v) {
    Tensor t({}, Dtype::Real64);
    t.at_real64()[0] = v;
    return t;
  }

  const std::vector<std::int64_t>& extents() const { return extents_; }
  std::int64_t extent(std::size_t axis) const { return extents_.at(axis); }
  std::size_t ndim() const { return extents_.size(); }
  Dtype dtype() const { return dtype_; }

  /// False for a default-constructed tensor (no storage). A rank-0 tensor
  /// built through the extents constructor holds one element and is defined.
  bool defined() const { return !buf_.empty(); }

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto e : extents_) n *= static_cast<std::size_t>(e);
    return n;
  }

  /// Row-major strides, in elements.
  std::vector<std::int64_t> strides() const {
    std::vector<std::int64_t> s(extents_.size(), 1);
    for (int i = static_cast<int>(extents_.size()) - 2; i >= 0; --i)
      s[i] = s[i + 1] * extents_[i + 1];
    return s;
  }

  template <typename T>
  std::span<T> data() {
    check_type<T>();
    return {reinterpret_cast<T*>(buf_.data()), numel()};
  }
  template <typename T>
  std::span<const T> data() const {
    check_type<T>();
    return {reinterpret_cast<const T*>(buf_.data()), numel()};
  }

  std::span<double> at_real64() { return data<double>(); }
  std::span<const double> at_real64() const { return data<double>(); }
  std::span<std::complex<double>> at_complex128() {
    return data<std::complex<double>>();
  }
  std::span<const std::complex<double>> at_complex128() const {
    return data<std::complex<double>>();
  }

  /// Reads element (any dtype) as complex<double>.
  std::complex<double> get_as_complex(std::size_t flat) const {
    switch (dtype_) {
      case Dtype::Real32: return {static_cast<double>(data<float>()[flat]), 0.0};
      case Dtype::Real64: return {data<double>()[flat], 0.0};
      case Dtype::Complex64: {
        auto v = data<std::complex<float>>()[flat];
        return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
      }
      case Dtype::Complex128: return data<std::complex<double>>()[flat];
    }
    return {};
  }

  double get_as_real(std::size_t flat) const {
    auto v = get_as_complex(flat);
    return v.real();
  }

  void set_from_complex(std::size_t flat, std::complex<double> v) {
    switch (dtype_) {
      case Dtype::Real32: data<float>()[flat] = static_cast<float>(v.real()); break;
      case Dtype::Real64: data<double>()[flat] = v.real(); break;
      case Dtype::Complex64:
        data<std::complex<float>>()[flat] = {static_cast<float>(v.real()),
                                             static_cast<float>(v.imag())};
        break;
      case Dtype::Complex128: data<std::complex<double>>()[flat] = v; break;
    }
  }

  /// Same data reinterpreted under new extents (element count must match).
  Tensor reshaped(std::vector<std::int64_t> new_extents) const {
    Tensor out(std::move(new_extents), dtype_);
    if (out.numel() != numel())
      throw std::invalid_argument("reshape: element count mismatch");
    out.buf_ = buf_;
    return out;
  }

  Tensor astype(Dtype target) const;

  bool same_shape(const Tensor& o) const { return extents_ == o.extents_; }

 private:
  template <typename T>
  void check_type() const {
    bool ok = false;
    if constexpr (std::is_same_v<T, float>) ok = dtype_ == Dtype::Real32;
    else if constexpr (std::is_same_v<T, double>) ok = dtype_ == Dtype::Real64;
    else if constexpr (std::is_same_v<T, std::complex<float>>) ok = dtype_ == Dtype::Complex64;
    else if constexpr (std::is_same_v<T, std::complex<double>>) ok = dtype_ == Dtype::Complex128;
    if (!ok) throw std::logic_error(std::string("tensor: bad element access for ") + dtype_name(dtype_));
  }

  std::vector<std::int64_t> extents_;
  Dtype dtype_ = Dtype::Real64;
  std::vector<std::byte> buf_;
};

/// Elementwise helpers used across the library; all return fresh tensors.
Tensor permuted(const Tensor& t, const std::vector<int>& axis_order);
Tensor real_part(const Tensor& t);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& t);

}  // namespace centaurus
