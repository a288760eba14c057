#include "centaurus/tensor.hpp"

#include <cmath>

namespace centaurus {

Tensor Tensor::astype(Dtype target) const {
  if (target == dtype_) return *this;
  Tensor out(extents_, target);
  const std::size_t n = numel();
  if (!is_complex(target) && is_complex(dtype_))
    throw std::invalid_argument("astype: refusing silent complex->real narrowing");
  for (std::size_t i = 0; i < n; ++i) out.set_from_complex(i, get_as_complex(i));
  return out;
}

Tensor permuted(const Tensor& t, const std::vector<int>& axis_order) {
  if (axis_order.size() != t.ndim())
    throw std::invalid_argument("permute: axis count mismatch");
  std::vector<std::int64_t> new_ext(t.ndim());
  for (std::size_t i = 0; i < axis_order.size(); ++i)
    new_ext[i] = t.extent(static_cast<std::size_t>(axis_order[i]));
  Tensor out(new_ext, t.dtype());
  if (t.numel() == 0) return out;
  const auto src_strides = t.strides();
  std::vector<std::int64_t> idx(t.ndim(), 0);
  const std::size_t n = t.numel();
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::int64_t src = 0;
    for (std::size_t d = 0; d < idx.size(); ++d)
      src += idx[d] * src_strides[static_cast<std::size_t>(axis_order[d])];
    out.set_from_complex(flat, t.get_as_complex(static_cast<std::size_t>(src)));
    for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
      if (++idx[d] < new_ext[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

Tensor real_part(const Tensor& t) {
  Dtype target = (t.dtype() == Dtype::Complex64) ? Dtype::Real32
               : (t.dtype() == Dtype::Complex128) ? Dtype::Real64
                                                  : t.dtype();
  Tensor out(t.extents(), target);
  for (std::size_t i = 0; i < t.numel(); ++i)
    out.set_from_complex(i, {t.get_as_complex(i).real(), 0.0});
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(a.extents(), promote(a.dtype(), b.dtype()));
  for (std::size_t i = 0; i < a.numel(); ++i)
    out.set_from_complex(i, a.get_as_complex(i) + b.get_as_complex(i));
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.extents(), a.dtype());
  for (std::size_t i = 0; i < a.numel(); ++i)
    out.set_from_complex(i, a.get_as_complex(i) * s);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.get_as_complex(i) - b.get_as_complex(i)));
  return m;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.numel(); ++i)
    m = std::max(m, std::abs(t.get_as_complex(i)));
  return m;
}

}  // namespace centaurus
