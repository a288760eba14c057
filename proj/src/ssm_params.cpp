#include "centaurus/ssm_params.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

namespace centaurus {

namespace {
constexpr double kPi = std::numbers::pi_v<double>;
}

const char* variant_name(SsmVariant v) {
  switch (v) {
    case SsmVariant::Depthwise: return "depthwise";
    case SsmVariant::DepthwiseSeparable: return "depthwise_separable";
    case SsmVariant::Grouped: return "grouped";
    case SsmVariant::PointwiseBottleneck: return "pointwise_bottleneck";
    case SsmVariant::Bottleneck: return "bottleneck";
    case SsmVariant::Full: return "full";
  }
  return "?";
}

SsmVariant variant_from_name(const std::string& name) {
  if (name == "depthwise") return SsmVariant::Depthwise;
  if (name == "depthwise_separable" || name == "dws")
    return SsmVariant::DepthwiseSeparable;
  if (name == "grouped") return SsmVariant::Grouped;
  if (name == "pointwise_bottleneck" || name == "pw_bottleneck" || name == "pw")
    return SsmVariant::PointwiseBottleneck;
  if (name == "bottleneck") return SsmVariant::Bottleneck;
  if (name == "full") return SsmVariant::Full;
  throw std::invalid_argument("unknown block variant '" + name + "'");
}

void SsmBlockSpec::validate() const {
  auto positive = [](std::int64_t v, const char* what) {
    if (v < 1) throw std::invalid_argument(std::string(what) + " must be >= 1");
  };
  positive(channels_in, "H");
  positive(channels_out, "H_out");
  positive(states, "N");
  positive(substates, "M");
  positive(groups, "G");
  positive(seq_len, "L");
  if (variant == SsmVariant::Depthwise && channels_in != channels_out)
    throw std::invalid_argument("depthwise blocks require H == H_out");
  if (variant == SsmVariant::Grouped) {
    if (channels_in % groups != 0)
      throw std::invalid_argument("G must divide H");
    if (channels_out % groups != 0)
      throw std::invalid_argument("G must divide H_out");
  }
  if (variant != SsmVariant::Bottleneck && substates != 1)
    throw std::invalid_argument("M != 1 is only valid for bottleneck blocks");
  if (variant != SsmVariant::Grouped && groups != 1)
    throw std::invalid_argument("G != 1 is only valid for grouped blocks");
}

Tensor zoh_discretize_A(const Tensor& delta, const Tensor& a) {
  const bool scalar_delta = delta.ndim() == 0 || delta.numel() == 1;
  if (!scalar_delta && delta.extents() != a.extents())
    throw std::invalid_argument(
        "zoh_discretize_A: delta shape must match a (pre-expand per variant)");
  Tensor out(a.extents(), Dtype::Complex128);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = delta.get_as_real(scalar_delta ? 0 : i);
    if (d < 0.0)
      throw std::invalid_argument("zoh_discretize_A: delta must be >= 0");
    out.set_from_complex(i, std::exp(d * a.get_as_complex(i)));
  }
  return out;
}

Tensor discretize_B(const Tensor& delta, const Tensor& b) {
  if (delta.ndim() != 1 || b.ndim() != 2 || delta.extent(0) != b.extent(0))
    throw std::invalid_argument("discretize_B: need delta (N) and B (N, H)");
  Tensor out(b.extents(), b.dtype());
  const std::int64_t n = b.extent(0), h = b.extent(1);
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = delta.get_as_real(static_cast<std::size_t>(i));
    for (std::int64_t j = 0; j < h; ++j) {
      const auto flat = static_cast<std::size_t>(i * h + j);
      out.set_from_complex(flat, b.get_as_complex(flat) * d);
    }
  }
  return out;
}

Tensor expand_delta_like_a(const SsmBlockSpec& spec, const Tensor& delta,
                           const Tensor& a) {
  if (delta.extents() == a.extents()) return delta;
  Tensor out(a.extents(), delta.dtype());
  const auto as = a.strides();
  switch (spec.variant) {
    case SsmVariant::Full: {
      // a: (H', H, N), delta: (H, N)
      const std::int64_t hp = a.extent(0), h = a.extent(1), n = a.extent(2);
      for (std::int64_t j = 0; j < hp; ++j)
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t k = 0; k < n; ++k)
            out.set_from_complex(
                static_cast<std::size_t>(j * as[0] + i * as[1] + k),
                delta.get_as_complex(static_cast<std::size_t>(i * n + k)));
      return out;
    }
    case SsmVariant::Grouped: {
      // a: (G, H'/G, H/G, N), delta: (G, H/G, N)
      const std::int64_t g = a.extent(0), jp = a.extent(1), ip = a.extent(2),
                         n = a.extent(3);
      for (std::int64_t gg = 0; gg < g; ++gg)
        for (std::int64_t j = 0; j < jp; ++j)
          for (std::int64_t i = 0; i < ip; ++i)
            for (std::int64_t k = 0; k < n; ++k)
              out.set_from_complex(
                  static_cast<std::size_t>(gg * as[0] + j * as[1] + i * as[2] + k),
                  delta.get_as_complex(
                      static_cast<std::size_t>((gg * ip + i) * n + k)));
      return out;
    }
    case SsmVariant::Bottleneck: {
      // a: (N, M), delta: (N)
      const std::int64_t n = a.extent(0), m = a.extent(1);
      for (std::int64_t k = 0; k < n; ++k)
        for (std::int64_t mm = 0; mm < m; ++mm)
          out.set_from_complex(static_cast<std::size_t>(k * m + mm),
                               delta.get_as_complex(static_cast<std::size_t>(k)));
      return out;
    }
    default:
      throw std::invalid_argument("expand_delta_like_a: shape mismatch");
  }
}

namespace {

// Accumulates sum over the collapse axis of weight * Re(exp(dt_a * t)) for
// t = 0..length-1. `dt_a` iterates fastest over the collapsed axis.
void fused_kernel_rows(const std::complex<double>* dt_a, const double* weight,
                       std::int64_t rows, std::int64_t collapse,
                       std::int64_t length, double* out) {
  for (std::int64_t r = 0; r < rows; ++r) {
    double* dst = out + r * length;
    std::fill(dst, dst + length, 0.0);
    for (std::int64_t c = 0; c < collapse; ++c) {
      const auto z = dt_a[r * collapse + c];
      const double w = weight ? weight[r * collapse + c] : 1.0;
      for (std::int64_t t = 0; t < length; ++t)
        dst[t] += w * std::exp(z * static_cast<double>(t)).real();
    }
  }
}

}  // namespace

Tensor materialize_kernel(const SsmBlockSpec& spec, const SsmParams& params,
                          std::int64_t length) {
  if (length < 1) throw std::invalid_argument("materialize_kernel: length >= 1");
  const Tensor delta_full = expand_delta_like_a(spec, params.delta, params.a);

  // dt_a = delta * a, elementwise over a's index space.
  std::vector<std::complex<double>> dt_a(params.a.numel());
  for (std::size_t i = 0; i < params.a.numel(); ++i) {
    const double d = delta_full.get_as_real(i);
    if (d < 0.0) throw std::invalid_argument("materialize_kernel: delta < 0");
    dt_a[i] = params.a.get_as_complex(i) * d;
  }

  std::vector<double> weights;
  const double* wptr = nullptr;
  if (params.e.defined()) {
    weights.resize(params.e.numel());
    for (std::size_t i = 0; i < params.e.numel(); ++i)
      weights[i] = params.e.get_as_real(i);
    wptr = weights.data();
  }

  switch (spec.variant) {
    case SsmVariant::Bottleneck: {
      Tensor out({spec.states, length}, Dtype::Real64);
      fused_kernel_rows(dt_a.data(), wptr, spec.states, spec.substates, length,
                        out.at_real64().data());
      return out;
    }
    case SsmVariant::PointwiseBottleneck: {
      Tensor out({spec.states, length}, Dtype::Real64);
      fused_kernel_rows(dt_a.data(), nullptr, spec.states, 1, length,
                        out.at_real64().data());
      return out;
    }
    case SsmVariant::Depthwise:
    case SsmVariant::DepthwiseSeparable: {
      Tensor out({spec.channels_in, length}, Dtype::Real64);
      fused_kernel_rows(dt_a.data(), wptr, spec.channels_in, spec.states, length,
                        out.at_real64().data());
      return out;
    }
    case SsmVariant::Full: {
      Tensor out({spec.channels_out, spec.channels_in, length}, Dtype::Real64);
      fused_kernel_rows(dt_a.data(), wptr, spec.channels_out * spec.channels_in,
                        spec.states, length, out.at_real64().data());
      return out;
    }
    case SsmVariant::Grouped: {
      const std::int64_t jp = spec.channels_out / spec.groups;
      const std::int64_t ip = spec.channels_in / spec.groups;
      Tensor out({spec.groups, jp, ip, length}, Dtype::Real64);
      fused_kernel_rows(dt_a.data(), wptr, spec.groups * jp * ip, spec.states,
                        length, out.at_real64().data());
      return out;
    }
  }
  throw std::logic_error("materialize_kernel: unreachable");
}

namespace {

// Uniform in [0, 1) from the raw engine stream; kept free of
// std::uniform_real_distribution so the values are identical everywhere.
double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double geom_point(std::int64_t i, std::int64_t count, double lo, double hi) {
  if (count <= 1) return lo;
  return lo * std::pow(hi / lo, static_cast<double>(i) /
                                    static_cast<double>(count - 1));
}

void fill_fan_in_uniform(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::int64_t>(1, fan_in)));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t.set_from_complex(i, {bound * (2.0 * canonical(rng) - 1.0), 0.0});
}

std::complex<double> a_line(std::int64_t n) {
  return {-0.5, static_cast<double>(n) * kPi};
}

}  // namespace

SsmParams init_params(const SsmBlockSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  SsmParams p;
  const std::int64_t h = spec.channels_in, hp = spec.channels_out,
                     n = spec.states, m = spec.substates, g = spec.groups;

  switch (spec.variant) {
    case SsmVariant::Depthwise:
    case SsmVariant::DepthwiseSeparable: {
      p.delta = Tensor({h, n}, Dtype::Real64);
      p.a = Tensor({h, n}, Dtype::Complex128);
      for (std::int64_t c = 0; c < h; ++c)
        for (std::int64_t k = 0; k < n; ++k) {
          p.delta.at_real64()[static_cast<std::size_t>(c * n + k)] =
              geom_point(c, h, 0.001, 0.1);
          p.a.at_complex128()[static_cast<std::size_t>(c * n + k)] = a_line(k);
        }
      p.e = Tensor({h, n}, Dtype::Real64);
      fill_fan_in_uniform(p.e, n, rng);
      if (spec.variant == SsmVariant::DepthwiseSeparable) {
        p.mixer = Tensor({hp, h}, Dtype::Real64);
        fill_fan_in_uniform(p.mixer, h, rng);
      }
      break;
    }
    case SsmVariant::Full: {
      p.delta = Tensor({h, n}, Dtype::Real64);
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t k = 0; k < n; ++k)
          p.delta.at_real64()[static_cast<std::size_t>(i * n + k)] =
              geom_point(i, h, 0.001, 0.1);
      p.a = Tensor({hp, h, n}, Dtype::Complex128);
      for (std::int64_t j = 0; j < hp; ++j)
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t k = 0; k < n; ++k)
            p.a.at_complex128()[static_cast<std::size_t>((j * h + i) * n + k)] =
                a_line(k);
      p.e = Tensor({hp, h, n}, Dtype::Real64);
      fill_fan_in_uniform(p.e, h * n, rng);
      break;
    }
    case SsmVariant::Grouped: {
      const std::int64_t ip = h / g, jp = hp / g;
      p.delta = Tensor({g, ip, n}, Dtype::Real64);
      for (std::int64_t gg = 0; gg < g; ++gg)
        for (std::int64_t i = 0; i < ip; ++i)
          for (std::int64_t k = 0; k < n; ++k)
            p.delta.at_real64()[static_cast<std::size_t>((gg * ip + i) * n + k)] =
                geom_point(i, ip, 0.001, 0.1);
      p.a = Tensor({g, jp, ip, n}, Dtype::Complex128);
      for (std::size_t flat = 0; flat < p.a.numel(); ++flat)
        p.a.at_complex128()[flat] = a_line(static_cast<std::int64_t>(flat % n));
      p.e = Tensor({g, jp, ip, n}, Dtype::Real64);
      fill_fan_in_uniform(p.e, ip * n, rng);
      break;
    }
    case SsmVariant::PointwiseBottleneck: {
      // States split into groups of four; delta ranges across the groups and
      // the imaginary ladder restarts within each group.
      p.delta = Tensor({n}, Dtype::Real64);
      p.a = Tensor({n}, Dtype::Complex128);
      const std::int64_t ngroups = (n + 3) / 4;
      for (std::int64_t k = 0; k < n; ++k) {
        p.delta.at_real64()[static_cast<std::size_t>(k)] =
            geom_point(k / 4, ngroups, 0.001, 0.1);
        p.a.at_complex128()[static_cast<std::size_t>(k)] = a_line(k % 4);
      }
      p.b = Tensor({n, h}, Dtype::Real64);
      fill_fan_in_uniform(p.b, h, rng);
      p.c = Tensor({hp, n}, Dtype::Real64);
      fill_fan_in_uniform(p.c, n, rng);
      break;
    }
    case SsmVariant::Bottleneck: {
      p.delta = Tensor({n}, Dtype::Real64);
      p.a = Tensor({n, m}, Dtype::Complex128);
      for (std::int64_t k = 0; k < n; ++k) {
        p.delta.at_real64()[static_cast<std::size_t>(k)] =
            geom_point(k, n, 0.001, 0.1);
        for (std::int64_t mm = 0; mm < m; ++mm)
          p.a.at_complex128()[static_cast<std::size_t>(k * m + mm)] = a_line(mm);
      }
      p.b = Tensor({n, h}, Dtype::Real64);
      fill_fan_in_uniform(p.b, h, rng);
      p.c = Tensor({hp, n}, Dtype::Real64);
      fill_fan_in_uniform(p.c, n, rng);
      p.e = Tensor({n, m}, Dtype::Real64);
      fill_fan_in_uniform(p.e, m, rng);
      break;
    }
  }
  return p;
}

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.extent(0), t.extent(1));
  for (std::int64_t r = 0; r < t.extent(0); ++r)
    for (std::int64_t c = 0; c < t.extent(1); ++c)
      m(r, c) = t.get_as_real(static_cast<std::size_t>(r * t.extent(1) + c));
  return m;
}

Tensor from_eigen_complex(const Eigen::MatrixXcd& m) {
  Tensor t({m.rows(), m.cols()}, Dtype::Complex128);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.at_complex128()[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return t;
}

}  // namespace

DenseSsm absorb_feedthrough(const DenseSsm& sys) {
  const std::int64_t n = sys.a.extent(0), h = sys.b.extent(1),
                     hp = sys.c.extent(0);
  // Memoryless states x2[t+1] = u[t] carry the input straight through, and C
  // gains a D slab reading them. H extra states duplicate u exactly; for the
  // SISO case (H == N == 1) this is the doubled-state block form verbatim.
  const std::int64_t na = n + h;
  DenseSsm out;
  out.a = Tensor({na, na}, Dtype::Real64);
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t c = 0; c < n; ++c)
      out.a.at_real64()[static_cast<std::size_t>(r * na + c)] =
          sys.a.get_as_real(static_cast<std::size_t>(r * n + c));

  out.b = Tensor({na, h}, Dtype::Real64);
  for (std::int64_t r = 0; r < n; ++r)
    for (std::int64_t c = 0; c < h; ++c)
      out.b.at_real64()[static_cast<std::size_t>(r * h + c)] =
          sys.b.get_as_real(static_cast<std::size_t>(r * h + c));
  for (std::int64_t c = 0; c < h; ++c)
    out.b.at_real64()[static_cast<std::size_t>((n + c) * h + c)] = 1.0;

  out.c = Tensor({hp, na}, Dtype::Real64);
  for (std::int64_t r = 0; r < hp; ++r) {
    for (std::int64_t c = 0; c < n; ++c)
      out.c.at_real64()[static_cast<std::size_t>(r * na + c)] =
          sys.c.get_as_real(static_cast<std::size_t>(r * n + c));
    for (std::int64_t c = 0; c < h; ++c)
      out.c.at_real64()[static_cast<std::size_t>(r * na + n + c)] =
          sys.d.get_as_real(static_cast<std::size_t>(r * h + c));
  }
  out.d = Tensor({hp, h}, Dtype::Real64);
  return out;
}

DiagonalizedSsm diagonalize_system(const DenseSsm& sys, double cond_limit) {
  const Eigen::MatrixXd a = to_eigen(sys.a);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("diagonalize_system: eigensolver failed");
  const Eigen::MatrixXcd v = es.eigenvectors();

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
  if (!std::isfinite(cond) || cond > cond_limit)
    throw std::runtime_error(
        "diagonalize_system: eigenbasis condition number " +
        std::to_string(cond) + " exceeds limit (defective or near-defective A)");

  const Eigen::MatrixXcd b = to_eigen(sys.b).cast<std::complex<double>>();
  const Eigen::MatrixXcd c = to_eigen(sys.c).cast<std::complex<double>>();
  DiagonalizedSsm out;
  Eigen::MatrixXcd lam(es.eigenvalues().size(), 1);
  lam.col(0) = es.eigenvalues();
  out.lambda = from_eigen_complex(lam).reshaped({lam.rows()});
  out.b_prime = from_eigen_complex(v.partialPivLu().solve(b));
  out.c_prime = from_eigen_complex(c * v);
  return out;
}

}  // namespace centaurus
