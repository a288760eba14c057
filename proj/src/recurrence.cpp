#include "centaurus/recurrence.hpp"

#include <stdexcept>

namespace centaurus {

namespace {

std::size_t state_size(const SsmBlockSpec& spec) {
  switch (spec.variant) {
    case SsmVariant::Depthwise:
    case SsmVariant::DepthwiseSeparable:
      return static_cast<std::size_t>(spec.channels_in * spec.states);
    case SsmVariant::PointwiseBottleneck:
      return static_cast<std::size_t>(spec.states);
    case SsmVariant::Bottleneck:
      return static_cast<std::size_t>(spec.states * spec.substates);
    case SsmVariant::Full:
      return static_cast<std::size_t>(spec.channels_out * spec.channels_in *
                                      spec.states);
    case SsmVariant::Grouped:
      return static_cast<std::size_t>(spec.groups *
                                      (spec.channels_out / spec.groups) *
                                      (spec.channels_in / spec.groups) *
                                      spec.states);
  }
  return 0;
}

std::vector<double> to_reals(const Tensor& t) {
  std::vector<double> out(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) out[i] = t.get_as_real(i);
  return out;
}

}  // namespace

StreamState StreamState::zero(const SsmBlockSpec& spec) {
  StreamState s;
  s.x.assign(state_size(spec), {0.0, 0.0});
  return s;
}

std::size_t StreamState::expected_size(const SsmBlockSpec& spec) const {
  return state_size(spec);
}

StreamEngine::StreamEngine(const SsmBlockSpec& spec, const SsmParams& params)
    : spec_(spec) {
  spec.validate();
  const Tensor delta_full = expand_delta_like_a(spec, params.delta, params.a);
  abar_.resize(params.a.numel());
  for (std::size_t i = 0; i < params.a.numel(); ++i)
    abar_[i] = std::exp(params.a.get_as_complex(i) * delta_full.get_as_real(i));

  if (spec.has_projections()) {
    bbar_ = to_reals(discretize_B(params.delta, params.b));
    c_ = to_reals(params.c);
  }
  if (params.e.defined()) e_ = to_reals(params.e);
  if (spec.variant == SsmVariant::DepthwiseSeparable)
    mixer_ = to_reals(params.mixer);
  scratch_.resize(
      static_cast<std::size_t>(std::max(spec.states, spec.channels_in)));
}

void StreamEngine::step(StreamState& state, const double* u_t, double* y_t,
                        StepOpCounter* ops) const {
  if (state.x.size() != state_size(spec_))
    throw std::invalid_argument("step: state shape mismatch");
  const std::int64_t h = spec_.channels_in, hp = spec_.channels_out,
                     n = spec_.states, m = spec_.substates;

  switch (spec_.variant) {
    case SsmVariant::PointwiseBottleneck:
    case SsmVariant::Bottleneck: {
      // u'_n = Bbar_ni u_i
      double* uproj = scratch_.data();
      for (std::int64_t nn = 0; nn < n; ++nn) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < h; ++i) {
          acc += bbar_[static_cast<std::size_t>(nn * h + i)] * u_t[i];
          if (ops) ops->real_mac();
        }
        uproj[nn] = acc;
      }
      // x_nm <- Abar_nm x_nm + u'_n, then w_n = sum_m E_nm Re(x_nm)
      for (std::int64_t j = 0; j < hp; ++j) y_t[j] = 0.0;
      for (std::int64_t nn = 0; nn < n; ++nn) {
        double w = 0.0;
        for (std::int64_t mm = 0; mm < m; ++mm) {
          auto& x = state.x[static_cast<std::size_t>(nn * m + mm)];
          x = abar_[static_cast<std::size_t>(nn * m + mm)] * x;
          if (ops) ops->complex_mult();
          x += uproj[nn];
          if (ops) ops->real_into_complex_add();
          if (spec_.variant == SsmVariant::Bottleneck) {
            w += e_[static_cast<std::size_t>(nn * m + mm)] * x.real();
            if (ops) ops->real_mac();
          } else {
            w = x.real();
          }
        }
        for (std::int64_t j = 0; j < hp; ++j) {
          y_t[j] += c_[static_cast<std::size_t>(j * n + nn)] * w;
          if (ops) ops->real_mac();
        }
      }
      break;
    }
    case SsmVariant::Depthwise:
    case SsmVariant::DepthwiseSeparable: {
      double* y_mid = (spec_.variant == SsmVariant::DepthwiseSeparable)
                          ? scratch_.data()
                          : y_t;
      for (std::int64_t i = 0; i < h; ++i) {
        double acc = 0.0;
        for (std::int64_t nn = 0; nn < n; ++nn) {
          auto& x = state.x[static_cast<std::size_t>(i * n + nn)];
          x = abar_[static_cast<std::size_t>(i * n + nn)] * x;
          if (ops) ops->complex_mult();
          x += u_t[i];
          if (ops) ops->real_into_complex_add();
          acc += e_[static_cast<std::size_t>(i * n + nn)] * x.real();
          if (ops) ops->real_mac();
        }
        y_mid[i] = acc;
      }
      if (spec_.variant == SsmVariant::DepthwiseSeparable) {
        for (std::int64_t j = 0; j < hp; ++j) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < h; ++i) {
            acc += mixer_[static_cast<std::size_t>(j * h + i)] * y_mid[i];
            if (ops) ops->real_mac();
          }
          y_t[j] = acc;
        }
      }
      break;
    }
    case SsmVariant::Full: {
      for (std::int64_t j = 0; j < hp; ++j) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t nn = 0; nn < n; ++nn) {
            const auto flat = static_cast<std::size_t>((j * h + i) * n + nn);
            auto& x = state.x[flat];
            x = abar_[flat] * x;
            if (ops) ops->complex_mult();
            x += u_t[i];
            if (ops) ops->real_into_complex_add();
            acc += e_[flat] * x.real();
            if (ops) ops->real_mac();
          }
        y_t[j] = acc;
      }
      break;
    }
    case SsmVariant::Grouped: {
      const std::int64_t g = spec_.groups, jp = hp / g, ip = h / g;
      for (std::int64_t gg = 0; gg < g; ++gg)
        for (std::int64_t j = 0; j < jp; ++j) {
          double acc = 0.0;
          for (std::int64_t i = 0; i < ip; ++i)
            for (std::int64_t nn = 0; nn < n; ++nn) {
              const auto flat =
                  static_cast<std::size_t>(((gg * jp + j) * ip + i) * n + nn);
              auto& x = state.x[flat];
              x = abar_[flat] * x;
              if (ops) ops->complex_mult();
              x += u_t[gg * ip + i];
              if (ops) ops->real_into_complex_add();
              acc += e_[flat] * x.real();
              if (ops) ops->real_mac();
            }
          y_t[gg * jp + j] = acc;
        }
      break;
    }
  }
}

std::vector<double> StreamEngine::step(StreamState& state,
                                       const std::vector<double>& u_t) const {
  if (static_cast<std::int64_t>(u_t.size()) != spec_.channels_in)
    throw std::invalid_argument("step: input size mismatch");
  std::vector<double> y(static_cast<std::size_t>(spec_.channels_out));
  step(state, u_t.data(), y.data());
  return y;
}

Tensor run_stream(const SsmBlockSpec& spec, const SsmParams& params,
                  const Tensor& u) {
  if (u.ndim() != 3)
    throw std::invalid_argument("run_stream: input must be (batch, H, L)");
  const std::int64_t batch = u.extent(0), h = u.extent(1), L = u.extent(2);
  if (h != spec.channels_in)
    throw std::invalid_argument("run_stream: channel count mismatch");
  StreamEngine engine(spec, params);
  Tensor out({batch, spec.channels_out, L}, Dtype::Real64);
  auto dst = out.at_real64();
  std::vector<double> u_t(static_cast<std::size_t>(h));
  std::vector<double> y_t(static_cast<std::size_t>(spec.channels_out));
  for (std::int64_t b = 0; b < batch; ++b) {
    StreamState state = StreamState::zero(spec);
    for (std::int64_t t = 0; t < L; ++t) {
      for (std::int64_t i = 0; i < h; ++i)
        u_t[static_cast<std::size_t>(i)] =
            u.get_as_real(static_cast<std::size_t>((b * h + i) * L + t));
      engine.step(state, u_t.data(), y_t.data());
      for (std::int64_t j = 0; j < spec.channels_out; ++j)
        dst[static_cast<std::size_t>((b * spec.channels_out + j) * L + t)] =
            y_t[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

CostRow cost_row_from_name(const std::string& name) {
  if (name == "depthwise") return CostRow::Depthwise;
  if (name == "depthwise_separable" || name == "dws")
    return CostRow::DepthwiseSeparable;
  if (name == "pointwise_bottleneck" || name == "pw")
    return CostRow::PointwiseBottleneck;
  if (name == "bottleneck") return CostRow::Bottleneck;
  if (name == "full") return CostRow::Full;
  if (name == "grouped") return CostRow::Grouped;
  if (name == "depthwise_complex") return CostRow::DepthwiseComplex;
  if (name == "depthwise_separable_complex" || name == "dws_complex")
    return CostRow::DepthwiseSeparableComplex;
  if (name == "pointwise_bottleneck_complex" || name == "pw_complex")
    return CostRow::PointwiseBottleneckComplex;
  if (name == "bottleneck_complex") return CostRow::BottleneckComplex;
  if (name == "full_complex") return CostRow::FullComplex;
  if (name == "s6" || name == "dws_s6") return CostRow::DepthwiseSeparableS6;
  if (name == "mamba") return CostRow::Mamba;
  throw std::invalid_argument("unknown cost row '" + name + "'");
}

InferenceCost count_inference(CostRow row, const CostDims& d) {
  const std::uint64_t h = static_cast<std::uint64_t>(d.channels_in);
  const std::uint64_t hp = static_cast<std::uint64_t>(d.channels_out);
  const std::uint64_t n = static_cast<std::uint64_t>(d.states);
  const std::uint64_t m = static_cast<std::uint64_t>(d.substates);
  const std::uint64_t r = static_cast<std::uint64_t>(d.low_rank);
  InferenceCost out;
  switch (row) {
    case CostRow::Depthwise:
      out = {3 * h * n, 9 * h * n, "depthwise"};
      break;
    case CostRow::DepthwiseSeparable:
      out = {3 * h * n + h * hp, 9 * h * n + 2 * h * hp, "depthwise_separable"};
      break;
    case CostRow::PointwiseBottleneck:
      out = {h * n + 2 * n + hp * n, 2 * h * n + 7 * n + 2 * hp * n,
             "pointwise_bottleneck"};
      break;
    case CostRow::Bottleneck:
      out = {h * n + 3 * n * m + hp * n, 2 * h * n + 9 * n * m + 2 * hp * n,
             "bottleneck"};
      break;
    case CostRow::Full:
      out = {3 * h * hp * n, 9 * h * hp * n, "full"};
      break;
    case CostRow::Grouped:
      // Group count lives on the block spec, not in CostDims.
      throw std::invalid_argument(
          "count_inference: use the SsmBlockSpec overload for grouped blocks");
    case CostRow::DepthwiseComplex:
      out = {4 * h * n, 11 * h * n, "depthwise_complex"};
      break;
    case CostRow::DepthwiseSeparableComplex:
      out = {4 * h * n + h * hp, 11 * h * n + 2 * h * hp,
             "depthwise_separable_complex"};
      break;
    case CostRow::PointwiseBottleneckComplex:
      out = {2 * h * n + 2 * n + 2 * hp * n, 4 * h * n + 8 * n + 4 * hp * n,
             "pointwise_bottleneck_complex"};
      break;
    case CostRow::BottleneckComplex:
      out = {2 * h * n + 4 * n * m + 2 * hp * n,
             4 * h * n + 16 * n * m + 4 * hp * n, "bottleneck_complex"};
      break;
    case CostRow::FullComplex:
      out = {4 * h * hp * n, 11 * h * hp * n, "full_complex"};
      break;
    case CostRow::DepthwiseSeparableS6:
      out = {4 * h * n + h * h / r + h * hp,
             14 * h * n + 4 * h * h / r + 2 * h * hp, "dws_s6"};
      break;
    case CostRow::Mamba:
      out = {8 * h * h + 8 * h * n + 4 * h * h / r,
             16 * h * h + 28 * h * n + 16 * h * h / r, "mamba"};
      break;
  }
  return out;
}

InferenceCost count_inference(const SsmBlockSpec& spec) {
  CostDims d;
  d.channels_in = spec.channels_in;
  d.channels_out = spec.channels_out;
  d.states = spec.states;
  d.substates = spec.substates;
  switch (spec.variant) {
    case SsmVariant::Depthwise: return count_inference(CostRow::Depthwise, d);
    case SsmVariant::DepthwiseSeparable:
      return count_inference(CostRow::DepthwiseSeparable, d);
    case SsmVariant::PointwiseBottleneck:
      return count_inference(CostRow::PointwiseBottleneck, d);
    case SsmVariant::Bottleneck: return count_inference(CostRow::Bottleneck, d);
    case SsmVariant::Full: return count_inference(CostRow::Full, d);
    case SsmVariant::Grouped: {
      // G independent full blocks over (H/G, H'/G, N).
      CostDims per = d;
      per.channels_in = spec.channels_in / spec.groups;
      per.channels_out = spec.channels_out / spec.groups;
      InferenceCost one = count_inference(CostRow::Full, per);
      return {one.params * static_cast<std::uint64_t>(spec.groups),
              one.flops_per_step * static_cast<std::uint64_t>(spec.groups),
              "grouped"};
    }
  }
  throw std::logic_error("count_inference: unreachable");
}

InferenceCost residual_projection_cost(std::int64_t channels_in,
                                       std::int64_t channels_out) {
  const std::uint64_t h = static_cast<std::uint64_t>(channels_in);
  const std::uint64_t hp = static_cast<std::uint64_t>(channels_out);
  return {h * hp, 2 * h * hp, "residual_projection"};
}

std::uint64_t measure_step_flops(const SsmBlockSpec& spec,
                                 const SsmParams& params) {
  StreamEngine engine(spec, params);
  StreamState state = StreamState::zero(spec);
  std::vector<double> u(static_cast<std::size_t>(spec.channels_in), 0.5);
  std::vector<double> y(static_cast<std::size_t>(spec.channels_out));
  StepOpCounter ops;
  engine.step(state, u.data(), y.data(), &ops);
  return ops.flops;
}

}  // namespace centaurus
