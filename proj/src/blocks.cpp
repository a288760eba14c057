#include "centaurus/blocks.hpp"

#include <cmath>
#include <sstream>

#include "centaurus/einsum.hpp"
#include "centaurus/fft.hpp"
#include "centaurus/planner.hpp"

namespace centaurus {

std::string ConvEinsumExpr::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < operands.size(); ++i) {
    if (i) os << ",";
    os << operands[i].subscripts;
  }
  os << "->" << output_subscripts << " [" << variant_name(variant) << "]";
  return os.str();
}

ConvEinsumExpr block_expr(const SsmBlockSpec& spec) {
  spec.validate();
  ConvEinsumExpr e;
  e.variant = spec.variant;
  switch (spec.variant) {
    case SsmVariant::Depthwise:
      e.operands = {{"u", "bif", true}, {"k", "if", true}};
      e.output_subscripts = "bif";
      e.kernel_operand = 1;
      e.fuse_extents = {spec.channels_in, spec.states};
      e.nominal = "bif,nif->bif";
      break;
    case SsmVariant::DepthwiseSeparable:
      e.operands = {{"u", "bif", true}, {"k", "if", true}, {"m", "ji", false}};
      e.output_subscripts = "bjf";
      e.kernel_operand = 1;
      e.fuse_extents = {spec.channels_in, spec.states};
      e.nominal = "bif,nif,ji->bjf";
      break;
    case SsmVariant::Full:
      e.operands = {{"u", "bif", true}, {"k", "jif", true}};
      e.output_subscripts = "bjf";
      e.kernel_operand = 1;
      e.fuse_extents = {spec.channels_out, spec.channels_in, spec.states};
      e.nominal = "bif,jinf->bjf";
      break;
    case SsmVariant::Grouped:
      e.operands = {{"u", "bgif", true}, {"k", "gjif", true}};
      e.output_subscripts = "bgjf";
      e.kernel_operand = 1;
      e.fuse_extents = {spec.groups, spec.channels_out / spec.groups,
                        spec.channels_in / spec.groups, spec.states};
      e.nominal = "bgif,gjinf->bgjf";
      break;
    case SsmVariant::PointwiseBottleneck:
      e.operands = {{"u", "bif", true},
                    {"B", "ni", false},
                    {"k", "nf", true},
                    {"C", "jn", false}};
      e.output_subscripts = "bjf";
      e.kernel_operand = 2;
      e.fuse_extents = {spec.states};
      e.nominal = "bif,ni,nf,jn->bjf";
      break;
    case SsmVariant::Bottleneck:
      e.operands = {{"u", "bif", true},
                    {"B", "ni", false},
                    {"k", "nf", true},
                    {"C", "jn", false}};
      e.output_subscripts = "bjf";
      e.kernel_operand = 2;
      e.fuse_extents = {spec.states, spec.substates};
      e.nominal = "bif,ni,nmf,nm,jn->bjf";
      break;
  }
  return e;
}

PlanExtents block_extents(const SsmBlockSpec& spec, std::int64_t batch) {
  PlanExtents ext;
  ext.seq_len = spec.seq_len;
  ext.padded_len = 2 * spec.seq_len;
  ext.index_extents['b'] = batch;
  ext.index_extents['f'] = spec.seq_len + 1;  // rfft modes of 2L padding
  ext.index_extents['n'] = spec.states;
  switch (spec.variant) {
    case SsmVariant::Grouped:
      ext.index_extents['g'] = spec.groups;
      ext.index_extents['i'] = spec.channels_in / spec.groups;
      ext.index_extents['j'] = spec.channels_out / spec.groups;
      break;
    default:
      ext.index_extents['i'] = spec.channels_in;
      ext.index_extents['j'] = spec.channels_out;
      break;
  }
  return ext;
}

namespace {

// Leaf tensors in expression-operand order, all in the time domain.
std::vector<Tensor> leaf_tensors(const SsmBlockSpec& spec,
                                 const SsmParams& params, const Tensor& u) {
  const std::int64_t L = u.extent(u.ndim() - 1);
  Tensor kernel = materialize_kernel(spec, params, L);
  switch (spec.variant) {
    case SsmVariant::Depthwise:
      return {u, kernel};
    case SsmVariant::DepthwiseSeparable:
      return {u, kernel, params.mixer};
    case SsmVariant::Full:
      return {u, kernel};
    case SsmVariant::Grouped: {
      Tensor ug = u.reshaped({u.extent(0), spec.groups,
                              spec.channels_in / spec.groups, L});
      return {ug, kernel};
    }
    case SsmVariant::PointwiseBottleneck:
    case SsmVariant::Bottleneck: {
      Tensor bbar = discretize_B(params.delta, params.b);
      return {u, bbar, kernel, params.c};
    }
  }
  throw std::logic_error("leaf_tensors: unreachable");
}

}  // namespace

Tensor forward_fft(const SsmBlockSpec& spec, const SsmParams& params,
                   const Tensor& u, const ContractionPlan& plan,
                   std::vector<FlopCounter>* per_contract_step) {
  spec.validate();
  if (u.ndim() != 3)
    throw std::invalid_argument("forward_fft: input must be (batch, H, L)");
  if (u.extent(1) != spec.channels_in)
    throw std::invalid_argument("forward_fft: channel count mismatch");
  const std::int64_t batch = u.extent(0);
  const std::int64_t L = u.extent(2);

  ConvEinsumExpr expr = block_expr(spec);
  SsmBlockSpec at_len = spec;
  at_len.seq_len = L;
  PlanExtents ext = block_extents(at_len, batch);
  const std::string want = expr.str() + "|";
  if (plan.expr_signature.rfind(want, 0) != 0)
    throw std::invalid_argument("forward_fft: plan built for a different expression");
  {
    std::ostringstream os;
    for (const auto& [c, v] : ext.index_extents) os << c << v << ";";
    os << "L" << ext.seq_len;
    if (plan.expr_signature != want + os.str())
      throw std::invalid_argument("forward_fft: plan extents mismatch");
  }

  std::vector<Tensor> nodes(plan.nodes.size());
  auto leaves = leaf_tensors(spec, params, u);
  for (std::size_t i = 0; i < leaves.size(); ++i) nodes[i] = std::move(leaves[i]);

  for (const auto& s : plan.steps) {
    switch (s.kind) {
      case StepKind::FuseKernelGen:
        break;  // kernel already fused during materialization
      case StepKind::Fft: {
        const auto& sub = plan.nodes[s.a].subscripts;
        const std::size_t axis = sub.find('f');
        nodes[s.result] = rfft(nodes[s.a], axis, 2 * L);
        break;
      }
      case StepKind::Ifft: {
        const auto& sub = plan.nodes[s.a].subscripts;
        const std::size_t axis = sub.find('f');
        nodes[s.result] = irfft(nodes[s.a], axis, L);
        break;
      }
      case StepKind::Contract: {
        FlopCounter local;
        nodes[s.result] = contract_pair(
            nodes[s.a], plan.nodes[s.a].subscripts, nodes[s.b],
            plan.nodes[s.b].subscripts, plan.nodes[s.result].subscripts,
            per_contract_step ? &local : nullptr);
        if (per_contract_step) per_contract_step->push_back(local);
        break;
      }
    }
  }

  Tensor out = nodes[plan.steps.back().result];
  const std::string& got = plan.nodes[plan.steps.back().result].subscripts;
  if (got != expr.output_subscripts) {
    std::vector<int> order;
    for (char c : expr.output_subscripts)
      order.push_back(static_cast<int>(got.find(c)));
    out = permuted(out, order);
  }
  if (spec.variant == SsmVariant::Grouped)
    out = out.reshaped({batch, spec.channels_out, L});
  return out;
}

Tensor forward_fft_auto(const SsmBlockSpec& spec, const SsmParams& params,
                        const Tensor& u) {
  SsmBlockSpec at_len = spec;
  at_len.seq_len = u.extent(2);
  ConvEinsumExpr expr = block_expr(at_len);
  PlanExtents ext = block_extents(at_len, u.extent(0));
  auto chosen = choose_plan_cached(expr, ext, default_max_ndim(spec.variant));
  return forward_fft(at_len, params, u, chosen->first);
}

Tensor full_kernel(const SsmBlockSpec& spec, const SsmParams& params,
                   std::int64_t length) {
  Tensor k = materialize_kernel(spec, params, length);
  const std::int64_t h = spec.channels_in, hp = spec.channels_out;
  Tensor out({hp, h, length}, Dtype::Real64);
  auto dst = out.at_real64();
  switch (spec.variant) {
    case SsmVariant::Depthwise: {
      auto src = k.at_real64();
      for (std::int64_t i = 0; i < h; ++i)
        for (std::int64_t t = 0; t < length; ++t)
          dst[static_cast<std::size_t>((i * h + i) * length + t)] =
              src[static_cast<std::size_t>(i * length + t)];
      break;
    }
    case SsmVariant::DepthwiseSeparable: {
      auto src = k.at_real64();
      for (std::int64_t j = 0; j < hp; ++j)
        for (std::int64_t i = 0; i < h; ++i) {
          const double w =
              params.mixer.get_as_real(static_cast<std::size_t>(j * h + i));
          for (std::int64_t t = 0; t < length; ++t)
            dst[static_cast<std::size_t>((j * h + i) * length + t)] =
                w * src[static_cast<std::size_t>(i * length + t)];
        }
      break;
    }
    case SsmVariant::Full:
      return k;
    case SsmVariant::Grouped: {
      auto src = k.at_real64();
      const std::int64_t jp = hp / spec.groups, ip = h / spec.groups;
      for (std::int64_t g = 0; g < spec.groups; ++g)
        for (std::int64_t j = 0; j < jp; ++j)
          for (std::int64_t i = 0; i < ip; ++i)
            for (std::int64_t t = 0; t < length; ++t)
              dst[static_cast<std::size_t>(
                  ((g * jp + j) * h + g * ip + i) * length + t)] =
                  src[static_cast<std::size_t>(
                      (((g * jp + j) * ip) + i) * length + t)];
      break;
    }
    case SsmVariant::PointwiseBottleneck:
    case SsmVariant::Bottleneck: {
      Tensor bbar = discretize_B(params.delta, params.b);
      auto src = k.at_real64();
      for (std::int64_t j = 0; j < hp; ++j)
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t t = 0; t < length; ++t) {
            double acc = 0.0;
            for (std::int64_t n = 0; n < spec.states; ++n)
              acc += params.c.get_as_real(static_cast<std::size_t>(j * spec.states + n)) *
                     src[static_cast<std::size_t>(n * length + t)] *
                     bbar.get_as_real(static_cast<std::size_t>(n * h + i));
            dst[static_cast<std::size_t>((j * h + i) * length + t)] = acc;
          }
      break;
    }
  }
  return out;
}

Tensor forward_naive(const SsmBlockSpec& spec, const SsmParams& params,
                     const Tensor& u) {
  spec.validate();
  if (u.ndim() != 3)
    throw std::invalid_argument("forward_naive: input must be (batch, H, L)");
  const std::int64_t batch = u.extent(0), h = u.extent(1), L = u.extent(2);
  if (h != spec.channels_in)
    throw std::invalid_argument("forward_naive: channel count mismatch");

  Tensor k = full_kernel(spec, params, L);
  auto kk = k.at_real64();
  Tensor out({batch, spec.channels_out, L}, Dtype::Real64);
  auto dst = out.at_real64();
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t j = 0; j < spec.channels_out; ++j)
      for (std::int64_t t = 0; t < L; ++t) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t s = 0; s <= t; ++s)
            acc += kk[static_cast<std::size_t>((j * h + i) * L + s)] *
                   u.get_as_real(static_cast<std::size_t>((b * h + i) * L + t - s));
        dst[static_cast<std::size_t>((b * spec.channels_out + j) * L + t)] = acc;
      }
  return out;
}

// ---- auxiliary layers ----

Tensor aux_forward(const AuxLayer& layer, const Tensor& x) {
  switch (layer.kind) {
    case AuxLayer::Kind::SiLU: {
      Tensor out(x.extents(), x.dtype());
      for (std::size_t i = 0; i < x.numel(); ++i) {
        const double v = x.get_as_real(i);
        out.set_from_complex(i, {v / (1.0 + std::exp(-v)), 0.0});
      }
      return out;
    }
    case AuxLayer::Kind::LayerNormFeature: {
      if (x.ndim() != 3)
        throw std::invalid_argument("layernorm: expected (batch, C, L)");
      const std::int64_t b = x.extent(0), c = x.extent(1), l = x.extent(2);
      constexpr double kEps = 1e-5;
      Tensor out(x.extents(), x.dtype());
      for (std::int64_t bb = 0; bb < b; ++bb)
        for (std::int64_t t = 0; t < l; ++t) {
          double mean = 0.0;
          for (std::int64_t ch = 0; ch < c; ++ch)
            mean += x.get_as_real(static_cast<std::size_t>((bb * c + ch) * l + t));
          mean /= static_cast<double>(c);
          double var = 0.0;
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const double d =
                x.get_as_real(static_cast<std::size_t>((bb * c + ch) * l + t)) - mean;
            var += d * d;
          }
          var /= static_cast<double>(c);
          const double inv = 1.0 / std::sqrt(var + kEps);
          for (std::int64_t ch = 0; ch < c; ++ch) {
            double v = (x.get_as_real(static_cast<std::size_t>((bb * c + ch) * l + t)) -
                        mean) * inv;
            if (layer.gamma.defined())
              v = v * layer.gamma.get_as_real(static_cast<std::size_t>(ch)) +
                  layer.beta.get_as_real(static_cast<std::size_t>(ch));
            out.set_from_complex(static_cast<std::size_t>((bb * c + ch) * l + t),
                                 {v, 0.0});
          }
        }
      return out;
    }
    case AuxLayer::Kind::AvgPool: {
      if (x.ndim() != 3)
        throw std::invalid_argument("avgpool: expected (batch, C, L)");
      const std::int64_t w = layer.window;
      if (w < 1) throw std::invalid_argument("avgpool: window must be >= 1");
      const std::int64_t b = x.extent(0), c = x.extent(1), l = x.extent(2);
      if (l % w != 0)
        throw std::invalid_argument("avgpool: length " + std::to_string(l) +
                                    " not divisible by window " + std::to_string(w));
      Tensor out({b, c, l / w}, x.dtype());
      for (std::int64_t bb = 0; bb < b; ++bb)
        for (std::int64_t ch = 0; ch < c; ++ch)
          for (std::int64_t t = 0; t < l / w; ++t) {
            double acc = 0.0;
            for (std::int64_t s = 0; s < w; ++s)
              acc += x.get_as_real(
                  static_cast<std::size_t>((bb * c + ch) * l + t * w + s));
            out.set_from_complex(
                static_cast<std::size_t>((bb * c + ch) * (l / w) + t),
                {acc / static_cast<double>(w), 0.0});
          }
      return out;
    }
    case AuxLayer::Kind::PointwiseProjection: {
      if (x.ndim() != 3 || layer.weight.ndim() != 2 ||
          layer.weight.extent(1) != x.extent(1))
        throw std::invalid_argument("pointwise projection: shape mismatch");
      return einsum("ji,bil->bjl", {layer.weight, x});
    }
    default:
      throw std::invalid_argument("aux_forward: residual kinds need a skip input");
  }
}

Tensor aux_forward(const AuxLayer& layer, const Tensor& x, const Tensor& skip) {
  switch (layer.kind) {
    case AuxLayer::Kind::ResidualAdd:
      return add(x, skip);
    case AuxLayer::Kind::ResidualProjection: {
      AuxLayer proj;
      proj.kind = AuxLayer::Kind::PointwiseProjection;
      proj.weight = layer.weight;
      return add(x, aux_forward(proj, skip));
    }
    default:
      throw std::invalid_argument("aux_forward: not a residual kind");
  }
}

}  // namespace centaurus
