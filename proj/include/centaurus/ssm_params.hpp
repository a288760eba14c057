#pragma once

#include <cstdint>
#include <string>

#include "centaurus/tensor.hpp"

namespace centaurus {

enum class SsmVariant {
  Depthwise,
  DepthwiseSeparable,
  Grouped,
  PointwiseBottleneck,
  Bottleneck,
  Full,
};

const char* variant_name(SsmVariant v);
SsmVariant variant_from_name(const std::string& name);

/// Block shape: channels in/out (H, H'), states N, sub-states M (bottleneck
/// only), groups G (grouped only), and the offline sequence length L.
struct SsmBlockSpec {
  SsmVariant variant = SsmVariant::Depthwise;
  std::int64_t channels_in = 1;    // H
  std::int64_t channels_out = 1;   // H'
  std::int64_t states = 1;         // N
  std::int64_t substates = 1;      // M, 1 unless Bottleneck
  std::int64_t groups = 1;         // G, 1 unless Grouped
  std::int64_t seq_len = 1;        // L

  void validate() const;
  bool has_projections() const {
    return variant == SsmVariant::PointwiseBottleneck ||
           variant == SsmVariant::Bottleneck;
  }
};

/// Learnable tensors of one block. `a` is the continuous-time diagonal
/// transition (complex); everything else is real. Shapes depend on the
/// variant -- see init_params.
struct SsmParams {
  Tensor delta;   // step sizes, > 0
  Tensor a;       // complex, Re(a) < 0 at init
  Tensor b;       // (N, H) input projection, bottleneck variants only
  Tensor c;       // (H', N) output projection, bottleneck variants only
  Tensor e;       // kernel weighting, absent for PointwiseBottleneck
  Tensor mixer;   // (H', H), DepthwiseSeparable only
};

/// Elementwise Abar = exp(delta * a). `delta` must either match `a`'s shape
/// or be a scalar; variant code pre-expands delta before calling.
/// Negative delta entries are rejected; delta == 0 gives Abar == 1.
Tensor zoh_discretize_A(const Tensor& delta, const Tensor& a);

/// Bbar_ni = delta_n * B_ni (the first-order rule; the projection stays real).
Tensor discretize_B(const Tensor& delta, const Tensor& b);

/// Expands delta to a's index space for the given variant (Appendix-style
/// broadcast: delta lacks exactly the output-channel axis where present).
Tensor expand_delta_like_a(const SsmBlockSpec& spec, const Tensor& delta,
                           const Tensor& a);

/// Collapsed basis kernels, fused so the unweighted (..., M, length) basis is
/// never materialized:
///   Bottleneck            -> (N, length), k_nt = sum_m E_nm Re(exp(d_n a_nm t))
///   PointwiseBottleneck   -> (N, length), k_nt = Re(Abar_n^t)
///   Depthwise / DWS       -> (H, length), k_it = sum_n E_in Re(Abar_in^t)
///   Full                  -> (H', H, length)
///   Grouped               -> (G, H'/G, H/G, length)
Tensor materialize_kernel(const SsmBlockSpec& spec, const SsmParams& params,
                          std::int64_t length);

/// Deterministic initialization: delta geometric in [0.001, 0.1] along the
/// variant's designated axis, a = -1/2 + i*n*pi along its designated axis
/// (grouped in fours for the pointwise-bottleneck case), projections and E
/// fan-in-scaled uniform.
SsmParams init_params(const SsmBlockSpec& spec, std::uint64_t seed);

/// Dense (non-diagonal) system y = Cx + Du, x' = Ax + Bu; the carrier for the
/// canonical-form transforms.
struct DenseSsm {
  Tensor a;  // (N, N)
  Tensor b;  // (N, H)
  Tensor c;  // (H', N)
  Tensor d;  // (H', H)
};

/// Doubles the states to route D through them; the result has D == 0 and the
/// same input/output map.
DenseSsm absorb_feedthrough(const DenseSsm& sys);

struct DiagonalizedSsm {
  Tensor lambda;   // (N,) complex eigenvalues
  Tensor b_prime;  // (N, H) complex
  Tensor c_prime;  // (H', N) complex
};

/// Eigendecomposition-based diagonal form with C' Lambda^t B' == C A^t B.
/// Rejects eigenbases with condition number above `cond_limit`.
DiagonalizedSsm diagonalize_system(const DenseSsm& sys,
                                   double cond_limit = 1e8);

}  // namespace centaurus
