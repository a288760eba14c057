#pragma once

#include <map>
#include <string>
#include <vector>

#include "centaurus/ssm_params.hpp"
#include "centaurus/tensor.hpp"

namespace centaurus {

struct ContractionPlan;  // planner.hpp

/// One operand of a conv-einsum expression, in planned (basis-collapsed)
/// form. `time_domain` marks operands that natively live in the time domain
/// and therefore need an FFT before meeting the other f-carrier.
struct ExprOperand {
  std::string name;
  std::string subscripts;  // 'f' is the convolution hyperedge
  bool time_domain = false;
  Dtype dtype = Dtype::Real64;
};

/// Einsum expression with one convolution hyperedge. The f index appears on
/// the input operand (index 0), exactly one kernel-side operand, and the
/// output.
struct ConvEinsumExpr {
  std::vector<ExprOperand> operands;
  std::string output_subscripts;
  char conv_index = 'f';
  int kernel_operand = -1;
  /// Iteration extents (time axis excluded) of the fused kernel generation;
  /// includes the collapsed sub-state/state axes that never materialize.
  std::vector<std::int64_t> fuse_extents;
  std::string nominal;  // with the uncollapsed basis axes, for display
  SsmVariant variant = SsmVariant::Depthwise;

  std::string str() const;
};

/// Index extents the planner works with. `index_extents['f']` holds the
/// rfft mode count (L + 1); time-domain nodes use seq_len instead.
struct PlanExtents {
  std::map<char, std::int64_t> index_extents;
  std::int64_t seq_len = 0;     // L
  std::int64_t padded_len = 0;  // 2L
};

/// Builds the block's conv-einsum expression:
///   depthwise           bif,if->bif          (u, EK collapsed over n)
///   depthwise separable bif,if,ji->bjf       (+ mixer)
///   full                bif,jif->bjf
///   grouped             bgif,gjif->bgjf
///   (pw-)bottleneck     bif,ni,nf,jn->bjf    (u, Bbar, k, C)
ConvEinsumExpr block_expr(const SsmBlockSpec& spec);

/// Extents for the expression at the given batch size and the spec's L.
PlanExtents block_extents(const SsmBlockSpec& spec, std::int64_t batch);

/// Offline forward pass through the FFT route, executing the given plan
/// step by step. Output is causal and identical (within fp tolerance) for
/// every feasible plan. Optional per-contract-step MAC counters can be
/// collected for cost-model validation.
Tensor forward_fft(const SsmBlockSpec& spec, const SsmParams& params,
                   const Tensor& u, const ContractionPlan& plan,
                   std::vector<FlopCounter>* per_contract_step = nullptr);

/// Plans with the variant's default ndim bound, then runs forward_fft.
Tensor forward_fft_auto(const SsmBlockSpec& spec, const SsmParams& params,
                        const Tensor& u);

/// Reference oracle: materializes the full (H', H, L) kernel and convolves
/// directly in O(L^2) time.
Tensor forward_naive(const SsmBlockSpec& spec, const SsmParams& params,
                     const Tensor& u);

/// Full impulse-response tensor (H', H, L) of a block.
Tensor full_kernel(const SsmBlockSpec& spec, const SsmParams& params,
                   std::int64_t length);

// ---- auxiliary layers ----

struct AuxLayer {
  enum class Kind {
    LayerNormFeature,
    SiLU,
    AvgPool,
    PointwiseProjection,
    ResidualAdd,
    ResidualProjection,
  };
  Kind kind = Kind::SiLU;
  std::int64_t window = 1;  // AvgPool
  Tensor weight;            // projections: (H_out, H)
  Tensor gamma, beta;       // LayerNorm affine, (C); empty = identity affine
};

/// Unary layers on (B, C, L) tensors. LayerNorm normalizes the channel axis
/// per time step (eps 1e-5); AvgPool is non-overlapping and strict about
/// divisibility.
Tensor aux_forward(const AuxLayer& layer, const Tensor& x);

/// Residual kinds: merges `skip` (identity or projected) into x.
Tensor aux_forward(const AuxLayer& layer, const Tensor& x, const Tensor& skip);

}  // namespace centaurus
