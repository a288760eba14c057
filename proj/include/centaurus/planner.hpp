#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "centaurus/blocks.hpp"

namespace centaurus {

enum class PathTag { NaturalOrder, FullKernel, Fallback };
const char* path_tag_name(PathTag t);

enum class StepKind { FuseKernelGen, Fft, Ifft, Contract };
const char* step_kind_name(StepKind k);

/// A node of the plan DAG: a leaf operand or a step result. The conv axis
/// keeps the letter 'f' in `subscripts`; whether it currently means time
/// samples (extent L) or Fourier modes (extent L+1) is `freq`.
struct PlanNode {
  std::string subscripts;
  bool has_conv_axis = false;
  bool freq = false;
  Dtype dtype = Dtype::Real64;
  std::uint32_t leafset = 0;
};

struct PlanStep {
  StepKind kind = StepKind::Contract;
  int a = -1;
  int b = -1;       // Contract only
  int result = -1;  // node id of the result
};

/// Ordered contraction/FFT schedule for one conv-einsum expression. Exactly
/// one Ifft; every operand consumed exactly once; no contract step mixes a
/// time-domain and a frequency-domain f-carrier.
struct ContractionPlan {
  std::vector<PlanNode> nodes;  // leaves first, then one per step
  std::vector<PlanStep> steps;
  int num_leaves = 0;
  PathTag tag = PathTag::Fallback;
  /// Product of the collapsed basis axes (times seq_len this is the fused
  /// kernel generation's iteration space).
  std::uint64_t fuse_factor = 1;
  std::string signature;       // canonical serialization; stable sort key
  std::string expr_signature;  // expression + extents this was planned for

  const PlanNode& result_of(const PlanStep& s) const { return nodes[s.result]; }
};

struct StepCost {
  StepKind kind = StepKind::Contract;
  std::uint64_t multiply_adds = 0;
  std::uint64_t flops = 0;
  std::vector<std::int64_t> result_extents;
  std::uint64_t result_bytes = 0;
};

struct CostReport {
  std::vector<StepCost> per_step;
  std::uint64_t total_multiply_adds = 0;
  std::uint64_t total_flops = 0;
  std::uint64_t peak_intermediate_elements = 0;
  int max_intermediate_ndim = 0;
};

/// Listing-1 style branch decision from the tensor shapes alone. `tag` is the
/// side of the Appendix-B inequality (1/B + 1/N vs 1/H + 1/H'); `fft_early`
/// is the side's FFT-placement condition (N <= H for the natural order,
/// H*H' <= N for the full-kernel order). At an exact cost tie the natural
/// side is reported.
struct PathChoice {
  PathTag tag = PathTag::NaturalOrder;
  bool fft_early = false;
  double input_side = 0.0;   // 1/B + 1/N
  double kernel_side = 0.0;  // 1/H + 1/H'
};

/// All pairwise contraction trees with all valid FFT/iFFT placements whose
/// every contraction result has rank <= max_ndim. Deterministically ordered
/// (by canonical signature). Kernel generation is fused as step 0 and its
/// basis tensor is exempt from the rank bound.
std::vector<ContractionPlan> enumerate_plans(const ConvEinsumExpr& expr,
                                             const PlanExtents& extents,
                                             int max_ndim);

/// Cost model. Contract steps cost product(all involved extents) MACs,
/// weighted 2/4/8 flops for rr/rc/cc. FFT/iFFT cost 5*P*Lp*log2(Lp) flops
/// over the non-time extents P at padded length Lp. Fused kernel generation
/// costs one pass over its iteration space at 6 flops per element (4 for the
/// exponential, 2 for the weighted accumulation). `training` adds the 2x
/// backward pass on top of the forward (3x total).
CostReport cost_plan(const ContractionPlan& plan, const PlanExtents& extents,
                     bool training = false);

/// argmin of total flops over enumerate_plans; ties break on lower peak
/// intermediate size, then enumeration order. Throws if the bound admits no
/// plan.
std::pair<ContractionPlan, CostReport> choose_plan(const ConvEinsumExpr& expr,
                                                   const PlanExtents& extents,
                                                   int max_ndim = 3);

/// 3 for expressions with 3D inputs and flat kernels, 4 where the kernel
/// itself is 3- or 4-D (full, grouped).
int default_max_ndim(SsmVariant variant);

PathChoice bottleneck_branch(std::int64_t batch, std::int64_t channels_in,
                             std::int64_t channels_out, std::int64_t states);

/// Shape-simulates the plan; returns the max rank over all step results.
int check_intermediate_dims(const ContractionPlan& plan,
                            const PlanExtents& extents);

/// The unoptimized reference: FFT everything up front, then contract left to
/// right in operand order.
ContractionPlan naive_natural_plan(const ConvEinsumExpr& expr,
                                   const PlanExtents& extents);

/// Human-readable step listing, one line per step with predicted flops.
std::string plan_listing(const ContractionPlan& plan, const CostReport& cost);

/// Process-wide cache keyed by (expression, extents, max_ndim); safe for
/// concurrent lookup/insert.
std::shared_ptr<const std::pair<ContractionPlan, CostReport>> choose_plan_cached(
    const ConvEinsumExpr& expr, const PlanExtents& extents, int max_ndim);

}  // namespace centaurus
