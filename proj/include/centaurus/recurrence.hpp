#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "centaurus/ssm_params.hpp"

namespace centaurus {

/// Complex internal state of one stream (one batch element). Shape per
/// variant: depthwise (H, N); pointwise bottleneck (N); bottleneck (N, M);
/// full (H', H, N); grouped (G, H'/G, H/G, N).
struct StreamState {
  std::vector<std::complex<double>> x;

  static StreamState zero(const SsmBlockSpec& spec);
  std::size_t expected_size(const SsmBlockSpec& spec) const;
};

/// Closed-form parameter / per-step-FLOP counts (Appendix-style accounting:
/// the step-size parameter is absorbed, peripherals are not counted).
struct InferenceCost {
  std::uint64_t params = 0;
  std::uint64_t flops_per_step = 0;
  std::string formula_tag;
};

/// Per-step scalar-operation tally used by the instrumented step.
struct StepOpCounter {
  std::uint64_t flops = 0;
  void complex_mult() { flops += 6; }          // 4 mul + 2 add
  void real_into_complex_add() { flops += 1; }
  void complex_into_complex_add() { flops += 2; }
  void real_mac() { flops += 2; }
};

/// Precomputed per-block streaming engine: discretized transition, real
/// projections, and the per-variant readout. States update before readout,
/// so a unit impulse reads out C*E*Re(Bbar-weighted unit) at lag zero.
class StreamEngine {
 public:
  StreamEngine(const SsmBlockSpec& spec, const SsmParams& params);

  const SsmBlockSpec& spec() const { return spec_; }

  /// One sample in (length H), one sample out (length H_out); state mutated
  /// in place. Only real parts leave the block.
  void step(StreamState& state, const double* u_t, double* y_t,
            StepOpCounter* ops = nullptr) const;

  std::vector<double> step(StreamState& state,
                           const std::vector<double>& u_t) const;

 private:
  SsmBlockSpec spec_;
  std::vector<std::complex<double>> abar_;  // discretized transition
  std::vector<double> bbar_;                // (N, H) for bottlenecks
  std::vector<double> c_;                   // (H', N)
  std::vector<double> e_;                   // weighting
  std::vector<double> mixer_;               // (H', H)
  mutable std::vector<double> scratch_;     // readout staging
};

/// Streams u (batch, H, L) sample by sample from zero state; equals the
/// FFT-route forward within fp tolerance.
Tensor run_stream(const SsmBlockSpec& spec, const SsmParams& params,
                  const Tensor& u);

/// Table-style closed forms for every row, including complex-projection and
/// data-gated rows that have no execution path here.
enum class CostRow {
  Depthwise,
  DepthwiseSeparable,
  PointwiseBottleneck,
  Bottleneck,
  Full,
  Grouped,
  DepthwiseComplex,
  DepthwiseSeparableComplex,
  PointwiseBottleneckComplex,
  BottleneckComplex,
  FullComplex,
  DepthwiseSeparableS6,
  Mamba,
};

CostRow cost_row_from_name(const std::string& name);

struct CostDims {
  std::int64_t channels_in = 1;   // H
  std::int64_t channels_out = 1;  // H'
  std::int64_t states = 1;        // N
  std::int64_t substates = 1;     // M
  std::int64_t low_rank = 16;     // r (S6/Mamba rows)
};

InferenceCost count_inference(CostRow row, const CostDims& dims);
InferenceCost count_inference(const SsmBlockSpec& spec);

/// Extra cost of a projected residual connection around a block.
InferenceCost residual_projection_cost(std::int64_t channels_in,
                                       std::int64_t channels_out);

/// Executes one instrumented step and returns the measured FLOPs; equals
/// count_inference(spec).flops_per_step exactly for the real-variant rows.
std::uint64_t measure_step_flops(const SsmBlockSpec& spec,
                                 const SsmParams& params);

}  // namespace centaurus
