#include "centaurus/planner.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <unordered_map>

namespace centaurus {

const char* path_tag_name(PathTag t) {
  switch (t) {
    case PathTag::NaturalOrder: return "NaturalOrder";
    case PathTag::FullKernel: return "FullKernel";
    case PathTag::Fallback: return "Fallback";
  }
  return "?";
}

const char* step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::FuseKernelGen: return "fuse_kernel";
    case StepKind::Fft: return "fft";
    case StepKind::Ifft: return "ifft";
    case StepKind::Contract: return "contract";
  }
  return "?";
}

namespace {

std::string extents_signature(const PlanExtents& e) {
  std::ostringstream os;
  for (const auto& [c, v] : e.index_extents) os << c << v << ";";
  os << "L" << e.seq_len;
  return os.str();
}

// ---- enumeration ----

struct EnumState {
  std::vector<PlanNode> nodes;
  std::vector<PlanStep> steps;
  std::vector<int> live;  // node ids
  bool ifft_done = false;
  bool fuse_done = false;
};

class Enumerator {
 public:
  Enumerator(const ConvEinsumExpr& expr, const PlanExtents& extents,
             int max_ndim)
      : expr_(expr), extents_(extents), max_ndim_(max_ndim) {
    if (static_cast<int>(expr.operands.size()) + 3 > 8)
      throw std::invalid_argument(
          "enumerate_plans: more than 8 operands including DFT nodes");
  }

  std::vector<ContractionPlan> run() {
    EnumState st;
    for (std::size_t i = 0; i < expr_.operands.size(); ++i) {
      const auto& op = expr_.operands[i];
      PlanNode node;
      node.subscripts = op.subscripts;
      node.has_conv_axis =
          op.subscripts.find(expr_.conv_index) != std::string::npos;
      node.freq = false;
      node.dtype = op.dtype;
      node.leafset = 1u << i;
      st.nodes.push_back(node);
      st.live.push_back(static_cast<int>(i));
    }
    st.fuse_done = expr_.kernel_operand < 0;
    recurse(st);

    std::sort(found_.begin(), found_.end(),
              [](const ContractionPlan& a, const ContractionPlan& b) {
                return a.signature < b.signature;
              });
    return std::move(found_);
  }

 private:
  void recurse(EnumState& st) {
    if (st.live.size() == 1 && st.ifft_done) {
      const PlanNode& last = st.nodes[st.live[0]];
      std::set<char> got(last.subscripts.begin(), last.subscripts.end());
      std::set<char> want(expr_.output_subscripts.begin(),
                          expr_.output_subscripts.end());
      if (got == want) emit(st);
      return;
    }

    // Fuse the kernel operand (must precede any use of it).
    if (!st.fuse_done) {
      EnumState next = st;
      next.fuse_done = true;
      PlanStep s;
      s.kind = StepKind::FuseKernelGen;
      s.a = expr_.kernel_operand;
      s.result = expr_.kernel_operand;  // produces the kernel leaf itself
      next.steps.push_back(s);
      recurse(next);
      return;  // nothing else may run before the kernel exists
    }

    for (std::size_t ii = 0; ii < st.live.size(); ++ii) {
      const int i = st.live[ii];
      const PlanNode& node = st.nodes[i];
      // FFT moves.
      if (node.has_conv_axis && !node.freq && !st.ifft_done) {
        EnumState next = st;
        PlanNode out = node;
        out.freq = true;
        out.dtype = is_complex(node.dtype) ? node.dtype
                    : (node.dtype == Dtype::Real32 ? Dtype::Complex64
                                                   : Dtype::Complex128);
        next.nodes.push_back(out);
        const int rid = static_cast<int>(next.nodes.size()) - 1;
        next.steps.push_back({StepKind::Fft, i, -1, rid});
        replace_live(next, i, rid);
        recurse(next);
      }
      // iFFT move: only once, and only after the f-hyperedge is fully merged.
      if (node.freq && !st.ifft_done && sole_f_carrier(st, i)) {
        EnumState next = st;
        PlanNode out = node;
        out.freq = false;
        out.dtype = (node.dtype == Dtype::Complex64) ? Dtype::Real32
                                                     : Dtype::Real64;
        next.nodes.push_back(out);
        const int rid = static_cast<int>(next.nodes.size()) - 1;
        next.steps.push_back({StepKind::Ifft, i, -1, rid});
        next.ifft_done = true;
        replace_live(next, i, rid);
        recurse(next);
      }
    }

    // Contract moves over unordered live pairs.
    for (std::size_t ai = 0; ai < st.live.size(); ++ai) {
      for (std::size_t bi = ai + 1; bi < st.live.size(); ++bi) {
        const int a = st.live[ai], b = st.live[bi];
        const PlanNode& na = st.nodes[a];
        const PlanNode& nb = st.nodes[b];
        if (na.has_conv_axis && nb.has_conv_axis && !(na.freq && nb.freq))
          continue;  // a convolution meet must happen in the frequency domain

        std::set<char> needed(expr_.output_subscripts.begin(),
                              expr_.output_subscripts.end());
        for (int other : st.live)
          if (other != a && other != b)
            for (char c : st.nodes[other].subscripts) needed.insert(c);

        std::string result;
        for (char c : na.subscripts)
          if (needed.count(c)) result.push_back(c);
        for (char c : nb.subscripts)
          if (needed.count(c) && result.find(c) == std::string::npos)
            result.push_back(c);

        if (static_cast<int>(result.size()) > max_ndim_) continue;

        EnumState next = st;
        PlanNode out;
        out.subscripts = result;
        out.has_conv_axis = result.find(expr_.conv_index) != std::string::npos;
        out.freq = out.has_conv_axis && (na.has_conv_axis ? na.freq : nb.freq);
        out.dtype = promote(na.dtype, nb.dtype);
        out.leafset = na.leafset | nb.leafset;
        next.nodes.push_back(out);
        const int rid = static_cast<int>(next.nodes.size()) - 1;
        next.steps.push_back({StepKind::Contract, a, b, rid});
        remove_live(next, a, b, rid);
        recurse(next);
      }
    }
  }

  bool sole_f_carrier(const EnumState& st, int id) const {
    for (int other : st.live)
      if (other != id && st.nodes[other].has_conv_axis) return false;
    return true;
  }

  static void replace_live(EnumState& st, int old_id, int new_id) {
    for (auto& v : st.live)
      if (v == old_id) v = new_id;
  }

  static void remove_live(EnumState& st, int a, int b, int result) {
    std::vector<int> out;
    for (int v : st.live)
      if (v != a && v != b) out.push_back(v);
    out.push_back(result);
    st.live = std::move(out);
  }

  void emit(const EnumState& st) {
    ContractionPlan plan;
    plan.nodes = st.nodes;
    plan.steps = st.steps;
    plan.num_leaves = static_cast<int>(expr_.operands.size());
    plan.fuse_factor = 1;
    for (auto e : expr_.fuse_extents)
      plan.fuse_factor *= static_cast<std::uint64_t>(e);
    // Collapsed-axis factor = full iteration extents / visible kernel axes.
    if (expr_.kernel_operand >= 0) {
      std::uint64_t visible = 1;
      for (char c : expr_.operands[expr_.kernel_operand].subscripts)
        if (c != expr_.conv_index)
          visible *= static_cast<std::uint64_t>(extents_.index_extents.at(c));
      plan.fuse_factor = std::max<std::uint64_t>(1, plan.fuse_factor / std::max<std::uint64_t>(1, visible));
    }
    plan.signature = structural_key(plan, root_of(plan));
    classify(plan);
    plan.expr_signature = expr_.str() + "|" + extents_signature(extents_);
    if (seen_.insert(plan.signature).second) found_.push_back(std::move(plan));
  }

  static int root_of(const ContractionPlan& plan) {
    return plan.steps.back().result;
  }

  // Enumeration-order-independent serialization of the plan tree rooted at
  // `id`. Interleavings of independent steps map to the same key; unordered
  // contraction operands are sorted.
  std::string structural_key(const ContractionPlan& plan, int id) const {
    // Find the step producing this node, if any.
    const PlanStep* producer = nullptr;
    for (const auto& s : plan.steps)
      if (s.result == id) { producer = &s; break; }
    if (producer == nullptr || producer->kind == StepKind::FuseKernelGen) {
      std::string leaf = "L" + std::to_string(id);
      if (producer != nullptr) leaf = "G(" + leaf + ")";
      return leaf;
    }
    switch (producer->kind) {
      case StepKind::Fft:
        return "F(" + structural_key(plan, producer->a) + ")";
      case StepKind::Ifft:
        return "I(" + structural_key(plan, producer->a) + ")";
      case StepKind::Contract: {
        std::string ka = structural_key(plan, producer->a);
        std::string kb = structural_key(plan, producer->b);
        if (kb < ka) std::swap(ka, kb);
        return "C{" + ka + "|" + kb + "}";
      }
      default:
        return "?";
    }
  }

  void classify(ContractionPlan& plan) const {
    const std::uint32_t u_bit = 1u;
    const std::uint32_t all = (1u << plan.num_leaves) - 1;
    for (const auto& s : plan.steps) {
      if (s.kind != StepKind::Contract) continue;
      const auto& na = plan.nodes[s.a];
      const auto& nb = plan.nodes[s.b];
      const bool a_is_u = (na.leafset & u_bit) != 0;
      const bool b_is_u = (nb.leafset & u_bit) != 0;
      if (!a_is_u && !b_is_u) continue;
      const std::uint32_t partner = a_is_u ? nb.leafset : na.leafset;
      if (partner == (all & ~u_bit)) plan.tag = PathTag::FullKernel;
      else if (partner & 2u) plan.tag = PathTag::NaturalOrder;
      else plan.tag = PathTag::Fallback;
      return;
    }
    plan.tag = PathTag::Fallback;
  }

  const ConvEinsumExpr& expr_;
  const PlanExtents& extents_;
  int max_ndim_;
  std::vector<ContractionPlan> found_;
  std::set<std::string> seen_;
};

std::int64_t node_extent(const PlanNode& node, char c, const PlanExtents& ext) {
  if (c == 'f') return node.freq ? ext.index_extents.at('f') : ext.seq_len;
  return ext.index_extents.at(c);
}

std::vector<std::int64_t> node_extents(const PlanNode& node,
                                       const PlanExtents& ext) {
  std::vector<std::int64_t> out;
  for (char c : node.subscripts) out.push_back(node_extent(node, c, ext));
  return out;
}

std::uint64_t numel_of(const std::vector<std::int64_t>& ext) {
  std::uint64_t v = 1;
  for (auto e : ext) v *= static_cast<std::uint64_t>(e);
  return v;
}

}  // namespace

std::vector<ContractionPlan> enumerate_plans(const ConvEinsumExpr& expr,
                                             const PlanExtents& extents,
                                             int max_ndim) {
  Enumerator e(expr, extents, max_ndim);
  return e.run();
}

CostReport cost_plan(const ContractionPlan& plan, const PlanExtents& extents,
                     bool training) {
  CostReport report;
  const double lp = static_cast<double>(extents.padded_len);
  const double fft_unit = 5.0 * lp * std::log2(std::max(2.0, lp));

  for (const auto& s : plan.steps) {
    StepCost sc;
    sc.kind = s.kind;
    const PlanNode& out = plan.nodes[s.result];
    sc.result_extents = node_extents(out, extents);
    sc.result_bytes = numel_of(sc.result_extents) * dtype_size(out.dtype);

    switch (s.kind) {
      case StepKind::FuseKernelGen: {
        // Iteration space covers the collapsed basis axes too: they are never
        // materialized but every element is generated (and exponentiated)
        // exactly once.
        std::uint64_t iter = static_cast<std::uint64_t>(extents.seq_len);
        for (char c : plan.nodes[s.a].subscripts)
          if (c != 'f')
            iter *= static_cast<std::uint64_t>(extents.index_extents.at(c));
        iter *= plan.fuse_factor;
        sc.multiply_adds = iter;
        sc.flops = 6 * iter;
        break;
      }
      case StepKind::Fft:
      case StepKind::Ifft: {
        std::uint64_t lanes = 1;
        const PlanNode& in = plan.nodes[s.a];
        for (char c : in.subscripts)
          if (c != 'f')
            lanes *= static_cast<std::uint64_t>(extents.index_extents.at(c));
        sc.multiply_adds = 0;
        sc.flops = static_cast<std::uint64_t>(
            std::llround(static_cast<double>(lanes) * fft_unit));
        break;
      }
      case StepKind::Contract: {
        const PlanNode& na = plan.nodes[s.a];
        const PlanNode& nb = plan.nodes[s.b];
        std::uint64_t macs = 1;
        std::set<char> seen;
        for (char c : na.subscripts)
          if (seen.insert(c).second)
            macs *= static_cast<std::uint64_t>(node_extent(na, c, extents));
        for (char c : nb.subscripts)
          if (seen.insert(c).second)
            macs *= static_cast<std::uint64_t>(node_extent(nb, c, extents));
        sc.multiply_adds = macs;
        sc.flops = macs * FlopCounter::mac_flops(na.dtype, nb.dtype);
        break;
      }
    }
    report.total_multiply_adds += sc.multiply_adds;
    report.total_flops += sc.flops;
    report.peak_intermediate_elements =
        std::max(report.peak_intermediate_elements, numel_of(sc.result_extents));
    report.max_intermediate_ndim = std::max(
        report.max_intermediate_ndim, static_cast<int>(sc.result_extents.size()));
    report.per_step.push_back(std::move(sc));
  }
  if (training) {
    report.total_flops *= 3;
    report.total_multiply_adds *= 3;
    for (auto& sc : report.per_step) {
      sc.flops *= 3;
      sc.multiply_adds *= 3;
    }
  }
  return report;
}

std::pair<ContractionPlan, CostReport> choose_plan(const ConvEinsumExpr& expr,
                                                   const PlanExtents& extents,
                                                   int max_ndim) {
  auto plans = enumerate_plans(expr, extents, max_ndim);
  if (plans.empty())
    throw std::runtime_error(
        "choose_plan: no feasible plan under max_ndim=" +
        std::to_string(max_ndim) + "; try a larger intermediate-rank bound");
  int best = -1;
  CostReport best_cost;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    CostReport c = cost_plan(plans[i], extents);
    const bool better =
        best < 0 || c.total_flops < best_cost.total_flops ||
        (c.total_flops == best_cost.total_flops &&
         c.peak_intermediate_elements < best_cost.peak_intermediate_elements);
    if (better) {
      best = static_cast<int>(i);
      best_cost = std::move(c);
    }
  }
  return {plans[static_cast<std::size_t>(best)], std::move(best_cost)};
}

int default_max_ndim(SsmVariant variant) {
  switch (variant) {
    case SsmVariant::Full:
    case SsmVariant::Grouped:
      return 4;
    default:
      return 3;
  }
}

PathChoice bottleneck_branch(std::int64_t batch, std::int64_t channels_in,
                             std::int64_t channels_out, std::int64_t states) {
  if (batch < 1 || channels_in < 1 || channels_out < 1 || states < 1)
    throw std::invalid_argument("bottleneck_branch: dims must be positive");
  PathChoice out;
  out.input_side = 1.0 / static_cast<double>(batch) + 1.0 / static_cast<double>(states);
  out.kernel_side = 1.0 / static_cast<double>(channels_in) +
                    1.0 / static_cast<double>(channels_out);
  // (1/B + 1/N) < (1/H + 1/H'), compared exactly in integers.
  const __int128 lhs = static_cast<__int128>(states + batch) * channels_in * channels_out;
  const __int128 rhs = static_cast<__int128>(channels_in + channels_out) * batch * states;
  const bool full_strictly_better = lhs < rhs;
  out.tag = full_strictly_better ? PathTag::FullKernel : PathTag::NaturalOrder;
  out.fft_early = (out.tag == PathTag::NaturalOrder)
                      ? (states <= channels_in)
                      : (channels_in * channels_out <= states);
  return out;
}

int check_intermediate_dims(const ContractionPlan& plan,
                            const PlanExtents& extents) {
  (void)extents;
  int max_ndim = 0;
  for (const auto& s : plan.steps)
    max_ndim = std::max(
        max_ndim, static_cast<int>(plan.nodes[s.result].subscripts.size()));
  return max_ndim;
}

ContractionPlan naive_natural_plan(const ConvEinsumExpr& expr,
                                   const PlanExtents& extents) {
  // FFT every time operand up front, contract left to right, iFFT last.
  ContractionPlan plan;
  plan.num_leaves = static_cast<int>(expr.operands.size());
  for (std::size_t i = 0; i < expr.operands.size(); ++i) {
    const auto& op = expr.operands[i];
    PlanNode node;
    node.subscripts = op.subscripts;
    node.has_conv_axis = op.subscripts.find(expr.conv_index) != std::string::npos;
    node.dtype = op.dtype;
    node.leafset = 1u << i;
    plan.nodes.push_back(node);
  }
  auto add_node = [&](PlanNode n) {
    plan.nodes.push_back(std::move(n));
    return static_cast<int>(plan.nodes.size()) - 1;
  };
  std::vector<int> current(expr.operands.size());
  for (std::size_t i = 0; i < expr.operands.size(); ++i)
    current[i] = static_cast<int>(i);

  if (expr.kernel_operand >= 0) {
    plan.steps.push_back({StepKind::FuseKernelGen, expr.kernel_operand, -1,
                          expr.kernel_operand});
    std::uint64_t full = 1, visible = 1;
    for (auto e : expr.fuse_extents) full *= static_cast<std::uint64_t>(e);
    for (char c : expr.operands[expr.kernel_operand].subscripts)
      if (c != expr.conv_index)
        visible *= static_cast<std::uint64_t>(extents.index_extents.at(c));
    plan.fuse_factor = std::max<std::uint64_t>(1, full / std::max<std::uint64_t>(1, visible));
  }
  for (std::size_t i = 0; i < expr.operands.size(); ++i) {
    if (!plan.nodes[current[i]].has_conv_axis) continue;
    PlanNode out = plan.nodes[current[i]];
    out.freq = true;
    out.dtype = is_complex(out.dtype) ? out.dtype
                : (out.dtype == Dtype::Real32 ? Dtype::Complex64
                                              : Dtype::Complex128);
    const int rid = add_node(out);
    plan.steps.push_back({StepKind::Fft, current[i], -1, rid});
    current[i] = rid;
  }
  int acc = current[0];
  for (std::size_t i = 1; i < expr.operands.size(); ++i) {
    const PlanNode& na = plan.nodes[acc];
    const PlanNode& nb = plan.nodes[current[i]];
    std::set<char> needed(expr.output_subscripts.begin(),
                          expr.output_subscripts.end());
    for (std::size_t j = i + 1; j < expr.operands.size(); ++j)
      for (char c : expr.operands[j].subscripts) needed.insert(c);
    PlanNode out;
    for (char c : na.subscripts)
      if (needed.count(c)) out.subscripts.push_back(c);
    for (char c : nb.subscripts)
      if (needed.count(c) && out.subscripts.find(c) == std::string::npos)
        out.subscripts.push_back(c);
    out.has_conv_axis = out.subscripts.find(expr.conv_index) != std::string::npos;
    out.freq = out.has_conv_axis;
    out.dtype = promote(na.dtype, nb.dtype);
    out.leafset = na.leafset | nb.leafset;
    const int rid = add_node(out);
    plan.steps.push_back({StepKind::Contract, acc, current[i], rid});
    acc = rid;
  }
  PlanNode fin = plan.nodes[acc];
  fin.freq = false;
  fin.dtype = (fin.dtype == Dtype::Complex64) ? Dtype::Real32 : Dtype::Real64;
  const int rid = add_node(fin);
  plan.steps.push_back({StepKind::Ifft, acc, -1, rid});

  plan.tag = expr.operands.size() <= 2 ? PathTag::FullKernel
                                       : PathTag::NaturalOrder;
  std::ostringstream os;
  os << "naive-natural:" << expr.str();
  plan.signature = os.str();
  plan.expr_signature = expr.str() + "|" + extents_signature(extents);
  return plan;
}

std::string plan_listing(const ContractionPlan& plan, const CostReport& cost) {
  std::ostringstream os;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& s = plan.steps[i];
    const auto& sc = cost.per_step[i];
    os << step_kind_name(s.kind) << "  ";
    auto describe = [&](int id) {
      const auto& n = plan.nodes[id];
      std::string subs = n.subscripts;
      for (auto& c : subs)
        if (c == 'f' && !n.freq) c = 't';
      return subs;
    };
    switch (s.kind) {
      case StepKind::FuseKernelGen:
        os << "-> " << describe(s.result);
        break;
      case StepKind::Fft:
      case StepKind::Ifft:
        os << describe(s.a) << " -> " << describe(s.result);
        break;
      case StepKind::Contract:
        os << describe(s.a) << " , " << describe(s.b) << " -> "
           << describe(s.result);
        break;
    }
    os << "  macs=" << sc.multiply_adds << "  flops=" << sc.flops << "\n";
  }
  os << "total_flops=" << cost.total_flops
     << "  peak_intermediate_elements=" << cost.peak_intermediate_elements
     << "  max_intermediate_ndim=" << cost.max_intermediate_ndim << "\n";
  return os.str();
}

namespace {
std::mutex g_cache_mutex;
std::unordered_map<std::string,
                   std::shared_ptr<const std::pair<ContractionPlan, CostReport>>>
    g_plan_cache;
}  // namespace

std::shared_ptr<const std::pair<ContractionPlan, CostReport>> choose_plan_cached(
    const ConvEinsumExpr& expr, const PlanExtents& extents, int max_ndim) {
  const std::string key =
      expr.str() + "|" + extents_signature(extents) + "|" + std::to_string(max_ndim);
  {
    std::lock_guard<std::mutex> lock(g_cache_mutex);
    auto it = g_plan_cache.find(key);
    if (it != g_plan_cache.end()) return it->second;
  }
  auto result = std::make_shared<const std::pair<ContractionPlan, CostReport>>(
      choose_plan(expr, extents, max_ndim));
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  auto [it, inserted] = g_plan_cache.emplace(key, result);
  return it->second;
}

}  // namespace centaurus
