#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "centaurus/tensor.hpp"

namespace centaurus {

/// Parsed einsum expression. Indices are single letters a-z; an index that
/// appears in some operand but not in the output is summed over.
struct EinsumSpec {
  std::vector<std::string> operand_subscripts;
  std::string output_subscripts;
  std::map<char, std::int64_t> extent_map;  // filled in by bind()

  /// Parses "bif,ni,nf,jn->bjf". The output part is mandatory here; implicit
  /// outputs are not used anywhere in this codebase.
  static EinsumSpec parse(const std::string& expr);

  /// Checks operand shapes against the subscripts and fills extent_map.
  /// Throws with the offending index named on any mismatch.
  void bind(const std::vector<Tensor>& operands);

  std::string str() const;
};

/// Contracts two operands into `result_subscripts` (which fixes both the kept
/// index set and the output axis order). Indices absent from the result are
/// summed; an index missing from one operand broadcasts over it. When a
/// counter is given it records product(extents of every involved index)
/// multiply-adds, weighted by the two operand dtypes -- exactly the work the
/// naive loop nest for this step performs.
Tensor contract_pair(const Tensor& a, const std::string& subs_a,
                     const Tensor& b, const std::string& subs_b,
                     const std::string& result_subscripts,
                     FlopCounter* counter = nullptr);

/// Evaluates the spec by folding operands pairwise left to right, keeping at
/// each step only the indices still needed. Cost accounting is per pairwise
/// step, as above.
Tensor einsum_eval(const EinsumSpec& spec, const std::vector<Tensor>& operands,
                   FlopCounter* counter = nullptr);

/// Convenience: parse + bind + eval.
Tensor einsum(const std::string& expr, const std::vector<Tensor>& operands,
              FlopCounter* counter = nullptr);

}  // namespace centaurus
