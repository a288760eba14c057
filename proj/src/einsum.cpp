#include "centaurus/einsum.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <set>
#include <sstream>

namespace centaurus {

namespace {

bool valid_index(char c) { return c >= 'a' && c <= 'z'; }

std::string strip(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

// Gathers `t` (axes = subs) into a dense tensor laid out as target_subs.
// Axes in target_subs missing from subs broadcast (stride 0).
Tensor gather_as(const Tensor& t, const std::string& subs,
                 const std::string& target_subs,
                 const std::map<char, std::int64_t>& ext) {
  std::vector<std::int64_t> target_ext;
  target_ext.reserve(target_subs.size());
  for (char c : target_subs) target_ext.push_back(ext.at(c));
  Tensor out(target_ext, t.dtype());
  if (out.numel() == 0) return out;

  const auto src_strides = t.strides();
  std::vector<std::int64_t> stride_for(target_subs.size(), 0);
  for (std::size_t d = 0; d < target_subs.size(); ++d) {
    auto pos = subs.find(target_subs[d]);
    if (pos != std::string::npos) stride_for[d] = src_strides[pos];
  }

  std::vector<std::int64_t> idx(target_subs.size(), 0);
  const std::size_t n = out.numel();
  std::int64_t src = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    out.set_from_complex(flat, t.get_as_complex(static_cast<std::size_t>(src)));
    for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
      src += stride_for[d];
      if (++idx[d] < target_ext[d]) break;
      src -= stride_for[d] * target_ext[d];
      idx[d] = 0;
    }
  }
  return out;
}

template <typename T>
void batched_gemm(const Tensor& a, const Tensor& b, Tensor& c,
                  std::int64_t batch, std::int64_t m, std::int64_t k,
                  std::int64_t n) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const T* pa = a.data<T>().data();
  const T* pb = b.data<T>().data();
  T* pc = c.data<T>().data();
  for (std::int64_t i = 0; i < batch; ++i) {
    Eigen::Map<const Mat> ma(pa + i * m * k, m, k);
    Eigen::Map<const Mat> mb(pb + i * k * n, k, n);
    Eigen::Map<Mat> mc(pc + i * m * n, m, n);
    mc.noalias() = ma * mb;
  }
}

}  // namespace

EinsumSpec EinsumSpec::parse(const std::string& expr) {
  const std::string s = strip(expr);
  auto arrow = s.find("->");
  if (arrow == std::string::npos)
    throw std::invalid_argument("einsum: expression must contain '->'");
  EinsumSpec spec;
  spec.output_subscripts = s.substr(arrow + 2);
  std::string lhs = s.substr(0, arrow);
  std::stringstream ss(lhs);
  std::string part;
  while (std::getline(ss, part, ',')) spec.operand_subscripts.push_back(part);
  if (spec.operand_subscripts.empty())
    throw std::invalid_argument("einsum: no operands");

  std::set<char> seen;
  for (const auto& sub : spec.operand_subscripts) {
    std::set<char> in_this;
    for (char c : sub) {
      if (!valid_index(c))
        throw std::invalid_argument(std::string("einsum: bad index '") + c + "'");
      if (!in_this.insert(c).second)
        throw std::invalid_argument(
            std::string("einsum: repeated index '") + c +
            "' within one operand is unsupported");
      seen.insert(c);
    }
  }
  if (seen.size() > 26) throw std::invalid_argument("einsum: too many indices");
  for (char c : spec.output_subscripts)
    if (!seen.count(c))
      throw std::invalid_argument(std::string("einsum: output index '") + c +
                                  "' appears in no operand");
  return spec;
}

void EinsumSpec::bind(const std::vector<Tensor>& operands) {
  if (operands.size() != operand_subscripts.size())
    throw std::invalid_argument("einsum: operand count mismatch");
  extent_map.clear();
  for (std::size_t i = 0; i < operands.size(); ++i) {
    const auto& sub = operand_subscripts[i];
    if (operands[i].ndim() != sub.size())
      throw std::invalid_argument("einsum: operand " + std::to_string(i) +
                                  " rank does not match '" + sub + "'");
    for (std::size_t d = 0; d < sub.size(); ++d) {
      char c = sub[d];
      auto e = operands[i].extent(d);
      auto [it, inserted] = extent_map.emplace(c, e);
      if (!inserted && it->second != e)
        throw std::invalid_argument(
            std::string("einsum: extent mismatch for index '") + c + "' (" +
            std::to_string(it->second) + " vs " + std::to_string(e) + ")");
    }
  }
}

std::string EinsumSpec::str() const {
  std::string s;
  for (std::size_t i = 0; i < operand_subscripts.size(); ++i) {
    if (i) s += ",";
    s += operand_subscripts[i];
  }
  s += "->";
  s += output_subscripts;
  return s;
}

Tensor contract_pair(const Tensor& a, const std::string& subs_a,
                     const Tensor& b, const std::string& subs_b,
                     const std::string& result_subscripts,
                     FlopCounter* counter) {
  std::map<char, std::int64_t> ext;
  auto record = [&](const Tensor& t, const std::string& subs) {
    if (t.ndim() != subs.size())
      throw std::invalid_argument("contract: rank mismatch for '" + subs + "'");
    for (std::size_t d = 0; d < subs.size(); ++d) {
      auto [it, inserted] = ext.emplace(subs[d], t.extent(d));
      if (!inserted && it->second != t.extent(d))
        throw std::invalid_argument(
            std::string("contract: extent mismatch for index '") + subs[d] + "'");
    }
  };
  record(a, subs_a);
  record(b, subs_b);

  std::string batch, mdims, ndims, kdims;
  for (char c : result_subscripts) {
    bool in_a = subs_a.find(c) != std::string::npos;
    bool in_b = subs_b.find(c) != std::string::npos;
    if (!in_a && !in_b)
      throw std::invalid_argument(
          std::string("contract: result index '") + c + "' not in operands");
    if (in_a && in_b) batch.push_back(c);
    else if (in_a) mdims.push_back(c);
    else ndims.push_back(c);
  }
  for (auto& [c, e] : ext)
    if (result_subscripts.find(c) == std::string::npos) kdims.push_back(c);

  std::int64_t nb = 1, nm = 1, nn = 1, nk = 1;
  for (char c : batch) nb *= ext[c];
  for (char c : mdims) nm *= ext[c];
  for (char c : ndims) nn *= ext[c];
  for (char c : kdims) nk *= ext[c];

  if (counter) {
    std::uint64_t macs = 1;
    for (auto& [c, e] : ext) macs *= static_cast<std::uint64_t>(e);
    counter->add_macs(macs, a.dtype(), b.dtype());
  }

  const Dtype out_dtype = promote(a.dtype(), b.dtype());
  Tensor ga = gather_as(a.astype(out_dtype), subs_a, batch + mdims + kdims, ext);
  Tensor gb = gather_as(b.astype(out_dtype), subs_b, batch + kdims + ndims, ext);

  std::vector<std::int64_t> c_ext;
  for (char c : batch + mdims + ndims) c_ext.push_back(ext[c]);
  Tensor gc(c_ext, out_dtype);
  if (gc.numel() != 0 && nk != 0) {
    switch (out_dtype) {
      case Dtype::Real32: batched_gemm<float>(ga, gb, gc, nb, nm, nk, nn); break;
      case Dtype::Real64: batched_gemm<double>(ga, gb, gc, nb, nm, nk, nn); break;
      case Dtype::Complex64:
        batched_gemm<std::complex<float>>(ga, gb, gc, nb, nm, nk, nn);
        break;
      case Dtype::Complex128:
        batched_gemm<std::complex<double>>(ga, gb, gc, nb, nm, nk, nn);
        break;
    }
  }
  return gather_as(gc, batch + mdims + ndims, result_subscripts, ext);
}

Tensor einsum_eval(const EinsumSpec& spec_in, const std::vector<Tensor>& operands,
                   FlopCounter* counter) {
  EinsumSpec spec = spec_in;
  spec.bind(operands);

  if (operands.size() == 1) {
    // Pure reduce/permute; costed as one pass over the full index space.
    std::string subs = spec.operand_subscripts[0];
    std::string out = spec.output_subscripts;
    if (counter) {
      std::uint64_t macs = 1;
      for (char c : subs) macs *= static_cast<std::uint64_t>(spec.extent_map[c]);
      counter->add_macs(macs, operands[0].dtype(), operands[0].dtype());
    }
    Tensor ones({}, operands[0].dtype());
    ones.set_from_complex(0, {1.0, 0.0});
    return contract_pair(operands[0], subs, ones, "", out, nullptr);
  }

  Tensor acc = operands[0];
  std::string acc_subs = spec.operand_subscripts[0];
  for (std::size_t i = 1; i < operands.size(); ++i) {
    std::set<char> needed(spec.output_subscripts.begin(),
                          spec.output_subscripts.end());
    for (std::size_t j = i + 1; j < operands.size(); ++j)
      for (char c : spec.operand_subscripts[j]) needed.insert(c);

    std::string result;
    if (i + 1 == operands.size()) {
      result = spec.output_subscripts;
    } else {
      for (char c : acc_subs)
        if (needed.count(c)) result.push_back(c);
      for (char c : spec.operand_subscripts[i])
        if (needed.count(c) && result.find(c) == std::string::npos)
          result.push_back(c);
    }
    acc = contract_pair(acc, acc_subs, operands[i], spec.operand_subscripts[i],
                        result, counter);
    acc_subs = result;
  }
  return acc;
}

Tensor einsum(const std::string& expr, const std::vector<Tensor>& operands,
              FlopCounter* counter) {
  return einsum_eval(EinsumSpec::parse(expr), operands, counter);
}

}  // namespace centaurus
