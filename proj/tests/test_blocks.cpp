#include <doctest.h>

#include <random>

#include "centaurus/blocks.hpp"
#include "centaurus/planner.hpp"

using namespace centaurus;

namespace {

Tensor random_input(std::int64_t b, std::int64_t h, std::int64_t l,
                    std::uint64_t seed) {
  Tensor u({b, h, l}, Dtype::Real64);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : u.at_real64()) v = dist(rng);
  return u;
}

SsmBlockSpec make_spec(SsmVariant variant, std::int64_t h, std::int64_t hp,
                       std::int64_t n, std::int64_t m = 1, std::int64_t g = 1,
                       std::int64_t l = 32) {
  SsmBlockSpec spec;
  spec.variant = variant;
  spec.channels_in = h;
  spec.channels_out = hp;
  spec.states = n;
  spec.substates = m;
  spec.groups = g;
  spec.seq_len = l;
  return spec;
}

}  // namespace

TEST_CASE("block_expr emits the documented expressions") {
  auto bn = block_expr(make_spec(SsmVariant::Bottleneck, 3, 2, 4, 2));
  REQUIRE(bn.operands.size() == 4);
  CHECK(bn.operands[0].name == "u");
  CHECK(bn.operands[0].subscripts == "bif");
  CHECK(bn.operands[1].name == "B");
  CHECK(bn.operands[1].subscripts == "ni");
  CHECK(bn.operands[2].name == "k");
  CHECK(bn.operands[2].subscripts == "nf");
  CHECK(bn.operands[3].name == "C");
  CHECK(bn.operands[3].subscripts == "jn");
  CHECK(bn.output_subscripts == "bjf");

  auto dw = block_expr(make_spec(SsmVariant::Depthwise, 4, 4, 2));
  CHECK(dw.operands.size() == 2);
  CHECK(dw.output_subscripts == "bif");
  CHECK(dw.nominal == "bif,nif->bif");

  auto full = block_expr(make_spec(SsmVariant::Full, 3, 5, 2));
  CHECK(full.operands[1].subscripts == "jif");

  auto grouped = block_expr(make_spec(SsmVariant::Grouped, 4, 6, 2, 1, 2));
  CHECK(grouped.operands[0].subscripts == "bgif");
  CHECK(grouped.operands[1].subscripts == "gjif");
  CHECK(grouped.output_subscripts == "bgjf");
}

TEST_CASE("full block with unit channels behaves as depthwise") {
  auto full_spec = make_spec(SsmVariant::Full, 1, 1, 3);
  auto dw_spec = make_spec(SsmVariant::Depthwise, 1, 1, 3);
  SsmParams fp = init_params(full_spec, 11);
  SsmParams dp;
  dp.delta = fp.delta;                      // (1, N) in both layouts
  dp.a = fp.a.reshaped({1, 3});             // (1,1,N) -> (1,N)
  dp.e = fp.e.reshaped({1, 3});
  Tensor u = random_input(2, 1, 16, 5);
  Tensor yf = forward_fft_auto(full_spec, fp, u);
  Tensor yd = forward_fft_auto(dw_spec, dp, u);
  CHECK(max_abs_diff(yf, yd) < 1e-12);
}

TEST_CASE("impulse response equals the materialized kernel") {
  for (auto variant :
       {SsmVariant::Depthwise, SsmVariant::DepthwiseSeparable, SsmVariant::Full,
        SsmVariant::Grouped, SsmVariant::PointwiseBottleneck,
        SsmVariant::Bottleneck}) {
    const std::int64_t g = variant == SsmVariant::Grouped ? 2 : 1;
    auto spec = make_spec(variant, 4, variant == SsmVariant::Depthwise ? 4 : 6,
                          3, variant == SsmVariant::Bottleneck ? 2 : 1, g, 24);
    SsmParams p = init_params(spec, 3);
    Tensor u({1, spec.channels_in, spec.seq_len}, Dtype::Real64);
    u.at_real64()[0] = 1.0;  // impulse on channel 0 at t = 0
    Tensor y = forward_fft_auto(spec, p, u);
    Tensor k = full_kernel(spec, p, spec.seq_len);
    for (std::int64_t j = 0; j < spec.channels_out; ++j)
      for (std::int64_t t = 0; t < spec.seq_len; ++t)
        CHECK(y.at_real64()[static_cast<std::size_t>(
                  (0 * spec.channels_out + j) * spec.seq_len + t)] ==
              doctest::Approx(k.at_real64()[static_cast<std::size_t>(
                  (j * spec.channels_in + 0) * spec.seq_len + t)])
                  .epsilon(1e-10));
  }
}

TEST_CASE("integrator: Abar = 1 with identity projections gives a running sum") {
  auto spec = make_spec(SsmVariant::PointwiseBottleneck, 3, 3, 3, 1, 1, 16);
  SsmParams p;
  p.delta = Tensor({3}, Dtype::Real64);
  for (auto& v : p.delta.at_real64()) v = 1.0;
  p.a = Tensor({3}, Dtype::Complex128);  // A = 0 -> Abar = 1
  p.b = Tensor({3, 3}, Dtype::Real64);
  p.c = Tensor({3, 3}, Dtype::Real64);
  for (int i = 0; i < 3; ++i) {
    p.b.at_real64()[static_cast<std::size_t>(i * 3 + i)] = 1.0;
    p.c.at_real64()[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  }
  Tensor u = random_input(1, 3, 16, 9);
  Tensor y = forward_fft_auto(spec, p, u);
  for (std::int64_t i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (std::int64_t t = 0; t < 16; ++t) {
      acc += u.at_real64()[static_cast<std::size_t>(i * 16 + t)];
      CHECK(y.at_real64()[static_cast<std::size_t>(i * 16 + t)] ==
            doctest::Approx(acc).epsilon(1e-10));
    }
  }
}

TEST_CASE("fft forward agrees with the naive oracle on every variant") {
  struct Cfg {
    SsmVariant variant;
    std::int64_t h, hp, n, m, g;
  };
  for (const Cfg& c : {Cfg{SsmVariant::Depthwise, 3, 3, 4, 1, 1},
                       Cfg{SsmVariant::DepthwiseSeparable, 3, 5, 4, 1, 1},
                       Cfg{SsmVariant::Grouped, 4, 6, 3, 1, 2},
                       Cfg{SsmVariant::PointwiseBottleneck, 3, 5, 6, 1, 1},
                       Cfg{SsmVariant::Bottleneck, 3, 5, 6, 2, 1},
                       Cfg{SsmVariant::Full, 3, 5, 4, 1, 1}}) {
    auto spec = make_spec(c.variant, c.h, c.hp, c.n, c.m, c.g, 64);
    SsmParams p = init_params(spec, 42);
    Tensor u = random_input(2, c.h, 64, 1234);
    Tensor fast = forward_fft_auto(spec, p, u);
    Tensor slow = forward_naive(spec, p, u);
    CHECK(max_abs_diff(fast, slow) < 1e-10);
  }
}

TEST_CASE("bottleneck at the cited dims matches the oracle") {
  auto spec = make_spec(SsmVariant::Bottleneck, 3, 5, 6, 2, 1, 64);
  SsmParams p = init_params(spec, 7);
  Tensor u = random_input(2, 3, 64, 77);
  Tensor fast = forward_fft_auto(spec, p, u);
  Tensor slow = forward_naive(spec, p, u);
  CHECK(max_abs_diff(fast, slow) <= 1e-10);

  Tensor zero({2, 3, 64}, Dtype::Real64);
  CHECK(max_abs(forward_naive(spec, p, zero)) == 0.0);

  Tensor u1 = random_input(2, 3, 1, 5);
  auto spec1 = make_spec(SsmVariant::Bottleneck, 3, 5, 6, 2, 1, 1);
  Tensor y1 = forward_naive(spec1, p, u1);
  Tensor k = full_kernel(spec1, p, 1);
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (std::int64_t i = 0; i < 3; ++i)
        acc += k.at_real64()[static_cast<std::size_t>(j * 3 + i)] *
               u1.at_real64()[static_cast<std::size_t>(b * 3 + i)];
      CHECK(y1.at_real64()[static_cast<std::size_t>(b * 5 + j)] ==
            doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("every feasible plan computes the same output") {
  auto spec = make_spec(SsmVariant::Bottleneck, 3, 5, 4, 2, 1, 32);
  SsmParams p = init_params(spec, 21);
  Tensor u = random_input(2, 3, 32, 2121);
  auto expr = block_expr(spec);
  auto ext = block_extents(spec, 2);
  Tensor reference = forward_naive(spec, p, u);
  for (int bound : {3, 5}) {
    auto plans = enumerate_plans(expr, ext, bound);
    REQUIRE(!plans.empty());
    for (const auto& plan : plans) {
      Tensor y = forward_fft(spec, p, u, plan);
      CHECK(max_abs_diff(y, reference) < 1e-10);
    }
  }
}

TEST_CASE("executed contraction counts equal the cost model exactly") {
  for (auto variant : {SsmVariant::Bottleneck, SsmVariant::PointwiseBottleneck,
                       SsmVariant::Depthwise, SsmVariant::Full}) {
    auto spec = make_spec(variant, 3, variant == SsmVariant::Depthwise ? 3 : 4,
                          5, variant == SsmVariant::Bottleneck ? 2 : 1, 1, 16);
    SsmParams p = init_params(spec, 4);
    Tensor u = random_input(2, 3, 16, 44);
    auto expr = block_expr(spec);
    auto ext = block_extents(spec, 2);
    auto plans = enumerate_plans(expr, ext, default_max_ndim(variant));
    for (const auto& plan : plans) {
      auto cost = cost_plan(plan, ext);
      std::vector<FlopCounter> measured;
      forward_fft(spec, p, u, plan, &measured);
      std::size_t mi = 0;
      for (const auto& sc : cost.per_step) {
        if (sc.kind != StepKind::Contract) continue;
        REQUIRE(mi < measured.size());
        CHECK(measured[mi].scalar_multiply_adds == sc.multiply_adds);
        ++mi;
      }
      CHECK(mi == measured.size());
    }
  }
}

TEST_CASE("causality: the future never leaks backwards") {
  auto spec = make_spec(SsmVariant::Bottleneck, 2, 3, 4, 2, 1, 32);
  SsmParams p = init_params(spec, 8);
  Tensor u = random_input(1, 2, 32, 88);
  Tensor y = forward_fft_auto(spec, p, u);
  const std::int64_t t0 = 13;
  Tensor u2 = u;
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t t = t0; t < 32; ++t)
      u2.at_real64()[static_cast<std::size_t>(i * 32 + t)] += 7.5 * (i + 1);
  Tensor y2 = forward_fft_auto(spec, p, u2);
  for (std::int64_t j = 0; j < 3; ++j)
    for (std::int64_t t = 0; t < t0; ++t)
      CHECK(y.at_real64()[static_cast<std::size_t>(j * 32 + t)] ==
            doctest::Approx(
                y2.at_real64()[static_cast<std::size_t>(j * 32 + t)])
                .epsilon(1e-12));
}

TEST_CASE("linearity and time invariance") {
  auto spec = make_spec(SsmVariant::PointwiseBottleneck, 2, 3, 5, 1, 1, 32);
  SsmParams p = init_params(spec, 15);
  Tensor u1 = random_input(1, 2, 32, 1);
  Tensor u2 = random_input(1, 2, 32, 2);
  const double alpha = 1.7, beta = -0.4;
  Tensor mix = add(scale(u1, alpha), scale(u2, beta));
  Tensor lhs = forward_fft_auto(spec, p, mix);
  Tensor rhs = add(scale(forward_fft_auto(spec, p, u1), alpha),
                   scale(forward_fft_auto(spec, p, u2), beta));
  CHECK(max_abs_diff(lhs, rhs) < 1e-10);

  // Shift equivariance: delay the input, the output delays with it.
  const std::int64_t s = 5;
  Tensor shifted({1, 2, 32}, Dtype::Real64);
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t t = s; t < 32; ++t)
      shifted.at_real64()[static_cast<std::size_t>(i * 32 + t)] =
          u1.at_real64()[static_cast<std::size_t>(i * 32 + t - s)];
  Tensor ys = forward_fft_auto(spec, p, shifted);
  Tensor y = forward_fft_auto(spec, p, u1);
  for (std::int64_t j = 0; j < 3; ++j)
    for (std::int64_t t = s; t < 32; ++t)
      CHECK(ys.at_real64()[static_cast<std::size_t>(j * 32 + t)] ==
            doctest::Approx(
                y.at_real64()[static_cast<std::size_t>(j * 32 + t - s)])
                .epsilon(1e-10));
}

TEST_CASE("plan for mismatched extents is rejected") {
  auto spec = make_spec(SsmVariant::Bottleneck, 2, 3, 4, 2, 1, 32);
  SsmParams p = init_params(spec, 1);
  auto expr = block_expr(spec);
  auto ext = block_extents(spec, 1);
  auto [plan, cost] = choose_plan(expr, ext, 3);
  Tensor wrong_batch = random_input(2, 2, 32, 3);
  CHECK_THROWS_AS(forward_fft(spec, p, wrong_batch, plan),
                  std::invalid_argument);
  Tensor wrong_len = random_input(1, 2, 16, 3);
  CHECK_THROWS_AS(forward_fft(spec, p, wrong_len, plan), std::invalid_argument);
}

TEST_CASE("aux layers") {
  AuxLayer silu{.kind = AuxLayer::Kind::SiLU};
  Tensor z({1, 1, 1}, Dtype::Real64);
  CHECK(aux_forward(silu, z).at_real64()[0] == 0.0);

  AuxLayer pool{.kind = AuxLayer::Kind::AvgPool, .window = 4};
  Tensor seq({1, 1, 8}, Dtype::Real64);
  for (int i = 0; i < 8; ++i)
    seq.at_real64()[static_cast<std::size_t>(i)] = i + 1.0;
  Tensor pooled = aux_forward(pool, seq);
  REQUIRE(pooled.extents() == std::vector<std::int64_t>{1, 1, 2});
  CHECK(pooled.at_real64()[0] == doctest::Approx(2.5));
  CHECK(pooled.at_real64()[1] == doctest::Approx(6.5));
  Tensor bad({1, 1, 6}, Dtype::Real64);
  CHECK_THROWS_AS(aux_forward(pool, bad), std::invalid_argument);

  AuxLayer norm{.kind = AuxLayer::Kind::LayerNormFeature};
  Tensor x = random_input(2, 5, 3, 55);
  Tensor normed = aux_forward(norm, x);
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t t = 0; t < 3; ++t) {
      double mean = 0.0, var = 0.0;
      for (std::int64_t c = 0; c < 5; ++c)
        mean += normed.at_real64()[static_cast<std::size_t>((b * 5 + c) * 3 + t)];
      mean /= 5.0;
      for (std::int64_t c = 0; c < 5; ++c) {
        const double d =
            normed.at_real64()[static_cast<std::size_t>((b * 5 + c) * 3 + t)] - mean;
        var += d * d;
      }
      var /= 5.0;
      CHECK(mean == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

  // Residual merge with projection.
  AuxLayer res{.kind = AuxLayer::Kind::ResidualProjection};
  res.weight = Tensor({5, 5}, Dtype::Real64);
  for (int i = 0; i < 5; ++i)
    res.weight.at_real64()[static_cast<std::size_t>(i * 5 + i)] = 2.0;
  Tensor merged = aux_forward(res, x, x);
  CHECK(max_abs_diff(merged, scale(x, 3.0)) < 1e-12);
}
