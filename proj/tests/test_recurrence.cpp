#include <doctest.h>

#include <random>

#include "centaurus/blocks.hpp"
#include "centaurus/recurrence.hpp"

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

TEST_CASE("zero state, zero input -> zero output, zero state") {
  auto spec = make_spec(SsmVariant::Bottleneck, 3, 2, 4, 2);
  SsmParams p = init_params(spec, 1);
  StreamEngine engine(spec, p);
  StreamState state = StreamState::zero(spec);
  std::vector<double> u(3, 0.0);
  auto y = engine.step(state, u);
  for (double v : y) CHECK(v == 0.0);
  for (auto& x : state.x) CHECK(std::abs(x) == 0.0);
}

TEST_CASE("streamed impulse reproduces the offline impulse response") {
  for (auto variant :
       {SsmVariant::Depthwise, SsmVariant::DepthwiseSeparable, SsmVariant::Full,
        SsmVariant::Grouped, SsmVariant::PointwiseBottleneck,
        SsmVariant::Bottleneck}) {
    const std::int64_t g = variant == SsmVariant::Grouped ? 2 : 1;
    auto spec = make_spec(variant, 4, variant == SsmVariant::Depthwise ? 4 : 6,
                          3, variant == SsmVariant::Bottleneck ? 2 : 1, g, 24);
    SsmParams p = init_params(spec, 13);
    Tensor u({1, 4, 24}, Dtype::Real64);
    u.at_real64()[2 * 24] = 1.0;  // impulse on channel 2
    Tensor offline = forward_naive(spec, p, u);
    Tensor streamed = run_stream(spec, p, u);
    CHECK(max_abs_diff(offline, streamed) < 1e-10);
  }
}

TEST_CASE("pointwise bottleneck with Abar = 1 integrates its input") {
  auto spec = make_spec(SsmVariant::PointwiseBottleneck, 2, 2, 2);
  SsmParams p;
  p.delta = Tensor({2}, Dtype::Real64);
  for (auto& v : p.delta.at_real64()) v = 1.0;
  p.a = Tensor({2}, Dtype::Complex128);
  p.b = Tensor({2, 2}, Dtype::Real64);
  p.c = Tensor({2, 2}, Dtype::Real64);
  p.b.at_real64()[0] = p.b.at_real64()[3] = 1.0;
  p.c.at_real64()[0] = p.c.at_real64()[3] = 1.0;
  StreamEngine engine(spec, p);
  StreamState state = StreamState::zero(spec);
  double sum0 = 0.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> u{dist(rng), dist(rng)};
    sum0 += u[0];
    auto y = engine.step(state, u);
    CHECK(y[0] == doctest::Approx(sum0).epsilon(1e-12));
  }
}

TEST_CASE("mode equivalence across a randomized grid") {
  std::mt19937_64 rng(777);
  const std::vector<SsmVariant> variants = {
      SsmVariant::Depthwise, SsmVariant::DepthwiseSeparable, SsmVariant::Full,
      SsmVariant::Grouped, SsmVariant::PointwiseBottleneck,
      SsmVariant::Bottleneck};
  for (auto variant : variants) {
    for (int trial = 0; trial < 6; ++trial) {
      std::int64_t h = 1 + static_cast<std::int64_t>(rng() % 8);
      std::int64_t hp = 1 + static_cast<std::int64_t>(rng() % 8);
      std::int64_t n = 1 + static_cast<std::int64_t>(rng() % 16);
      std::int64_t m = (variant == SsmVariant::Bottleneck)
                           ? (std::int64_t{1} << (rng() % 3))
                           : 1;
      std::int64_t g = 1;
      if (variant == SsmVariant::Depthwise) hp = h;
      if (variant == SsmVariant::Grouped) {
        g = 1 + static_cast<std::int64_t>(rng() % 2);
        h *= g;
        hp *= g;
      }
      const std::int64_t l = (rng() % 2) ? 16 : 64;
      auto spec = make_spec(variant, h, hp, n, m, g, l);
      SsmParams p = init_params(spec, rng());
      Tensor u = random_input(2, h, l, rng());
      Tensor fft = forward_fft_auto(spec, p, u);
      Tensor naive = forward_naive(spec, p, u);
      Tensor stream = run_stream(spec, p, u);
      CHECK(max_abs_diff(fft, naive) <= 1e-10);
      CHECK(max_abs_diff(stream, fft) <= 1e-9);
    }
  }
}

TEST_CASE("state sufficiency: split streaming is bitwise identical") {
  auto spec = make_spec(SsmVariant::Bottleneck, 3, 4, 5, 2, 1, 40);
  SsmParams p = init_params(spec, 5);
  Tensor u = random_input(1, 3, 40, 50);
  StreamEngine engine(spec, p);

  std::vector<double> joined, split;
  {
    StreamState st = StreamState::zero(spec);
    for (int t = 0; t < 40; ++t) {
      std::vector<double> ut(3);
      for (int i = 0; i < 3; ++i)
        ut[static_cast<std::size_t>(i)] =
            u.at_real64()[static_cast<std::size_t>(i * 40 + t)];
      auto y = engine.step(st, ut);
      joined.insert(joined.end(), y.begin(), y.end());
    }
  }
  {
    StreamState st = StreamState::zero(spec);
    StreamState saved;
    for (int t = 0; t < 40; ++t) {
      if (t == 17) saved = st;  // checkpoint mid-stream
      std::vector<double> ut(3);
      for (int i = 0; i < 3; ++i)
        ut[static_cast<std::size_t>(i)] =
            u.at_real64()[static_cast<std::size_t>(i * 40 + t)];
      if (t >= 17) {
        auto y = (t == 17) ? engine.step(saved, ut) : engine.step(saved, ut);
        split.insert(split.end(), y.begin(), y.end());
      } else {
        auto y = engine.step(st, ut);
        split.insert(split.end(), y.begin(), y.end());
      }
    }
  }
  REQUIRE(joined.size() == split.size());
  for (std::size_t i = 0; i < joined.size(); ++i)
    CHECK(joined[i] == split[i]);  // exact, not approximate
}

TEST_CASE("L = 0 streams to an empty output") {
  auto spec = make_spec(SsmVariant::Depthwise, 2, 2, 3, 1, 1, 1);
  SsmParams p = init_params(spec, 2);
  Tensor u({1, 2, 0}, Dtype::Real64);
  Tensor y = run_stream(spec, p, u);
  CHECK(y.extents() == std::vector<std::int64_t>{1, 2, 0});
  CHECK(y.numel() == 0);
}

TEST_CASE("closed-form counts reproduce the table rows") {
  CostDims d;
  d.channels_in = 8;
  d.channels_out = 16;
  d.states = 4;
  auto dws = count_inference(CostRow::DepthwiseSeparable, d);
  CHECK(dws.params == 224);       // 3*8*4 + 8*16
  CHECK(dws.flops_per_step == 544);  // 9*8*4 + 2*8*16

  CostDims unit;
  auto bn = count_inference(CostRow::Bottleneck, unit);
  CHECK(bn.params == 5);           // 1 + 3 + 1
  CHECK(bn.flops_per_step == 13);  // 2 + 9 + 2

  CostDims mamba;
  mamba.channels_in = 256;
  mamba.states = 16;
  mamba.low_rank = 16;
  auto mb = count_inference(CostRow::Mamba, mamba);
  // 8*256^2 + 8*256*16 + 4*256^2/16
  CHECK(mb.params == 524288 + 32768 + 16384);
  CHECK(mb.flops_per_step == 16 * 256 * 256 + 28 * 256 * 16 + 16 * 256 * 256 / 16);

  CHECK_THROWS_AS(cost_row_from_name("nonsense"), std::invalid_argument);
}

TEST_CASE("instrumented step flops match the closed forms exactly") {
  {
    auto spec = make_spec(SsmVariant::Depthwise, 1, 1, 1);
    CHECK(measure_step_flops(spec, init_params(spec, 3)) == 9);
  }
  {
    auto spec = make_spec(SsmVariant::PointwiseBottleneck, 2, 2, 3);
    CHECK(measure_step_flops(spec, init_params(spec, 3)) == 45);
  }
  {
    auto spec = make_spec(SsmVariant::Full, 2, 3, 1);
    CHECK(measure_step_flops(spec, init_params(spec, 3)) == 54);
  }

  std::mt19937_64 rng(99);
  for (auto variant :
       {SsmVariant::Depthwise, SsmVariant::DepthwiseSeparable, SsmVariant::Full,
        SsmVariant::Grouped, SsmVariant::PointwiseBottleneck,
        SsmVariant::Bottleneck}) {
    for (int trial = 0; trial < 8; ++trial) {
      std::int64_t h = 1 + static_cast<std::int64_t>(rng() % 8);
      std::int64_t hp = 1 + static_cast<std::int64_t>(rng() % 8);
      std::int64_t n = 1 + static_cast<std::int64_t>(rng() % 16);
      std::int64_t m = (variant == SsmVariant::Bottleneck)
                           ? (std::int64_t{1} << (rng() % 3))
                           : 1;
      std::int64_t g = 1;
      if (variant == SsmVariant::Depthwise) hp = h;
      if (variant == SsmVariant::Grouped) {
        g = 1 + static_cast<std::int64_t>(rng() % 2);
        h *= g;
        hp *= g;
      }
      auto spec = make_spec(variant, h, hp, n, m, g);
      SsmParams p = init_params(spec, rng());
      CHECK(measure_step_flops(spec, p) ==
            count_inference(spec).flops_per_step);
    }
  }
}

TEST_CASE("state shape mismatches are rejected") {
  auto spec = make_spec(SsmVariant::Bottleneck, 2, 2, 3, 2);
  SsmParams p = init_params(spec, 6);
  StreamEngine engine(spec, p);
  StreamState bad;
  bad.x.assign(4, {0.0, 0.0});
  std::vector<double> u(2, 0.0), y(2, 0.0);
  CHECK_THROWS_AS(engine.step(bad, u.data(), y.data()), std::invalid_argument);
}

TEST_CASE("residual projection adds HH' params and 2HH' flops") {
  auto cost = residual_projection_cost(8, 16);
  CHECK(cost.params == 128);
  CHECK(cost.flops_per_step == 256);
}
