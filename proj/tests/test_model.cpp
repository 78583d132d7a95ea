/*
 * Copyright 2026 The llpbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <doctest.h>

#include <cmath>

#include "llpbench/model.hpp"
#include "testutil.hpp"

using namespace llpbench;

namespace {

std::vector<SparseVec> random_inputs(Rng& rng, int count, std::int32_t dim) {
  std::vector<SparseVec> xs;
  for (int i = 0; i < count; ++i) {
    SparseVec v;
    v.dim = dim;
    for (std::int32_t d = 0; d < dim; ++d) {
      v.idx.push_back(d);
      v.val.push_back(rng.normal());
    }
    xs.push_back(std::move(v));
  }
  return xs;
}

std::vector<const SparseVec*> ptrs(const std::vector<SparseVec>& xs) {
  std::vector<const SparseVec*> ps;
  for (const auto& x : xs) ps.push_back(&x);
  return ps;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("multihot encoding layout") {
  const std::vector<std::int32_t> vocab = {2, 3};
  const std::vector<std::int32_t> codes = {1, 0};
  const SparseVec v = multihot_encode(codes, {}, vocab);
  CHECK(to_dense(v) == std::vector<double>{0, 1, 1, 0, 0});

  const std::vector<std::int32_t> zeros = {0, 0};
  CHECK(to_dense(multihot_encode(zeros, {}, vocab)) == std::vector<double>{1, 0, 1, 0, 0});

  const std::vector<double> nums = {0.5};
  const SparseVec with_num = multihot_encode(codes, nums, vocab);
  CHECK(with_num.dim == 6);
  CHECK(to_dense(with_num).back() == 0.5);

  const std::vector<std::int32_t> bad = {2, 0};
  CHECK_THROWS_AS(multihot_encode(bad, {}, vocab), ValidationError);
}

TEST_CASE("forward with zero parameters") {
  ModelShape shape{4, 8, 4};
  ModelParams p;
  p.shape = shape;
  p.theta.assign(shape.param_count(), 0.0);
  Rng rng(1);
  const auto xs = random_inputs(rng, 3, 4);
  const ForwardCache sig = forward(p, ptrs(xs), Head::Sigmoid);
  const ForwardCache ident = forward(p, ptrs(xs), Head::Identity);
  for (double v : sig.pred) CHECK(v == 0.5);
  for (double v : ident.pred) CHECK(v == 0.0);
}

TEST_CASE("forward matches a hand computation") {
  // x = (2), W1 = (1, -1), b1 = (0.5, 0.5) -> a1 = (2.5, 0)
  // W2 rows: unit0 -> (1, 0.5), unit1 -> (0.25, -1), b2 = (-1, 0) -> a2 = (1.5, 1.25)
  // w_out = (2, -2), b_out = 0.25 -> logit = 3 - 2.5 + 0.25 = 0.75
  ModelShape shape{1, 2, 2};
  ModelParams p;
  p.shape = shape;
  p.theta.assign(shape.param_count(), 0.0);
  p.theta[shape.w1_off() + 0] = 1.0;
  p.theta[shape.w1_off() + 1] = -1.0;
  p.theta[shape.b1_off() + 0] = 0.5;
  p.theta[shape.b1_off() + 1] = 0.5;
  p.theta[shape.w2_off() + 0] = 1.0;    // unit0 -> v0
  p.theta[shape.w2_off() + 1] = 0.5;    // unit0 -> v1
  p.theta[shape.w2_off() + 2] = 0.25;   // unit1 -> v0
  p.theta[shape.w2_off() + 3] = -1.0;   // unit1 -> v1
  p.theta[shape.b2_off() + 0] = -1.0;
  p.theta[shape.wout_off() + 0] = 2.0;
  p.theta[shape.wout_off() + 1] = -2.0;
  p.theta[shape.bout_off()] = 0.25;

  SparseVec x;
  x.dim = 1;
  x.idx = {0};
  x.val = {2.0};
  const ForwardCache c = forward(p, {&x}, Head::Identity);
  CHECK(c.logit[0] == 0.75);
  const ForwardCache cs = forward(p, {&x}, Head::Sigmoid);
  CHECK(cs.pred[0] == doctest::Approx(0.679178699175393).epsilon(1e-12));
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
  ModelShape shape{3, 4, 2};
  ModelParams p = init_params(5, shape);
  Rng rng(2);
  const auto xs = random_inputs(rng, 2, 3);
  const ForwardCache c = forward(p, ptrs(xs), Head::Sigmoid);
  const auto grad = backward(p, c, {0.0, 0.0});
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("backward: BCE upstream through sigmoid gives logit gradient pred - y") {
  ModelShape shape{3, 4, 2};
  ModelParams p = init_params(6, shape);
  Rng rng(3);
  const auto xs = random_inputs(rng, 1, 3);
  const ForwardCache c = forward(p, ptrs(xs), Head::Sigmoid);
  const double pred = c.pred[0];
  const double y = 1.0;
  const std::vector<double> dpred = {-y / pred + (1.0 - y) / (1.0 - pred)};
  const auto grad = backward(p, c, dpred);
  // d loss / d b_out equals d loss / d logit.
  CHECK(grad[shape.bout_off()] == doctest::Approx(pred - y).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences everywhere") {
  Rng rng(9);
  for (int config = 0; config < 5; ++config) {
    ModelShape shape{5, 4, 3};
    ModelParams p = test::random_params(rng, shape);
    const auto xs = random_inputs(rng, 3, 5);
    std::vector<double> targets;
    for (int i = 0; i < 3; ++i) targets.push_back(rng.uniform());
    const Head head = config % 2 == 0 ? Head::Sigmoid : Head::Identity;

    auto loss_value = [&]() {
      const ForwardCache c = forward(p, ptrs(xs), head);
      double L = 0.0;
      for (std::size_t i = 0; i < c.pred.size(); ++i) {
        L += (c.pred[i] - targets[i]) * (c.pred[i] - targets[i]);
      }
      return L;
    };
    const ForwardCache c = forward(p, ptrs(xs), head);
    std::vector<double> dpred;
    for (std::size_t i = 0; i < c.pred.size(); ++i) dpred.push_back(2.0 * (c.pred[i] - targets[i]));
    const auto grad = backward(p, c, dpred);

    for (std::size_t i = 0; i < p.theta.size(); ++i) {
      const double fd = test::fd_partial(loss_value, p.theta, i);
      CHECK_MESSAGE(test::grad_close(grad[i], fd),
                    "coord " << i << " analytic " << grad[i] << " fd " << fd);
    }
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged; t advances") {
  ModelShape shape{2, 3, 2};
  ModelParams p = init_params(7, shape);
  const ModelParams before = p;
  AdamState s = AdamState::for_params(p);
  adam_step(p, std::vector<double>(p.theta.size(), 0.0), s, 1e-3);
  CHECK(p.theta == before.theta);
  CHECK(s.t == 1);
}

TEST_CASE("adam: constant gradient drives the step size to lr * sign(g)") {
  ModelShape shape{1, 1, 1};
  ModelParams p = init_params(8, shape);
  AdamState s = AdamState::for_params(p);
  std::vector<double> g(p.theta.size(), 0.0);
  g[0] = 0.37;   // positive constant gradient
  g[1] = -2.25;  // negative constant gradient
  const double lr = 1e-3;
  double prev0 = p.theta[0], prev1 = p.theta[1];
  double step0 = 0.0, step1 = 0.0;
  for (int t = 0; t < 2000; ++t) {
    adam_step(p, g, s, lr);
    step0 = p.theta[0] - prev0;
    step1 = p.theta[1] - prev1;
    prev0 = p.theta[0];
    prev1 = p.theta[1];
  }
  CHECK(step0 == doctest::Approx(-lr).epsilon(1e-3));
  CHECK(step1 == doctest::Approx(lr).epsilon(1e-3));
}

TEST_CASE("init_params: seeded, bounded, distinct across seeds") {
  ModelShape shape{6, 8, 4};
  const ModelParams a = init_params(11, shape);
  const ModelParams b = init_params(11, shape);
  CHECK(a.theta == b.theta);
  const ModelParams c = init_params(12, shape);
  CHECK(a.theta != c.theta);

  const double lim1 = std::sqrt(6.0 / 6.0);
  for (std::size_t i = 0; i < shape.b1_off(); ++i) CHECK(std::abs(a.theta[i]) <= lim1);
  for (std::size_t i = shape.b1_off(); i < shape.w2_off(); ++i) CHECK(a.theta[i] == 0.0);
  const double lim2 = std::sqrt(6.0 / 8.0);
  for (std::size_t i = shape.w2_off(); i < shape.b2_off(); ++i) CHECK(std::abs(a.theta[i]) <= lim2);
}

TEST_CASE("sigmoid head stays strictly inside (0,1)") {
  Rng rng(13);
  ModelShape shape{4, 6, 3};
  const ModelParams p = init_params(rng.next_u64(), shape);
  const auto xs = random_inputs(rng, 16, 4);
  const ForwardCache c = forward(p, ptrs(xs), Head::Sigmoid);
  for (double v : c.pred) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("training step is deterministic given seed, data and config") {
  Rng data_rng(17);
  const auto xs = random_inputs(data_rng, 8, 4);
  auto run_steps = [&]() {
    ModelShape shape{4, 6, 3};
    ModelParams p = init_params(21, shape);
    AdamState s = AdamState::for_params(p);
    for (int step = 0; step < 3; ++step) {
      const ForwardCache c = forward(p, ptrs(xs), Head::Sigmoid);
      std::vector<double> dpred;
      for (double v : c.pred) dpred.push_back(2.0 * (v - 0.25));
      adam_step(p, backward(p, c, dpred), s, 1e-3);
    }
    return p.theta;
  };
  CHECK(run_steps() == run_steps());
}

TEST_CASE("checkpoint round-trips the exact parameter bytes") {
  ModelShape shape{3, 5, 2};
  const ModelParams p = init_params(23, shape);
  const auto dir = test::tmp_dir("ckpt");
  save_checkpoint(dir / "model.bin", p, 23, 17);
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  const ModelParams loaded = load_checkpoint(dir / "model.bin", &seed, &step);
  CHECK(loaded.theta == p.theta);
  CHECK(loaded.shape == p.shape);
  CHECK(seed == 23);
  CHECK(step == 17);
}

}  // TEST_SUITE
