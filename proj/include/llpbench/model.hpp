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
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "llpbench/common.hpp"
#include "llpbench/feature_space.hpp"

namespace llpbench {

enum class Head { Sigmoid, Identity };

// Two relu hidden layers and a scalar output. Hidden widths default to the
// benchmark architecture (128, 64); they are parameters so the same code can
// be exercised at small widths in exhaustive gradient checks.
struct ModelShape {
  std::int32_t input_dim = 0;
  std::int32_t h1 = 128;
  std::int32_t h2 = 64;

  // Flat parameter layout: W1 [input][h1] | b1 | W2 [h1][h2] | b2 | w_out | b_out.
  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return static_cast<std::size_t>(input_dim) * h1; }
  std::size_t w2_off() const { return b1_off() + static_cast<std::size_t>(h1); }
  std::size_t b2_off() const { return w2_off() + static_cast<std::size_t>(h1) * h2; }
  std::size_t wout_off() const { return b2_off() + static_cast<std::size_t>(h2); }
  std::size_t bout_off() const { return wout_off() + static_cast<std::size_t>(h2); }
  std::size_t param_count() const { return bout_off() + 1; }

  bool operator==(const ModelShape&) const = default;
};

struct ModelParams {
  ModelShape shape;
  std::vector<double> theta;
};

// He-uniform fan-in initialization; biases start at zero.
inline ModelParams init_params(std::uint64_t seed, ModelShape shape) {
  ModelParams p;
  p.shape = shape;
  p.theta.assign(shape.param_count(), 0.0);
  Rng rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, std::int32_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) {
      p.theta[off + i] = (2.0 * rng.uniform() - 1.0) * limit;
    }
  };
  fill(shape.w1_off(), static_cast<std::size_t>(shape.input_dim) * shape.h1, shape.input_dim);
  fill(shape.w2_off(), static_cast<std::size_t>(shape.h1) * shape.h2, shape.h1);
  fill(shape.wout_off(), static_cast<std::size_t>(shape.h2), shape.h2);
  return p;
}

// Index-encoded instance -> sparse multihot input: one-hot blocks per
// categorical column followed by the numerical values.
inline SparseVec multihot_encode(std::span<const std::int32_t> codes,
                                 std::span<const double> nums,
                                 std::span<const std::int32_t> vocab_sizes) {
  if (codes.size() != vocab_sizes.size()) {
    throw ValidationError("multihot_encode: code/vocab arity mismatch");
  }
  SparseVec v;
  std::int32_t off = 0;
  for (std::size_t c = 0; c < codes.size(); ++c) {
    if (codes[c] < 0 || codes[c] >= vocab_sizes[c]) {
      throw ValidationError("multihot_encode: code " + std::to_string(codes[c]) +
                            " out of vocabulary (size " + std::to_string(vocab_sizes[c]) +
                            ") in column " + std::to_string(c));
    }
    v.idx.push_back(off + codes[c]);
    v.val.push_back(1.0);
    off += vocab_sizes[c];
  }
  for (std::size_t c = 0; c < nums.size(); ++c) {
    v.idx.push_back(off + static_cast<std::int32_t>(c));
    v.val.push_back(nums[c]);
  }
  v.dim = off + static_cast<std::int32_t>(nums.size());
  return v;
}

inline SparseVec multihot_encode(const InstanceTable& t, std::int64_t row) {
  return multihot_encode(
      std::span<const std::int32_t>(t.cat.data() + static_cast<std::size_t>(row) * t.n_cat,
                                    static_cast<std::size_t>(t.n_cat)),
      std::span<const double>(t.num.data() + static_cast<std::size_t>(row) * t.n_num,
                              static_cast<std::size_t>(t.n_num)),
      std::span<const std::int32_t>(t.vocab_sizes.data(), t.vocab_sizes.size()));
}

inline std::vector<SparseVec> multihot_encode_all(const InstanceTable& t) {
  std::vector<SparseVec> vs;
  vs.reserve(static_cast<std::size_t>(t.m));
  for (std::int64_t r = 0; r < t.m; ++r) vs.push_back(multihot_encode(t, r));
  return vs;
}

inline std::vector<double> to_dense(const SparseVec& v) {
  std::vector<double> out(static_cast<std::size_t>(v.dim), 0.0);
  for (std::size_t e = 0; e < v.idx.size(); ++e) out[static_cast<std::size_t>(v.idx[e])] += v.val[e];
  return out;
}

struct ForwardCache {
  std::size_t batch = 0;
  Head head = Head::Sigmoid;
  std::vector<double> z1, a1, z2, a2;  // batch-major, widths h1/h2
  std::vector<double> logit;
  std::vector<double> pred;
  std::vector<const SparseVec*> inputs;
};

inline ForwardCache forward(const ModelParams& p, const std::vector<const SparseVec*>& batch,
                            Head head) {
  const auto& s = p.shape;
  const double* W1 = p.theta.data() + s.w1_off();
  const double* b1 = p.theta.data() + s.b1_off();
  const double* W2 = p.theta.data() + s.w2_off();
  const double* b2 = p.theta.data() + s.b2_off();
  const double* wo = p.theta.data() + s.wout_off();
  const double bo = p.theta[s.bout_off()];
  const std::size_t h1 = static_cast<std::size_t>(s.h1);
  const std::size_t h2 = static_cast<std::size_t>(s.h2);

  ForwardCache c;
  c.batch = batch.size();
  c.head = head;
  c.inputs = batch;
  c.z1.assign(c.batch * h1, 0.0);
  c.a1.assign(c.batch * h1, 0.0);
  c.z2.assign(c.batch * h2, 0.0);
  c.a2.assign(c.batch * h2, 0.0);
  c.logit.assign(c.batch, 0.0);
  c.pred.assign(c.batch, 0.0);

  for (std::size_t b = 0; b < c.batch; ++b) {
    const SparseVec& x = *batch[b];
    double* z1 = c.z1.data() + b * h1;
    double* a1 = c.a1.data() + b * h1;
    for (std::size_t u = 0; u < h1; ++u) z1[u] = b1[u];
    for (std::size_t e = 0; e < x.idx.size(); ++e) {
      const double v = x.val[e];
      if (v == 0.0) continue;
      const double* col = W1 + static_cast<std::size_t>(x.idx[e]) * h1;
      for (std::size_t u = 0; u < h1; ++u) z1[u] += v * col[u];
    }
    for (std::size_t u = 0; u < h1; ++u) a1[u] = z1[u] > 0.0 ? z1[u] : 0.0;

    double* z2 = c.z2.data() + b * h2;
    double* a2 = c.a2.data() + b * h2;
    for (std::size_t v = 0; v < h2; ++v) z2[v] = b2[v];
    for (std::size_t u = 0; u < h1; ++u) {
      const double a = a1[u];
      if (a == 0.0) continue;
      const double* row = W2 + u * h2;
      for (std::size_t v = 0; v < h2; ++v) z2[v] += a * row[v];
    }
    double out = bo;
    for (std::size_t v = 0; v < h2; ++v) {
      a2[v] = z2[v] > 0.0 ? z2[v] : 0.0;
      out += wo[v] * a2[v];
    }
    c.logit[b] = out;
    c.pred[b] = head == Head::Sigmoid ? sigmoid(out) : out;
  }
  return c;
}

// Exact gradients of the composed function w.r.t. the flat parameter vector,
// given d loss / d prediction per instance. relu subgradient at 0 is 0.
inline std::vector<double> backward(const ModelParams& p, const ForwardCache& c,
                                    const std::vector<double>& dpred) {
  if (dpred.size() != c.batch) throw ValidationError("backward: dpred size mismatch");
  const auto& s = p.shape;
  const double* W2 = p.theta.data() + s.w2_off();
  const double* wo = p.theta.data() + s.wout_off();
  const std::size_t h1 = static_cast<std::size_t>(s.h1);
  const std::size_t h2 = static_cast<std::size_t>(s.h2);

  std::vector<double> grad(s.param_count(), 0.0);
  double* gW1 = grad.data() + s.w1_off();
  double* gb1 = grad.data() + s.b1_off();
  double* gW2 = grad.data() + s.w2_off();
  double* gb2 = grad.data() + s.b2_off();
  double* gwo = grad.data() + s.wout_off();
  double& gbo = grad[s.bout_off()];

  std::vector<double> d2(h2), d1(h1);
  for (std::size_t b = 0; b < c.batch; ++b) {
    double dlogit = dpred[b];
    if (c.head == Head::Sigmoid) {
      const double y = c.pred[b];
      dlogit *= y * (1.0 - y);
    }
    if (dlogit == 0.0) continue;

    const double* a1 = c.a1.data() + b * h1;
    const double* a2 = c.a2.data() + b * h2;
    const double* z1 = c.z1.data() + b * h1;
    const double* z2 = c.z2.data() + b * h2;

    gbo += dlogit;
    for (std::size_t v = 0; v < h2; ++v) {
      gwo[v] += dlogit * a2[v];
      d2[v] = z2[v] > 0.0 ? dlogit * wo[v] : 0.0;
      gb2[v] += d2[v];
    }
    for (std::size_t u = 0; u < h1; ++u) {
      const double* row = W2 + u * h2;
      double acc = 0.0;
      for (std::size_t v = 0; v < h2; ++v) acc += row[v] * d2[v];
      d1[u] = z1[u] > 0.0 ? acc : 0.0;
      gb1[u] += d1[u];
      if (a1[u] != 0.0) {
        double* grow = gW2 + u * h2;
        const double a = a1[u];
        for (std::size_t v = 0; v < h2; ++v) grow[v] += a * d2[v];
      }
    }
    const SparseVec& x = *c.inputs[b];
    for (std::size_t e = 0; e < x.idx.size(); ++e) {
      const double v = x.val[e];
      if (v == 0.0) continue;
      double* gcol = gW1 + static_cast<std::size_t>(x.idx[e]) * h1;
      for (std::size_t u = 0; u < h1; ++u) gcol[u] += v * d1[u];
    }
  }
  return grad;
}

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ModelParams& p) {
    AdamState s;
    s.m.assign(p.theta.size(), 0.0);
    s.v.assign(p.theta.size(), 0.0);
    return s;
  }
};

inline void adam_step(ModelParams& p, const std::vector<double>& grad, AdamState& state,
                      double lr) {
  if (grad.size() != p.theta.size() || state.m.size() != p.theta.size()) {
    throw ValidationError("adam_step: shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < p.theta.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    p.theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint: one JSON header line, then the flat f64 little-endian block.

inline std::string checkpoint_bytes(const ModelParams& p, std::uint64_t seed, std::int64_t step) {
  nlohmann::ordered_json header;
  header["format"] = "llpbench-model-v1";
  header["input_dim"] = p.shape.input_dim;
  header["h1"] = p.shape.h1;
  header["h2"] = p.shape.h2;
  header["seed"] = seed;
  header["step"] = step;
  header["count"] = p.theta.size();
  std::string out = header.dump();
  out += '\n';
  const std::size_t bytes = p.theta.size() * sizeof(double);
  const std::size_t base = out.size();
  out.resize(base + bytes);
  std::memcpy(out.data() + base, p.theta.data(), bytes);  // little-endian on x86
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& p,
                            std::uint64_t seed, std::int64_t step) {
  write_file_atomic(path, checkpoint_bytes(p, seed, step));
}

inline ModelParams load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed = nullptr,
                                   std::int64_t* step = nullptr) {
  const std::string bytes = read_file_bytes(path);
  const std::size_t eol = bytes.find('\n');
  if (eol == std::string::npos) throw ValidationError("checkpoint: missing header");
  nlohmann::json header = nlohmann::json::parse(bytes.substr(0, eol));
  if (header.at("format").get<std::string>() != "llpbench-model-v1") {
    throw ValidationError("checkpoint: unknown format");
  }
  ModelParams p;
  p.shape.input_dim = header.at("input_dim").get<std::int32_t>();
  p.shape.h1 = header.at("h1").get<std::int32_t>();
  p.shape.h2 = header.at("h2").get<std::int32_t>();
  const std::size_t count = header.at("count").get<std::size_t>();
  if (count != p.shape.param_count()) throw ValidationError("checkpoint: count/shape mismatch");
  if (bytes.size() - eol - 1 != count * sizeof(double)) {
    throw ValidationError("checkpoint: truncated parameter block");
  }
  p.theta.resize(count);
  std::memcpy(p.theta.data(), bytes.data() + eol + 1, count * sizeof(double));
  if (seed) *seed = header.at("seed").get<std::uint64_t>();
  if (step) *step = header.at("step").get<std::int64_t>();
  return p;
}

}  // namespace llpbench
