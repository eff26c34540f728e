// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pricestock/rng.hpp"

namespace pricestock::neural {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using CVecMap = Eigen::Map<const Vec>;

enum class Head { Softmax, Scalar };

/// MLP1 (two tanh layers of width hidden1) -> GRU -> GRU (width hidden2) ->
/// linear layer -> softmax over `output` actions, or a scalar value.
struct NetworkSpec {
  int input = 1;
  int hidden1 = 64;
  int hidden2 = 64;
  int output = 1;
  Head head = Head::Softmax;
  double hidden_gain = 1.0;
  double output_gain = 0.01;

  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

/// Column-major block inside the flat parameter vector.
struct Slice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 1;
  Eigen::Index size() const { return rows * cols; }
};

struct GruSlices {
  Slice wz, wr, wn, uz, ur, un, bz, br, bn;
};

struct Layout {
  Slice l1_w, l1_b, l2_w, l2_b;
  GruSlices gru1, gru2;
  Slice out_w, out_b;
  std::vector<Slice> all;  // in storage order
  Eigen::Index count = 0;
};

Layout make_layout(const NetworkSpec& spec);

/// Flat parameters, a gradient accumulator of the same length, and a version
/// counter bumped on every optimizer step (caches remember the version).
struct ParamSet {
  Vec values;
  Vec grads;
  std::uint64_t version = 0;

  void zero_grad() { grads.setZero(); }
  MatMap matrix(const Slice& s) { return {values.data() + s.offset, s.rows, s.cols}; }
  CMatMap matrix(const Slice& s) const { return {values.data() + s.offset, s.rows, s.cols}; }
  MatMap grad(const Slice& s) { return {grads.data() + s.offset, s.rows, s.cols}; }
};

// ---- single layers -------------------------------------------------------

/// y = tanh(W x + b) when `squash`, otherwise W x + b.
Vec dense_forward(const CMatMap& w, const CMatMap& b, const Vec& x, bool squash);
/// Accumulates dW, db; returns dL/dx. `y` is the forward output.
Vec dense_backward(const CMatMap& w, const Vec& x, const Vec& y, const Vec& dy, bool squash, MatMap dw, MatMap db);

template <class M>
struct GruParams {
  M wz, wr, wn, uz, ur, un, bz, br, bn;
};
using GruView = GruParams<CMatMap>;
using GruGrad = GruParams<MatMap>;

GruView gru_view(const ParamSet& p, const GruSlices& s);
GruGrad gru_grad(ParamSet& p, const GruSlices& s);

struct GruCache {
  Vec x, h, z, r, n, h_new;
};

/// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// n = tanh(Wn x + Un (r . h) + bn), h' = (1 - z) . n + z . h.
GruCache gru_forward(const GruView& p, const Vec& x, const Vec& h);

struct GruInputGrad {
  Vec dx;
  Vec dh;
};
GruInputGrad gru_backward(const GruView& p, GruGrad g, const GruCache& c, const Vec& dh_new);

/// Max-shifted softmax.
Vec softmax(const Vec& logits);
/// dL/dlogits from dL/dprobs.
Vec softmax_backward(const Vec& probs, const Vec& dprobs);

// ---- composed network ----------------------------------------------------

struct HiddenState {
  Vec h1;
  Vec h2;
  static HiddenState zeros(const NetworkSpec& spec);
};

struct StepCache {
  std::uint64_t version = 0;
  Vec x, a1, a2;
  GruCache g1, g2;
  Vec output;  // probabilities or the 1-vector value
};

struct ForwardResult {
  Vec output;  // probabilities (Softmax) or [value] (Scalar)
  HiddenState hidden;
  StepCache cache;
};

class Network {
 public:
  Network() = default;
  explicit Network(const NetworkSpec& spec);

  const NetworkSpec& spec() const { return spec_; }
  const Layout& layout() const { return layout_; }

  ForwardResult forward(const Vec& input, const HiddenState& hidden) const;

  /// Reverse pass for one step; `d_output` is dL/dprobs or dL/dvalue and
  /// `d_hidden_next` the gradient arriving from the following step (zeros for
  /// the last one). Parameter gradients accumulate into params.grads. Throws
  /// a contract error when the cache predates the latest parameter update.
  HiddenState backward(const StepCache& cache, const Vec& d_output, const HiddenState& d_hidden_next,
                       Vec* d_input = nullptr);

  /// Orthogonal weights (gain hidden_gain, output layer output_gain), zero biases.
  void orthogonal_init(Rng& rng);

  ParamSet params;

 private:
  NetworkSpec spec_;
  Layout layout_;
};

/// Rows (or columns, for tall shapes) orthonormal, scaled by `gain`.
Mat orthogonal_matrix(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng);

struct AdamState {
  Vec m;
  Vec v;
  long step = 0;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam on params.values using params.grads; rejects a
/// non-finite gradient without touching any state.
void adam_step(ParamSet& params, AdamState& state, const AdamConfig& config);

/// Flat little-endian doubles at `path`, spec and count in `path`.json.
void save(const std::string& path, const Network& net);
Network load(const std::string& path);

}  // namespace pricestock::neural
