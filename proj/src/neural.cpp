// SPDX-License-Identifier: Apache-2.0
#include "pricestock/neural.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/QR>
#include <json.hpp>

#include "pricestock/error.hpp"

namespace pricestock::neural {

void NetworkSpec::validate() const {
  require(input >= 1 && hidden1 >= 1 && hidden2 >= 1 && output >= 1, ErrorKind::Config,
          "network: all widths must be >= 1");
  require(head == Head::Softmax || output == 1, ErrorKind::Config, "network: scalar head needs output width 1");
  require(hidden_gain > 0.0 && output_gain > 0.0, ErrorKind::Config, "network: gains must be positive");
}

namespace {

Slice add(Layout& l, std::string name, Eigen::Index rows, Eigen::Index cols) {
  Slice s{std::move(name), l.count, rows, cols};
  l.count += rows * cols;
  l.all.push_back(s);
  return s;
}

GruSlices add_gru(Layout& l, const std::string& prefix, Eigen::Index in, Eigen::Index hid) {
  GruSlices g;
  g.wz = add(l, prefix + ".wz", hid, in);
  g.wr = add(l, prefix + ".wr", hid, in);
  g.wn = add(l, prefix + ".wn", hid, in);
  g.uz = add(l, prefix + ".uz", hid, hid);
  g.ur = add(l, prefix + ".ur", hid, hid);
  g.un = add(l, prefix + ".un", hid, hid);
  g.bz = add(l, prefix + ".bz", hid, 1);
  g.br = add(l, prefix + ".br", hid, 1);
  g.bn = add(l, prefix + ".bn", hid, 1);
  return g;
}

Vec sigmoid(const Vec& a) {
  return a.unaryExpr([](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

}  // namespace

Layout make_layout(const NetworkSpec& spec) {
  spec.validate();
  Layout l;
  l.l1_w = add(l, "mlp1.w1", spec.hidden1, spec.input);
  l.l1_b = add(l, "mlp1.b1", spec.hidden1, 1);
  l.l2_w = add(l, "mlp1.w2", spec.hidden1, spec.hidden1);
  l.l2_b = add(l, "mlp1.b2", spec.hidden1, 1);
  l.gru1 = add_gru(l, "gru1", spec.hidden1, spec.hidden2);
  l.gru2 = add_gru(l, "gru2", spec.hidden2, spec.hidden2);
  l.out_w = add(l, "mlp2.w", spec.output, spec.hidden2);
  l.out_b = add(l, "mlp2.b", spec.output, 1);
  return l;
}

Vec dense_forward(const CMatMap& w, const CMatMap& b, const Vec& x, bool squash) {
  require(w.cols() == x.size(), ErrorKind::Shape, "dense: input width mismatch");
  Vec y = w * x + b.col(0);
  if (squash) y = y.array().tanh();
  return y;
}

Vec dense_backward(const CMatMap& w, const Vec& x, const Vec& y, const Vec& dy, bool squash, MatMap dw, MatMap db) {
  const Vec da = squash ? Vec(dy.array() * (1.0 - y.array().square())) : dy;
  dw.noalias() += da * x.transpose();
  db.col(0) += da;
  return w.transpose() * da;
}

GruView gru_view(const ParamSet& p, const GruSlices& s) {
  return {p.matrix(s.wz), p.matrix(s.wr), p.matrix(s.wn), p.matrix(s.uz), p.matrix(s.ur),
          p.matrix(s.un), p.matrix(s.bz), p.matrix(s.br), p.matrix(s.bn)};
}

GruGrad gru_grad(ParamSet& p, const GruSlices& s) {
  return {p.grad(s.wz), p.grad(s.wr), p.grad(s.wn), p.grad(s.uz), p.grad(s.ur),
          p.grad(s.un), p.grad(s.bz), p.grad(s.br), p.grad(s.bn)};
}

GruCache gru_forward(const GruView& p, const Vec& x, const Vec& h) {
  require(p.wz.cols() == x.size() && p.uz.cols() == h.size(), ErrorKind::Shape, "gru: input or hidden width mismatch");
  GruCache c;
  c.x = x;
  c.h = h;
  c.z = sigmoid(p.wz * x + p.uz * h + p.bz.col(0));
  c.r = sigmoid(p.wr * x + p.ur * h + p.br.col(0));
  const Vec rh = c.r.cwiseProduct(h);
  c.n = (p.wn * x + p.un * rh + p.bn.col(0)).array().tanh();
  c.h_new = (1.0 - c.z.array()) * c.n.array() + c.z.array() * h.array();
  return c;
}

GruInputGrad gru_backward(const GruView& p, GruGrad g, const GruCache& c, const Vec& dh_new) {
  GruInputGrad out;
  const Vec dn = dh_new.array() * (1.0 - c.z.array());
  const Vec dz = dh_new.array() * (c.h.array() - c.n.array());
  out.dh = dh_new.cwiseProduct(c.z);

  const Vec dan = dn.array() * (1.0 - c.n.array().square());
  const Vec rh = c.r.cwiseProduct(c.h);
  g.wn.noalias() += dan * c.x.transpose();
  g.un.noalias() += dan * rh.transpose();
  g.bn.col(0) += dan;
  const Vec drh = p.un.transpose() * dan;
  const Vec dr = drh.cwiseProduct(c.h);
  out.dh += drh.cwiseProduct(c.r);
  out.dx = p.wn.transpose() * dan;

  const Vec daz = dz.array() * c.z.array() * (1.0 - c.z.array());
  g.wz.noalias() += daz * c.x.transpose();
  g.uz.noalias() += daz * c.h.transpose();
  g.bz.col(0) += daz;
  out.dx += p.wz.transpose() * daz;
  out.dh += p.uz.transpose() * daz;

  const Vec dar = dr.array() * c.r.array() * (1.0 - c.r.array());
  g.wr.noalias() += dar * c.x.transpose();
  g.ur.noalias() += dar * c.h.transpose();
  g.br.col(0) += dar;
  out.dx += p.wr.transpose() * dar;
  out.dh += p.ur.transpose() * dar;
  return out;
}

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Vec softmax_backward(const Vec& probs, const Vec& dprobs) {
  return probs.cwiseProduct(dprobs.array().matrix() - Vec::Constant(probs.size(), probs.dot(dprobs)));
}

HiddenState HiddenState::zeros(const NetworkSpec& spec) {
  return {Vec::Zero(spec.hidden2), Vec::Zero(spec.hidden2)};
}

Network::Network(const NetworkSpec& spec) : spec_(spec), layout_(make_layout(spec)) {
  params.values = Vec::Zero(layout_.count);
  params.grads = Vec::Zero(layout_.count);
}

ForwardResult Network::forward(const Vec& input, const HiddenState& hidden) const {
  require(input.size() == spec_.input, ErrorKind::Shape, "network: input width mismatch");
  require(hidden.h1.size() == spec_.hidden2 && hidden.h2.size() == spec_.hidden2, ErrorKind::Shape,
          "network: hidden width mismatch");
  const auto& l = layout_;
  ForwardResult r;
  StepCache& c = r.cache;
  c.version = params.version;
  c.x = input;
  c.a1 = dense_forward(params.matrix(l.l1_w), params.matrix(l.l1_b), input, true);
  c.a2 = dense_forward(params.matrix(l.l2_w), params.matrix(l.l2_b), c.a1, true);
  c.g1 = gru_forward(gru_view(params, l.gru1), c.a2, hidden.h1);
  c.g2 = gru_forward(gru_view(params, l.gru2), c.g1.h_new, hidden.h2);
  const Vec head = dense_forward(params.matrix(l.out_w), params.matrix(l.out_b), c.g2.h_new, false);
  c.output = spec_.head == Head::Softmax ? softmax(head) : head;
  r.output = c.output;
  r.hidden = {c.g1.h_new, c.g2.h_new};
  return r;
}

HiddenState Network::backward(const StepCache& c, const Vec& d_output, const HiddenState& d_hidden_next,
                              Vec* d_input) {
  require(c.version == params.version, ErrorKind::Contract, "network: stale cache (parameters changed since forward)");
  require(d_output.size() == spec_.output, ErrorKind::Shape, "network: upstream gradient width mismatch");
  const auto& l = layout_;
  const ParamSet& cp = params;
  const Vec d_head = spec_.head == Head::Softmax ? softmax_backward(c.output, d_output) : d_output;
  const Vec dg2 = dense_backward(cp.matrix(l.out_w), c.g2.h_new, Vec(), d_head, false, params.grad(l.out_w),
                                 params.grad(l.out_b)) +
                  d_hidden_next.h2;
  const auto b2 = gru_backward(gru_view(params, l.gru2), gru_grad(params, l.gru2), c.g2, dg2);
  const Vec dg1 = b2.dx + d_hidden_next.h1;
  const auto b1 = gru_backward(gru_view(params, l.gru1), gru_grad(params, l.gru1), c.g1, dg1);
  const Vec da1 = dense_backward(cp.matrix(l.l2_w), c.a1, c.a2, b1.dx, true, params.grad(l.l2_w),
                                 params.grad(l.l2_b));
  const Vec dx = dense_backward(cp.matrix(l.l1_w), c.x, c.a1, da1, true, params.grad(l.l1_w),
                                params.grad(l.l1_b));
  if (d_input) *d_input = dx;
  return {b1.dh, b2.dh};
}

Mat orthogonal_matrix(Eigen::Index rows, Eigen::Index cols, double gain, Rng& rng) {
  const Eigen::Index big = std::max(rows, cols), small = std::min(rows, cols);
  Mat a(big, small);
  for (Eigen::Index j = 0; j < small; ++j)
    for (Eigen::Index i = 0; i < big; ++i) a(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(big, small);
  // Sign fix so the draw is Haar distributed.
  const Mat r = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  Mat w = rows >= cols ? q : Mat(q.transpose());
  return gain * w;
}

void Network::orthogonal_init(Rng& rng) {
  params.values.setZero();
  params.grads.setZero();
  for (const Slice& s : layout_.all) {
    if (s.cols == 1 && s.name.find(".b") != std::string::npos) continue;  // biases stay zero
    const double gain = s.name == "mlp2.w" ? spec_.output_gain : spec_.hidden_gain;
    params.matrix(s) = orthogonal_matrix(s.rows, s.cols, gain, rng);
  }
  ++params.version;
}

void adam_step(ParamSet& params, AdamState& state, const AdamConfig& config) {
  require(params.grads.size() == params.values.size(), ErrorKind::Shape, "adam: gradient length mismatch");
  require(params.grads.allFinite(), ErrorKind::NonFinite, "adam: non-finite gradient rejected");
  if (state.m.size() != params.values.size()) {
    state.m = Vec::Zero(params.values.size());
    state.v = Vec::Zero(params.values.size());
    state.step = 0;
  }
  ++state.step;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * params.grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * params.grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  params.values.array() -= config.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + config.eps);
  ++params.version;
}

namespace {

nlohmann::json spec_json(const NetworkSpec& s) {
  return {{"input", s.input},
          {"hidden1", s.hidden1},
          {"hidden2", s.hidden2},
          {"output", s.output},
          {"head", s.head == Head::Softmax ? "softmax" : "scalar"},
          {"hidden_gain", s.hidden_gain},
          {"output_gain", s.output_gain}};
}

}  // namespace

void save(const std::string& path, const Network& net) {
  std::ofstream bin(path, std::ios::binary);
  require(bin.good(), ErrorKind::Io, "cannot open " + path + " for writing");
  bin.write(reinterpret_cast<const char*>(net.params.values.data()),
            static_cast<std::streamsize>(net.params.values.size() * sizeof(double)));
  require(bin.good(), ErrorKind::Io, "write failed: " + path);

  nlohmann::json meta = {{"format", "pricestock-params"},
                         {"version", 1},
                         {"byte_order", "little"},
                         {"count", net.params.values.size()},
                         {"spec", spec_json(net.spec())}};
  std::ofstream side(path + ".json");
  require(side.good(), ErrorKind::Io, "cannot open " + path + ".json for writing");
  side << meta.dump(2) << '\n';
}

Network load(const std::string& path) {
  std::ifstream side(path + ".json");
  require(side.good(), ErrorKind::Io, "cannot open " + path + ".json");
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, path + ".json: " + e.what());
  }
  require(meta.value("format", "") == "pricestock-params" && meta.value("version", 0) == 1, ErrorKind::Parse,
          path + ".json: unsupported parameter format");
  const auto& s = meta.at("spec");
  NetworkSpec spec;
  spec.input = s.at("input");
  spec.hidden1 = s.at("hidden1");
  spec.hidden2 = s.at("hidden2");
  spec.output = s.at("output");
  spec.head = s.at("head") == "softmax" ? Head::Softmax : Head::Scalar;
  spec.hidden_gain = s.at("hidden_gain");
  spec.output_gain = s.at("output_gain");
  Network net(spec);
  require(meta.at("count").get<Eigen::Index>() == net.params.values.size(), ErrorKind::Parse,
          path + ".json: parameter count does not match the spec");

  std::ifstream bin(path, std::ios::binary);
  require(bin.good(), ErrorKind::Io, "cannot open " + path);
  bin.read(reinterpret_cast<char*>(net.params.values.data()),
           static_cast<std::streamsize>(net.params.values.size() * sizeof(double)));
  require(bin.gcount() == static_cast<std::streamsize>(net.params.values.size() * sizeof(double)), ErrorKind::Parse,
          path + ": truncated parameter file");
  return net;
}

}  // namespace pricestock::neural
