#include "m3d/mvaa.hpp"

#include <cmath>
#include <stdexcept>

namespace m3d {

ag::Mat pairwise_box_residuals(std::span<const Box7> queries, std::span<const Box7> keys) {
  const Eigen::Index n = static_cast<Eigen::Index>(queries.size()), m = static_cast<Eigen::Index>(keys.size());
  ag::Mat out(n * m, 7);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto r = encode_residuals(keys[j], queries[i]).as_array();
      for (int c = 0; c < 7; ++c) out(i * m + j, c) = r[c];
    }
  return out;
}

namespace {

void check_heads(const MvaaConfig& cfg) {
  if (cfg.heads < 1 || cfg.qk_channels() % cfg.heads != 0) {
    throw std::invalid_argument("MvaaConfig: head count must divide the attention width");
  }
  if (cfg.channels < 1) throw std::invalid_argument("MvaaConfig: non-positive channel width");
}

ag::Var rows_mask_column(const std::vector<std::uint8_t>& keep) {
  ag::Mat m(static_cast<Eigen::Index>(keep.size()), 1);
  for (std::size_t i = 0; i < keep.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = keep[i] ? 1.0 : 0.0;
  return ag::Var::constant(std::move(m));
}

}  // namespace

AlignmentAttention::AlignmentAttention(nn::ParameterStore& ps, const std::string& name, const MvaaConfig& cfg)
    : cfg_(cfg) {
  check_heads(cfg);
  const int c = cfg.channels, d = cfg.qk_channels();
  q_ = nn::Linear(ps, name + ".q", c, d);
  k_ = nn::Linear(ps, name + ".k", c, d);
  v_ = nn::Linear(ps, name + ".v", c, d);
  out_ = nn::Linear(ps, name + ".out", d, c);
  if (cfg.bias_mode == BiasMode::kJoint) {
    bias_joint_ = nn::Mlp(ps, name + ".bias", 8, {c, 1});
  } else {
    bias_res_ = nn::Mlp(ps, name + ".bias_res", 7, {c, 1});
    bias_dt_ = nn::Mlp(ps, name + ".bias_dt", 1, {c, 1});
  }
}

ag::Var AlignmentAttention::bias(std::span<const Box7> bt, std::span<const Box7> bs, double dt) const {
  const Eigen::Index n = static_cast<Eigen::Index>(bt.size()), m = static_cast<Eigen::Index>(bs.size());
  ag::Mat res = pairwise_box_residuals(bt, bs);
  if (cfg_.bias_mode == BiasMode::kJoint) {
    ag::Mat in(n * m, 8);
    in.leftCols(7) = res;
    in.col(7).setConstant(dt);
    return ag::reshape(bias_joint_(ag::Var::constant(std::move(in))), n, m);
  }
  ag::Var r = ag::reshape(bias_res_(ag::Var::constant(std::move(res))), n, m);
  ag::Var t = bias_dt_(ag::Var::constant(ag::Mat::Constant(1, 1, dt)));
  // Broadcast the 1x1 dt term over the whole matrix.
  ag::Var ones = ag::Var::constant(ag::Mat::Ones(n * m, 1));
  return ag::add(r, ag::reshape(ag::matmul(ones, t), n, m));
}

AlignmentAttention::Output AlignmentAttention::forward(const ag::Var& ft, std::span<const Box7> bt, const ag::Var& fs,
                                                       std::span<const Box7> bs,
                                                       std::span<const std::uint8_t> key_valid, double dt) const {
  const Eigen::Index n = ft.rows(), m = fs.rows();
  if (static_cast<Eigen::Index>(bt.size()) != n || static_cast<Eigen::Index>(bs.size()) != m) {
    throw std::invalid_argument("AlignmentAttention: box/feature count mismatch");
  }
  if (!key_valid.empty() && static_cast<Eigen::Index>(key_valid.size()) != m) {
    throw std::invalid_argument("AlignmentAttention: key mask size mismatch");
  }
  if (ft.cols() != cfg_.channels || fs.cols() != cfg_.channels) {
    throw std::invalid_argument("AlignmentAttention: feature width mismatch");
  }
  Mask mask = Mask::Ones(n, m);
  for (Eigen::Index j = 0; j < m && !key_valid.empty(); ++j)
    if (!key_valid[j]) mask.col(j).setZero();
  Output o;
  o.all_masked.assign(static_cast<std::size_t>(n), m == 0 || (mask.array() == 0).all() ? 1 : 0);

  const ag::Var q = q_(ft), k = k_(fs), v = v_(fs);
  const ag::Var b = bias(bt, bs, dt);
  const int d = cfg_.qk_channels(), dh = d / cfg_.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ag::Var> head_out;
  ag::Var wsum;
  for (int h = 0; h < cfg_.heads; ++h) {
    const ag::Var qh = cfg_.heads == 1 ? q : ag::slice_cols(q, h * dh, dh);
    const ag::Var kh = cfg_.heads == 1 ? k : ag::slice_cols(k, h * dh, dh);
    const ag::Var vh = cfg_.heads == 1 ? v : ag::slice_cols(v, h * dh, dh);
    const ag::Var logits = ag::add(ag::scale(ag::matmul_nt(qh, kh), inv), b);
    const ag::Var w = ag::masked_softmax_rows(logits, mask);
    head_out.push_back(ag::matmul(w, vh));
    wsum = h == 0 ? w : ag::add(wsum, w);
  }
  o.weights = cfg_.heads == 1 ? wsum : ag::scale(wsum, 1.0 / cfg_.heads);
  ag::Var y = out_(cfg_.heads == 1 ? head_out[0] : ag::concat_cols(head_out));
  if (cfg_.residual) y = ag::add(y, ft);
  bool any_masked = false;
  for (auto f : o.all_masked) any_masked |= f != 0;
  if (any_masked) {
    std::vector<std::uint8_t> keep(o.all_masked.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = !o.all_masked[i];
    y = ag::scale_rows(y, rows_mask_column(keep));
  }
  o.values = y;
  return o;
}

// ---------------------------------------------------------------------------------------------

AggregationAttention::AggregationAttention(nn::ParameterStore& ps, const std::string& name, const MvaaConfig& cfg)
    : cfg_(cfg) {
  check_heads(cfg);
  const int c = cfg.channels, d = cfg.qk_channels();
  q_ = nn::Linear(ps, name + ".q", c, d);
  k_ = nn::Linear(ps, name + ".k", c, d);
  v_ = nn::Linear(ps, name + ".v", c, d);
  out_ = nn::Linear(ps, name + ".out", d, c);
  dt_bias_ = nn::Mlp(ps, name + ".dt", 1, {cfg.dt_hidden, 1});
}

AggregationAttention::Output AggregationAttention::forward(const ag::Var& ft, std::span<const ag::Var> views,
                                                           std::span<const double> dt, const Mask& view_mask) const {
  const std::size_t s = views.size();
  if (s == 0) throw std::invalid_argument("AggregationAttention: zero views");
  if (dt.size() != s) throw std::invalid_argument("AggregationAttention: one dt per view required");
  const Eigen::Index n = ft.rows();
  for (const auto& v : views)
    if (v.rows() != n || v.cols() != cfg_.channels) throw std::invalid_argument("AggregationAttention: view shape mismatch");
  const Mask mask = view_mask.size() == 0 ? Mask(Mask::Ones(n, static_cast<Eigen::Index>(s))) : view_mask;
  if (mask.rows() != n || mask.cols() != static_cast<Eigen::Index>(s)) {
    throw std::invalid_argument("AggregationAttention: view mask shape mismatch");
  }

  ag::Mat dts(static_cast<Eigen::Index>(s), 1);
  for (std::size_t i = 0; i < s; ++i) dts(static_cast<Eigen::Index>(i), 0) = dt[i];
  const ag::Var dt_row = ag::reshape(dt_bias_(ag::Var::constant(std::move(dts))), 1, static_cast<Eigen::Index>(s));

  const ag::Var q = q_(ft);
  std::vector<ag::Var> keys, vals;
  for (const auto& v : views) {
    keys.push_back(k_(v));
    vals.push_back(v_(v));
  }
  const int d = cfg_.qk_channels(), dh = d / cfg_.heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ag::Var> head_out;
  ag::Var wsum;
  for (int h = 0; h < cfg_.heads; ++h) {
    auto part = [&](const ag::Var& x) { return cfg_.heads == 1 ? x : ag::slice_cols(x, h * dh, dh); };
    const ag::Var qh = part(q);
    std::vector<ag::Var> cols;
    for (std::size_t i = 0; i < s; ++i) cols.push_back(ag::row_sum(ag::mul(qh, part(keys[i]))));
    const ag::Var logits = ag::add_row(ag::scale(s == 1 ? cols[0] : ag::concat_cols(cols), inv), dt_row);
    const ag::Var w = ag::masked_softmax_rows(logits, mask);
    ag::Var acc;
    for (std::size_t i = 0; i < s; ++i) {
      const ag::Var term = ag::scale_rows(part(vals[i]), ag::slice_cols(w, static_cast<Eigen::Index>(i), 1));
      acc = i == 0 ? term : ag::add(acc, term);
    }
    head_out.push_back(acc);
    wsum = h == 0 ? w : ag::add(wsum, w);
  }
  Output o;
  o.weights = cfg_.heads == 1 ? wsum : ag::scale(wsum, 1.0 / cfg_.heads);
  o.features = out_(cfg_.heads == 1 ? head_out[0] : ag::concat_cols(head_out));
  return o;
}

// ---------------------------------------------------------------------------------------------

BoxHead::BoxHead(nn::ParameterStore& ps, const std::string& name, int channels)
    : embed_(ps, name + ".embed", channels, {channels, channels}, /*relu_last=*/true),
      cls_(ps, name + ".cls", channels, 1),
      reg_(ps, name + ".reg", channels, 7) {
  // Start from "keep the proposal".
  ag::Var w = ps.find(name + ".reg.w");
  w.mutable_value().setZero();
}

BoxHead::Output BoxHead::forward(const ag::Var& features) const {
  const ag::Var e = embed_(features);
  return {cls_(e), reg_(e)};
}

std::vector<Box7> BoxHead::decode(const ag::Mat& residuals, std::span<const Box7> proposals) {
  if (residuals.rows() != static_cast<Eigen::Index>(proposals.size()) || residuals.cols() != 7) {
    throw std::invalid_argument("BoxHead::decode: shape mismatch");
  }
  std::vector<Box7> out;
  out.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    std::array<double, 7> r;
    for (int c = 0; c < 7; ++c) r[c] = residuals(static_cast<Eigen::Index>(i), c);
    for (int c = 3; c < 6; ++c) r[c] = std::clamp(r[c], -10.0, 10.0);
    out.push_back(decode_residuals(ResidualVec::from_array(r), proposals[i]));
  }
  return out;
}

std::vector<BoxHead::Output> crossview_heads(const BoxHead& head, std::span<const ag::Var> views) {
  std::vector<BoxHead::Output> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(head.forward(v));
  return out;
}

}  // namespace m3d
