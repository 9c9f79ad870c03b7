#include "m3d/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace m3d::nn {

Var ParameterStore::add(const std::string& name, Mat value) {
  for (const auto& e : entries_)
    if (e.name == name) throw std::invalid_argument("ParameterStore: duplicate parameter " + name);
  Var v = Var::parameter(std::move(value));
  entries_.push_back({name, v});
  return v;
}

Var ParameterStore::weight(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                           Eigen::Index fan_in) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(1, fan_in)));
  std::uniform_real_distribution<double> u(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng_);
  return add(name, std::move(m));
}

Var ParameterStore::zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return add(name, Mat::Zero(rows, cols));
}

Var ParameterStore::constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(name, Mat::Constant(rows, cols, value));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

const Var& ParameterStore::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  throw std::out_of_range("ParameterStore: no parameter " + name);
}

// ---------------------------------------------------------------------------------------------

Linear::Linear(ParameterStore& ps, const std::string& name, int in, int out, bool bias) : in_(in), out_(out) {
  w_ = ps.weight(name + ".w", in, out, in);
  if (bias) b_ = ps.zeros(name + ".b", 1, out);
}

Var Linear::operator()(const Var& x) const {
  Var y = ag::matmul(x, w_);
  return b_.defined() ? ag::add_row(y, b_) : y;
}

Mlp::Mlp(ParameterStore& ps, const std::string& name, int in, const std::vector<int>& widths, bool relu_last)
    : relu_last_(relu_last) {
  int prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers_.emplace_back(ps, name + "." + std::to_string(i), prev, widths[i]);
    prev = widths[i];
  }
}

Var Mlp::operator()(const Var& x) const {
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size() || relu_last_) h = ag::relu(h);
  }
  return h;
}

Conv2d::Conv2d(ParameterStore& ps, const std::string& name, int in, int out, int kernel, int stride)
    : in_(in), out_(out), kernel_(kernel), stride_(stride) {
  w_ = ps.weight(name + ".w", static_cast<Eigen::Index>(kernel) * kernel * in, out,
                 static_cast<Eigen::Index>(kernel) * kernel * in);
  b_ = ps.zeros(name + ".b", 1, out);
}

Var Conv2d::operator()(const Var& x, int& height, int& width) const {
  if (x.cols() != in_) throw std::invalid_argument("Conv2d: channel mismatch");
  ag::ConvGeometry g{height, width, kernel_, stride_, kernel_ / 2};
  Var cols = kernel_ == 1 && stride_ == 1 ? x : ag::im2col(x, g);
  height = g.out_height();
  width = g.out_width();
  return ag::add_row(ag::matmul(cols, w_), b_);
}

Upsample::Upsample(ParameterStore& ps, const std::string& name, int in, int out, int factor)
    : in_(in), out_(out), factor_(factor) {
  w_ = ps.weight(name + ".w", in, static_cast<Eigen::Index>(factor) * factor * out, in);
  b_ = ps.zeros(name + ".b", 1, out);
}

Var Upsample::operator()(const Var& x, int& height, int& width) const {
  if (x.cols() != in_) throw std::invalid_argument("Upsample: channel mismatch");
  if (factor_ == 1) {
    return ag::add_row(ag::matmul(x, w_), b_);
  }
  Var y = ag::pixel_shuffle(ag::matmul(x, w_), height, width, factor_);
  height *= factor_;
  width *= factor_;
  return ag::add_row(y, b_);
}

// ---------------------------------------------------------------------------------------------

Adam::Adam(ParameterStore& ps, AdamOptions opts) : ps_(&ps), opts_(opts) {
  for (const auto& e : ps.entries()) {
    m_.push_back(Mat::Zero(e.var.rows(), e.var.cols()));
    v_.push_back(Mat::Zero(e.var.rows(), e.var.cols()));
  }
}

double Adam::step(double lr) {
  auto& entries = ps_->entries();
  double sq = 0.0;
  for (const auto& e : entries)
    if (e.var.has_grad()) sq += e.var.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  const double clip = opts_.grad_clip_norm > 0 && norm > opts_.grad_clip_norm ? opts_.grad_clip_norm / norm : 1.0;
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& var = entries[i].var;
    if (!var.has_grad()) continue;
    const Mat g = var.grad() * clip;
    m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * g;
    v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * g.cwiseProduct(g);
    if (lr == 0.0) continue;
    var.mutable_value().array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opts_.eps);
  }
  return norm;
}

double exponential_decay_lr(double base, std::int64_t step, std::int64_t start, std::int64_t end,
                            double final_ratio) {
  if (step <= start || end <= start) return base;
  const double frac = std::min(1.0, static_cast<double>(step - start) / static_cast<double>(end - start));
  return base * std::pow(final_ratio, frac);
}

}  // namespace m3d::nn
