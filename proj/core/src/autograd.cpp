#include "m3d/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace m3d::ag {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

Var make(Mat value, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool req = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) req = req || p->requires_grad;
  }
  if (req) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return Var(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

void Node::accumulate(const Mat& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var Var::constant(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& out) {
  if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("backward: output must be 1x1");
  backward(out, Mat::Ones(1, 1));
}

void backward(const Var& out, const Mat& seed) {
  if (!out.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(out.node().get(), 0);
  visited.insert(out.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !p->parents.empty() && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  out.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
  // Release interior gradients; parameters (leaves) keep theirs.
  for (Node* n : order)
    if (!n->parents.empty()) n->grad.resize(0, 0);
}

// ---------------------------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Mat v = a.value() * b.value();
  return make(std::move(v), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate_expr(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate_expr(pa.value.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Mat v = a.value() * b.value().transpose();
  return make(std::move(v), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate_expr(self.grad * pb.value);
    if (pb.requires_grad) pb.accumulate_expr(self.grad.transpose() * pa.value);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate_expr(-self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate_expr(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate_expr(self.grad.cwiseProduct(pa.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.node()}, [s](Node& self) { self.parents[0]->accumulate_expr(self.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  return make((a.value().array() + s).matrix(), {a.node()},
              [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Mat v = a.value();
  v.rowwise() += row.value().row(0);
  return make(std::move(v), {a.node(), row.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate_expr(self.grad.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Var& column) {
  if (column.cols() != 1 || column.rows() != a.rows()) throw std::invalid_argument("scale_rows: shape mismatch");
  Mat v = a.value().array().colwise() * column.value().col(0).array();
  return make(std::move(v), {a.node(), column.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pc = *self.parents[1];
    if (pa.requires_grad) pa.accumulate_expr((self.grad.array().colwise() * pc.value.col(0).array()).matrix());
    if (pc.requires_grad) pc.accumulate_expr(self.grad.cwiseProduct(pa.value).rowwise().sum());
  });
}

Var relu(const Var& a) {
  return make(a.value().cwiseMax(0.0), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    p.accumulate_expr((p.value.array() > 0.0).select(self.grad, 0.0).matrix());
  });
}

Var sigmoid(const Var& a) {
  Mat v = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make(std::move(v), {a.node()}, [](Node& self) {
    self.parents[0]->accumulate_expr(
        (self.grad.array() * self.value.array() * (1.0 - self.value.array())).matrix());
  });
}

Var row_sum(const Var& a) {
  return make(a.value().rowwise().sum(), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    p.accumulate_expr(self.grad.col(0).replicate(1, p.value.cols()));
  });
}

Var sum(const Var& a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return make(std::move(v), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    p.accumulate_expr(Mat::Constant(p.value.rows(), p.value.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw std::invalid_argument("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Mat v = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return make(std::move(v), {a.node()}, [](Node& self) {
    auto& p = *self.parents[0];
    p.accumulate_expr(Eigen::Map<const Mat>(self.grad.data(), p.value.rows(), p.value.cols()));
  });
}

// ---------------------------------------------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  std::vector<NodePtr> parents;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    offsets.push_back(cols);
    cols += p.cols();
    parents.push_back(p.node());
  }
  Mat v(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) v.middleCols(offsets[i], parts[i].cols()) = parts[i].value();
  return make(std::move(v), std::move(parents), [offsets](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      auto& p = *self.parents[i];
      if (p.requires_grad) p.accumulate_expr(self.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<NodePtr> parents;
  std::vector<Eigen::Index> offsets;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    offsets.push_back(rows);
    rows += p.rows();
    parents.push_back(p.node());
  }
  Mat v(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i) v.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
  return make(std::move(v), std::move(parents), [offsets](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      auto& p = *self.parents[i];
      if (p.requires_grad) p.accumulate_expr(self.grad.middleRows(offsets[i], p.value.rows()));
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  return make(a.value().middleCols(start, count), {a.node()}, [start, count](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    p.grad.middleCols(start, count) += self.grad;
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::invalid_argument("slice_rows: out of range");
  return make(a.value().middleRows(start, count), {a.node()}, [start, count](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    p.grad.middleRows(start, count) += self.grad;
  });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  Mat v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw std::invalid_argument("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(v), {a.node()}, [idx = std::move(idx)](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) p.grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var scatter_rows(const Var& a, std::span<const int> index, Eigen::Index out_rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw std::invalid_argument("scatter_rows: index size mismatch");
  Mat v = Mat::Zero(out_rows, a.cols());
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(out_rows), 0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= out_rows) throw std::logic_error("scatter_rows: index out of grid");
    if (seen[index[i]]) throw std::invalid_argument("scatter_rows: duplicate index");
    seen[index[i]] = 1;
    v.row(index[i]) = a.value().row(static_cast<Eigen::Index>(i));
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(v), {a.node()}, [idx = std::move(idx)](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) p.grad.row(static_cast<Eigen::Index>(i)) += self.grad.row(idx[i]);
  });
}

Var segment_max(const Var& a, std::span<const int> segment, Eigen::Index num_segments) {
  if (static_cast<Eigen::Index>(segment.size()) != a.rows()) throw std::invalid_argument("segment_max: size mismatch");
  const Eigen::Index c = a.cols();
  Mat v = Mat::Zero(num_segments, c);
  std::vector<int> winner(static_cast<std::size_t>(num_segments * c), -1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int s = segment[r];
    if (s < 0 || s >= num_segments) throw std::invalid_argument("segment_max: segment out of range");
    for (Eigen::Index k = 0; k < c; ++k) {
      int& w = winner[static_cast<std::size_t>(s * c + k)];
      const double x = a.value()(r, k);
      if (w < 0 || x > v(s, k)) {
        v(s, k) = x;
        w = static_cast<int>(r);
      }
    }
  }
  return make(std::move(v), {a.node()}, [winner = std::move(winner), c](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    const Eigen::Index ns = self.value.rows();
    for (Eigen::Index s = 0; s < ns; ++s)
      for (Eigen::Index k = 0; k < c; ++k) {
        const int w = winner[static_cast<std::size_t>(s * c + k)];
        if (w >= 0) p.grad(w, k) += self.grad(s, k);
      }
  });
}

Var segment_mean(const Var& a, std::span<const int> segment, Eigen::Index num_segments) {
  if (static_cast<Eigen::Index>(segment.size()) != a.rows()) throw std::invalid_argument("segment_mean: size mismatch");
  Mat v = Mat::Zero(num_segments, a.cols());
  std::vector<double> count(static_cast<std::size_t>(num_segments), 0.0);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const int s = segment[r];
    if (s < 0 || s >= num_segments) throw std::invalid_argument("segment_mean: segment out of range");
    v.row(s) += a.value().row(r);
    count[s] += 1.0;
  }
  for (Eigen::Index s = 0; s < num_segments; ++s)
    if (count[s] > 0) v.row(s) /= count[s];
  std::vector<int> seg(segment.begin(), segment.end());
  return make(std::move(v), {a.node()}, [seg = std::move(seg), count = std::move(count)](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    for (std::size_t r = 0; r < seg.size(); ++r)
      p.grad.row(static_cast<Eigen::Index>(r)) += self.grad.row(seg[r]) / count[seg[r]];
  });
}

Var sparse_apply(const SparseMat& s, const Var& a) {
  if (s.cols() != a.rows()) throw std::invalid_argument("sparse_apply: shape mismatch");
  Mat v = s * a.value();
  auto op = std::make_shared<SparseMat>(s);
  return make(std::move(v), {a.node()}, [op](Node& self) {
    self.parents[0]->accumulate_expr(op->transpose() * self.grad);
  });
}

// ---------------------------------------------------------------------------------------------

Var im2col(const Var& x, const ConvGeometry& g) {
  if (x.rows() != static_cast<Eigen::Index>(g.height) * g.width) throw std::invalid_argument("im2col: spatial size mismatch");
  const int c = static_cast<int>(x.cols());
  const int ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("im2col: empty output");
  Mat v = Mat::Zero(static_cast<Eigen::Index>(ho) * wo, static_cast<Eigen::Index>(k) * k * c);
  const double* src = x.value().data();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* dst = v.data() + (static_cast<Eigen::Index>(oy) * wo + ox) * v.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - g.pad + kx;
          if (ix < 0 || ix >= g.width) continue;
          std::copy_n(src + (static_cast<Eigen::Index>(iy) * g.width + ix) * c, c, dst + (ky * k + kx) * c);
        }
      }
    }
  }
  return make(std::move(v), {x.node()}, [g, c, ho, wo](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    const int k = g.kernel;
    double* dst = p.grad.data();
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const double* src = self.grad.data() + (static_cast<Eigen::Index>(oy) * wo + ox) * self.grad.cols();
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.width) continue;
            double* d = dst + (static_cast<Eigen::Index>(iy) * g.width + ix) * c;
            const double* s = src + (ky * k + kx) * c;
            for (int ch = 0; ch < c; ++ch) d[ch] += s[ch];
          }
        }
      }
    }
  });
}

Var pixel_shuffle(const Var& x, int height, int width, int factor) {
  const Eigen::Index ff = static_cast<Eigen::Index>(factor) * factor;
  if (x.rows() != static_cast<Eigen::Index>(height) * width || x.cols() % ff != 0) {
    throw std::invalid_argument("pixel_shuffle: shape mismatch");
  }
  const Eigen::Index c = x.cols() / ff;
  const int ow = width * factor;
  Mat v(x.rows() * ff, c);
  auto out_row = [=](int h, int w, int dy, int dx) {
    return static_cast<Eigen::Index>(h * factor + dy) * ow + (w * factor + dx);
  };
  for (int h = 0; h < height; ++h)
    for (int w = 0; w < width; ++w)
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx)
          v.row(out_row(h, w, dy, dx)) =
              x.value().row(static_cast<Eigen::Index>(h) * width + w).segment((dy * factor + dx) * c, c);
  return make(std::move(v), {x.node()}, [=](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Mat::Zero(p.value.rows(), p.value.cols());
    for (int h = 0; h < height; ++h)
      for (int w = 0; w < width; ++w)
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            p.grad.row(static_cast<Eigen::Index>(h) * width + w).segment((dy * factor + dx) * c, c) +=
                self.grad.row(out_row(h, w, dy, dx));
  });
}

// ---------------------------------------------------------------------------------------------

Var masked_softmax_rows(const Var& logits,
                        const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask) {
  if (mask.rows() != logits.rows() || mask.cols() != logits.cols()) {
    throw std::invalid_argument("masked_softmax_rows: mask shape mismatch");
  }
  const auto& z = logits.value();
  Mat v = Mat::Zero(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      if (mask(i, j)) m = std::max(m, z(i, j));
    if (!std::isfinite(m)) continue;
    double total = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (!mask(i, j)) continue;
      v(i, j) = std::exp(z(i, j) - m);
      total += v(i, j);
    }
    v.row(i) /= total;
  }
  return make(std::move(v), {logits.node()}, [](Node& self) {
    // dz = p * (g - <g, p>) row-wise; masked entries have p = 0.
    const Mat& p = self.value;
    Eigen::VectorXd dot = p.cwiseProduct(self.grad).rowwise().sum();
    Mat g = p.array() * (self.grad.array().colwise() - dot.array());
    self.parents[0]->accumulate(g);
  });
}

Var sigmoid_bce(const Var& logits, const Mat& targets) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw std::invalid_argument("sigmoid_bce: target shape mismatch");
  }
  if ((targets.array() < 0.0).any() || (targets.array() > 1.0).any()) {
    throw std::invalid_argument("sigmoid_bce: targets outside [0, 1]");
  }
  const auto& x = logits.value();
  // max(x, 0) - x t + log(1 + exp(-|x|))
  Mat v = x.cwiseMax(0.0) - x.cwiseProduct(targets) +
          x.unaryExpr([](double a) { return std::log1p(std::exp(-std::abs(a))); });
  return make(std::move(v), {logits.node()}, [targets](Node& self) {
    const auto& x = self.parents[0]->value;
    Mat s = x.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });
    self.parents[0]->accumulate_expr(self.grad.cwiseProduct(s - targets));
  });
}

Var smooth_l1(const Var& pred, const Mat& target, double beta) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) {
    throw std::invalid_argument("smooth_l1: target shape mismatch");
  }
  if (!(beta > 0)) throw std::invalid_argument("smooth_l1: beta must be positive");
  Mat diff = pred.value() - target;
  Mat v = diff.unaryExpr([beta](double d) {
    const double a = std::abs(d);
    return a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
  });
  return make(std::move(v), {pred.node()}, [diff = std::move(diff), beta](Node& self) {
    Mat d = diff.unaryExpr([beta](double x) {
      return std::abs(x) < beta ? x / beta : (x > 0 ? 1.0 : -1.0);
    });
    self.parents[0]->accumulate_expr(self.grad.cwiseProduct(d));
  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> target) {
  if (static_cast<Eigen::Index>(target.size()) != logits.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: target size mismatch");
  }
  const auto& z = logits.value();
  Mat prob(z.rows(), z.cols());
  Mat v(z.rows(), 1);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int t = target[i];
    if (t < 0 || t >= z.cols()) throw std::invalid_argument("softmax_cross_entropy: target out of range");
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    prob.row(i) = (z.row(i).array() - lse).exp();
    v(i, 0) = lse - z(i, t);
  }
  std::vector<int> tgt(target.begin(), target.end());
  return make(std::move(v), {logits.node()}, [prob = std::move(prob), tgt = std::move(tgt)](Node& self) {
    Mat g = prob;
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, tgt[i]) -= 1.0;
    g.array().colwise() *= self.grad.col(0).array();
    self.parents[0]->accumulate(g);
  });
}

}  // namespace m3d::ag
