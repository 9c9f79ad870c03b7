#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major double matrices.
//
// Every op returns a new Var holding its value and, when any input requires a gradient and
// recording is enabled, a closure that pushes the output gradient back into its inputs.
// Spatial maps are stored as (H*W) x C matrices, row index h*W + w.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace m3d::ag {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Mat& g);
  template <typename Expr>
  void accumulate_expr(const Expr& g) {
    if (grad.size() == 0) grad = Mat::Zero(value.rows(), value.cols());
    grad += g;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Var constant(Mat value);
  static Var parameter(Mat value);

  bool defined() const { return node_ != nullptr; }
  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const { return node_->value(0, 0); }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording in the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

/// Back-propagates from a 1x1 output (seed 1) or with an explicit seed gradient.
void backward(const Var& out);
void backward(const Var& out, const Mat& seed);

// -- elementwise / linear algebra -------------------------------------------------------------
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);        // broadcast a 1 x C row over all rows
Var scale_rows(const Var& a, const Var& column);  // broadcast an N x 1 column over all columns
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var row_sum(const Var& a);  // N x 1
Var sum(const Var& a);      // 1 x 1
Var mean(const Var& a);     // 1 x 1
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

// -- structure -----------------------------------------------------------------------------------
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, std::span<const int> index);
/// Places row i of `a` at output row index[i]; other rows are zero. Indices must be unique.
Var scatter_rows(const Var& a, std::span<const int> index, Eigen::Index out_rows);
/// Per-segment max over rows; ties go to the first row; empty segments are zero.
Var segment_max(const Var& a, std::span<const int> segment, Eigen::Index num_segments);
Var segment_mean(const Var& a, std::span<const int> segment, Eigen::Index num_segments);
/// out = S * a with a fixed sparse operator S.
Var sparse_apply(const SparseMat& s, const Var& a);

// -- convolution helpers on (H*W) x C maps -------------------------------------------------------
struct ConvGeometry {
  int height = 0, width = 0, kernel = 3, stride = 1, pad = 1;
  int out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};
/// Zero-padded patches: (Ho*Wo) x (k*k*C), columns ordered (ky, kx, c).
Var im2col(const Var& x, const ConvGeometry& g);
/// (H*W) x (s*s*C) -> (H*s * W*s) x C, column block (dy*s+dx) goes to pixel (h*s+dy, w*s+dx).
Var pixel_shuffle(const Var& x, int height, int width, int factor);

// -- attention / losses ----------------------------------------------------------------------------
/// Row softmax where mask(i,j)==0 entries get zero weight; fully masked rows produce zeros.
Var masked_softmax_rows(const Var& logits, const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& mask);
/// Elementwise sigmoid cross-entropy with logits against fixed targets in [0, 1].
Var sigmoid_bce(const Var& logits, const Mat& targets);
/// Elementwise Huber: 0.5 x^2 / beta for |x| < beta, |x| - 0.5 beta otherwise.
Var smooth_l1(const Var& pred, const Mat& target, double beta);
/// Per-row softmax cross-entropy against integer targets; returns N x 1.
Var softmax_cross_entropy(const Var& logits, std::span<const int> target);

}  // namespace m3d::ag
