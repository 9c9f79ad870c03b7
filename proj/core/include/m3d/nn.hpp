#pragma once

#include "m3d/autograd.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace m3d::nn {

using ag::Mat;
using ag::Var;

/// Ordered registry of named trainable tensors. Order is registration order and defines the
/// checkpoint layout.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// He-uniform initialised weight (fan_in from the argument).
  Var weight(const std::string& name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in);
  Var zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Var constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);

  struct Entry {
    std::string name;
    Var var;
  };
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();
  const Var& find(const std::string& name) const;

 private:
  Var add(const std::string& name, Mat value);
  std::mt19937_64 rng_;
  std::vector<Entry> entries_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& ps, const std::string& name, int in, int out, bool bias = true);
  Var operator()(const Var& x) const;
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  Var w_, b_;
};

/// Dense MLP: Linear -> ReLU between layers, no activation after the last layer.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& ps, const std::string& name, int in, const std::vector<int>& widths,
      bool relu_last = false);
  Var operator()(const Var& x) const;

 private:
  std::vector<Linear> layers_;
  bool relu_last_ = false;
};

/// k x k convolution on an (H*W) x Cin map.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& ps, const std::string& name, int in, int out, int kernel, int stride);
  /// Returns the (Ho*Wo) x Cout map; updates height/width to the output size.
  Var operator()(const Var& x, int& height, int& width) const;

 private:
  int in_ = 0, out_ = 0, kernel_ = 3, stride_ = 1;
  Var w_, b_;
};

/// Transposed convolution with kernel == stride (non-overlapping upsampling).
class Upsample {
 public:
  Upsample() = default;
  Upsample(ParameterStore& ps, const std::string& name, int in, int out, int factor);
  Var operator()(const Var& x, int& height, int& width) const;

 private:
  int in_ = 0, out_ = 0, factor_ = 1;
  Var w_, b_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 10.0;  // <= 0 disables clipping
};

/// Adaptive-moment optimizer over every entry of a ParameterStore.
class Adam {
 public:
  Adam(ParameterStore& ps, AdamOptions opts = {});
  /// Applies one update with the given learning rate; returns the pre-clip gradient norm.
  double step(double lr);
  std::int64_t steps() const { return t_; }

  // State access for checkpointing.
  std::vector<Mat>& first_moments() { return m_; }
  std::vector<Mat>& second_moments() { return v_; }
  const std::vector<Mat>& first_moments() const { return m_; }
  const std::vector<Mat>& second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  ParameterStore* ps_;
  AdamOptions opts_;
  std::vector<Mat> m_, v_;
  std::int64_t t_ = 0;
};

/// Exponential decay between two step marks: constant before `start`, reaching
/// `base * final_ratio` at `end`, constant afterwards.
double exponential_decay_lr(double base, std::int64_t step, std::int64_t start, std::int64_t end,
                            double final_ratio);

}  // namespace m3d::nn
