#pragma once

#include "m3d/autograd.hpp"
#include "m3d/geometry.hpp"
#include "m3d/nn.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace m3d {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class BiasMode {
  kJoint,     // one MLP over [7 residuals; dt]
  kSeparate,  // MLP(residuals) + MLP(dt)
};

struct MvaaConfig {
  int channels = 64;       // proposal feature width C
  int attn_channels = 0;   // C' for queries/keys/values; 0 means C
  int heads = 1;
  BiasMode bias_mode = BiasMode::kJoint;
  bool residual = false;   // add F_t to the alignment output
  int dt_hidden = 16;      // hidden width of the aggregation frame-delta bias

  int qk_channels() const { return attn_channels > 0 ? attn_channels : channels; }
};

/// (N*M) x 7 matrix; row i*M + j holds encode_residuals(keys[j], queries[i]).
ag::Mat pairwise_box_residuals(std::span<const Box7> queries, std::span<const Box7> keys);

/// Cross-attention from target proposals to one stored frame's proposals, with an additive
/// bias computed from box residuals and the frame delta. Parameters are shared across frames.
class AlignmentAttention {
 public:
  AlignmentAttention() = default;
  AlignmentAttention(nn::ParameterStore& ps, const std::string& name, const MvaaConfig& cfg);

  struct Output {
    ag::Var values;   // N x C
    ag::Var weights;  // N x M attention (averaged over heads when heads > 1)
    std::vector<std::uint8_t> all_masked;  // per query row
  };
  /// `key_valid` may be empty (all keys valid).
  Output forward(const ag::Var& ft, std::span<const Box7> bt, const ag::Var& fs, std::span<const Box7> bs,
                 std::span<const std::uint8_t> key_valid, double dt) const;

 private:
  ag::Var bias(std::span<const Box7> bt, std::span<const Box7> bs, double dt) const;

  MvaaConfig cfg_;
  nn::Linear q_, k_, v_, out_;
  nn::Mlp bias_joint_, bias_res_, bias_dt_;
};

/// Per-proposal attention across views: query F_t[i], keys/values {V_s[i]}.
class AggregationAttention {
 public:
  AggregationAttention() = default;
  AggregationAttention(nn::ParameterStore& ps, const std::string& name, const MvaaConfig& cfg);

  struct Output {
    ag::Var features;  // N x C
    ag::Var weights;   // N x S
  };
  /// `view_mask` (N x S) may be empty; throws std::invalid_argument for zero views.
  Output forward(const ag::Var& ft, std::span<const ag::Var> views, std::span<const double> dt,
                 const Mask& view_mask = Mask()) const;

 private:
  MvaaConfig cfg_;
  nn::Linear q_, k_, v_, out_;
  nn::Mlp dt_bias_;
};

/// 2-layer MLP embedding followed by an objectness branch and a 7-residual branch
/// (single-bin orientation: the heading residual is regressed directly).
class BoxHead {
 public:
  BoxHead() = default;
  BoxHead(nn::ParameterStore& ps, const std::string& name, int channels);

  struct Output {
    ag::Var objectness;  // N x 1 logits
    ag::Var residuals;   // N x 7
  };
  Output forward(const ag::Var& features) const;

  static std::vector<Box7> decode(const ag::Mat& residuals, std::span<const Box7> proposals);

 private:
  nn::Mlp embed_;
  nn::Linear cls_, reg_;
};

/// Applies one shared head to every view's aligned features.
std::vector<BoxHead::Output> crossview_heads(const BoxHead& head, std::span<const ag::Var> views);

}  // namespace m3d
