#pragma once

#include "m3d/autograd.hpp"
#include "m3d/geometry.hpp"
#include "m3d/hungarian.hpp"
#include "m3d/maxpool_nms.hpp"
#include "m3d/nn.hpp"
#include "m3d/pillars.hpp"

#include <cstdint>
#include <vector>

namespace m3d {

/// Dense BEV feature map: (height * width) x channels, on `grid` downsampled by `stride`.
struct BevFeatureMap {
  ag::Var features;
  int height = 0, width = 0;
  int stride = 1;
  PillarGrid grid;

  int channels() const { return static_cast<int>(features.cols()); }
  /// Center of feature-map cell (row, col) in the ego frame.
  Eigen::Vector2d cell_center(int row, int col) const { return grid.cell_center(row, col, stride); }
};

struct BackboneConfig {
  std::vector<int> block_channels = {64, 128, 256};
  std::vector<int> block_layers = {2, 2, 2};   // convs per block, the first one strided
  std::vector<int> block_strides = {1, 2, 2};  // relative to the previous block
  std::vector<int> up_channels = {128, 128, 128};
  int output_stride = 1;

  int out_channels() const;
};

/// PointPillars-style backbone: strided conv blocks, each upsampled to the output stride and
/// concatenated.
class Backbone {
 public:
  Backbone() = default;
  Backbone(nn::ParameterStore& ps, int in_channels, const BackboneConfig& cfg);

  /// Throws std::invalid_argument when the input shape does not match the configuration.
  BevFeatureMap forward(const ag::Var& dense, const PillarGrid& grid) const;
  const BackboneConfig& config() const { return cfg_; }
  int in_channels() const { return in_channels_; }

 private:
  BackboneConfig cfg_;
  int in_channels_ = 0;
  std::vector<std::vector<nn::Conv2d>> blocks_;
  std::vector<nn::Upsample> ups_;
};

/// Anchor-free box parameterization shared by the dense head, its targets and decoding.
struct FsdBoxCoder {
  double prior_length = 4.7, prior_width = 2.1, prior_height = 1.7;
  double prior_z = 0.85;
  int num_bins = 12;

  // Channel layout of the dense head output.
  static constexpr int kObj = 0;
  static constexpr int kOffset = 1;   // 2: center offsets / prior diagonal
  static constexpr int kZ = 3;        // 1: (z - prior_z) / prior_height
  static constexpr int kLogSize = 4;  // 3: log(size / prior)
  static constexpr int kBins = 7;     // num_bins logits, then num_bins residuals
  int channels() const { return kBins + 2 * num_bins; }

  double prior_diagonal() const;
  double bin_width() const;
  double bin_center(int bin) const;
  int bin_of(double heading) const;

  struct Target {
    std::array<double, 6> reg;  // offsets (2), z (1), log sizes (3)
    int bin = 0;
    double bin_residual = 0.0;
  };
  Target encode(const Box7& gt, const Eigen::Vector2d& location_center) const;
  /// Decodes one dense-head row; the heading uses the argmax bin plus that bin's residual.
  Box7 decode(std::span<const double> row, const Eigen::Vector2d& location_center) const;
};

/// 1x1 head over the backbone output.
class DenseHead {
 public:
  DenseHead() = default;
  DenseHead(nn::ParameterStore& ps, int in_channels, const FsdBoxCoder& coder);
  /// (H*W) x coder.channels() raw outputs.
  ag::Var forward(const BevFeatureMap& fmap) const;

 private:
  nn::Linear proj_;
};

/// Decodes every location of a dense head output into ego-frame boxes.
std::vector<Box7> decode_dense(const ag::Mat& head, const BevFeatureMap& fmap, const FsdBoxCoder& coder);

/// Fixed-size proposal set; invalid (sentinel) slots carry score -inf.
struct ProposalSet {
  std::vector<Box7> boxes;
  std::vector<double> scores;  // objectness logits
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> is_peak;
  std::vector<int> locations;  // flat feature-map cell, -1 for sentinels
  int frame_index = 0;

  std::size_t size() const { return boxes.size(); }
  std::size_t valid_count() const;
};

/// MaxPoolNMS over the objectness channel followed by decoding of the retained locations.
ProposalSet select_proposals(const ag::Mat& head, const BevFeatureMap& fmap, const FsdBoxCoder& coder,
                             int kernel, int num_proposals);

enum class AssignStrategy { kHungarian, kCenteredness };

/// Sites scored by the objectness loss and their labels.
struct FsdAssignment {
  std::vector<int> sites;              // feature-map cells in C
  std::vector<std::uint8_t> positive;  // per site
  std::vector<int> site_gt;            // gt index for positive sites, -1 otherwise
  std::vector<int> gt_site;            // per gt: its positive cell
  std::vector<std::uint8_t> gt_reassigned;
  MatchResult match;                   // raw Hungarian result (gt x proposal)

  int num_positive() const;
};

/// Hungarian matching on proposal/gt IoU, reassigning zero-overlap matches to the nearest free
/// feature-map cell. With kCenteredness every gt takes its nearest cell instead.
FsdAssignment fsd_assign(const ProposalSet& proposals, const std::vector<Box7>& gts, const BevFeatureMap& fmap,
                         IouKind iou_kind = IouKind::kVolume,
                         AssignStrategy strategy = AssignStrategy::kHungarian);

/// IoU matrix (gts x proposals); invalid proposals get 0.
Eigen::MatrixXd iou_matrix(const std::vector<Box7>& gts, const ProposalSet& proposals, IouKind kind);

}  // namespace m3d
