#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gsrefine/image.hpp"

namespace gsrefine {

/// 10-bin histogram of the YUV luminance channel, weights sum to 1.
struct LuminanceHistogram {
  std::array<double, 10> bins{};
};

/// Y = 0.299 R + 0.587 G + 0.114 B, 10 equal-width bins over [0, 1],
/// normalized by pixel count.
LuminanceHistogram luminance_histogram(const Image& image);

/// Per-pixel color map c -> Q c + b.
struct ColorAffine {
  Eigen::Matrix3d Q = Eigen::Matrix3d::Identity();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
};

/// Applies the affine map and clamps each channel to [0, 1].
Image apply_act(const ColorAffine& affine, const Image& image);

/// Closed-form least-squares (Q, b) minimizing the masked squared color
/// residual to `target`. Throws std::runtime_error on fewer than 4 usable
/// pixels or a rank-deficient design (e.g. constant-color render).
ColorAffine fit_affine_ls(const Image& rendered, const Image& target,
                          const std::vector<std::uint8_t>* mask = nullptr);

/// 4-layer MLP 10 -> 64 -> 64 -> 64 -> 12 with ReLU between layers and a
/// linear head; the 12 outputs are (Q - I) row-major plus b. The head is
/// zero-initialized so an untrained network is an exact identity
/// transform.
struct ActNetwork {
  Eigen::MatrixXd w1, w2, w3, w4;
  Eigen::VectorXd b1, b2, b3, b4;

  static ActNetwork init(std::uint64_t seed);
  std::size_t parameter_count() const;
};

ColorAffine act_forward(const ActNetwork& net, const LuminanceHistogram& hist);

struct ActGradients {
  Eigen::MatrixXd w1, w2, w3, w4;
  Eigen::VectorXd b1, b2, b3, b4;
};

using ImagePair = std::pair<Image, Image>;  // (render, query)

/// Mean absolute photometric error of apply_act(act_forward(hist(query)),
/// render) against query, over all pairs.
double act_loss(const ActNetwork& net, const std::vector<ImagePair>& pairs);

/// Analytic parameter gradients of act_loss (L1 subgradient; clamp and
/// ReLU pass zero at their kinks).
ActGradients act_gradients(const ActNetwork& net,
                           const std::vector<ImagePair>& pairs,
                           double* loss_out = nullptr);

struct TrainReport {
  std::vector<double> loss_trace;  // loss before each step
};

/// Full-batch Adam on act_loss. Images larger than 4096 pixels train on a
/// fixed seeded pixel subset. Deterministic given the seed.
TrainReport act_train(ActNetwork& net, const std::vector<ImagePair>& pairs,
                      int steps, double lr, std::uint64_t seed);

/// Checkpoint: text header `ACT v1`, layer sizes, then a row-major
/// parameter dump at 17 significant digits.
void save_act(const ActNetwork& net, const std::filesystem::path& path);
ActNetwork load_act(const std::filesystem::path& path);

}  // namespace gsrefine
