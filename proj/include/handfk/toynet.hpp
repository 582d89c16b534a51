#pragma once

#include "handfk/fk.hpp"
#include "handfk/skeleton.hpp"
#include "handfk/synth.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace handfk {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Dense regressor whose outputs are squashed onto the tree's DoF limits and
/// scale bounds, then fed to forward(). Hidden layers use ReLU.
class ToyNet {
 public:
  ToyNet() = default;
  /// `hidden` lists the hidden layer widths; input is 3 * joints and output
  /// dof_count + scale_count(mode). Weights are uniform in +-1/sqrt(fan_in);
  /// output biases start at the zero pose and unit scales.
  ToyNet(const KinematicTree& tree, ScaleMode mode, std::vector<int> hidden, std::uint64_t seed);
  /// Wraps existing layers (checkpoint loading); sizes must chain.
  ToyNet(ScaleMode mode, std::vector<DenseLayer> layers);

  ScaleMode mode() const {
    return mode_;
  }
  int input_size() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
  }
  int output_size() const {
    return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
  }
  std::vector<int> layer_sizes() const;
  std::vector<DenseLayer>& layers() {
    return layers_;
  }
  const std::vector<DenseLayer>& layers() const {
    return layers_;
  }
  std::size_t parameter_count() const;

  /// Raw (pre-squash) outputs.
  Eigen::VectorXd logits(const Eigen::VectorXd& features) const;

  bool operator==(const ToyNet& other) const;

 private:
  ScaleMode mode_ = ScaleMode::five;
  std::vector<DenseLayer> layers_;
};

struct ToySample {
  Eigen::VectorXd features;  // normalized joint coordinates, 3 per joint
  JointSet target;           // mm, same origin as the features
};

/// Palm-centered samples: features are the noisy joints minus the clean palm
/// divided by norm_mm; targets are the clean joints minus the clean palm.
std::vector<ToySample> make_toy_samples(std::span<const SynthSample> samples, double norm_mm);

struct Prediction {
  PoseVector pose;
  ScaleVector scales;
  JointSet joints;
};

/// Lower and upper output bounds: DoF limits followed by scale bounds.
void output_bounds(const KinematicTree& tree, ScaleMode mode, Eigen::VectorXd& lo, Eigen::VectorXd& hi);

Prediction predict(const ToyNet& net, const Eigen::VectorXd& features, const KinematicTree& tree);

struct TrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 200;
  int batch_size = 4;
  std::uint64_t seed = 0;
  // Joint residuals are divided by this before squaring (the feature scale).
  double norm_mm = 150.0;
};

void check_train_config(const TrainConfig& cfg);

struct NetGradients {
  double loss = 0.0;
  std::vector<DenseLayer> layers;
};

/// Mean over the batch of 0.5 * |(forward(net(x)) - target) / norm_mm|^2 and
/// its gradient with respect to every weight and bias.
NetGradients batch_gradients(
    const ToyNet& net, std::span<const ToySample> batch, const KinematicTree& tree, double norm_mm);
double batch_loss(const ToyNet& net, std::span<const ToySample> batch, const KinematicTree& tree, double norm_mm);

struct TrainResult {
  ToyNet net;
  std::vector<double> loss_history;  // mean sample loss per epoch
};

TrainResult train(
    const ToyNet& init, std::span<const ToySample> samples, const KinematicTree& tree, const TrainConfig& cfg);

/// Mean per-joint Euclidean error in mm over the samples.
double mean_joint_error(const ToyNet& net, std::span<const ToySample> samples, const KinematicTree& tree);

// Checkpoint, little-endian: "HANDTOY1" | u32 mode | u32 layer count L |
// (L + 1) x u32 sizes | per layer: weight row-major f64, then bias f64.
void save_checkpoint(const ToyNet& net, const std::string& path);
ToyNet load_checkpoint(const std::string& path);

std::string format_loss_history(std::span<const double> history);

} // namespace handfk
