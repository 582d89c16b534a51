#pragma once

#include "handfk/fk.hpp"
#include "handfk/skeleton.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace handfk {

struct SynthSpec {
  int n_samples = 100;
  std::uint64_t seed = 0;
  ScaleMode mode = ScaleMode::five;
  /// Pose values are drawn uniformly from each DoF interval shrunk about its
  /// midpoint by this factor.
  double margin = 0.8;
  double scale_lo = 0.8;
  double scale_hi = 1.25;
  double noise_sigma_mm = 0.0;
};

struct SynthSample {
  PoseVector pose;
  ScaleVector scales;
  JointSet joints;  // forward(pose, scales) plus noise
  JointSet clean;   // forward(pose, scales)
};

void check_synth_spec(const SynthSpec& spec);

std::vector<SynthSample> generate(const SynthSpec& spec, const KinematicTree& tree);

PoseVector random_pose(const KinematicTree& tree, double margin, std::mt19937_64& rng);
ScaleVector random_scales(const KinematicTree& tree, ScaleMode mode, double lo, double hi, std::mt19937_64& rng);

struct FdJacobians {
  PoseJacobian pose;
  ScaleJacobian scale;
};

/// Central finite differences of forward(), column by column, with one
/// Richardson step (steps h and h/2). Requires the point to sit at least one
/// step inside every limit.
FdJacobians fd_jacobian(
    const PoseVector& theta,
    const ScaleVector& s,
    const KinematicTree& tree,
    double h_theta = 1e-3,
    double h_s = 1e-3);

/// Largest entrywise relative difference |a - b| / max(|a|, |b|), counting
/// only entries whose absolute difference exceeds `abs_floor`.
double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double abs_floor);

} // namespace handfk
