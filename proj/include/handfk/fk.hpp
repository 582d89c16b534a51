#pragma once

#include "handfk/skeleton.hpp"
#include "handfk/transform.hpp"

#include <Eigen/Core>

#include <vector>

namespace handfk {

/// 3N x P matrix of joint-coordinate partials by pose parameter.
using PoseJacobian = Eigen::MatrixXd;
/// 3N x K matrix of joint-coordinate partials by mode scale parameter.
using ScaleJacobian = Eigen::MatrixXd;

/// Per-bone scale factors for a mode-specific scale vector.
Eigen::VectorXd expand_scales(const ScaleVector& s, const KinematicTree& tree);

/// Bones x K matrix E with expand_scales(s) == E * s.values.
Eigen::MatrixXd scale_expansion(ScaleMode mode, const KinematicTree& tree);

/// Output of the forward pass together with the partial chain products the
/// Jacobians reuse. For every variable factor (pose DoF or bone translation)
/// the global transform just before and just after that factor is kept.
struct FkResult {
  JointSet joints;
  std::vector<Transform4> frames;
  std::vector<Transform4> dof_before;
  std::vector<Transform4> dof_after;
  std::vector<Transform4> bone_before;
  std::vector<Transform4> bone_after;
  Eigen::VectorXd theta;
  Eigen::VectorXd bone_factors;
  ScaleMode mode = ScaleMode::multi;
};

/// Joint positions for pose `theta` and scales `s`. Throws ValidationError if
/// a parameter lies outside its limits.
FkResult forward(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree);

/// Half the squared norm of the coordinate residual forward - target.
double loss(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree, const JointSet& target);

PoseJacobian pose_jacobian(const FkResult& fk, const KinematicTree& tree);
PoseJacobian pose_jacobian(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree);

/// Jacobian with one column per bone factor (MultiScale layout).
Eigen::MatrixXd bone_scale_jacobian(const FkResult& fk, const KinematicTree& tree);
ScaleJacobian scale_jacobian(const FkResult& fk, const KinematicTree& tree);
ScaleJacobian scale_jacobian(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree);

struct LossGradients {
  double loss = 0.0;
  Eigen::VectorXd theta;
  Eigen::VectorXd scale;
};

LossGradients loss_gradients(
    const PoseVector& theta,
    const ScaleVector& s,
    const KinematicTree& tree,
    const JointSet& target);

/// Joints of `tree` whose positions depend on pose parameter `dof`.
std::vector<int> joints_moved_by_dof(const KinematicTree& tree, int dof);

} // namespace handfk
