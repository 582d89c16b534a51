#include "handfk/fk.hpp"

#include "handfk/errors.hpp"

namespace handfk {

namespace {

constexpr const char* kModule = "fk_core";

Transform4 dof_transform(const DofSpec& dof, double value) {
  return dof.kind == DofKind::rotation ? rotation(dof.axis, value) : translation(dof.axis, value);
}

Transform4 dof_derivative(const DofSpec& dof, double value) {
  return dof.kind == DofKind::rotation ? rotation_derivative(dof.axis, value) : translation_derivative(dof.axis, 1.0);
}

// Rows of `jac` for the joints in `joints`, column `col`:
// before * derivative * inverse(after) * position.
void fill_column(
    Eigen::MatrixXd& jac,
    int col,
    const Transform4& before,
    const Transform4& derivative,
    const Transform4& after,
    const std::vector<int>& joints,
    const JointSet& positions) {
  const Transform4 lead = before * derivative;
  const Transform4 back = rigid_inverse(after);
  for (int n : joints) {
    const Eigen::Vector4d local = back * positions.positions.col(n).homogeneous();
    jac.block<3, 1>(3 * n, col) = (lead * local).head<3>();
  }
}

} // namespace

Eigen::MatrixXd scale_expansion(ScaleMode mode, const KinematicTree& tree) {
  const int bones = tree.bone_count();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(bones, tree.scale_count(mode));
  for (int b = 0; b < bones; ++b) {
    switch (mode) {
      case ScaleMode::global:
        e(b, 0) = 1.0;
        break;
      case ScaleMode::five:
        e(b, tree.bones()[b].finger) = 1.0;
        break;
      case ScaleMode::multi:
        e(b, b) = 1.0;
        break;
    }
  }
  return e;
}

Eigen::VectorXd expand_scales(const ScaleVector& s, const KinematicTree& tree) {
  const int k = tree.scale_count(s.mode);
  if (s.values.size() != k) {
    throw ValidationError(
        kModule,
        "scale mode " + std::string(to_string(s.mode)) + " expects " + std::to_string(k) + " values, got " +
            std::to_string(s.values.size()));
  }
  Eigen::VectorXd out(tree.bone_count());
  for (int b = 0; b < tree.bone_count(); ++b) {
    switch (s.mode) {
      case ScaleMode::global:
        out[b] = s.values[0];
        break;
      case ScaleMode::five:
        out[b] = s.values[tree.bones()[b].finger];
        break;
      case ScaleMode::multi:
        out[b] = s.values[b];
        break;
    }
  }
  return out;
}

FkResult forward(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree) {
  check_pose(tree, theta);
  check_scales(tree, s);

  FkResult fk;
  fk.theta = theta.theta;
  fk.bone_factors = expand_scales(s, tree);
  fk.mode = s.mode;
  fk.joints.positions.setZero(3, tree.joint_count());
  fk.frames.resize(tree.joint_count());
  fk.dof_before.resize(tree.dof_count());
  fk.dof_after.resize(tree.dof_count());
  fk.bone_before.resize(tree.bone_count());
  fk.bone_after.resize(tree.bone_count());

  auto apply_dofs = [&](int joint, Transform4& g) {
    for (int p : tree.dofs_at(joint)) {
      fk.dof_before[p] = g;
      g = g * dof_transform(tree.dofs()[p], theta.theta[p]);
      fk.dof_after[p] = g;
    }
  };

  for (int j : tree.topo_order()) {
    Transform4 g = Transform4::Identity();
    if (j == 0) {
      apply_dofs(0, g);
    } else {
      const int b = tree.bone_into(j);
      const auto& bone = tree.bones()[b];
      Transform4 rest = Transform4::Identity();
      rest.topLeftCorner<3, 3>() = tree.rest_rotation(b);
      g = fk.frames[bone.parent] * rest;
      auto apply_bone = [&] {
        fk.bone_before[b] = g;
        g = g * translation(Axis::x, fk.bone_factors[b] * bone.rest_length_mm);
        fk.bone_after[b] = g;
      };
      if (tree.segment_order() == SegmentOrder::rotate_translate) {
        apply_dofs(j, g);
        apply_bone();
      } else {
        apply_bone();
        apply_dofs(j, g);
      }
    }
    fk.frames[j] = g;
    fk.joints.positions.col(j) = g.topRightCorner<3, 1>();
  }
  return fk;
}

double loss(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree, const JointSet& target) {
  check_joints(tree, target);
  const auto fk = forward(theta, s, tree);
  return 0.5 * (fk.joints.positions - target.positions).squaredNorm();
}

std::vector<int> joints_moved_by_dof(const KinematicTree& tree, int dof) {
  const int joint = tree.dofs()[dof].joint;
  std::vector<int> out = tree.subtree(joint);
  // A rotation at the distal end of a segment leaves that joint in place, and
  // root rotations follow the root translations.
  const bool distal = joint != 0 && tree.segment_order() == SegmentOrder::translate_rotate;
  const bool root_rotation = joint == 0 && tree.dofs()[dof].kind == DofKind::rotation;
  if (distal || root_rotation) {
    out.erase(out.begin());
  }
  return out;
}

PoseJacobian pose_jacobian(const FkResult& fk, const KinematicTree& tree) {
  PoseJacobian jac = PoseJacobian::Zero(3 * tree.joint_count(), tree.dof_count());
  for (int p = 0; p < tree.dof_count(); ++p) {
    fill_column(
        jac,
        p,
        fk.dof_before[p],
        dof_derivative(tree.dofs()[p], fk.theta[p]),
        fk.dof_after[p],
        joints_moved_by_dof(tree, p),
        fk.joints);
  }
  return jac;
}

PoseJacobian pose_jacobian(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree) {
  return pose_jacobian(forward(theta, s, tree), tree);
}

Eigen::MatrixXd bone_scale_jacobian(const FkResult& fk, const KinematicTree& tree) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3 * tree.joint_count(), tree.bone_count());
  for (int b = 0; b < tree.bone_count(); ++b) {
    const auto& bone = tree.bones()[b];
    fill_column(
        jac,
        b,
        fk.bone_before[b],
        translation_derivative(Axis::x, bone.rest_length_mm),
        fk.bone_after[b],
        tree.subtree(bone.child),
        fk.joints);
  }
  return jac;
}

ScaleJacobian scale_jacobian(const FkResult& fk, const KinematicTree& tree) {
  const Eigen::MatrixXd per_bone = bone_scale_jacobian(fk, tree);
  if (fk.mode == ScaleMode::multi) {
    return per_bone;
  }
  // Chain rule through the expansion: each mode column sums the bone columns
  // that share the parameter.
  return per_bone * scale_expansion(fk.mode, tree);
}

ScaleJacobian scale_jacobian(const PoseVector& theta, const ScaleVector& s, const KinematicTree& tree) {
  return scale_jacobian(forward(theta, s, tree), tree);
}

LossGradients loss_gradients(
    const PoseVector& theta,
    const ScaleVector& s,
    const KinematicTree& tree,
    const JointSet& target) {
  check_joints(tree, target);
  const auto fk = forward(theta, s, tree);
  const Eigen::VectorXd residual = fk.joints.flat() - target.flat();
  LossGradients out;
  out.loss = 0.5 * residual.squaredNorm();
  out.theta = pose_jacobian(fk, tree).transpose() * residual;
  out.scale = scale_jacobian(fk, tree).transpose() * residual;
  return out;
}

} // namespace handfk
