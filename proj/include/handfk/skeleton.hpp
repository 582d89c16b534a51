#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handfk {

enum class Axis { x, y, z };
enum class DofKind { rotation, translation };

/// Order of the two variable factors inside one bone segment.
///
/// rotate_translate: the segment rotates about its proximal joint and then
/// translates along the (scaled) bone, so a DoF attached to joint c moves c
/// and its subtree. translate_rotate: the segment first translates to the
/// distal joint and rotates there, so a DoF attached to joint c only moves
/// the strict descendants of c.
enum class SegmentOrder { rotate_translate, translate_rotate };

enum class ScaleMode { global, five, multi };

/// Checks applied on top of the structural tree checks. `hand` requires the
/// 16-joint / 15-bone / 21-DoF / 5-finger layout; `generic` accepts any tree
/// (used for small test chains).
enum class TreeShape { hand, generic };

inline constexpr int kHandJoints = 16;
inline constexpr int kHandBones = 15;
inline constexpr int kHandDofs = 21;
inline constexpr int kHandFingers = 5;

struct JointSpec {
  std::string name;
  std::optional<int> parent;
};

struct BoneSpec {
  int parent = 0;
  int child = 0;
  double rest_length_mm = 0.0;
  int finger = 0;
  // Fixed orientation of the segment frame relative to the parent frame,
  // XYZ Euler angles in degrees (R = Rx * Ry * Rz). Not a learnable parameter.
  Eigen::Vector3d rest_rotation_deg = Eigen::Vector3d::Zero();
};

struct DofSpec {
  int joint = 0;
  DofKind kind = DofKind::rotation;
  Axis axis = Axis::z;
  double lo = 0.0;
  double hi = 0.0;
};

struct PoseVector {
  Eigen::VectorXd theta;
};

struct ScaleVector {
  ScaleMode mode = ScaleMode::multi;
  Eigen::VectorXd values;
};

/// Joint positions in mm, one column per joint, ordered like the tree joints.
struct JointSet {
  Eigen::Matrix3Xd positions;

  int size() const {
    return static_cast<int>(positions.cols());
  }
  /// Coordinates flattened as (x0, y0, z0, x1, ...).
  Eigen::VectorXd flat() const {
    return Eigen::Map<const Eigen::VectorXd>(positions.data(), positions.size());
  }
  static JointSet from_flat(const Eigen::VectorXd& flat);
};

class KinematicTree {
 public:
  KinematicTree(
      std::vector<JointSpec> joints,
      std::vector<BoneSpec> bones,
      std::vector<DofSpec> dofs,
      double scale_lo,
      double scale_hi,
      SegmentOrder order,
      TreeShape shape = TreeShape::hand);

  /// Config document (JSON) that load_tree() reads back into an equal tree.
  std::string to_config_text() const;

  const std::vector<JointSpec>& joints() const {
    return joints_;
  }
  const std::vector<BoneSpec>& bones() const {
    return bones_;
  }
  const std::vector<DofSpec>& dofs() const {
    return dofs_;
  }
  int joint_count() const {
    return static_cast<int>(joints_.size());
  }
  int bone_count() const {
    return static_cast<int>(bones_.size());
  }
  int dof_count() const {
    return static_cast<int>(dofs_.size());
  }
  int finger_count() const {
    return finger_count_;
  }
  double scale_lo() const {
    return scale_lo_;
  }
  double scale_hi() const {
    return scale_hi_;
  }
  SegmentOrder segment_order() const {
    return order_;
  }
  TreeShape shape() const {
    return shape_;
  }

  /// Index of the bone whose child is `joint`; -1 for the root.
  int bone_into(int joint) const {
    return bone_into_[joint];
  }
  /// Joints in parent-before-child order, starting at the root.
  const std::vector<int>& topo_order() const {
    return topo_order_;
  }
  /// `joint` followed by all of its descendants.
  const std::vector<int>& subtree(int joint) const {
    return subtree_[joint];
  }
  bool in_subtree(int joint, int ancestor) const;
  /// DoF indices attached to `joint`, in declaration order.
  const std::vector<int>& dofs_at(int joint) const {
    return dofs_at_[joint];
  }
  const Eigen::Matrix3d& rest_rotation(int bone) const {
    return rest_rotations_[bone];
  }

  int joint_index(std::string_view name) const;

  /// Number of scale parameters for a mode (1, finger count, bone count).
  int scale_count(ScaleMode mode) const;

  KinematicTree with_rest_lengths(std::span<const double> lengths_mm) const;

 private:
  void validate_and_index();

  std::vector<JointSpec> joints_;
  std::vector<BoneSpec> bones_;
  std::vector<DofSpec> dofs_;
  double scale_lo_;
  double scale_hi_;
  SegmentOrder order_;
  TreeShape shape_;

  int finger_count_ = 0;
  std::vector<int> bone_into_;
  std::vector<int> topo_order_;
  std::vector<std::vector<int>> subtree_;
  std::vector<std::vector<int>> dofs_at_;
  std::vector<Eigen::Matrix3d> rest_rotations_;
};

/// Parses and validates a tree config document (JSON text).
KinematicTree load_tree(std::string_view config_text, TreeShape shape = TreeShape::hand);
KinematicTree load_tree_file(const std::string& path, TreeShape shape = TreeShape::hand);

/// The bundled default hand skeleton.
const KinematicTree& default_tree();
std::string_view default_tree_config();

/// Rest lengths set to the mean measured bone length over the annotations.
KinematicTree calibrate_rest_lengths(const KinematicTree& tree, std::span<const JointSet> annotations);

/// Joint positions with every pose parameter zero and every scale one.
JointSet rest_pose_joints(const KinematicTree& tree);

// Parameter helpers shared by every module.
std::string_view to_string(ScaleMode mode);
ScaleMode parse_scale_mode(std::string_view text);

PoseVector zero_pose(const KinematicTree& tree);
ScaleVector unit_scales(const KinematicTree& tree, ScaleMode mode);

/// Throws ValidationError naming the first offending component.
void check_pose(const KinematicTree& tree, const PoseVector& pose);
void check_scales(const KinematicTree& tree, const ScaleVector& scales);
void check_joints(const KinematicTree& tree, const JointSet& joints);

PoseVector clamp_pose(const KinematicTree& tree, PoseVector pose);
ScaleVector clamp_scales(const KinematicTree& tree, ScaleVector scales);

} // namespace handfk
