#include "handfk/skeleton.hpp"

#include "handfk/errors.hpp"
#include "handfk/transform.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace handfk {

namespace {

constexpr const char* kModule = "skeleton";

[[noreturn]] void fail(const std::string& message) {
  throw ValidationError(kModule, message);
}

std::string_view axis_name(Axis axis) {
  switch (axis) {
    case Axis::x:
      return "x";
    case Axis::y:
      return "y";
    case Axis::z:
      return "z";
  }
  return "?";
}

Axis parse_axis(const std::string& text, const std::string& where) {
  if (text == "x") {
    return Axis::x;
  }
  if (text == "y") {
    return Axis::y;
  }
  if (text == "z") {
    return Axis::z;
  }
  fail(where + ".axis: expected x, y or z, got '" + text + "'");
}

// Simple union-find used to confirm the bones span the joints without cycles.
class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) {
      return false;
    }
    parent_[b] = a;
    return true;
  }

 private:
  std::vector<int> parent_;
};

} // namespace

JointSet JointSet::from_flat(const Eigen::VectorXd& flat) {
  if (flat.size() % 3 != 0) {
    throw ValidationError(kModule, "flat joint vector length must be a multiple of 3");
  }
  JointSet out;
  out.positions = Eigen::Map<const Eigen::Matrix3Xd>(flat.data(), 3, flat.size() / 3);
  return out;
}

KinematicTree::KinematicTree(
    std::vector<JointSpec> joints,
    std::vector<BoneSpec> bones,
    std::vector<DofSpec> dofs,
    double scale_lo,
    double scale_hi,
    SegmentOrder order,
    TreeShape shape)
    : joints_(std::move(joints)),
      bones_(std::move(bones)),
      dofs_(std::move(dofs)),
      scale_lo_(scale_lo),
      scale_hi_(scale_hi),
      order_(order),
      shape_(shape) {
  validate_and_index();
}

void KinematicTree::validate_and_index() {
  const int n_joints = joint_count();
  if (shape_ == TreeShape::hand) {
    if (n_joints != kHandJoints) {
      fail("expected " + std::to_string(kHandJoints) + " joints, got " + std::to_string(n_joints));
    }
    if (bone_count() != kHandBones) {
      fail("expected " + std::to_string(kHandBones) + " bones, got " + std::to_string(bone_count()));
    }
    if (dof_count() != kHandDofs) {
      fail("expected " + std::to_string(kHandDofs) + " dofs, got " + std::to_string(dof_count()));
    }
  }
  if (n_joints < 1) {
    fail("tree needs at least one joint");
  }
  if (bone_count() != n_joints - 1) {
    fail(
        "expected " + std::to_string(n_joints - 1) + " bones for " + std::to_string(n_joints) +
        " joints, got " + std::to_string(bone_count()));
  }
  if (!(std::isfinite(scale_lo_) && std::isfinite(scale_hi_) && scale_lo_ > 0.0 && scale_lo_ < scale_hi_)) {
    fail("scale_bounds: need 0 < lo < hi");
  }

  for (int j = 0; j < n_joints; ++j) {
    const auto& spec = joints_[j];
    const std::string where = "joints[" + std::to_string(j) + "]";
    if (spec.name.empty()) {
      fail(where + ".name: empty");
    }
    for (int k = 0; k < j; ++k) {
      if (joints_[k].name == spec.name) {
        fail(where + ".name: duplicate '" + spec.name + "'");
      }
    }
    if (j == 0 && spec.parent.has_value()) {
      fail("joints[0].parent: the root must not have a parent");
    }
    if (j > 0) {
      if (!spec.parent.has_value()) {
        fail(where + ".parent: only joint 0 may be a root");
      }
      if (*spec.parent < 0 || *spec.parent >= n_joints || *spec.parent == j) {
        fail(where + ".parent: out of range");
      }
    }
  }

  bone_into_.assign(n_joints, -1);
  DisjointSets sets(n_joints);
  for (int b = 0; b < bone_count(); ++b) {
    const auto& bone = bones_[b];
    const std::string where = "bones[" + std::to_string(b) + "]";
    if (bone.child <= 0 || bone.child >= n_joints) {
      fail(where + ".child: out of range (the root cannot be a child)");
    }
    if (bone.parent < 0 || bone.parent >= n_joints) {
      fail(where + ".parent: out of range");
    }
    if (joints_[bone.child].parent != bone.parent) {
      fail(where + ": parent does not match joints[" + std::to_string(bone.child) + "].parent");
    }
    if (bone_into_[bone.child] != -1) {
      fail(where + ".child: joint already has an incoming bone");
    }
    if (!(std::isfinite(bone.rest_length_mm) && bone.rest_length_mm > 0.0)) {
      fail(where + ".length_mm: must be positive");
    }
    if (bone.finger < 0) {
      fail(where + ".finger: must be non-negative");
    }
    if (!bone.rest_rotation_deg.allFinite()) {
      fail(where + ".rest_rotation_deg: must be finite");
    }
    if (!sets.unite(bone.parent, bone.child)) {
      fail(where + ": bone closes a cycle");
    }
    bone_into_[bone.child] = b;
  }
  for (int j = 1; j < n_joints; ++j) {
    if (sets.find(j) != sets.find(0)) {
      fail("joints[" + std::to_string(j) + "]: not connected to the root");
    }
  }

  // Parent-before-child order by breadth-first expansion from the root.
  std::vector<std::vector<int>> children(n_joints);
  for (int j = 1; j < n_joints; ++j) {
    children[*joints_[j].parent].push_back(j);
  }
  topo_order_.clear();
  topo_order_.push_back(0);
  for (std::size_t i = 0; i < topo_order_.size(); ++i) {
    for (int c : children[topo_order_[i]]) {
      topo_order_.push_back(c);
    }
  }

  subtree_.assign(n_joints, {});
  for (int j = 0; j < n_joints; ++j) {
    for (int a = j; a != -1; a = joints_[a].parent.value_or(-1)) {
      subtree_[a].push_back(j);
    }
  }
  for (auto& s : subtree_) {
    std::sort(s.begin(), s.end());
  }

  // Fingers: ids must be contiguous from zero, each finger a single chain
  // hanging off the root.
  finger_count_ = 0;
  for (const auto& bone : bones_) {
    finger_count_ = std::max(finger_count_, bone.finger + 1);
  }
  std::vector<int> per_finger(finger_count_, 0);
  for (const auto& bone : bones_) {
    ++per_finger[bone.finger];
  }
  for (int f = 0; f < finger_count_; ++f) {
    if (per_finger[f] == 0) {
      fail("finger ids must be contiguous; finger " + std::to_string(f) + " has no bones");
    }
  }
  for (int b = 0; b < bone_count(); ++b) {
    const auto& bone = bones_[b];
    if (bone.parent != 0) {
      const int up = bone_into_[bone.parent];
      if (bones_[up].finger != bone.finger) {
        fail("bones[" + std::to_string(b) + "].finger: differs from the bone above it");
      }
    }
  }
  if (shape_ == TreeShape::hand) {
    if (finger_count_ != kHandFingers) {
      fail("expected 5 fingers, got " + std::to_string(finger_count_));
    }
    for (int f = 0; f < finger_count_; ++f) {
      if (per_finger[f] != 3) {
        fail("finger " + std::to_string(f) + ": expected 3 bones, got " + std::to_string(per_finger[f]));
      }
    }
  }

  dofs_at_.assign(n_joints, {});
  for (int p = 0; p < dof_count(); ++p) {
    const auto& dof = dofs_[p];
    const std::string where = "dofs[" + std::to_string(p) + "]";
    if (dof.joint < 0 || dof.joint >= n_joints) {
      fail(where + ".joint: out of range");
    }
    if (!(std::isfinite(dof.lo) && std::isfinite(dof.hi) && dof.lo < dof.hi)) {
      fail(where + ": need finite lo < hi");
    }
    if (dof.kind == DofKind::translation && dof.joint != 0) {
      fail(where + ": translation DoFs attach only to the root");
    }
    dofs_at_[dof.joint].push_back(p);
  }
  // Root translations must precede root rotations so the root transform is
  // Trans * Rot regardless of declaration order.
  bool seen_rotation = false;
  for (int p : dofs_at_[0]) {
    if (dofs_[p].kind == DofKind::rotation) {
      seen_rotation = true;
    } else if (seen_rotation) {
      fail("dofs[" + std::to_string(p) + "]: root translations must be declared before root rotations");
    }
  }

  rest_rotations_.clear();
  for (const auto& bone : bones_) {
    const Eigen::Vector3d rad = bone.rest_rotation_deg * (M_PI / 180.0);
    rest_rotations_.push_back(
        (rotation(Axis::x, rad.x()) * rotation(Axis::y, rad.y()) * rotation(Axis::z, rad.z()))
            .topLeftCorner<3, 3>());
  }
}

bool KinematicTree::in_subtree(int joint, int ancestor) const {
  const auto& s = subtree_[ancestor];
  return std::binary_search(s.begin(), s.end(), joint);
}

int KinematicTree::joint_index(std::string_view name) const {
  for (int j = 0; j < joint_count(); ++j) {
    if (joints_[j].name == name) {
      return j;
    }
  }
  return -1;
}

int KinematicTree::scale_count(ScaleMode mode) const {
  switch (mode) {
    case ScaleMode::global:
      return 1;
    case ScaleMode::five:
      return finger_count_;
    case ScaleMode::multi:
      return bone_count();
  }
  return 0;
}

KinematicTree KinematicTree::with_rest_lengths(std::span<const double> lengths_mm) const {
  if (static_cast<int>(lengths_mm.size()) != bone_count()) {
    fail("expected " + std::to_string(bone_count()) + " rest lengths");
  }
  auto bones = bones_;
  for (int b = 0; b < bone_count(); ++b) {
    bones[b].rest_length_mm = lengths_mm[b];
  }
  return KinematicTree(joints_, std::move(bones), dofs_, scale_lo_, scale_hi_, order_, shape_);
}

// ---------------------------------------------------------------------------
// Config (de)serialization

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(kModule, where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) {
    throw ParseError(kModule, where + "." + key + ": expected a number");
  }
  return v.get<double>();
}

int resolve_joint(
    const json& ref,
    const std::vector<JointSpec>& joints,
    const std::string& where) {
  if (ref.is_number_integer()) {
    return ref.get<int>();
  }
  if (ref.is_string()) {
    const auto name = ref.get<std::string>();
    for (int j = 0; j < static_cast<int>(joints.size()); ++j) {
      if (joints[j].name == name) {
        return j;
      }
    }
    throw ValidationError(kModule, where + ": unknown joint '" + name + "'");
  }
  throw ParseError(kModule, where + ": expected a joint name or index");
}

KinematicTree tree_from_json(const json& config, TreeShape shape) {
  if (!config.is_object()) {
    throw ParseError(kModule, "config root must be an object");
  }
  const auto& joints_json = require(config, "joints", "config");
  const auto& bones_json = require(config, "bones", "config");
  const auto& dofs_json = require(config, "dofs", "config");
  if (!joints_json.is_array() || !bones_json.is_array() || !dofs_json.is_array()) {
    throw ParseError(kModule, "joints, bones and dofs must be lists");
  }

  std::vector<JointSpec> joints;
  for (std::size_t j = 0; j < joints_json.size(); ++j) {
    const std::string where = "joints[" + std::to_string(j) + "]";
    const auto& name = require(joints_json[j], "name", where);
    if (!name.is_string()) {
      throw ParseError(kModule, where + ".name: expected a string");
    }
    joints.push_back({name.get<std::string>(), std::nullopt});
  }
  for (std::size_t j = 0; j < joints_json.size(); ++j) {
    const std::string where = "joints[" + std::to_string(j) + "].parent";
    if (joints_json[j].contains("parent") && !joints_json[j].at("parent").is_null()) {
      joints[j].parent = resolve_joint(joints_json[j].at("parent"), joints, where);
    }
  }

  std::vector<BoneSpec> bones;
  for (std::size_t b = 0; b < bones_json.size(); ++b) {
    const std::string where = "bones[" + std::to_string(b) + "]";
    const auto& item = bones_json[b];
    BoneSpec bone;
    bone.parent = resolve_joint(require(item, "parent", where), joints, where + ".parent");
    bone.child = resolve_joint(require(item, "child", where), joints, where + ".child");
    bone.rest_length_mm = require_number(item, "length_mm", where);
    const auto& finger = require(item, "finger", where);
    if (!finger.is_number_integer()) {
      throw ParseError(kModule, where + ".finger: expected an integer");
    }
    bone.finger = finger.get<int>();
    if (item.contains("rest_rotation_deg")) {
      const auto& r = item.at("rest_rotation_deg");
      if (!r.is_array() || r.size() != 3 || !r[0].is_number() || !r[1].is_number() || !r[2].is_number()) {
        throw ParseError(kModule, where + ".rest_rotation_deg: expected three numbers");
      }
      bone.rest_rotation_deg = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    }
    bones.push_back(bone);
  }

  std::vector<DofSpec> dofs;
  for (std::size_t p = 0; p < dofs_json.size(); ++p) {
    const std::string where = "dofs[" + std::to_string(p) + "]";
    const auto& item = dofs_json[p];
    DofSpec dof;
    dof.joint = resolve_joint(require(item, "joint", where), joints, where + ".joint");
    const auto& kind = require(item, "kind", where);
    if (kind == "rotation") {
      dof.kind = DofKind::rotation;
    } else if (kind == "translation") {
      dof.kind = DofKind::translation;
    } else {
      throw ParseError(kModule, where + ".kind: expected rotation or translation");
    }
    const auto& axis = require(item, "axis", where);
    if (!axis.is_string()) {
      throw ParseError(kModule, where + ".axis: expected a string");
    }
    dof.axis = parse_axis(axis.get<std::string>(), where);
    dof.lo = require_number(item, "lo", where);
    dof.hi = require_number(item, "hi", where);
    dofs.push_back(dof);
  }

  double scale_lo = 0.5;
  double scale_hi = 2.0;
  if (config.contains("scale_bounds")) {
    const auto& sb = config.at("scale_bounds");
    if (!sb.is_array() || sb.size() != 2 || !sb[0].is_number() || !sb[1].is_number()) {
      throw ParseError(kModule, "scale_bounds: expected [lo, hi]");
    }
    scale_lo = sb[0].get<double>();
    scale_hi = sb[1].get<double>();
  }

  SegmentOrder order = SegmentOrder::rotate_translate;
  if (config.contains("segment_order")) {
    const auto& so = config.at("segment_order");
    if (so == "rotate_translate") {
      order = SegmentOrder::rotate_translate;
    } else if (so == "translate_rotate") {
      order = SegmentOrder::translate_rotate;
    } else {
      throw ParseError(kModule, "segment_order: expected rotate_translate or translate_rotate");
    }
  }

  return KinematicTree(
      std::move(joints), std::move(bones), std::move(dofs), scale_lo, scale_hi, order, shape);
}

} // namespace

std::string KinematicTree::to_config_text() const {
  json out;
  out["segment_order"] = order_ == SegmentOrder::rotate_translate ? "rotate_translate" : "translate_rotate";
  out["scale_bounds"] = {scale_lo_, scale_hi_};
  json joints = json::array();
  for (const auto& j : joints_) {
    joints.push_back({{"name", j.name}, {"parent", j.parent ? json(joints_[*j.parent].name) : json(nullptr)}});
  }
  json bones = json::array();
  for (const auto& b : bones_) {
    json item = {
        {"parent", joints_[b.parent].name},
        {"child", joints_[b.child].name},
        {"length_mm", b.rest_length_mm},
        {"finger", b.finger}};
    if (!b.rest_rotation_deg.isZero(0.0)) {
      item["rest_rotation_deg"] = {b.rest_rotation_deg.x(), b.rest_rotation_deg.y(), b.rest_rotation_deg.z()};
    }
    bones.push_back(std::move(item));
  }
  json dofs = json::array();
  for (const auto& d : dofs_) {
    dofs.push_back(
        {{"joint", joints_[d.joint].name},
         {"kind", d.kind == DofKind::rotation ? "rotation" : "translation"},
         {"axis", std::string(axis_name(d.axis))},
         {"lo", d.lo},
         {"hi", d.hi}});
  }
  out["joints"] = std::move(joints);
  out["bones"] = std::move(bones);
  out["dofs"] = std::move(dofs);
  return out.dump(2) + "\n";
}

KinematicTree load_tree(std::string_view config_text, TreeShape shape) {
  json config;
  try {
    config = json::parse(config_text.begin(), config_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(kModule, std::string("malformed tree config: ") + e.what());
  }
  return tree_from_json(config, shape);
}

KinematicTree load_tree_file(const std::string& path, TreeShape shape) {
  std::ifstream in(path);
  if (!in) {
    throw RuntimeFailure(kModule, "cannot open tree config '" + path + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_tree(buffer.str(), shape);
}

const KinematicTree& default_tree() {
  static const KinematicTree tree = load_tree(default_tree_config());
  return tree;
}

// ---------------------------------------------------------------------------

KinematicTree calibrate_rest_lengths(const KinematicTree& tree, std::span<const JointSet> annotations) {
  if (annotations.empty()) {
    throw ValidationError(kModule, "calibration needs at least one annotation");
  }
  std::vector<double> sums(tree.bone_count(), 0.0);
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    if (a.size() != tree.joint_count()) {
      throw ValidationError(
          kModule,
          "annotation " + std::to_string(i) + ": expected " + std::to_string(tree.joint_count()) + " joints");
    }
    if (!a.positions.allFinite()) {
      throw ValidationError(kModule, "annotation " + std::to_string(i) + ": non-finite coordinates");
    }
    for (int b = 0; b < tree.bone_count(); ++b) {
      const auto& bone = tree.bones()[b];
      sums[b] += (a.positions.col(bone.child) - a.positions.col(bone.parent)).norm();
    }
  }
  for (double& s : sums) {
    s /= static_cast<double>(annotations.size());
  }
  return tree.with_rest_lengths(sums);
}

JointSet rest_pose_joints(const KinematicTree& tree) {
  // Walks the tree composing only the fixed rest orientation and the unscaled
  // bone translation of each segment.
  std::vector<Transform4> global(tree.joint_count(), Transform4::Identity());
  JointSet out;
  out.positions.setZero(3, tree.joint_count());
  for (int j : tree.topo_order()) {
    if (j == 0) {
      continue;
    }
    const int b = tree.bone_into(j);
    const auto& bone = tree.bones()[b];
    Transform4 rest = Transform4::Identity();
    rest.topLeftCorner<3, 3>() = tree.rest_rotation(b);
    global[j] = global[bone.parent] * rest * translation(Axis::x, bone.rest_length_mm);
    out.positions.col(j) = global[j].topRightCorner<3, 1>();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::global:
      return "global";
    case ScaleMode::five:
      return "five";
    case ScaleMode::multi:
      return "multi";
  }
  return "?";
}

ScaleMode parse_scale_mode(std::string_view text) {
  if (text == "global") {
    return ScaleMode::global;
  }
  if (text == "five") {
    return ScaleMode::five;
  }
  if (text == "multi") {
    return ScaleMode::multi;
  }
  throw ParseError(kModule, "unknown scale mode '" + std::string(text) + "' (expected global, five or multi)");
}

PoseVector zero_pose(const KinematicTree& tree) {
  return {Eigen::VectorXd::Zero(tree.dof_count())};
}

ScaleVector unit_scales(const KinematicTree& tree, ScaleMode mode) {
  return {mode, Eigen::VectorXd::Ones(tree.scale_count(mode))};
}

void check_pose(const KinematicTree& tree, const PoseVector& pose) {
  if (pose.theta.size() != tree.dof_count()) {
    fail("pose: expected " + std::to_string(tree.dof_count()) + " values, got " + std::to_string(pose.theta.size()));
  }
  for (int p = 0; p < tree.dof_count(); ++p) {
    const double v = pose.theta[p];
    const auto& dof = tree.dofs()[p];
    if (!std::isfinite(v) || v < dof.lo || v > dof.hi) {
      std::ostringstream msg;
      msg << "pose[" << p << "] = " << v << " outside [" << dof.lo << ", " << dof.hi << "]";
      fail(msg.str());
    }
  }
}

void check_scales(const KinematicTree& tree, const ScaleVector& scales) {
  const int k = tree.scale_count(scales.mode);
  if (scales.values.size() != k) {
    fail(
        "scales: mode " + std::string(to_string(scales.mode)) + " expects " + std::to_string(k) + " values, got " +
        std::to_string(scales.values.size()));
  }
  for (int l = 0; l < k; ++l) {
    const double v = scales.values[l];
    if (!std::isfinite(v) || v < tree.scale_lo() || v > tree.scale_hi()) {
      std::ostringstream msg;
      msg << "scale[" << l << "] = " << v << " outside [" << tree.scale_lo() << ", " << tree.scale_hi() << "]";
      fail(msg.str());
    }
  }
}

void check_joints(const KinematicTree& tree, const JointSet& joints) {
  if (joints.size() != tree.joint_count()) {
    fail("joints: expected " + std::to_string(tree.joint_count()) + ", got " + std::to_string(joints.size()));
  }
  if (!joints.positions.allFinite()) {
    fail("joints: non-finite coordinates");
  }
}

PoseVector clamp_pose(const KinematicTree& tree, PoseVector pose) {
  for (int p = 0; p < tree.dof_count(); ++p) {
    pose.theta[p] = std::clamp(pose.theta[p], tree.dofs()[p].lo, tree.dofs()[p].hi);
  }
  return pose;
}

ScaleVector clamp_scales(const KinematicTree& tree, ScaleVector scales) {
  for (Eigen::Index l = 0; l < scales.values.size(); ++l) {
    scales.values[l] = std::clamp(scales.values[l], tree.scale_lo(), tree.scale_hi());
  }
  return scales;
}

} // namespace handfk
