#pragma once

#include "handfk/skeleton.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace handfk {

/// Pinhole camera. Image x grows with u (right), y with v (down), z is depth.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double depth_unit_to_mm = 1.0;
};

void check_intrinsics(const CameraIntrinsics& cam);

Eigen::Vector2d project(const Eigen::Vector3d& point_mm, const CameraIntrinsics& cam);
Eigen::Vector3d back_project(double u, double v, double depth_mm, const CameraIntrinsics& cam);

struct CropSpec {
  double cube_side_mm = 300.0;
  int output_size = 128;
};

void check_crop(const CropSpec& crop);

/// Raw depth frame in camera units, row-major; 0 marks a missing reading.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int u, int v) const {
    return values[static_cast<std::size_t>(v) * width + u];
  }
};

struct SourceTag {
  std::string dataset;
  std::string subject;
  std::string frame;
};

struct Sample {
  // output_size x output_size, row-major, every value in [-1, 1].
  std::vector<float> depth;
  int size = 0;
  JointSet joints_norm;
  Eigen::Vector3d palm_center_mm = Eigen::Vector3d::Zero();
  SourceTag tag;
};

/// Output slot i takes raw joint map[i].
using JointMap = std::vector<int>;

/// Parses "<joint name> <raw index>" lines ('#' starts a comment). Names must
/// list the tree joints in order.
JointMap parse_joint_map(std::string_view text, const KinematicTree& tree);

JointSet remap_joints(const Eigen::Matrix3Xd& raw, const JointMap& map);

/// Crops a palm-centered cube out of `depth` and normalizes depth and joints
/// to [-1, 1]. The u,v window is the projection of the cube's front face at
/// palm depth, sampled by nearest neighbour. Pixels that are missing, outside
/// the frame or outside the cube's depth slab become +1.
Sample crop_normalize(
    const DepthImage& depth,
    const CameraIntrinsics& cam,
    const Eigen::Vector3d& palm_center_mm,
    const JointSet& joints_mm,
    const CropSpec& crop,
    SourceTag tag = {});

/// Joint-space part of crop_normalize (the same affine map and clamp).
JointSet normalize_joints(const JointSet& joints_mm, const Eigen::Vector3d& palm_center_mm, const CropSpec& crop);

JointSet denormalize(const Sample& sample, const CropSpec& crop);

bool sample_in_range(const Sample& sample);

} // namespace handfk
