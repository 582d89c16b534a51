#pragma once

#include "handfk/fk.hpp"
#include "handfk/skeleton.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace handfk;

// Straight chain j0 -> j1 -> ... with one z rotation per listed joint.
inline KinematicTree chain_tree(
    const std::vector<double>& lengths,
    SegmentOrder order,
    const std::vector<int>& dof_joints) {
  std::vector<JointSpec> joints{{"j0", std::nullopt}};
  std::vector<BoneSpec> bones;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    joints.push_back({"j" + std::to_string(i + 1), static_cast<int>(i)});
    BoneSpec b;
    b.parent = static_cast<int>(i);
    b.child = static_cast<int>(i + 1);
    b.rest_length_mm = lengths[i];
    bones.push_back(b);
  }
  std::vector<DofSpec> dofs;
  for (int j : dof_joints) {
    dofs.push_back({j, DofKind::rotation, Axis::z, -M_PI, M_PI});
  }
  return KinematicTree(joints, bones, dofs, 0.5, 2.0, order, TreeShape::generic);
}

// Uniform draw inside every DoF interval shrunk about its midpoint.
inline PoseVector draw_pose(const KinematicTree& tree, std::mt19937_64& rng, double margin = 0.8) {
  PoseVector p = zero_pose(tree);
  for (int i = 0; i < tree.dof_count(); ++i) {
    const auto& d = tree.dofs()[i];
    const double mid = 0.5 * (d.lo + d.hi);
    const double half = 0.5 * margin * (d.hi - d.lo);
    p.theta[i] = std::uniform_real_distribution<double>(mid - half, mid + half)(rng);
  }
  return p;
}

inline ScaleVector draw_scales(
    const KinematicTree& tree, ScaleMode mode, std::mt19937_64& rng, double lo = 0.6, double hi = 1.8) {
  ScaleVector s = unit_scales(tree, mode);
  for (Eigen::Index i = 0; i < s.values.size(); ++i) {
    s.values[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return s;
}

inline JointSet draw_joints(int n, std::mt19937_64& rng, double spread = 100.0) {
  JointSet js;
  js.positions.resize(3, n);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < 3; ++k) {
      js.positions(k, j) = u(rng);
    }
  }
  return js;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("handfk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace testing
