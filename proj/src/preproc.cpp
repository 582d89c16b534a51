#include "handfk/preproc.hpp"

#include "handfk/errors.hpp"

#include <cmath>
#include <sstream>

namespace handfk {

namespace {
constexpr const char* kModule = "preproc";
}

void check_intrinsics(const CameraIntrinsics& cam) {
  if (!(cam.fx > 0.0 && cam.fy > 0.0)) {
    throw ValidationError(kModule, "intrinsics: fx and fy must be positive");
  }
  if (!(cam.depth_unit_to_mm > 0.0)) {
    throw ValidationError(kModule, "intrinsics: depth_unit_to_mm must be positive");
  }
  if (!std::isfinite(cam.cx) || !std::isfinite(cam.cy)) {
    throw ValidationError(kModule, "intrinsics: principal point must be finite");
  }
}

Eigen::Vector2d project(const Eigen::Vector3d& p, const CameraIntrinsics& cam) {
  return {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
}

Eigen::Vector3d back_project(double u, double v, double depth_mm, const CameraIntrinsics& cam) {
  return {(u - cam.cx) * depth_mm / cam.fx, (v - cam.cy) * depth_mm / cam.fy, depth_mm};
}

void check_crop(const CropSpec& crop) {
  if (!(crop.cube_side_mm > 0.0) || !std::isfinite(crop.cube_side_mm)) {
    throw ValidationError(kModule, "crop: cube_side_mm must be positive");
  }
  if (crop.output_size <= 0) {
    throw ValidationError(kModule, "crop: output_size must be positive");
  }
}

JointMap parse_joint_map(std::string_view text, const KinematicTree& tree) {
  JointMap map;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string name;
    if (!(fields >> name)) {
      continue;
    }
    long long index = 0;
    std::string extra;
    if (!(fields >> index) || (fields >> extra)) {
      throw ParseError(kModule, "joint map line " + std::to_string(lineno) + ": expected '<name> <index>'");
    }
    const int slot = static_cast<int>(map.size());
    if (slot >= tree.joint_count()) {
      throw ValidationError(kModule, "joint map line " + std::to_string(lineno) + ": more entries than tree joints");
    }
    if (name != tree.joints()[slot].name) {
      throw ValidationError(
          kModule,
          "joint map line " + std::to_string(lineno) + ": expected joint '" + tree.joints()[slot].name + "', got '" +
              name + "'");
    }
    if (index < 0) {
      throw ValidationError(kModule, "joint map line " + std::to_string(lineno) + ": negative index");
    }
    map.push_back(static_cast<int>(index));
  }
  if (static_cast<int>(map.size()) != tree.joint_count()) {
    throw ValidationError(
        kModule,
        "joint map covers " + std::to_string(map.size()) + " of " + std::to_string(tree.joint_count()) + " joints");
  }
  return map;
}

JointSet remap_joints(const Eigen::Matrix3Xd& raw, const JointMap& map) {
  JointSet out;
  out.positions.resize(3, static_cast<Eigen::Index>(map.size()));
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] < 0 || map[i] >= raw.cols()) {
      throw ValidationError(
          kModule,
          "joint map slot " + std::to_string(i) + " references raw joint " + std::to_string(map[i]) + " of a " +
              std::to_string(raw.cols()) + "-joint frame");
    }
    out.positions.col(static_cast<Eigen::Index>(i)) = raw.col(map[i]);
  }
  return out;
}

JointSet normalize_joints(const JointSet& joints_mm, const Eigen::Vector3d& palm, const CropSpec& crop) {
  const double half = 0.5 * crop.cube_side_mm;
  JointSet out;
  out.positions = ((joints_mm.positions.colwise() - palm) / half).cwiseMax(-1.0).cwiseMin(1.0);
  return out;
}

Sample crop_normalize(
    const DepthImage& depth,
    const CameraIntrinsics& cam,
    const Eigen::Vector3d& palm,
    const JointSet& joints_mm,
    const CropSpec& crop,
    SourceTag tag) {
  check_intrinsics(cam);
  check_crop(crop);
  if (!palm.allFinite() || !(palm.z() > 0.0)) {
    throw ValidationError(kModule, "palm center depth is missing or zero");
  }
  if (depth.values.size() != static_cast<std::size_t>(depth.width) * depth.height) {
    throw ValidationError(kModule, "depth image size does not match its dimensions");
  }

  const double half = 0.5 * crop.cube_side_mm;
  const int n = crop.output_size;
  const Eigen::Vector2d center = project(palm, cam);
  const double half_u = cam.fx * half / palm.z();
  const double half_v = cam.fy * half / palm.z();

  Sample s;
  s.size = n;
  s.depth.assign(static_cast<std::size_t>(n) * n, 1.0f);
  for (int row = 0; row < n; ++row) {
    const double v = center.y() - half_v + (row + 0.5) * (2.0 * half_v / n);
    const long sv = std::lround(v);
    if (sv < 0 || sv >= depth.height) {
      continue;
    }
    for (int col = 0; col < n; ++col) {
      const double u = center.x() - half_u + (col + 0.5) * (2.0 * half_u / n);
      const long su = std::lround(u);
      if (su < 0 || su >= depth.width) {
        continue;
      }
      const double raw = depth.at(static_cast<int>(su), static_cast<int>(sv));
      if (!(raw > 0.0) || !std::isfinite(raw)) {
        continue;
      }
      const double d = (raw * cam.depth_unit_to_mm - palm.z()) / half;
      if (d < -1.0 || d > 1.0) {
        continue;
      }
      s.depth[static_cast<std::size_t>(row) * n + col] = static_cast<float>(d);
    }
  }
  s.joints_norm = normalize_joints(joints_mm, palm, crop);
  s.palm_center_mm = palm;
  s.tag = std::move(tag);
  return s;
}

JointSet denormalize(const Sample& sample, const CropSpec& crop) {
  const double half = 0.5 * crop.cube_side_mm;
  JointSet out;
  out.positions = (sample.joints_norm.positions * half).colwise() + sample.palm_center_mm;
  return out;
}

bool sample_in_range(const Sample& sample) {
  if (sample.depth.size() != static_cast<std::size_t>(sample.size) * sample.size) {
    return false;
  }
  for (float d : sample.depth) {
    if (!(d >= -1.0f && d <= 1.0f)) {
      return false;
    }
  }
  const auto& j = sample.joints_norm.positions;
  if (j.size() == 0) {
    return true;
  }
  return j.allFinite() && j.maxCoeff() <= 1.0 && j.minCoeff() >= -1.0;
}

} // namespace handfk
