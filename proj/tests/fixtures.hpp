#pragma once

// On-disk dataset fixtures: synthetic hands placed in front of a camera and
// rendered as depth splats, written in each dataset's directory layout.

#include "handfk/datasets.hpp"
#include "handfk/param_io.hpp"
#include "handfk/png_io.hpp"
#include "handfk/preproc.hpp"
#include "handfk/synth.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using namespace handfk;
namespace fs = std::filesystem;

struct Frame {
  JointSet joints;  // canonical 16, camera frame, mm
  DepthImage depth;
};

// Hands whose joints all stay inside the default cube around the palm.
inline std::vector<JointSet> camera_hands(int n, std::uint64_t seed, const Eigen::Vector3d& base) {
  const auto& tree = default_tree();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-20.0, 20.0);
  std::vector<JointSet> out;
  while (static_cast<int>(out.size()) < n) {
    auto pose = random_pose(tree, 0.6, rng);
    pose.theta.head<3>().setZero();
    const auto scales = random_scales(tree, ScaleMode::five, 0.85, 1.15, rng);
    JointSet js = forward(pose, scales, tree).joints;
    if (js.positions.cwiseAbs().maxCoeff() > 140.0) {
      continue;
    }
    const Eigen::Vector3d shift = base + Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
    js.positions.colwise() += shift;
    out.push_back(js);
  }
  return out;
}

// Spheres of radius 8 mm along every bone, nearest surface wins.
inline DepthImage render(const JointSet& joints, const CameraIntrinsics& cam, int width, int height) {
  const auto& tree = default_tree();
  DepthImage img{width, height, std::vector<float>(static_cast<std::size_t>(width) * height, 0.0f)};
  auto splat = [&](const Eigen::Vector3d& p) {
    const double radius_mm = 8.0;
    const auto c = project(p, cam);
    const int r = static_cast<int>(std::ceil(cam.fx * radius_mm / p.z()));
    for (int v = static_cast<int>(c.y()) - r; v <= static_cast<int>(c.y()) + r; ++v) {
      for (int u = static_cast<int>(c.x()) - r; u <= static_cast<int>(c.x()) + r; ++u) {
        if (u < 0 || v < 0 || u >= width || v >= height) {
          continue;
        }
        const double du = u - c.x();
        const double dv = v - c.y();
        if (du * du + dv * dv > static_cast<double>(r) * r) {
          continue;
        }
        auto& px = img.values[static_cast<std::size_t>(v) * width + u];
        const float z = static_cast<float>(std::round(p.z() - radius_mm));
        if (px == 0.0f || z < px) {
          px = z;
        }
      }
    }
  };
  for (const auto& bone : tree.bones()) {
    const Eigen::Vector3d a = joints.positions.col(bone.parent);
    const Eigen::Vector3d b = joints.positions.col(bone.child);
    for (int k = 0; k <= 8; ++k) {
      splat(a + (b - a) * (k / 8.0));
    }
  }
  return img;
}

// 10 frames over two subject directories; returns the canonical joints as
// recovered from the written labels (uvd back-projected).
inline std::vector<JointSet> write_icvl(const fs::path& dir, int frames = 10, std::uint64_t seed = 1) {
  fs::create_directories(dir);
  const auto cam = default_intrinsics(DatasetKind::icvl);
  const auto hands = camera_hands(frames, seed, Eigen::Vector3d(0, 0, 450));
  std::ofstream labels(dir / "labels.txt");
  std::vector<JointSet> recovered;
  for (int i = 0; i < frames; ++i) {
    const std::string subject = i % 2 ? "subB" : "subA";
    fs::create_directories(dir / subject);
    char name[32];
    std::snprintf(name, sizeof(name), "%s/image_%04d.png", subject.c_str(), i);
    const auto depth = render(hands[i], cam, 320, 240);
    Image<std::uint16_t> img{320, 240, 1, {}};
    for (float d : depth.values) {
      img.data.push_back(static_cast<std::uint16_t>(d));
    }
    write_png_gray16((dir / name).string(), img);
    labels << name;
    JointSet back;
    back.positions.resize(3, 16);
    for (int j = 0; j < 16; ++j) {
      const Eigen::Vector3d p = hands[i].positions.col(j);
      const auto uv = project(p, cam);
      labels << ' ' << format_number(uv.x()) << ' ' << format_number(uv.y()) << ' ' << format_number(p.z());
      back.positions.col(j) = back_project(uv.x(), uv.y(), p.z(), cam);
    }
    labels << '\n';
    recovered.push_back(back);
  }
  return recovered;
}

// Raw 36-point NYU frame carrying `hand` at the bundled-map slots; the
// remaining points are spread between the palm and the finger roots.
inline Eigen::Matrix3Xd nyu_raw(const JointSet& hand) {
  const auto map = parse_joint_map(bundled_joint_map(DatasetKind::nyu), default_tree());
  Eigen::Matrix3Xd raw(3, 36);
  for (int k = 0; k < 36; ++k) {
    raw.col(k) = 0.5 * (hand.positions.col(0) + hand.positions.col(1 + (k % 5) * 3));
  }
  for (std::size_t i = 0; i < map.size(); ++i) {
    raw.col(map[i]) = hand.positions.col(static_cast<Eigen::Index>(i));
  }
  return raw;
}

inline std::vector<JointSet> write_nyu(const fs::path& dir, int frames = 6, std::uint64_t seed = 2) {
  fs::create_directories(dir);
  const auto cam = default_intrinsics(DatasetKind::nyu);
  const auto hands = camera_hands(frames, seed, Eigen::Vector3d(0, 0, 700));
  std::ofstream labels(dir / "joints.txt");
  fs::create_directories(dir / "test");
  for (int i = 0; i < frames; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "test/depth_%07d.png", i + 1);
    const auto depth = render(hands[i], cam, 640, 480);
    Image<std::uint8_t> img{640, 480, 3, {}};
    for (float d : depth.values) {
      const auto mm = static_cast<unsigned>(d);
      img.data.push_back(0);
      img.data.push_back(static_cast<std::uint8_t>(mm >> 8));
      img.data.push_back(static_cast<std::uint8_t>(mm & 0xff));
    }
    write_png_rgb8((dir / name).string(), img);
    const auto raw = nyu_raw(hands[i]);
    labels << name;
    for (int k = 0; k < 36; ++k) {
      labels << ' ' << format_number(raw(0, k)) << ' ' << format_number(-raw(1, k)) << ' '
             << format_number(raw(2, k));
    }
    labels << '\n';
  }
  return hands;
}

inline std::vector<JointSet> write_msra(const fs::path& dir, int frames = 4, std::uint64_t seed = 3) {
  fs::create_directories(dir);
  const auto cam = default_intrinsics(DatasetKind::msra2015);
  const auto map = parse_joint_map(bundled_joint_map(DatasetKind::msra2015), default_tree());
  const auto hands = camera_hands(frames, seed, Eigen::Vector3d(0, 0, 400));
  const fs::path gesture = dir / "P0" / "5";
  fs::create_directories(gesture);
  std::ofstream labels(gesture / "joint.txt");
  labels << frames << '\n';
  for (int i = 0; i < frames; ++i) {
    Eigen::Matrix3Xd raw(3, 21);
    for (int k = 0; k < 21; ++k) {
      raw.col(k) = hands[i].positions.col(0);
    }
    for (std::size_t s = 0; s < map.size(); ++s) {
      raw.col(map[s]) = hands[i].positions.col(static_cast<Eigen::Index>(s));
    }
    for (int k = 0; k < 21; ++k) {
      labels << (k ? " " : "") << format_number(raw(0, k)) << ' ' << format_number(-raw(1, k)) << ' '
             << format_number(-raw(2, k));
    }
    labels << '\n';

    const auto depth = render(hands[i], cam, 320, 240);
    const std::int32_t left = 40, top = 20, right = 300, bottom = 230;
    char name[32];
    std::snprintf(name, sizeof(name), "%06d_depth.bin", i);
    std::ofstream bin(gesture / name, std::ios::binary);
    const std::int32_t header[6] = {320, 240, left, top, right, bottom};
    bin.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (int v = top; v < bottom; ++v) {
      for (int u = left; u < right; ++u) {
        const float d = depth.at(u, v);
        bin.write(reinterpret_cast<const char*>(&d), sizeof(d));
      }
    }
  }
  return hands;
}

} // namespace fixtures
