#include "doctest.h"
#include "support.hpp"

#include "handfk/errors.hpp"
#include "handfk/synth.hpp"

#include <limits>

using namespace handfk;
using namespace testing;

TEST_CASE("same seed gives bit-identical samples") {
  const auto& tree = default_tree();
  SynthSpec spec;
  spec.n_samples = 50;
  spec.seed = 42;
  spec.noise_sigma_mm = 1.5;
  const auto a = generate(spec, tree);
  const auto b = generate(spec, tree);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pose.theta == b[i].pose.theta);
    CHECK(a[i].scales.values == b[i].scales.values);
    CHECK(a[i].joints.positions == b[i].joints.positions);
  }
  spec.seed = 43;
  CHECK(generate(spec, tree)[0].pose.theta != a[0].pose.theta);
}

TEST_CASE("noiseless samples conserve bone lengths") {
  const auto& tree = default_tree();
  for (auto mode : {ScaleMode::global, ScaleMode::five, ScaleMode::multi}) {
    SynthSpec spec;
    spec.n_samples = 100;
    spec.mode = mode;
    spec.seed = 3;
    for (const auto& s : generate(spec, tree)) {
      CHECK(s.joints.positions == s.clean.positions);
      const auto factors = expand_scales(s.scales, tree);
      for (int b = 0; b < tree.bone_count(); ++b) {
        const auto& bone = tree.bones()[b];
        const double len = (s.joints.positions.col(bone.child) - s.joints.positions.col(bone.parent)).norm();
        CHECK(rel_diff(len, factors[b] * bone.rest_length_mm) < 1e-9);
      }
    }
  }
}

TEST_CASE("samples respect the margin and scale range") {
  const auto& tree = default_tree();
  SynthSpec spec;
  spec.n_samples = 200;
  spec.margin = 0.5;
  spec.scale_lo = 0.9;
  spec.scale_hi = 1.1;
  for (const auto& s : generate(spec, tree)) {
    for (int p = 0; p < tree.dof_count(); ++p) {
      const auto& d = tree.dofs()[p];
      const double mid = 0.5 * (d.lo + d.hi);
      CHECK(std::abs(s.pose.theta[p] - mid) <= 0.25 * (d.hi - d.lo));
    }
    CHECK(s.scales.values.minCoeff() >= 0.9);
    CHECK(s.scales.values.maxCoeff() <= 1.1);
  }
}

TEST_CASE("noise has the requested spread") {
  const auto& tree = default_tree();
  SynthSpec spec;
  spec.n_samples = 1000;
  spec.noise_sigma_mm = 2.0;
  spec.seed = 9;
  double sum = 0.0;
  double sq = 0.0;
  long n = 0;
  for (const auto& s : generate(spec, tree)) {
    const Eigen::Matrix3Xd r = s.joints.positions - s.clean.positions;
    sum += r.sum();
    sq += r.squaredNorm();
    n += r.size();
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(sd >= 1.8);
  CHECK(sd <= 2.2);
  CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("spec validation") {
  const auto& tree = default_tree();
  SynthSpec spec;
  spec.margin = 0.0;
  CHECK_THROWS_AS(generate(spec, tree), ValidationError);
  spec.margin = 1.2;
  CHECK_THROWS_AS(generate(spec, tree), ValidationError);
  spec = {};
  spec.noise_sigma_mm = -1.0;
  CHECK_THROWS_AS(generate(spec, tree), ValidationError);
  spec = {};
  spec.scale_lo = 1.3;
  spec.scale_hi = 1.2;
  CHECK_THROWS_AS(generate(spec, tree), ValidationError);
}

TEST_CASE("fd_jacobian refuses points near a limit") {
  const auto& tree = default_tree();
  auto pose = zero_pose(tree);
  pose.theta[7] = tree.dofs()[7].hi - 1e-4;
  CHECK_THROWS_AS(fd_jacobian(pose, unit_scales(tree, ScaleMode::five), tree), ValidationError);
  auto s = unit_scales(tree, ScaleMode::five);
  s.values[1] = tree.scale_lo() + 1e-4;
  CHECK_THROWS_AS(fd_jacobian(zero_pose(tree), s, tree), ValidationError);
  CHECK_NOTHROW(fd_jacobian(zero_pose(tree), unit_scales(tree, ScaleMode::five), tree));
}

TEST_CASE("fd translation columns are unit vectors and sparsity is respected") {
  const auto& tree = default_tree();
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pose = draw_pose(tree, rng);
    const auto s = draw_scales(tree, ScaleMode::multi, rng);
    const auto fd = fd_jacobian(pose, s, tree);
    // (x + h) - (x - h) carries one ulp of x, divided by the step
    const double reach = forward(pose, s, tree).joints.positions.cwiseAbs().maxCoeff();
    const double roundoff = 8.0 * std::numeric_limits<double>::epsilon() * reach / 1e-3;
    for (int axis = 0; axis < 3; ++axis) {
      for (int n = 0; n < 16; ++n) {
        CHECK((fd.pose.block(3 * n, axis, 3, 1) - Eigen::Vector3d::Unit(axis)).norm() <= roundoff);
      }
    }
    const auto exact = pose_jacobian(pose, s, tree);
    for (int r = 0; r < exact.rows(); ++r) {
      for (int c = 0; c < exact.cols(); ++c) {
        if (exact(r, c) == 0.0) {
          CHECK(std::abs(fd.pose(r, c)) <= 1e-12);
        }
      }
    }
    const auto exact_s = scale_jacobian(pose, s, tree);
    for (int r = 0; r < exact_s.rows(); ++r) {
      for (int c = 0; c < exact_s.cols(); ++c) {
        if (exact_s(r, c) == 0.0) {
          CHECK(std::abs(fd.scale(r, c)) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("oracle flags a corrupted Jacobian") {
  const auto& tree = default_tree();
  std::mt19937_64 rng(22);
  const auto pose = draw_pose(tree, rng);
  const auto s = draw_scales(tree, ScaleMode::five, rng);
  const auto fd = fd_jacobian(pose, s, tree);
  auto jac = pose_jacobian(pose, s, tree);
  CHECK(max_relative_error(jac, fd.pose, 1e-9) <= 1e-6);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  jac.cwiseAbs().maxCoeff(&r, &c);
  jac(r, c) *= 1.0 + 1e-5;
  CHECK(max_relative_error(jac, fd.pose, 1e-9) > 1e-6);
}

TEST_CASE("max_relative_error definition") {
  Eigen::MatrixXd a(1, 3);
  Eigen::MatrixXd b(1, 3);
  a << 1.0, 1e-12, 4.0;
  b << 1.1, 0.0, 4.0;
  CHECK(max_relative_error(a, b, 1e-9) == doctest::Approx(0.1 / 1.1).epsilon(1e-14));
  b(0, 0) = 1.0;
  CHECK(max_relative_error(a, b, 1e-9) == 0.0);
  CHECK(max_relative_error(a, b, 0.0) == 1.0);
  b(0, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK(std::isinf(max_relative_error(a, b, 1e-9)));
  CHECK_THROWS_AS(max_relative_error(a, Eigen::MatrixXd(2, 3), 1e-9), ValidationError);
}
