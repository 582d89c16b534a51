#include "handfk/synth.hpp"

#include "handfk/errors.hpp"

#include <cmath>
#include <limits>

namespace handfk {

namespace {
constexpr const char* kModule = "synth";
}

void check_synth_spec(const SynthSpec& spec) {
  if (spec.n_samples < 0) {
    throw ValidationError(kModule, "n_samples must be non-negative");
  }
  if (!(spec.margin > 0.0 && spec.margin <= 1.0)) {
    throw ValidationError(kModule, "margin must lie in (0, 1]");
  }
  if (!(spec.noise_sigma_mm >= 0.0)) {
    throw ValidationError(kModule, "noise_sigma_mm must be non-negative");
  }
  if (!(spec.scale_lo > 0.0 && spec.scale_lo <= spec.scale_hi)) {
    throw ValidationError(kModule, "scale range must satisfy 0 < lo <= hi");
  }
}

PoseVector random_pose(const KinematicTree& tree, double margin, std::mt19937_64& rng) {
  PoseVector pose{Eigen::VectorXd(tree.dof_count())};
  for (int p = 0; p < tree.dof_count(); ++p) {
    const auto& dof = tree.dofs()[p];
    const double mid = 0.5 * (dof.lo + dof.hi);
    const double half = 0.5 * (dof.hi - dof.lo) * margin;
    std::uniform_real_distribution<double> dist(mid - half, mid + half);
    pose.theta[p] = dist(rng);
  }
  return pose;
}

ScaleVector random_scales(const KinematicTree& tree, ScaleMode mode, double lo, double hi, std::mt19937_64& rng) {
  ScaleVector s{mode, Eigen::VectorXd(tree.scale_count(mode))};
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Eigen::Index l = 0; l < s.values.size(); ++l) {
    s.values[l] = dist(rng);
  }
  return s;
}

std::vector<SynthSample> generate(const SynthSpec& spec, const KinematicTree& tree) {
  check_synth_spec(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<SynthSample> out;
  out.reserve(spec.n_samples);
  for (int i = 0; i < spec.n_samples; ++i) {
    SynthSample sample;
    sample.pose = random_pose(tree, spec.margin, rng);
    sample.scales = random_scales(tree, spec.mode, spec.scale_lo, spec.scale_hi, rng);
    sample.clean = forward(sample.pose, sample.scales, tree).joints;
    sample.joints = sample.clean;
    if (spec.noise_sigma_mm > 0.0) {
      for (Eigen::Index k = 0; k < sample.joints.positions.size(); ++k) {
        sample.joints.positions.data()[k] += spec.noise_sigma_mm * noise(rng);
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

FdJacobians fd_jacobian(
    const PoseVector& theta,
    const ScaleVector& s,
    const KinematicTree& tree,
    double h_theta,
    double h_s) {
  check_pose(tree, theta);
  check_scales(tree, s);
  for (int p = 0; p < tree.dof_count(); ++p) {
    const auto& dof = tree.dofs()[p];
    if (theta.theta[p] - h_theta < dof.lo || theta.theta[p] + h_theta > dof.hi) {
      throw ValidationError(kModule, "pose[" + std::to_string(p) + "] too close to a limit for the FD stencil");
    }
  }
  for (Eigen::Index l = 0; l < s.values.size(); ++l) {
    if (s.values[l] - h_s < tree.scale_lo() || s.values[l] + h_s > tree.scale_hi()) {
      throw ValidationError(kModule, "scale[" + std::to_string(l) + "] too close to a bound for the FD stencil");
    }
  }

  // Central difference with step h, then one Richardson step against h/2,
  // which cancels the h^2 truncation term and allows a step large enough to
  // keep round-off well below the comparison floor.
  auto pose_column = [&](int p, double h) {
    PoseVector plus = theta;
    PoseVector minus = theta;
    plus.theta[p] += h;
    minus.theta[p] -= h;
    return Eigen::VectorXd(
        (forward(plus, s, tree).joints.flat() - forward(minus, s, tree).joints.flat()) / (2.0 * h));
  };
  auto scale_column = [&](Eigen::Index l, double h) {
    ScaleVector plus = s;
    ScaleVector minus = s;
    plus.values[l] += h;
    minus.values[l] -= h;
    return Eigen::VectorXd(
        (forward(theta, plus, tree).joints.flat() - forward(theta, minus, tree).joints.flat()) / (2.0 * h));
  };

  const int rows = 3 * tree.joint_count();
  FdJacobians out{PoseJacobian(rows, tree.dof_count()), ScaleJacobian(rows, s.values.size())};
  for (int p = 0; p < tree.dof_count(); ++p) {
    out.pose.col(p) = (4.0 * pose_column(p, 0.5 * h_theta) - pose_column(p, h_theta)) / 3.0;
  }
  for (Eigen::Index l = 0; l < s.values.size(); ++l) {
    out.scale.col(l) = (4.0 * scale_column(l, 0.5 * h_s) - scale_column(l, h_s)) / 3.0;
  }
  return out;
}

double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double abs_floor) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(kModule, "matrix shapes differ");
  }
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double x = a.data()[k];
    const double y = b.data()[k];
    const double diff = std::abs(x - y);
    if (!std::isfinite(diff)) {
      return std::numeric_limits<double>::infinity();
    }
    if (diff > abs_floor) {
      worst = std::max(worst, diff / std::max(std::abs(x), std::abs(y)));
    }
  }
  return worst;
}

} // namespace handfk
