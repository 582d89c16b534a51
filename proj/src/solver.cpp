#include "handfk/solver.hpp"

#include "handfk/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace handfk {

namespace {

constexpr const char* kModule = "solver";
constexpr double kMaxDamping = 1e16;
constexpr double kMinDamping = 1e-15;

// Stacked parameter vector [theta; s] with box bounds.
struct Problem {
  const KinematicTree& tree;
  const JointSet& target;
  ScaleMode mode;
  bool with_scales;

  int pose_count() const {
    return tree.dof_count();
  }
  int scale_count() const {
    return with_scales ? tree.scale_count(mode) : 0;
  }

  Eigen::VectorXd lower() const {
    Eigen::VectorXd lo(pose_count() + scale_count());
    for (int p = 0; p < pose_count(); ++p) {
      lo[p] = tree.dofs()[p].lo;
    }
    lo.tail(scale_count()).setConstant(tree.scale_lo());
    return lo;
  }
  // Rotation DoFs whose limits span a full turn; projection wraps them
  // instead of clamping since both ends describe the same rotation.
  std::vector<bool> periodic() const {
    std::vector<bool> out(pose_count() + scale_count(), false);
    for (int p = 0; p < pose_count(); ++p) {
      const auto& dof = tree.dofs()[p];
      out[p] = dof.kind == DofKind::rotation && std::abs((dof.hi - dof.lo) - 2.0 * M_PI) < 1e-9;
    }
    return out;
  }
  Eigen::VectorXd upper() const {
    Eigen::VectorXd hi(pose_count() + scale_count());
    for (int p = 0; p < pose_count(); ++p) {
      hi[p] = tree.dofs()[p].hi;
    }
    hi.tail(scale_count()).setConstant(tree.scale_hi());
    return hi;
  }
};

struct Evaluation {
  double cost = 0.0;
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

Evaluation evaluate(
    const Problem& problem,
    const PoseVector& pose,
    const ScaleVector& scales,
    bool with_jacobian) {
  const auto fk = forward(pose, scales, problem.tree);
  Evaluation e;
  e.residual = fk.joints.flat() - problem.target.flat();
  e.cost = 0.5 * e.residual.squaredNorm();
  if (with_jacobian) {
    e.jacobian.resize(e.residual.size(), problem.pose_count() + problem.scale_count());
    e.jacobian.leftCols(problem.pose_count()) = pose_jacobian(fk, problem.tree);
    if (problem.with_scales) {
      e.jacobian.rightCols(problem.scale_count()) = scale_jacobian(fk, problem.tree);
    }
  }
  return e;
}

Eigen::VectorXd project(
    Eigen::VectorXd x,
    const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi,
    const std::vector<bool>& periodic) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (periodic[i] && (x[i] < lo[i] || x[i] > hi[i])) {
      const double period = hi[i] - lo[i];
      x[i] = lo[i] + std::fmod(std::fmod(x[i] - lo[i], period) + period, period);
    }
  }
  return x.cwiseMax(lo).cwiseMin(hi);
}

// Norm of x - P(x - g), where P clamps bounded coordinates; periodic
// coordinates are unconstrained.
double projected_norm(
    const Eigen::VectorXd& x,
    const Eigen::VectorXd& g,
    const Eigen::VectorXd& lo,
    const Eigen::VectorXd& hi,
    const std::vector<bool>& periodic) {
  Eigen::VectorXd d = x - (x - g).cwiseMax(lo).cwiseMin(hi);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (periodic[i]) {
      d[i] = g[i];
    }
  }
  return d.norm();
}

void split(const Eigen::VectorXd& x, const Problem& problem, PoseVector& pose, ScaleVector& scales) {
  pose.theta = x.head(problem.pose_count());
  if (problem.with_scales) {
    scales.values = x.tail(problem.scale_count());
  }
}

void require_finite(double cost, int iteration) {
  if (!std::isfinite(cost)) {
    throw RuntimeFailure(kModule, "cost became non-finite at iteration " + std::to_string(iteration));
  }
}

FitReport fit_levenberg_marquardt(const Problem& problem, const FitConfig& cfg, PoseVector pose, ScaleVector scales) {
  const Eigen::VectorXd lo = problem.lower();
  const Eigen::VectorXd hi = problem.upper();
  const std::vector<bool> periodic = problem.periodic();
  Eigen::VectorXd x(lo.size());
  x.head(problem.pose_count()) = pose.theta;
  if (problem.with_scales) {
    x.tail(problem.scale_count()) = scales.values;
  }

  FitReport report;
  Evaluation current = evaluate(problem, pose, scales, true);
  require_finite(current.cost, 0);
  report.initial_cost = current.cost;
  report.cost_trace.push_back(current.cost);

  double damping = cfg.damping_init;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Eigen::VectorXd gradient = current.jacobian.transpose() * current.residual;
    if (current.cost <= cfg.tol_cost || projected_norm(x, gradient, lo, hi, periodic) <= cfg.grad_tol * (1.0 + current.cost)) {
      break;
    }
    const Eigen::MatrixXd normal = current.jacobian.transpose() * current.jacobian;
    // Marquardt scaling by the normal-matrix diagonal, floored so parameters
    // with no influence still get a well-posed (zero) step.
    const double floor = 1e-12 * std::max(1.0, normal.diagonal().maxCoeff());
    const Eigen::VectorXd diag = normal.diagonal().cwiseMax(floor);

    bool accepted = false;
    Eigen::VectorXd x_new;
    Evaluation trial;
    while (damping <= kMaxDamping) {
      Eigen::MatrixXd system = normal;
      system.diagonal() += damping * diag;
      const Eigen::VectorXd step = system.ldlt().solve(-gradient);
      x_new = project(x + step, lo, hi, periodic);
      PoseVector pose_new = pose;
      ScaleVector scales_new = scales;
      split(x_new, problem, pose_new, scales_new);
      trial = evaluate(problem, pose_new, scales_new, false);
      if (std::isfinite(trial.cost) && trial.cost < current.cost) {
        accepted = true;
        damping = std::max(kMinDamping, damping * 0.1);
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) {
      break;
    }
    const double step_norm = (x_new - x).norm();
    x = x_new;
    split(x, problem, pose, scales);
    current = evaluate(problem, pose, scales, true);
    require_finite(current.cost, iter + 1);
    report.cost_trace.push_back(current.cost);
    ++report.iterations;
    if (step_norm < cfg.tol_step * (1.0 + x.norm())) {
      break;
    }
  }

  const Eigen::VectorXd gradient = current.jacobian.transpose() * current.residual;
  report.projected_gradient_norm = projected_norm(x, gradient, lo, hi, periodic);
  report.converged =
      current.cost <= cfg.tol_cost || report.projected_gradient_norm <= cfg.grad_tol * (1.0 + current.cost);
  report.final_cost = current.cost;
  report.theta_hat = pose;
  report.s_hat = scales;
  return report;
}

FitReport fit_descent(const Problem& problem, const FitConfig& cfg, PoseVector pose, ScaleVector scales) {
  const Eigen::VectorXd lo = problem.lower();
  const Eigen::VectorXd hi = problem.upper();
  const std::vector<bool> periodic = problem.periodic();
  Eigen::VectorXd x(lo.size());
  x.head(problem.pose_count()) = pose.theta;
  if (problem.with_scales) {
    x.tail(problem.scale_count()) = scales.values;
  }
  const double norm2 = cfg.descent_norm_mm * cfg.descent_norm_mm;

  FitReport report;
  Evaluation current = evaluate(problem, pose, scales, true);
  require_finite(current.cost, 0);
  report.initial_cost = current.cost;
  report.cost_trace.push_back(current.cost);

  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(x.size());
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (current.cost <= cfg.tol_cost) {
      break;
    }
    const Eigen::VectorXd gradient = current.jacobian.transpose() * current.residual / norm2;
    velocity = cfg.descent_momentum * velocity - cfg.descent_lr * gradient;
    const Eigen::VectorXd x_new = project(x + velocity, lo, hi, periodic);
    const double step_norm = (x_new - x).norm();
    x = x_new;
    split(x, problem, pose, scales);
    current = evaluate(problem, pose, scales, true);
    require_finite(current.cost, iter + 1);
    report.cost_trace.push_back(current.cost);
    ++report.iterations;
    if (step_norm < cfg.tol_step * (1.0 + x.norm())) {
      break;
    }
  }

  const Eigen::VectorXd gradient = current.jacobian.transpose() * current.residual;
  report.projected_gradient_norm = projected_norm(x, gradient, lo, hi, periodic);
  report.converged =
      current.cost <= cfg.tol_cost || report.projected_gradient_norm <= cfg.grad_tol * (1.0 + current.cost);
  report.final_cost = current.cost;
  report.theta_hat = pose;
  report.s_hat = scales;
  return report;
}

// Joints whose positions depend on no pose parameter except the root's.
std::vector<int> rigid_core(const KinematicTree& tree) {
  std::vector<bool> moved(tree.joint_count(), false);
  for (int p = 0; p < tree.dof_count(); ++p) {
    if (tree.dofs()[p].joint == 0) {
      continue;
    }
    for (int n : joints_moved_by_dof(tree, p)) {
      moved[n] = true;
    }
  }
  std::vector<int> core;
  for (int n = 0; n < tree.joint_count(); ++n) {
    if (!moved[n]) {
      core.push_back(n);
    }
  }
  return core;
}

// Seeds the root translation and rotation from a closed-form rigid alignment
// of the rigid core (root plus joints attached to it without any articulation)
// onto the target. Needs the root to carry translations x, y, z followed by
// three distinct rotation axes; otherwise the pose is returned unchanged.
PoseVector align_root(const JointSet& target, const KinematicTree& tree, const ScaleVector& scales, PoseVector pose) {
  const auto& root_dofs = tree.dofs_at(0);
  std::vector<int> translations;
  std::vector<int> rotations;
  for (int p : root_dofs) {
    (tree.dofs()[p].kind == DofKind::translation ? translations : rotations).push_back(p);
  }
  if (translations.size() != 3 || rotations.size() != 3) {
    return pose;
  }
  const int a0 = axis_index(tree.dofs()[rotations[0]].axis);
  const int a1 = axis_index(tree.dofs()[rotations[1]].axis);
  const int a2 = axis_index(tree.dofs()[rotations[2]].axis);
  if (a0 == a1 || a1 == a2 || a0 == a2) {
    return pose;
  }
  const auto core = rigid_core(tree);
  if (core.size() < 3) {
    return pose;
  }

  // Model core with the root at the origin and no root rotation.
  PoseVector local = pose;
  for (int p : root_dofs) {
    local.theta[p] = 0.0;
  }
  const auto model = forward(local, scales, tree).joints;
  Eigen::Matrix3Xd src(3, core.size());
  Eigen::Matrix3Xd dst(3, core.size());
  for (std::size_t i = 0; i < core.size(); ++i) {
    src.col(i) = model.positions.col(core[i]);
    dst.col(i) = target.positions.col(core[i]);
  }
  const Eigen::Matrix4d similarity = Eigen::umeyama(src, dst, false);
  const Eigen::Matrix3d r = similarity.topLeftCorner<3, 3>();
  // Every Tait-Bryan triple (a, b, c) has the twin (a + pi, pi - b, c + pi).
  // Take whichever sits deeper inside the limits so no angle starts pinned.
  const Eigen::Vector3d first = r.eulerAngles(a0, a1, a2);
  const Eigen::Vector3d twin(first[0] + M_PI, M_PI - first[1], first[2] + M_PI);
  auto wrap = [](Eigen::Vector3d v) {
    for (int i = 0; i < 3; ++i) {
      v[i] = std::remainder(v[i], 2.0 * M_PI);
    }
    return v;
  };
  auto depth = [&](const Eigen::Vector3d& v) {
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      const auto& dof = tree.dofs()[rotations[i]];
      worst = std::min({worst, v[i] - dof.lo, dof.hi - v[i]});
    }
    return worst;
  };
  const Eigen::Vector3d a = wrap(first);
  const Eigen::Vector3d b = wrap(twin);
  const Eigen::Vector3d angles = depth(a) >= depth(b) ? a : b;

  for (int i = 0; i < 3; ++i) {
    const auto& dof = tree.dofs()[translations[i]];
    pose.theta[translations[i]] = std::clamp(target.positions(axis_index(dof.axis), 0), dof.lo, dof.hi);
    const auto& rot = tree.dofs()[rotations[i]];
    pose.theta[rotations[i]] = std::clamp(angles[i], rot.lo, rot.hi);
  }
  return pose;
}

} // namespace

void check_fit_config(const FitConfig& cfg) {
  if (cfg.max_iters < 0) {
    throw ValidationError(kModule, "max_iters must be non-negative");
  }
  if (!(cfg.damping_init > 0.0 && cfg.tol_cost > 0.0 && cfg.tol_step > 0.0 && cfg.descent_lr > 0.0 &&
        cfg.descent_norm_mm > 0.0 && cfg.grad_tol > 0.0)) {
    throw ValidationError(kModule, "damping, tolerances and learning rate must be positive");
  }
  if (!(cfg.descent_momentum >= 0.0 && cfg.descent_momentum < 1.0)) {
    throw ValidationError(kModule, "momentum must lie in [0, 1)");
  }
}

FitReport fit(
    const JointSet& target,
    const KinematicTree& tree,
    const FitConfig& cfg,
    const std::optional<FitInit>& init) {
  check_fit_config(cfg);
  if (target.size() != tree.joint_count()) {
    throw ValidationError(kModule, "target has " + std::to_string(target.size()) + " joints, tree has " +
                                       std::to_string(tree.joint_count()));
  }
  if (!target.positions.allFinite()) {
    throw ValidationError(kModule, "target contains non-finite coordinates");
  }
  PoseVector pose = init ? init->pose : zero_pose(tree);
  ScaleVector scales = init ? init->scales : unit_scales(tree, cfg.mode);
  if (scales.mode != cfg.mode) {
    throw ValidationError(kModule, "initial scales use a different mode than the config");
  }
  check_pose(tree, pose);
  check_scales(tree, scales);
  if (!init && cfg.align_root) {
    pose = align_root(target, tree, scales, pose);
  }

  const Problem problem{tree, target, cfg.mode, cfg.fit_scales};
  return cfg.algorithm == FitAlgorithm::gauss_newton ? fit_levenberg_marquardt(problem, cfg, pose, scales)
                                                     : fit_descent(problem, cfg, pose, scales);
}

double projected_gradient_norm(
    const JointSet& target,
    const KinematicTree& tree,
    const PoseVector& pose,
    const ScaleVector& scales,
    bool include_scales) {
  const Problem problem{tree, target, scales.mode, include_scales};
  const auto e = evaluate(problem, pose, scales, true);
  Eigen::VectorXd x(problem.pose_count() + problem.scale_count());
  x.head(problem.pose_count()) = pose.theta;
  if (include_scales) {
    x.tail(problem.scale_count()) = scales.values;
  }
  return projected_norm(x, e.jacobian.transpose() * e.residual, problem.lower(), problem.upper(), problem.periodic());
}

SetFitReport fit_scales_over_set(
    std::span<const JointSet> targets,
    const KinematicTree& tree,
    const FitConfig& cfg,
    const std::optional<ScaleVector>& init_scales) {
  check_fit_config(cfg);
  if (targets.empty()) {
    throw ValidationError(kModule, "fit_scales_over_set needs at least one target");
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].size() != tree.joint_count() || !targets[i].positions.allFinite()) {
      throw ValidationError(kModule, "target " + std::to_string(i) + " is malformed or non-finite");
    }
  }

  SetFitReport report;
  report.scales = init_scales ? *init_scales : unit_scales(tree, cfg.mode);
  check_scales(tree, report.scales);
  report.poses.assign(targets.size(), zero_pose(tree));
  report.frame_costs.assign(targets.size(), 0.0);

  FitConfig pose_cfg = cfg;
  pose_cfg.fit_scales = false;
  const int k = tree.scale_count(cfg.mode);
  const Eigen::MatrixXd expansion = scale_expansion(cfg.mode, tree);

  auto total_cost = [&](const ScaleVector& scales) {
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      sum += loss(report.poses[i], scales, tree, targets[i]);
    }
    return sum;
  };

  double damping = cfg.damping_init;
  for (int round = 0; round < cfg.max_iters; ++round) {
    // (a) poses with the shared scales frozen
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (round == 0 && cfg.align_root) {
        report.poses[i] = align_root(targets[i], tree, report.scales, report.poses[i]);
      }
      const auto r = fit(targets[i], tree, pose_cfg, FitInit{report.poses[i], report.scales});
      report.poses[i] = r.theta_hat;
    }

    // (b) one damped Gauss-Newton step on the shared scales
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(k);
    double cost = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto fk = forward(report.poses[i], report.scales, tree);
      const Eigen::VectorXd residual = fk.joints.flat() - targets[i].flat();
      const Eigen::MatrixXd js = bone_scale_jacobian(fk, tree) * expansion;
      normal += js.transpose() * js;
      gradient += js.transpose() * residual;
      cost += 0.5 * residual.squaredNorm();
    }
    require_finite(cost, round);
    ++report.rounds;

    const double floor = 1e-12 * std::max(1.0, normal.diagonal().maxCoeff());
    const Eigen::VectorXd diag = normal.diagonal().cwiseMax(floor);
    double step_norm = 0.0;
    bool accepted = false;
    while (damping <= kMaxDamping) {
      Eigen::MatrixXd system = normal;
      system.diagonal() += damping * diag;
      ScaleVector candidate = report.scales;
      candidate.values = (report.scales.values + system.ldlt().solve(-gradient))
                             .cwiseMax(tree.scale_lo())
                             .cwiseMin(tree.scale_hi());
      const double candidate_cost = total_cost(candidate);
      if (std::isfinite(candidate_cost) && candidate_cost < cost) {
        step_norm = (candidate.values - report.scales.values).norm();
        report.scales = candidate;
        damping = std::max(kMinDamping, damping * 0.1);
        accepted = true;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted || step_norm < cfg.tol_step) {
      report.converged = true;
      break;
    }
  }

  // Final poses for the final scales.
  report.total_cost = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto r = fit(targets[i], tree, pose_cfg, FitInit{report.poses[i], report.scales});
    report.poses[i] = r.theta_hat;
    report.frame_costs[i] = r.final_cost;
    report.total_cost += r.final_cost;
  }
  return report;
}

FitReport fit_with_restarts(
    const JointSet& target, const KinematicTree& tree, const FitConfig& cfg, int restarts, std::uint64_t seed) {
  if (restarts < 1) {
    throw ValidationError(kModule, "restarts must be at least 1");
  }
  FitReport best = fit(target, tree, cfg);
  std::mt19937_64 rng(seed);
  const ScaleVector unit = unit_scales(tree, cfg.mode);
  for (int r = 1; r < restarts; ++r) {
    PoseVector pose = zero_pose(tree);
    for (int p = 0; p < tree.dof_count(); ++p) {
      const auto& dof = tree.dofs()[p];
      const double mid = 0.5 * (dof.lo + dof.hi);
      const double half = 0.4 * (dof.hi - dof.lo);
      pose.theta[p] = std::uniform_real_distribution<double>(mid - half, mid + half)(rng);
    }
    if (cfg.align_root) {
      pose = align_root(target, tree, unit, pose);
    }
    auto candidate = fit(target, tree, cfg, FitInit{pose, unit});
    if (candidate.final_cost < best.final_cost) {
      best = std::move(candidate);
    }
  }
  return best;
}

} // namespace handfk
