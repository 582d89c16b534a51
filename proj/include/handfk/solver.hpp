#pragma once

#include "handfk/fk.hpp"
#include "handfk/skeleton.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace handfk {

enum class FitAlgorithm { gauss_newton, descent };

struct FitConfig {
  ScaleMode mode = ScaleMode::five;
  FitAlgorithm algorithm = FitAlgorithm::gauss_newton;
  int max_iters = 200;
  double damping_init = 1e-3;
  double tol_cost = 1e-10;  // mm^2
  double tol_step = 1e-8;
  // Momentum descent works on coordinates divided by descent_norm_mm, the
  // same [-1, 1] normalization the cropped training data uses.
  double descent_lr = 1e-3;
  double descent_momentum = 0.9;
  double descent_norm_mm = 150.0;
  // Stationarity certificate: projected gradient norm <= grad_tol * (1 + cost).
  double grad_tol = 1e-6;
  // When false the scales stay at their initial value and only the pose is fit.
  bool fit_scales = true;
  // Without an explicit init, seed the root pose by rigidly aligning the
  // joints that only the root moves (palm) before iterating.
  bool align_root = true;
};

void check_fit_config(const FitConfig& cfg);

struct FitInit {
  PoseVector pose;
  ScaleVector scales;
};

struct FitReport {
  PoseVector theta_hat;
  ScaleVector s_hat;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;  // accepted steps
  bool converged = false;
  double projected_gradient_norm = 0.0;
  std::vector<double> cost_trace;  // initial cost, then one entry per accepted step
};

/// Fits pose and (optionally) scales to a target joint set by minimizing
/// 0.5 * |forward(theta, s) - target|^2. Parameters are projected back onto
/// their limits after every step. Default init is the zero pose with unit scales.
FitReport fit(
    const JointSet& target,
    const KinematicTree& tree,
    const FitConfig& cfg,
    const std::optional<FitInit>& init = std::nullopt);

/// Projected gradient norm of the fitting objective at (pose, scales).
double projected_gradient_norm(
    const JointSet& target,
    const KinematicTree& tree,
    const PoseVector& pose,
    const ScaleVector& scales,
    bool include_scales);

/// Best of `restarts` fits: the default init first, then random poses drawn
/// from the middle 80% of each DoF range (root re-aligned, unit scales).
FitReport fit_with_restarts(
    const JointSet& target, const KinematicTree& tree, const FitConfig& cfg, int restarts, std::uint64_t seed);

struct SetFitReport {
  ScaleVector scales;
  std::vector<PoseVector> poses;
  std::vector<double> frame_costs;
  double total_cost = 0.0;
  int rounds = 0;
  bool converged = false;
};

/// One shared scale vector for a set of frames, alternating per-frame pose
/// fits (scales frozen) with a damped Gauss-Newton step on the shared scales
/// over the stacked residuals of all frames.
SetFitReport fit_scales_over_set(
    std::span<const JointSet> targets,
    const KinematicTree& tree,
    const FitConfig& cfg,
    const std::optional<ScaleVector>& init_scales = std::nullopt);

} // namespace handfk
